import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp, mpf

from urlvr_lab.dynamics import (DynamicsParams, DynamicsState, effective_step, error_ratios,
                                error_step, error_upper_bound, estimator_policy_map,
                                geometric_envelope, is_degenerate, limiting_policy,
                                majority_rewards, optimal_policy, p_maj_star, simulate_recurrence,
                                total_variation, trajectory_rewards)
from urlvr_lab.space import TabularPolicy, answer_mass, make_policy

from conftest import make_traj

E = math.e


def _uniform(answers):
    return TabularPolicy(np.zeros(len(answers)), [make_traj([(0.5, 0.5)], answer=a) for a in answers])


def oracle_p_star(p, beta):
    mp.dps = 50
    a = mp.e ** (1 / mpf(beta))
    p = mpf(p)
    return float(a * p / (1 + (a - 1) * p))


class TestParams:
    def test_alpha(self):
        assert DynamicsParams(1.0).alpha == pytest.approx(E, abs=1e-15)
        assert DynamicsParams(0.5).rho == pytest.approx(math.exp(-2), abs=1e-15)

    @pytest.mark.parametrize("kwargs", [dict(beta=0), dict(beta=-1), dict(beta=1, eta=0),
                                        dict(beta=1, eta=1.2), dict(beta=1, eta=0.5, eta_min=0.6),
                                        dict(beta=1, eta=())])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            DynamicsParams(**kwargs)

    def test_schedule(self):
        params = DynamicsParams(1.0, eta=(0.3, 0.9))
        assert params.eta_min == 0.3 and [params.eta_at(k) for k in range(3)] == [0.3, 0.9, 0.3]

    def test_state_invariants(self):
        with pytest.raises(ValueError):
            DynamicsState(0, 0.5, 0.4)
        with pytest.raises(ValueError):
            DynamicsState(0, 1.5, -0.5)


class TestPMajStar:
    def test_fixed_points(self):
        for beta in (0.1, 1, 10):
            assert p_maj_star(0.0, beta) == 0.0 and p_maj_star(1.0, beta) == 1.0

    def test_oracles(self):
        assert p_maj_star(0.5, 1.0) == pytest.approx(E / (E + 1), abs=1e-15)
        assert p_maj_star(0.1, 0.5) == pytest.approx(oracle_p_star("0.1", 0.5), abs=1e-15)
        assert round(p_maj_star(0.1, 0.5), 5) == 0.45085

    def test_errors(self):
        with pytest.raises(ValueError):
            p_maj_star(1.1, 1.0)
        with pytest.raises(ValueError):
            p_maj_star(0.5, 0.0)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0.05, 20))
    def test_strictly_increasing(self, p, q, beta):
        if p < q:
            assert p_maj_star(p, beta) <= p_maj_star(q, beta)
            if q - p > 1e-6:
                assert p_maj_star(p, beta) < p_maj_star(q, beta)


class TestSteps:
    def test_full_step(self):
        s = effective_step(DynamicsState.initial(0.3), DynamicsParams(1.0))
        assert s.k == 1 and s.p_maj == pytest.approx(p_maj_star(0.3, 1.0), abs=1e-15)

    def test_half_step(self):
        s = effective_step(DynamicsState.initial(0.5), DynamicsParams(1.0, eta=0.5))
        assert s.p_maj == pytest.approx(0.5 + 0.5 * (E / (E + 1) - 0.5), abs=1e-15)
        assert round(s.p_maj, 6) == 0.615529

    def test_fixed_point(self):
        for eta in (0.1, 1.0):
            assert effective_step(DynamicsState.initial(1.0), DynamicsParams(2.0, eta=eta)).p_maj == 1.0

    def test_error_step_examples(self):
        params = DynamicsParams(1.0)
        assert error_step(1.0, params) == 1.0
        assert error_step(0.5, params) == pytest.approx(1 - E / (E + 1), abs=1e-15)
        assert round(error_step(0.5, params), 6) == 0.268941
        tiny = 1e-300
        assert error_step(tiny, DynamicsParams(1.0, eta=0.4)) / tiny == pytest.approx(1 - 0.4 * (E - 1) / E, abs=1e-15)

    def test_error_step_domain(self):
        with pytest.raises(ValueError):
            error_step(1.5, DynamicsParams(1.0))

    @settings(max_examples=300, deadline=None)
    @given(st.floats(0, 1), st.floats(0.01, 1), st.floats(0.05, 20))
    def test_ordering(self, p, eta, beta):
        params = DynamicsParams(beta, eta=eta)
        s = effective_step(DynamicsState.initial(p), params)
        assert p <= s.p_maj <= p_maj_star(p, beta)

    @settings(max_examples=300, deadline=None)
    @given(st.floats(1e-6, 1 - 1e-6), st.floats(0.01, 1), st.floats(0.05, 5))
    def test_error_strictly_decreases(self, eps, eta, beta):
        out = error_step(eps, DynamicsParams(beta, eta=eta))
        assert 0 <= out < eps


class TestRecurrence:
    def test_k20_example(self):
        trace = simulate_recurrence(0.1, DynamicsParams(1.0), 20)
        assert len(trace) == 20 and [s.k for s in trace] == list(range(1, 21))
        assert trace[-1].p_maj >= 1 - math.exp(-20) * 9
        # closed form at full steps: eps_k = 1 / (1 + alpha^k * odds_0)
        mp.dps = 50
        exact = 1 / (1 + mp.e ** 20 / 9)
        assert trace[-1].epsilon == pytest.approx(float(exact), rel=1e-12)
        assert abs(error_ratios(0.1, trace)[-1] - math.exp(-1)) < 1e-6

    def test_single_step_composition(self):
        (s,) = simulate_recurrence(0.5, DynamicsParams(1.0), 1)
        assert s.p_maj == pytest.approx(p_maj_star(0.5, 1.0), abs=1e-15)

    def test_alternating_eta_monotone(self):
        params = DynamicsParams(1.0, eta=(0.3, 0.9))
        for p0 in (0.01, 0.1, 0.5, 0.9):
            trace = simulate_recurrence(p0, params, 60)
            ps = [p0] + [s.p_maj for s in trace]
            assert all(b >= a for a, b in zip(ps, ps[1:]))
            for K, s in enumerate(trace, start=1):
                assert s.epsilon <= error_upper_bound(p0, params, K) * (1 + 1e-12)

    @pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("p0", [0.01, 0.1, 0.5])
    def test_rate_limit_envelope_is_a_lower_bound(self, beta, p0):
        # at constant eta the product of per-step multipliers never drops below
        # its small-error limit, so the limit-rate curve bounds the error from below
        params = DynamicsParams(beta)
        trace = simulate_recurrence(p0, params, 60)
        for K, s in enumerate(trace, start=1):
            assert s.epsilon >= geometric_envelope(p0, params, K) * (1 - 1e-12)
            assert s.epsilon <= error_upper_bound(p0, params, K) * (1 + 1e-12)

    def test_upper_bound_at_full_steps(self):
        # eps_K <= alpha^-K eps_0 / p_0 follows from the exact odds solution
        for beta in (0.5, 1.0, 2.0):
            params = DynamicsParams(beta)
            for p0 in (0.01, 0.1, 0.5):
                for K, s in enumerate(simulate_recurrence(p0, params, 40), start=1):
                    assert s.epsilon <= params.alpha ** -K * (1 - p0) / p0 * (1 + 1e-12)

    def test_degenerate(self):
        assert is_degenerate(0.0) and is_degenerate(1.0) and not is_degenerate(0.5)
        assert all(s.p_maj == 0.0 for s in simulate_recurrence(0.0, DynamicsParams(1.0), 5))
        assert all(s.epsilon == 0.0 for s in simulate_recurrence(1.0, DynamicsParams(1.0), 5))

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            simulate_recurrence(0.5, DynamicsParams(1.0), 0)
        with pytest.raises(ValueError):
            simulate_recurrence(1.5, DynamicsParams(1.0), 3)

    def test_precision_near_one(self):
        trace = simulate_recurrence(0.5, DynamicsParams(0.5), 200)
        ratios = error_ratios(0.5, trace)
        assert trace[-1].epsilon > 0
        assert abs(ratios[-1] - math.exp(-2)) < 1e-12


class TestOptimalPolicy:
    def test_constant_rewards(self):
        ref = make_policy({"A": 0.6, "B": 0.4}, 2, rng=np.random.default_rng(0))
        out = optimal_policy(ref, np.full(len(ref), 3.7), 0.7)
        assert np.allclose(out.probs(), ref.probs(), atol=1e-15)

    def test_uniform_example(self):
        ref = _uniform("AABB")
        out = optimal_policy(ref, majority_rewards(ref, "A"), 1.0)
        assert answer_mass(out, "A") == pytest.approx(E / (E + 1), abs=1e-12)
        assert round(answer_mass(out, "A"), 6) == 0.731059

    def test_large_beta(self):
        ref = make_policy({"A": 0.3, "B": 0.7}, 3, rng=np.random.default_rng(2))
        out = optimal_policy(ref, majority_rewards(ref, "A"), 1e6)
        assert total_variation(out.probs(), ref.probs()) <= 1e-5

    def test_errors(self):
        ref = _uniform("AB")
        with pytest.raises(ValueError):
            optimal_policy(ref, [1.0, 0.0], 0.0)
        with pytest.raises(ValueError):
            optimal_policy(ref, [-np.inf, -np.inf], 1.0)
        with pytest.raises(ValueError):
            optimal_policy(ref, [1.0], 1.0)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.001, 0.999), st.floats(0.05, 20), st.integers(0, 1000))
    def test_consistency_with_scalar_map(self, p, beta, seed):
        ref = make_policy({"A": p, "B": 1 - p}, 3, rng=np.random.default_rng(seed))
        out = optimal_policy(ref, majority_rewards(ref, "A"), beta)
        assert answer_mass(out, "A") == pytest.approx(p_maj_star(answer_mass(ref, "A"), beta), abs=1e-12)


class TestLimitingPolicy:
    def test_renormalization(self):
        trajs = [make_traj([(1.0,)], answer=a) for a in "AAB"]
        ref = TabularPolicy.from_probs([0.2, 0.1, 0.7], trajs)
        lim = limiting_policy(ref, "A")
        assert lim.probs() == pytest.approx([2 / 3, 1 / 3, 0.0], abs=1e-15)

    def test_already_concentrated(self):
        trajs = [make_traj([(1.0,)], answer=a) for a in "AAB"]
        ref = TabularPolicy.from_probs([0.4, 0.6, 0.0], trajs)
        assert limiting_policy(ref, "A").probs() == pytest.approx(ref.probs(), abs=1e-15)

    def test_zero_mass(self):
        trajs = [make_traj([(1.0,)], answer=a) for a in "AB"]
        with pytest.raises(ValueError):
            limiting_policy(TabularPolicy.from_probs([1.0, 0.0], trajs), "B")
        with pytest.raises(ValueError):
            limiting_policy(TabularPolicy.from_probs([1.0, 0.0], trajs), "Z")

    def test_iterated_sharpening_reaches_limit(self):
        ref = make_policy({"A": 0.3, "B": 0.25, "C": 0.45}, 3, rng=np.random.default_rng(4))
        pol = ref
        for _ in range(200):
            pol = optimal_policy(pol, majority_rewards(pol, "C"), 1.0)
        assert total_variation(pol.probs(), limiting_policy(ref, "C").probs()) <= 1e-6


class TestEstimatorMaps:
    def test_probability_one_hot(self):
        ref = _uniform("ABC")
        current = ref.with_logits([0.0, -np.inf, -np.inf])
        out = estimator_policy_map(ref, current, "probability", 0.5)
        assert out.probs() == pytest.approx(np.array([E ** 2, 1, 1]) / (E ** 2 + 2), abs=1e-15)

    def test_empo_oracle(self):
        ref = _uniform("AAAB")
        out = estimator_policy_map(ref, ref, "empo", 1.0)
        mp.dps = 50
        expected = 3 * mp.e ** mpf("0.75") / (3 * mp.e ** mpf("0.75") + mp.e ** mpf("0.25"))
        assert answer_mass(out, "A") == pytest.approx(float(expected), abs=1e-14)
        assert round(answer_mass(out, "A"), 4) == 0.8318

    def test_constant_rewards(self):
        ref = _uniform("ABAB")
        for kind in ("probability", "trajectory-entropy", "self-certainty", "token-entropy"):
            out = estimator_policy_map(ref, ref, kind, 1.0)
            assert out.probs() == pytest.approx(ref.probs(), abs=1e-15)

    def test_misaligned(self):
        with pytest.raises(ValueError):
            estimator_policy_map(_uniform("AB"), _uniform("ABC"), "probability", 1.0)
        with pytest.raises(ValueError):
            trajectory_rewards(_uniform("AB"), "co-reward")

    @settings(max_examples=150, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from(["trajectory-entropy", "probability", "empo"]),
           st.floats(0.1, 10))
    def test_rich_get_richer(self, seed, kind, beta):
        r = np.random.default_rng(seed)
        ref = make_policy({"A": 0.25, "B": 0.25, "C": 0.5}, 2, rng=r, length=3)
        current = ref.with_logits(r.normal(size=len(ref)) * 2)
        out = estimator_policy_map(ref, current, kind, beta)
        p = current.probs()
        if kind == "empo":
            masses = current.answer_masses()
            best = max(masses, key=lambda a: (masses[a], a))
            star = max(np.flatnonzero(current.answer_mask(best)), key=lambda i: p[i])
        else:
            star = int(np.argmax(p))
        ratio_ref = ref.probs()[star] / ref.probs()
        ratio_out = out.probs()[star] / out.probs()
        assert np.all(ratio_out >= ratio_ref * (1 - 1e-12))
