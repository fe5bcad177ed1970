import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp, mpf

from urlvr_lab.rewards import (empo_reward, log_probability, majority_answer, majority_vote,
                               probability_disparity_reward, probability_reward, self_certainty,
                               token_entropy_reward, trajectory_entropy_reward)
from urlvr_lab.space import ProbabilityVector, Trajectory, entropy, random_trajectory

from conftest import make_rollouts, make_traj

probs_strategy = st.lists(st.floats(1e-3, 1.0), min_size=2, max_size=6)


class TestSelfCertainty:
    def test_uniform_is_zero(self):
        assert self_certainty(make_traj([(0.25,) * 4] * 3)) == pytest.approx(0.0, abs=1e-15)

    def test_binary_oracle(self):
        mp.dps = 40
        expected = float(mpf("0.5") * mp.log(mpf("0.5") / mpf("0.9")) + mpf("0.5") * mp.log(mpf("0.5") / mpf("0.1")))
        got = self_certainty(make_traj([(0.9, 0.1)]))
        assert got == pytest.approx(expected, abs=1e-15)
        assert round(got, 5) == 0.51083

    def test_mean_of_steps(self):
        a, b = make_traj([(0.9, 0.1)]), make_traj([(0.6, 0.2, 0.2)])
        both = make_traj([(0.9, 0.1), (0.6, 0.2, 0.2)])
        assert self_certainty(both) == pytest.approx((self_certainty(a) + self_certainty(b)) / 2, abs=1e-15)

    @settings(max_examples=200, deadline=None)
    @given(probs_strategy)
    def test_kl_cross_entropy_identity(self, w):
        d = ProbabilityVector.normalized(w)
        V = len(d)
        cross = -np.mean(np.log(d.array))
        assert self_certainty(make_traj([d.probs])) == pytest.approx(cross - math.log(V), abs=1e-9)
        assert self_certainty(make_traj([d.probs])) >= -1e-12


class TestTokenEntropy:
    def test_one_hot(self):
        assert token_entropy_reward(make_traj([(1.0, 0.0), (0.0, 1.0)], tokens=[0, 1])) == pytest.approx(0.0, abs=1e-10)

    def test_uniform(self):
        assert token_entropy_reward(make_traj([(0.25,) * 4] * 2)) == pytest.approx(-math.log(4), abs=1e-15)

    def test_mean(self):
        got = token_entropy_reward(make_traj([(1.0, 0.0), (0.5, 0.5)]))
        assert got == pytest.approx(-math.log(2) / 2, abs=1e-10)


class TestTrajectoryEntropy:
    def test_half_probs(self):
        assert trajectory_entropy_reward(make_traj([(0.5, 0.5)] * 2)) == pytest.approx(math.log(0.5), abs=1e-15)

    def test_certain(self):
        assert trajectory_entropy_reward(make_traj([(1.0, 0.0)] * 3)) == 0.0

    def test_constant_sequence_length_invariant(self):
        p = (0.3, 0.7)
        assert trajectory_entropy_reward(make_traj([p, p])) == pytest.approx(trajectory_entropy_reward(make_traj([p])), abs=1e-15)


class TestProbability:
    def test_product(self):
        assert probability_reward(make_traj([(0.5, 0.5)] * 2)) == pytest.approx(0.25, abs=1e-15)

    def test_certain(self):
        assert probability_reward(make_traj([(1.0, 0.0)] * 4)) == 1.0

    def test_long_sequence_log_domain(self):
        traj = make_traj([(0.1, 0.9)] * 300)
        assert log_probability(traj) == pytest.approx(300 * math.log(0.1), rel=1e-12)
        assert probability_reward(traj) == pytest.approx(math.exp(300 * math.log(0.1)), rel=1e-12)
        assert math.isfinite(log_probability(traj))

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_log_relation(self, seed):
        traj = random_trajectory(np.random.default_rng(seed), 1 + seed % 12, 2 + seed % 7)
        assert trajectory_entropy_reward(traj) == pytest.approx(
            math.log(max(probability_reward(traj), 1e-300)) / len(traj), abs=1e-9)


class TestDisparity:
    def test_example(self):
        traj = make_traj([(0.6, 0.3, 0.1), (0.8, 0.1, 0.1)])
        assert probability_disparity_reward(traj, (0, 2)) == pytest.approx(0.5, abs=1e-15)

    def test_one_hot_and_uniform(self):
        assert probability_disparity_reward(make_traj([(1.0, 0.0)] * 2), range(2)) == 1.0
        assert probability_disparity_reward(make_traj([(0.25,) * 4] * 2), range(2)) == 0.0

    def test_span_subset(self):
        traj = make_traj([(0.25,) * 4, (0.9, 0.1)])
        assert probability_disparity_reward(traj, (1, 2)) == pytest.approx(0.8, abs=1e-15)

    @pytest.mark.parametrize("span", [(0, 0), (0, 3), (-1, 1)])
    def test_bad_span(self, span):
        with pytest.raises(ValueError):
            probability_disparity_reward(make_traj([(0.5, 0.5)] * 2), span)

    def test_single_outcome(self):
        with pytest.raises(ValueError):
            probability_disparity_reward(make_traj([(1.0,)]), (0, 1))


class TestMajorityVote:
    @pytest.mark.parametrize("answers, maj, rewards", [
        (("A", "A", "B"), "A", (1, 1, 0)),
        (("A", "B"), "A", (1, 0)),
        (("B", "A"), "A", (0, 1)),
        (("B", "B", "B"), "B", (1, 1, 1)),
    ])
    def test_examples(self, answers, maj, rewards):
        out = majority_vote(make_rollouts(answers))
        assert out.majority_answer == maj and out.per_rollout_rewards == rewards

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.sampled_from("ABCD"), min_size=1, max_size=30))
    def test_invariants(self, answers):
        out = majority_vote(make_rollouts(answers))
        assert sum(out.counts.values()) == len(answers)
        assert sum(out.per_rollout_rewards) == out.majority_count
        assert all(r == int(a == out.majority_answer) for a, r in zip(answers, out.per_rollout_rewards))
        assert out.majority_count == max(out.counts.values())

    def test_empty(self):
        with pytest.raises(ValueError):
            majority_answer([])


class TestEmpo:
    def test_examples(self):
        assert empo_reward(make_rollouts("AAAB")) == [0.75, 0.75, 0.75, 0.25]
        assert empo_reward(make_rollouts("CCC")) == [1.0, 1.0, 1.0]
        assert empo_reward(make_rollouts("ABCD")) == [0.25] * 4

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.sampled_from("ABC"), min_size=1, max_size=20))
    def test_values_on_grid(self, answers):
        G = len(answers)
        for r in empo_reward(make_rollouts(answers)):
            assert 0 < r <= 1 and abs(r * G - round(r * G)) < 1e-12


class TestPermutationInvariance:
    def test_non_realized_entries(self):
        base = make_traj([(0.5, 0.3, 0.15, 0.05), (0.1, 0.6, 0.2, 0.1)], tokens=[0, 1])
        swapped = make_traj([(0.5, 0.05, 0.15, 0.3), (0.1, 0.6, 0.1, 0.2)], tokens=[0, 1])
        assert trajectory_entropy_reward(base) == trajectory_entropy_reward(swapped)
        assert probability_reward(base) == probability_reward(swapped)
        # entropy-based rewards only see the multiset of probabilities
        assert self_certainty(base) == pytest.approx(self_certainty(swapped), abs=1e-15)
        assert token_entropy_reward(base) == pytest.approx(token_entropy_reward(swapped), abs=1e-15)

    def test_full_distribution_dependence(self):
        a = make_traj([(0.5, 0.3, 0.2)])
        b = make_traj([(0.5, 0.45, 0.05)])
        assert trajectory_entropy_reward(a) == trajectory_entropy_reward(b)
        assert self_certainty(a) != pytest.approx(self_certainty(b))
        assert token_entropy_reward(a) != pytest.approx(token_entropy_reward(b))
        assert probability_disparity_reward(a, (0, 1)) != pytest.approx(probability_disparity_reward(b, (0, 1)))


class TestMonotonicity:
    @settings(max_examples=300, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 8))
    def test_equal_length_pairs(self, seed, length):
        r = np.random.default_rng(seed)
        a = random_trajectory(r, length, 4)
        b = random_trajectory(r, length, 4)
        la, lb = log_probability(a), log_probability(b)
        if la > lb:
            assert probability_reward(a) > probability_reward(b) or probability_reward(a) == 0.0
            assert trajectory_entropy_reward(a) > trajectory_entropy_reward(b)


def test_finiteness_under_floor():
    traj = make_traj([(1.0, 0.0, 0.0)], tokens=[1])
    for fn in (self_certainty, token_entropy_reward, trajectory_entropy_reward, probability_reward):
        assert math.isfinite(fn(traj))
    assert entropy([1.0, 0.0]) == pytest.approx(0.0, abs=1e-10)
