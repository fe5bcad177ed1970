import numpy as np
import pytest

from urlvr_lab.space import ProbabilityVector, RolloutSet, Trajectory


def make_traj(dists, tokens=None, answer="A"):
    """Trajectory from raw step distributions; realized token defaults to index 0."""
    pvs = tuple(ProbabilityVector(tuple(d)) for d in dists)
    tokens = tuple(tokens) if tokens is not None else (0,) * len(pvs)
    return Trajectory(tokens, pvs, answer)


def make_rollouts(answers):
    rollouts = tuple(make_traj([(1.0,)], answer=a) for a in answers)
    return RolloutSet(rollouts, tuple(range(len(rollouts))), "fixture", 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
