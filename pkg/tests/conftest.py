import numpy as np
import pytest

from esr.linalg import random_unit_vector, random_unitary
from esr.observables import (
    DiscreteObservable,
    GeneralizedObservable,
    OverlapInterpolated,
    PerOutcome,
    StateDependent,
    Uniform,
)
from esr.states import OperationalMixture, PureState


def random_discrete(rng, dim=None, k=None):
    """Random observable with ``k`` distinct eigenvalues on ``C^dim``."""
    dim = dim or int(rng.integers(2, 5))
    k = k or int(rng.integers(1, min(dim, 4) + 1))
    u = random_unitary(rng, dim)
    # every eigenvalue gets at least one basis vector
    groups = np.concatenate([np.arange(k), rng.integers(0, k, dim - k)])
    rng.shuffle(groups)
    projs = []
    for i in range(k):
        cols = u[:, groups == i]
        projs.append(cols @ cols.conj().T)
    values = rng.choice(np.arange(1, 20), size=k, replace=False) * rng.choice((-1, 1), size=k) / 2
    return DiscreteObservable(tuple(float(v) for v in values), tuple(projs))


def _fidelity_rule(ref, lo, hi):
    def rule(psi, n):
        f = abs(np.vdot(ref, psi)) ** 2
        return lo[n - 1] + (hi[n - 1] - lo[n - 1]) * f
    return rule


def random_detection(rng, k, dim):
    kind = rng.integers(0, 4)
    if kind == 0:
        return Uniform(float(rng.random()))
    if kind == 1:
        return PerOutcome(tuple(float(v) for v in rng.random(k)))
    ref = random_unit_vector(rng, dim)
    lo, hi = rng.random(k), rng.random(k)
    if kind == 2:
        return OverlapInterpolated(tuple(ref), tuple(lo), tuple(hi))
    return StateDependent(_fidelity_rule(ref, lo, hi))


def random_generalized(rng, dim=None, k=None, detection=True):
    base = random_discrete(rng, dim, k)
    det = random_detection(rng, len(base), base.dim) if detection else Uniform(1.0)
    # eigenvalues are nonzero half-integers, so a0 = 0 never collides
    return GeneralizedObservable(base, 0.0, det)


def random_state(rng, dim):
    return PureState(random_unit_vector(rng, dim))


def random_mixture(rng, dim, n=None):
    n = n or int(rng.integers(1, 4))
    w = rng.random(n) + 0.05
    w /= w.sum()
    w[-1] = 1.0 - w[:-1].sum()
    return OperationalMixture(tuple((float(wj), random_state(rng, dim)) for wj in w))


def random_outcome_set(rng, g, allow_a0=True, nonempty=True):
    pool = sorted(g.all_outcomes) if allow_a0 else list(range(1, g.k + 1))
    while True:
        mask = rng.random(len(pool)) < 0.5
        x = frozenset(int(n) for n, m in zip(pool, mask) if m)
        if x or not nonempty:
            return x


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
