"""Two-party correlation experiments with trichotomic spin observables.

Each local observable has outcomes ``+1``, ``-1`` and the no-registration
outcome ``0``.  Side-two detection probabilities are always evaluated on the
pre-measurement compound state, so a measurement on side one cannot change
them; ``noncontextual=False`` switches this off for diagnostics only.
"""

from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .dynamics import sequential_joint_probability
from .linalg import expectation_value, tensor_product
from .observables import (
    DetectionModel,
    DiscreteObservable,
    GeneralizedObservable,
    Uniform,
    bloch_direction,
    spin_observable,
)
from .states import PureState

BOUND = 2.0


@dataclass(frozen=True, eq=False)
class LocalGenObservable:
    """Spin observable ``n.sigma`` on one side, extended with ``a0 = 0``."""

    direction: tuple
    detection: DetectionModel = Uniform(1.0)
    side: int = 1
    label: str = ""

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        norm = np.linalg.norm(d)
        if d.shape != (3,) or not np.isfinite(norm) or norm == 0:
            raise ValueError(f"direction must be a nonzero real 3-vector, got {self.direction!r}")
        d = d / norm
        object.__setattr__(self, "direction", tuple(float(v) for v in d))
        if self.side not in (1, 2):
            raise ValueError("side must be 1 or 2")

    @classmethod
    def from_angles(cls, theta_deg, phi_deg=0.0, **kw) -> "LocalGenObservable":
        return cls(tuple(bloch_direction(theta_deg, phi_deg)), **kw)

    @property
    def angles(self) -> tuple:
        """Bloch polar and azimuthal angles in degrees."""
        x, y, z = self.direction
        return float(np.degrees(np.arccos(np.clip(z, -1, 1)))), float(np.degrees(np.arctan2(y, x)))

    @property
    def local(self) -> GeneralizedObservable:
        return spin_observable(self.direction, self.detection, 0.0, self.label)

    def lifted(self, dims) -> GeneralizedObservable:
        """The observable on the compound space (``P (x) I`` or ``I (x) P``).

        State-dependent detection rules receive the compound vector.
        """
        loc = self.local
        eye = np.eye(dims[1] if self.side == 1 else dims[0])
        if self.side == 1:
            projs = tuple(tensor_product(p, eye) for p in loc.base.projectors)
        else:
            projs = tuple(tensor_product(eye, p) for p in loc.base.projectors)
        base = DiscreteObservable(loc.base.outcomes, projs)
        return GeneralizedObservable(base, 0.0, self.detection, self.label)


@dataclass(frozen=True, eq=False)
class BellScenario:
    state: PureState
    a: LocalGenObservable
    a_prime: LocalGenObservable
    b: LocalGenObservable
    b_prime: LocalGenObservable
    dims: tuple = (2, 2)

    def __post_init__(self):
        if not isinstance(self.state, PureState):
            object.__setattr__(self, "state", PureState(self.state))
        if self.state.dim != self.dims[0] * self.dims[1]:
            raise ValueError("state dimension does not match dims")
        for name in ("a", "a_prime"):
            if getattr(self, name).side != 1:
                raise ValueError(f"{name} must act on side 1")
        for name in ("b", "b_prime"):
            if getattr(self, name).side != 2:
                raise ValueError(f"{name} must act on side 2")

    def observables(self):
        return self.a, self.a_prime, self.b, self.b_prime


def singlet() -> PureState:
    return PureState(np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2))


def tsirelson_scenario(state: Optional[PureState] = None, detection: DetectionModel = Uniform(1.0)) -> BellScenario:
    """Settings 0, 90 degrees (side 1) and 45, 135 degrees (side 2) in the z-x plane."""
    return BellScenario(
        state or singlet(),
        LocalGenObservable.from_angles(0, detection=detection, side=1, label="a"),
        LocalGenObservable.from_angles(90, detection=detection, side=1, label="a'"),
        LocalGenObservable.from_angles(45, detection=detection, side=2, label="b"),
        LocalGenObservable.from_angles(135, detection=detection, side=2, label="b'"),
    )


def with_uniform_detection(sc: BellScenario, p) -> BellScenario:
    """Replace every detection model by ``Uniform(p)``; ``p`` may be a 4-tuple."""
    ps = (p,) * 4 if np.isscalar(p) else tuple(p)
    obs = [replace(o, detection=Uniform(float(q))) for o, q in zip(sc.observables(), ps)]
    return BellScenario(sc.state, *obs, dims=sc.dims)


def joint_expectation(sc: BellScenario, obs_a: LocalGenObservable, obs_b: LocalGenObservable, noncontextual: bool = True) -> float:
    """Mean of the product of two local generalized observables.

    Terms with a no-registration outcome vanish because ``a0 = b0 = 0``.
    """
    ga, gb = obs_a.lifted(sc.dims), obs_b.lifted(sc.dims)
    psi = sc.state.vector
    total = 0.0
    if noncontextual:
        da, db = ga.detection_values(psi), gb.detection_values(psi)
        for n, pa in enumerate(ga.base.projectors, start=1):
            for m, pb in enumerate(gb.base.projectors, start=1):
                weight = ga.value_of(n) * gb.value_of(m) * da[n - 1] * db[m - 1]
                total += weight * expectation_value(pa @ pb, psi)
        return float(total)
    for n in range(1, ga.k + 1):
        for m in range(1, gb.k + 1):
            total += ga.value_of(n) * gb.value_of(m) * sequential_joint_probability(ga, gb, sc.state, n, m)
    return float(total)


def joint_expectation_sequential(sc: BellScenario, obs_a, obs_b) -> float:
    """Same quantity assembled from sequential joint probabilities of all nine outcome pairs."""
    ga, gb = obs_a.lifted(sc.dims), obs_b.lifted(sc.dims)
    psi = sc.state.vector
    total = 0.0
    for n in ga.outcome_order():
        for m in gb.outcome_order():
            p = sequential_joint_probability(ga, gb, sc.state, n, m, detection_state=psi)
            total += ga.value_of(n) * gb.value_of(m) * p
    return float(total)


def quantum_correlation(sc: BellScenario, obs_a: LocalGenObservable, obs_b: LocalGenObservable) -> float:
    """``<Psi|A (x) B|Psi>`` for the underlying dichotomic observables."""
    op = obs_a.lifted(sc.dims).base.operator @ obs_b.lifted(sc.dims).base.operator
    return expectation_value(op, sc.state.vector)


def chsh_combination(e_ab, e_abp, e_apb, e_apbp) -> float:
    return abs(e_ab - e_abp) + abs(e_apb + e_apbp)


def correlations(sc: BellScenario, noncontextual: bool = True) -> tuple:
    """``E(a,b), E(a,b'), E(a',b), E(a',b')``."""
    return (
        joint_expectation(sc, sc.a, sc.b, noncontextual),
        joint_expectation(sc, sc.a, sc.b_prime, noncontextual),
        joint_expectation(sc, sc.a_prime, sc.b, noncontextual),
        joint_expectation(sc, sc.a_prime, sc.b_prime, noncontextual),
    )


def modified_bchsh_lhs(sc: BellScenario, noncontextual: bool = True) -> float:
    return chsh_combination(*correlations(sc, noncontextual))


def quantum_chsh(sc: BellScenario) -> float:
    return chsh_combination(
        quantum_correlation(sc, sc.a, sc.b),
        quantum_correlation(sc, sc.a, sc.b_prime),
        quantum_correlation(sc, sc.a_prime, sc.b),
        quantum_correlation(sc, sc.a_prime, sc.b_prime),
    )


def efficiency_closed_form(q: float) -> float:
    """Largest uniform ``p`` with ``p**2 * q <= 2``."""
    return 1.0 if q <= BOUND else float(min(1.0, np.sqrt(BOUND / q)))


def max_uniform_efficiency(sc: BellScenario, tol: float = 1e-13, max_iter: int = 200) -> float:
    """Largest uniform detection probability keeping the modified functional at most 2.

    Bisection on ``p -> modified_bchsh_lhs(with_uniform_detection(sc, p))``,
    which is nondecreasing on ``[0, 1]``.
    """

    def excess(p):
        return modified_bchsh_lhs(with_uniform_detection(sc, p)) - BOUND

    if excess(1.0) <= 0.0:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if excess(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


SWEEP_COLUMNS = (
    "a_theta_deg", "a_phi_deg", "a_prime_theta_deg", "a_prime_phi_deg",
    "b_theta_deg", "b_phi_deg", "b_prime_theta_deg", "b_prime_phi_deg",
    "p", "E_ab", "E_ab_prime", "E_a_prime_b", "E_a_prime_b_prime",
    "modified_lhs", "bound_ok",
)


def efficiency_sweep(sc: BellScenario, ps: Sequence[float]) -> list:
    """One row per uniform efficiency, columns as in ``SWEEP_COLUMNS``."""
    angles = [v for o in sc.observables() for v in o.angles]
    rows = []
    for p in ps:
        es = correlations(with_uniform_detection(sc, p))
        lhs = chsh_combination(*es)
        rows.append((*angles, float(p), *es, lhs, lhs <= BOUND + 1e-12))
    return rows


@dataclass(frozen=True, eq=False)
class LHVModel:
    """Finite deterministic hidden-variable model.

    ``values_a[setting]`` and ``values_b[setting]`` are arrays of ``+-1``
    indexed like ``weights``.
    """

    weights: np.ndarray
    values_a: Mapping
    values_b: Mapping

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or (w < 0).any() or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        for table in (self.values_a, self.values_b):
            for key, vals in table.items():
                vals = np.asarray(vals)
                if vals.shape != w.shape or not np.isin(vals, (-1, 1)).all():
                    raise ValueError(f"values for setting {key!r} must be +-1, one per hidden state")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "values_a", {k: np.asarray(v, dtype=int) for k, v in self.values_a.items()})
        object.__setattr__(self, "values_b", {k: np.asarray(v, dtype=int) for k, v in self.values_b.items()})

    def correlation(self, a, b) -> float:
        return float(np.sum(self.weights * self.values_a[a] * self.values_b[b]))

    @classmethod
    def random(cls, rng: np.random.Generator, n_lambda: int = 10, settings_a=("a", "a'"), settings_b=("b", "b'")):
        w = rng.random(n_lambda)
        w /= w.sum()
        va = {s: rng.choice((-1, 1), size=n_lambda) for s in settings_a}
        vb = {s: rng.choice((-1, 1), size=n_lambda) for s in settings_b}
        return cls(w, va, vb)


def classical_bchsh_lhs(lhv: LHVModel, a="a", a_prime="a'", b="b", b_prime="b'") -> float:
    return chsh_combination(
        lhv.correlation(a, b),
        lhv.correlation(a, b_prime),
        lhv.correlation(a_prime, b),
        lhv.correlation(a_prime, b_prime),
    )
