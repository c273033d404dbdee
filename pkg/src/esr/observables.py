"""Discrete observables extended with a no-registration outcome.

A :class:`GeneralizedObservable` wraps a discrete observable with outcomes
``a_1 .. a_K`` and adds the no-registration outcome ``a_0``.  Outcomes are
addressed by index: ``0`` is ``a_0`` and ``n >= 1`` is ``a_n``.  An outcome
set is a ``frozenset`` of such indices; only membership matters.

For every unit vector ``psi`` the observable defines a commutative family of
effects ``T_psi(X)`` built from the spectral projectors weighted by the
state-dependent detection probabilities ``p_d(psi, n)``.
"""

from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .linalg import (
    as_matrix,
    as_vector,
    check_projector_family,
    expectation_value,
    spectral_decompose,
)

UNIT_TOL = 1e-10
ZERO_TOL = 1e-12

OutcomeSet = frozenset


class ZeroProbabilityError(ValueError):
    """A conditional quantity was requested for a zero-probability event."""


def check_unit(psi, tol: float = UNIT_TOL) -> np.ndarray:
    psi = as_vector(psi)
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > tol:
        raise ValueError(f"state vector is not normalized (norm {norm:.12g})")
    return psi


@dataclass(frozen=True, eq=False)
class DiscreteObservable:
    """Distinct real outcomes paired with a complete orthogonal projector family."""

    outcomes: tuple
    projectors: tuple

    def __post_init__(self):
        outcomes = tuple(float(a) for a in self.outcomes)
        projectors = tuple(as_matrix(p) for p in self.projectors)
        if len(outcomes) != len(projectors):
            raise ValueError("need exactly one projector per outcome")
        if len(set(outcomes)) != len(outcomes):
            raise ValueError(f"outcomes must be pairwise distinct: {outcomes}")
        check_projector_family(projectors)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "projectors", projectors)

    @classmethod
    def from_operator(cls, h, tol: float = 1e-9) -> "DiscreteObservable":
        dec = spectral_decompose(h, tol)
        return cls(dec.eigenvalues, dec.projectors)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    @property
    def operator(self) -> np.ndarray:
        return sum(a * p for a, p in zip(self.outcomes, self.projectors))

    def __len__(self):
        return len(self.outcomes)


class DetectionModel:
    """Detection probability ``p_d(psi, n)`` for outcome index ``n >= 1``.

    Subclasses must be deterministic and must return values in ``[0, 1]``.
    """

    def value(self, psi: np.ndarray, n: int) -> float:
        raise NotImplementedError

    def values(self, psi: np.ndarray, k: int) -> np.ndarray:
        out = np.array([float(self.value(psi, n)) for n in range(1, k + 1)])
        bad = (out < 0.0) | (out > 1.0) | ~np.isfinite(out)
        if bad.any():
            n = int(np.argmax(bad)) + 1
            raise ValueError(f"detection probability for outcome {n} is {out[n - 1]!r}, outside [0, 1]")
        return out


@dataclass(frozen=True)
class Uniform(DetectionModel):
    """Same detection probability for every state and outcome."""

    p: float

    def value(self, psi, n):
        return self.p


@dataclass(frozen=True)
class PerOutcome(DetectionModel):
    """State-independent detection probability per outcome, in outcome order."""

    probs: tuple

    def __post_init__(self):
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))

    def value(self, psi, n):
        return self.probs[n - 1]


@dataclass(frozen=True)
class StateDependent(DetectionModel):
    """Detection probability given by an arbitrary pure function ``rule(psi, n)``.

    The rule may be called concurrently and must not keep mutable state.
    """

    rule: Callable[[np.ndarray, int], float]
    name: str = "state-dependent"

    def value(self, psi, n):
        return self.rule(psi, n)


@dataclass(frozen=True)
class OverlapInterpolated(DetectionModel):
    """Interpolates per-outcome detection values by fidelity with a reference state.

    ``p_d(psi, n) = f * at_reference[n] + (1 - f) * orthogonal[n]`` with
    ``f = |<reference|psi>|^2``.  Serializable, hence usable from configs.
    """

    reference: tuple
    at_reference: tuple
    orthogonal: tuple

    def __post_init__(self):
        ref = check_unit(self.reference)
        object.__setattr__(self, "reference", tuple(complex(z) for z in ref))
        object.__setattr__(self, "at_reference", tuple(float(p) for p in self.at_reference))
        object.__setattr__(self, "orthogonal", tuple(float(p) for p in self.orthogonal))
        if len(self.at_reference) != len(self.orthogonal):
            raise ValueError("at_reference and orthogonal need the same length")

    def value(self, psi, n):
        ref = np.asarray(self.reference)
        if ref.shape != psi.shape:
            raise ValueError("reference state dimension does not match the state")
        f = abs(np.vdot(ref, psi)) ** 2
        return f * self.at_reference[n - 1] + (1.0 - f) * self.orthogonal[n - 1]


@dataclass(frozen=True, eq=False)
class GeneralizedObservable:
    """A discrete observable plus the no-registration outcome ``a0``."""

    base: DiscreteObservable
    a0: float = 0.0
    detection: DetectionModel = field(default_factory=lambda: Uniform(1.0))
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "a0", float(self.a0))
        if self.a0 in self.base.outcomes:
            raise ValueError(f"a0={self.a0} coincides with an outcome of the base observable")
        if isinstance(self.detection, PerOutcome) and len(self.detection.probs) != self.k:
            raise ValueError(
                f"PerOutcome model has {len(self.detection.probs)} values for {self.k} outcomes"
            )

    @property
    def k(self) -> int:
        return len(self.base.outcomes)

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def all_outcomes(self) -> frozenset:
        return frozenset(range(self.k + 1))

    def outcome_order(self) -> tuple:
        """Declared outcome order ``a_1, ..., a_K, a_0`` used for reporting and sampling."""
        return tuple(range(1, self.k + 1)) + (0,)

    def value_of(self, n: int) -> float:
        return self.a0 if n == 0 else self.base.outcomes[n - 1]

    def index_of(self, value: float, tol: float = 1e-12) -> int:
        for n in range(self.k + 1):
            if abs(self.value_of(n) - value) <= tol:
                return n
        raise ValueError(f"{value} is not an outcome of this observable")

    def outcome_set(self, values: Iterable[float]) -> frozenset:
        return frozenset(self.index_of(v) for v in values)

    def label(self, n: int) -> str:
        return "a0" if n == 0 else f"{self.value_of(n):g}"

    def subsets(self):
        """Every outcome set, from the empty set to the full set."""
        idx = sorted(self.all_outcomes)
        for r in range(len(idx) + 1):
            for combo in combinations(idx, r):
                yield frozenset(combo)

    def detection_values(self, psi) -> np.ndarray:
        return self.detection.values(as_vector(psi), self.k)

    def with_detection(self, detection: DetectionModel) -> "GeneralizedObservable":
        return GeneralizedObservable(self.base, self.a0, detection, self.name)


def _checked(g: GeneralizedObservable, psi, x) -> tuple:
    psi = check_unit(psi)
    if psi.shape[0] != g.dim:
        raise ValueError(f"state has dimension {psi.shape[0]}, observable acts on {g.dim}")
    x = frozenset(x)
    if not x <= g.all_outcomes:
        raise ValueError(f"outcome set {sorted(x)} is not a subset of 0..{g.k}")
    return psi, x


def effect_from_values(g: GeneralizedObservable, d: np.ndarray, x: frozenset) -> np.ndarray:
    """Effect of outcome set ``x`` for given detection values ``d[n-1]``."""
    dim = g.dim
    if 0 in x:
        out = np.eye(dim, dtype=complex)
        for n in range(1, g.k + 1):
            if n not in x:
                out = out - d[n - 1] * g.base.projectors[n - 1]
        return out
    out = np.zeros((dim, dim), dtype=complex)
    for n in x:
        out = out + d[n - 1] * g.base.projectors[n - 1]
    return out


def effect(g: GeneralizedObservable, psi, x) -> np.ndarray:
    """The effect ``T_psi(X)`` of the commutative family attached to ``psi``."""
    psi, x = _checked(g, psi, x)
    return effect_from_values(g, g.detection_values(psi), x)


def quantum_projector(g: GeneralizedObservable, x) -> np.ndarray:
    """Spectral projector ``P(X)`` of the base observable (``a_0`` ignored)."""
    out = np.zeros((g.dim, g.dim), dtype=complex)
    for n in frozenset(x) - {0}:
        out = out + g.base.projectors[n - 1]
    return out


def quantum_probability(g: GeneralizedObservable, psi, x) -> float:
    """Born probability ``<psi|P(X)|psi>`` of the underlying quantum observable."""
    psi, x = _checked(g, psi, x)
    return expectation_value(quantum_projector(g, x), psi)


def outcome_probabilities(g: GeneralizedObservable, psi) -> dict:
    """Map outcome index to its overall probability (``0`` is the no-registration outcome)."""
    psi, _ = _checked(g, psi, ())
    d = g.detection_values(psi)
    born = np.array([expectation_value(p, psi) for p in g.base.projectors])
    probs = {n: float(d[n - 1] * born[n - 1]) for n in range(1, g.k + 1)}
    probs[0] = float(np.sum((1.0 - d) * born))
    return {n: probs[n] for n in g.outcome_order()}


def overall_probability(g: GeneralizedObservable, psi, x) -> float:
    """Probability that the outcome lies in ``x``: ``<psi|T_psi(X)|psi>``."""
    psi, x = _checked(g, psi, x)
    return expectation_value(effect_from_values(g, g.detection_values(psi), x), psi)


def expectation(g: GeneralizedObservable, psi) -> float:
    """Mean outcome including the no-registration value."""
    psi, _ = _checked(g, psi, ())
    d = g.detection_values(psi)
    total = g.a0
    for n in range(1, g.k + 1):
        total += (g.value_of(n) - g.a0) * d[n - 1] * expectation_value(g.base.projectors[n - 1], psi)
    return float(total)


def property_detection_probability(g: GeneralizedObservable, psi, x, tol: float = ZERO_TOL) -> float:
    """Detection probability of the property ``(A0, X)`` with ``a0`` not in ``X``.

    Ratio of the overall probability to the Born probability of ``X``.
    Raises :class:`ZeroProbabilityError` when the Born probability vanishes.
    """
    psi, x = _checked(g, psi, x)
    if 0 in x:
        raise ValueError("the no-registration outcome must not belong to the property set")
    born = expectation_value(quantum_projector(g, x), psi)
    if born <= tol:
        raise ZeroProbabilityError("property has zero quantum probability; detection probability undefined")
    d = g.detection_values(psi)
    return expectation_value(effect_from_values(g, d, x), psi) / born


# -- builders -----------------------------------------------------------------

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def spin_projectors(direction: Sequence[float]) -> tuple:
    """Projectors ``(I + n.sigma)/2`` and ``(I - n.sigma)/2`` for a unit vector ``n``."""
    n = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(n)
    if n.shape != (3,) or abs(norm - 1.0) > 1e-9:
        raise ValueError(f"spin direction must be a 3-D unit vector, got {direction}")
    n = n / norm
    ns = n[0] * PAULI["x"] + n[1] * PAULI["y"] + n[2] * PAULI["z"]
    eye = np.eye(2)
    return (eye + ns) / 2, (eye - ns) / 2


def spin_observable(direction, detection: DetectionModel = None, a0: float = 0.0, name: str = "") -> GeneralizedObservable:
    """Dichotomic spin observable with outcomes ordered ``(+1, -1)``."""
    base = DiscreteObservable((1.0, -1.0), spin_projectors(direction))
    return GeneralizedObservable(base, a0, detection or Uniform(1.0), name)


def bloch_direction(theta_deg: float, phi_deg: float = 0.0) -> np.ndarray:
    t, p = np.radians(theta_deg), np.radians(phi_deg)
    return np.array([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)])


def pauli_observable(axis: str, detection: DetectionModel = None, a0: float = 0.0) -> GeneralizedObservable:
    dirs = {"x": (1, 0, 0), "y": (0, 1, 0), "z": (0, 0, 1)}
    return spin_observable(dirs[axis], detection, a0, name=f"sigma_{axis}")


def probabilities_by_label(g: GeneralizedObservable, probs: Mapping[int, float]) -> dict:
    return {g.label(n): p for n, p in probs.items()}
