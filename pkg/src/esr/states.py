"""Pure states and operational mixtures.

An :class:`OperationalMixture` is a specific weighted list of pure-state
preparations.  Two mixtures with the same density operator but different
component lists are different values: detection probabilities depend on the
components, so the conditional density attached to a property does too.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import as_vector, ket_bra
from .observables import (
    ZERO_TOL,
    GeneralizedObservable,
    ZeroProbabilityError,
    check_unit,
    overall_probability,
    property_detection_probability,
    quantum_projector,
)


@dataclass(frozen=True, eq=False)
class PureState:
    vector: np.ndarray

    def __post_init__(self):
        v = check_unit(self.vector)
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)

    @classmethod
    def from_unnormalized(cls, v) -> "PureState":
        v = as_vector(v)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(v / norm)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]

    @property
    def density(self) -> np.ndarray:
        return ket_bra(self.vector)

    def __repr__(self):
        return f"PureState({np.array2string(self.vector, precision=4)})"


class ComponentError(ZeroProbabilityError):
    """A mixture component has an undefined detection probability."""

    def __init__(self, index: int, message: str):
        super().__init__(f"component {index}: {message}")
        self.index = index


@dataclass(frozen=True, eq=False)
class OperationalMixture:
    """Ordered ``(weight, PureState)`` components with positive weights summing to one."""

    components: tuple

    def __post_init__(self):
        comps = []
        for item in self.components:
            w, s = item
            if not isinstance(s, PureState):
                s = PureState(s)
            comps.append((float(w), s))
        if not comps:
            raise ValueError("a mixture needs at least one component")
        if any(w <= 0 for w, _ in comps):
            raise ValueError("mixture weights must be strictly positive")
        if abs(sum(w for w, _ in comps) - 1.0) > 1e-12:
            raise ValueError(f"mixture weights sum to {sum(w for w, _ in comps)!r}, not 1")
        dims = {s.dim for _, s in comps}
        if len(dims) != 1:
            raise ValueError(f"components live in different dimensions: {sorted(dims)}")
        object.__setattr__(self, "components", tuple(comps))

    @classmethod
    def pure(cls, state) -> "OperationalMixture":
        return cls(((1.0, state),))

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components])

    @property
    def states(self) -> tuple:
        return tuple(s for _, s in self.components)

    @property
    def dim(self) -> int:
        return self.components[0][1].dim

    def __len__(self):
        return len(self.components)


def as_mixture(state) -> OperationalMixture:
    if isinstance(state, OperationalMixture):
        return state
    if isinstance(state, PureState):
        return OperationalMixture.pure(state)
    return OperationalMixture.pure(PureState(state))


def standard_density(m: OperationalMixture) -> np.ndarray:
    """The textbook density operator ``sum_j p_j |psi_j><psi_j|``."""
    m = as_mixture(m)
    return sum(w * s.density for w, s in m.components)


def _component_detection(m, g, x, tol, zero_born):
    if zero_born not in ("complement", "raise"):
        raise ValueError(f"zero_born must be 'complement' or 'raise', got {zero_born!r}")
    x = frozenset(x)
    complement = g.all_outcomes - x - {0}
    out = []
    for j, (_, s) in enumerate(m.components):
        try:
            out.append(property_detection_probability(g, s.vector, x, tol))
            continue
        except ZeroProbabilityError as exc:
            if zero_born == "raise" or not complement:
                raise ComponentError(j, str(exc)) from exc
        # the same dichotomic device registers X and its complement
        try:
            out.append(property_detection_probability(g, s.vector, complement, tol))
        except ZeroProbabilityError as exc:
            raise ComponentError(j, str(exc)) from exc
    return np.array(out)


def mixture_detection_probability(m, g: GeneralizedObservable, x, tol: float = ZERO_TOL, zero_born: str = "raise") -> float:
    """Convex combination of the component detection probabilities.

    A component with zero Born probability for ``X`` has no detection
    probability of its own for ``X``.  By default a :class:`ComponentError`
    carrying the component index is raised.  With ``zero_born="complement"``
    the component is given the detection probability of the complementary
    property ``Xi \\ X``, which the same yes/no device measures.

    The conditional-density functions below default to ``"complement"``:
    such a component contributes nothing to ``Tr[rho_S(F) P(X)]`` numerators
    but still needs a weight in ``rho_S(F)``.
    """
    m = as_mixture(m)
    return float(m.weights @ _component_detection(m, g, x, tol, zero_born))


def conditional_weights(m, g: GeneralizedObservable, x, tol: float = ZERO_TOL, zero_born: str = "complement") -> np.ndarray:
    """Bayes-reweighted component weights ``p_j p_d_j / p_d`` for property ``x``."""
    m = as_mixture(m)
    dj = _component_detection(m, g, x, tol, zero_born)
    total = float(m.weights @ dj)
    if total <= tol:
        raise ZeroProbabilityError("no object detected; conditional state undefined")
    return m.weights * dj / total


def conditional_density(m, g: GeneralizedObservable, x, tol: float = ZERO_TOL, zero_born: str = "complement") -> np.ndarray:
    """Density operator that represents the mixture for the property ``(A0, X)``."""
    m = as_mixture(m)
    w = conditional_weights(m, g, x, tol, zero_born)
    return sum(wj * s.density for wj, s in zip(w, m.states))


def mixture_conditional_probability(m, g: GeneralizedObservable, x, tol: float = ZERO_TOL, zero_born: str = "complement") -> float:
    """Probability of ``X`` among detected objects: ``Tr[rho_S(F) P(X)]``."""
    rho = conditional_density(m, g, x, tol, zero_born)
    return float(np.real(np.trace(rho @ quantum_projector(g, x))))


def mixture_overall_probability(m, g: GeneralizedObservable, x) -> float:
    """``sum_j p_j <psi_j|T_psi_j(X)|psi_j>``, valid for any outcome set."""
    m = as_mixture(m)
    return float(sum(w * overall_probability(g, s.vector, x) for w, s in m.components))


def mixture_outcome_probabilities(m, g: GeneralizedObservable) -> dict:
    m = as_mixture(m)
    return {n: mixture_overall_probability(m, g, {n}) for n in g.outcome_order()}


def probabilistically_equivalent(m_a, m_b, observables: Sequence[GeneralizedObservable], tol: float = 1e-9):
    """Compare overall probabilities of every property of the supplied observables.

    Returns ``(True, None)`` or ``(False, (observable_index, outcome_set))``
    for the first disagreement found.
    """
    m_a, m_b = as_mixture(m_a), as_mixture(m_b)
    if m_a.dim != m_b.dim:
        raise ValueError("mixtures live in different dimensions")
    for i, g in enumerate(observables):
        for x in g.subsets():
            if abs(mixture_overall_probability(m_a, g, x) - mixture_overall_probability(m_b, g, x)) > tol:
                return False, (i, x)
    return True, None


def conditional_density_rows(m, g: GeneralizedObservable, label: str = "", tol: float = ZERO_TOL):
    """CSV-ready rows ``(property, component, weight)`` of the conditional family.

    One block per nonempty property set without ``a0``; properties whose
    conditional state is undefined are skipped.
    """
    m = as_mixture(m)
    rows = []
    for x in g.subsets():
        if not x or 0 in x:
            continue
        try:
            w = conditional_weights(m, g, x, tol)
        except ZeroProbabilityError:
            continue
        prop = "{" + ",".join(g.label(n) for n in sorted(x)) + "}"
        for j, wj in enumerate(w):
            rows.append((label, prop, j, float(wj)))
    return rows
