"""State updates induced by idealized nondestructive measurements.

Pure states collapse through the state-dependent effect ``T_psi(X)``
instead of a projector; mixtures collapse componentwise with Bayes weights.
The apparatus coupling builds the compound object-plus-pointer vector whose
reduced state reproduces the nonselective mixture.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .linalg import as_vector, ket_bra, max_abs, partial_trace, tensor_product
from .observables import (
    ZERO_TOL,
    GeneralizedObservable,
    ZeroProbabilityError,
    _checked,
    effect_from_values,
    outcome_probabilities,
    overall_probability,
)
from .states import (
    OperationalMixture,
    PureState,
    as_mixture,
    mixture_overall_probability,
    standard_density,
)

PRUNE_TOL = 1e-12

YES, NO = "yes", "no"


def branch_set(g: GeneralizedObservable, x, branch: str) -> frozenset:
    x = frozenset(x)
    if branch == YES:
        return x
    if branch == NO:
        return g.all_outcomes - x
    raise ValueError(f"branch must be 'yes' or 'no', got {branch!r}")


def _as_pure(s) -> PureState:
    return s if isinstance(s, PureState) else PureState(s)


def gpp_apply(g: GeneralizedObservable, s, x, branch: str = YES, tol: float = ZERO_TOL) -> PureState:
    """Post-measurement pure state ``T_psi(X)|psi> / ||T_psi(X)|psi>||``.

    The no branch uses the complement of ``X`` within all outcomes.  The
    branch is impossible when its probability ``<psi|T|psi>`` is at most
    ``tol``; since ``T >= 0`` the image norm is then at least that probability.
    """
    s = _as_pure(s)
    xb = branch_set(g, x, branch)
    psi, xb = _checked(g, s.vector, xb)
    image = effect_from_values(g, g.detection_values(psi), xb) @ psi
    prob = float(np.real(np.vdot(psi, image)))
    norm = np.linalg.norm(image)
    if prob <= tol or norm == 0:
        raise ZeroProbabilityError("branch has zero probability; post-state undefined")
    return PureState(image / norm)


def glp_apply(g: GeneralizedObservable, m, x, branch: str = YES, tol: float = ZERO_TOL) -> OperationalMixture:
    """Componentwise collapse of a mixture with Bayes-updated weights.

    Components whose branch probability is below ``PRUNE_TOL`` are dropped
    and the remaining weights renormalized.
    """
    mixture, _ = _glp(g, as_mixture(m), x, branch, tol)
    return mixture


def _glp(g, m, x, branch, tol):
    xb = branch_set(g, x, branch)
    probs = np.array([overall_probability(g, s.vector, xb) for s in m.states])
    total = float(m.weights @ probs)
    if total <= tol:
        raise ZeroProbabilityError("branch impossible: total probability is zero")
    kept, pruned = [], []
    for j, ((w, s), pj) in enumerate(zip(m.components, probs)):
        if pj <= PRUNE_TOL:
            pruned.append(j)
            continue
        kept.append((w * pj, gpp_apply(g, s, xb, YES, tol=0.0)))
    norm = sum(w for w, _ in kept)
    return OperationalMixture(tuple((w / norm, s) for w, s in kept)), tuple(pruned)


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    observable: GeneralizedObservable
    outcome_set: frozenset
    branch: str
    pre_state: object
    post_state: object
    probability: float
    pruned: tuple = ()

    def to_dict(self) -> dict:
        g = self.observable
        return {
            "observable": g.name,
            "outcome_set": [g.label(n) for n in sorted(self.outcome_set)],
            "branch": self.branch,
            "probability": self.probability,
            "pre_state": _state_summary(self.pre_state),
            "post_state": _state_summary(self.post_state),
            "pruned": list(self.pruned),
        }


def _vec(v):
    return [[float(z.real), float(z.imag)] for z in v]


def _state_summary(s):
    if isinstance(s, PureState):
        return {"pure": _vec(s.vector)}
    return {"mixture": [{"weight": w, "vector": _vec(c.vector)} for w, c in s.components]}


def measure(g: GeneralizedObservable, state, x, branch: str = YES) -> MeasurementRecord:
    """Apply GPP (pure state) or GLP (mixture) and keep an audit record."""
    xb = branch_set(g, x, branch)
    if isinstance(state, OperationalMixture):
        prob = mixture_overall_probability(state, g, xb)
        post, pruned = _glp(g, state, x, branch, ZERO_TOL)
    else:
        state = _as_pure(state)
        prob = overall_probability(g, state.vector, xb)
        post, pruned = gpp_apply(g, state, x, branch), ()
    return MeasurementRecord(g, frozenset(x), branch, state, post, prob, pruned)


def nonselective_measure(g: GeneralizedObservable, s) -> OperationalMixture:
    """Mixture of all collapse branches weighted by their outcome probabilities."""
    s = _as_pure(s)
    comps = []
    for n, p in outcome_probabilities(g, s.vector).items():
        if p > PRUNE_TOL:
            comps.append((p, gpp_apply(g, s, {n}, YES, tol=0.0)))
    norm = sum(w for w, _ in comps)
    return OperationalMixture(tuple((w / norm, c) for w, c in comps))


def nonselective_density(g: GeneralizedObservable, s) -> np.ndarray:
    """Closed form ``p(a0)|psi_0><psi_0| + sum_n p_d(n) P_n|psi><psi|P_n``."""
    s = _as_pure(s)
    psi = s.vector
    d = g.detection_values(psi)
    rho = np.zeros((g.dim, g.dim), dtype=complex)
    for n, proj in enumerate(g.base.projectors, start=1):
        rho += d[n - 1] * ket_bra(proj @ psi)
    p0 = outcome_probabilities(g, psi)[0]
    if p0 > PRUNE_TOL:
        rho += p0 * gpp_apply(g, s, {0}).density
    return rho


def sequential_joint_probability(
    g_a: GeneralizedObservable,
    g_b: GeneralizedObservable,
    s,
    n: int,
    p: int,
    detection_state: Optional[np.ndarray] = None,
) -> float:
    """Probability of outcome ``n`` of ``g_a`` followed by outcome ``p`` of ``g_b``.

    The intermediate state is the GPP collapse on ``{a_n}``.  When
    ``detection_state`` is given, the detection values of ``g_b`` are
    evaluated on it rather than on the intermediate state (the noncontextual
    rule for spatially separated subsystems).
    """
    s = _as_pure(s)
    p_first = overall_probability(g_a, s.vector, {n})
    if p_first <= ZERO_TOL:
        return 0.0
    mid = gpp_apply(g_a, s, {n}).vector
    ref = mid if detection_state is None else as_vector(detection_state)
    t_b = effect_from_values(g_b, g_b.detection_values(ref), frozenset({p}))
    p_second = float(np.real(np.vdot(mid, t_b @ mid)))
    return p_first * p_second


@dataclass(frozen=True, eq=False)
class ApparatusCoupling:
    """Pointer coupling of a generalized observable to an apparatus space.

    ``pointer_basis[0]`` is the ready/no-registration pointer state and
    ``pointer_basis[n]`` the pointer for outcome ``a_n``.  ``phases`` holds
    ``theta_1 .. theta_K``; ``phase0`` is the a0-branch phase.
    """

    system_obs: GeneralizedObservable
    apparatus_dim: Optional[int] = None
    pointer_basis: Optional[Sequence] = None
    phases: Optional[Sequence[float]] = None
    phase0: float = 0.0

    def __post_init__(self):
        k = self.system_obs.k
        dim = self.apparatus_dim if self.apparatus_dim is not None else k + 1
        if dim < k + 1:
            raise ValueError(f"apparatus dimension {dim} too small for {k + 1} pointer states")
        if self.pointer_basis is None:
            basis = np.eye(dim, dtype=complex)[: k + 1]
        else:
            basis = np.array([as_vector(v) for v in self.pointer_basis])
            if basis.shape != (k + 1, dim):
                raise ValueError(f"need {k + 1} pointer vectors of dimension {dim}")
            if max_abs(basis.conj() @ basis.T - np.eye(k + 1)) > 1e-10:
                raise ValueError("pointer basis is not orthonormal")
        phases = np.zeros(k) if self.phases is None else np.asarray(self.phases, dtype=float)
        if phases.shape != (k,):
            raise ValueError(f"need {k} phases, got {phases.shape}")
        object.__setattr__(self, "apparatus_dim", dim)
        object.__setattr__(self, "pointer_basis", basis)
        object.__setattr__(self, "phases", phases)


def apparatus_evolve(c: ApparatusCoupling, s) -> np.ndarray:
    """Compound object-plus-apparatus vector after the measurement interaction.

    Ordering is system (x) apparatus.
    """
    s = _as_pure(s)
    g = c.system_obs
    psi = s.vector
    d = g.detection_values(psi)
    out = np.zeros(g.dim * c.apparatus_dim, dtype=complex)
    for n, proj in enumerate(g.base.projectors, start=1):
        alpha = np.sqrt(d[n - 1]) * np.exp(1j * c.phases[n - 1])
        out += alpha * tensor_product(proj @ psi, c.pointer_basis[n])
    p0 = outcome_probabilities(g, psi)[0]
    if p0 > PRUNE_TOL:
        beta = np.sqrt(p0) * np.exp(1j * c.phase0)
        out += beta * tensor_product(gpp_apply(g, s, {0}).vector, c.pointer_basis[0])
    return out


def pointer_probabilities(c: ApparatusCoupling, big_psi) -> dict:
    """Probability of reading each pointer state, keyed by outcome index."""
    g = c.system_obs
    t = np.asarray(big_psi).reshape(g.dim, c.apparatus_dim)
    amps = t @ c.pointer_basis.conj().T
    probs = np.sum(np.abs(amps) ** 2, axis=0)
    return {n: float(probs[n]) for n in g.outcome_order()}


def verify_partial_trace_consistency(c: ApparatusCoupling, s) -> float:
    """Max-abs residual between the reduced compound state and the nonselective mixture.

    Only densities are compared: the reduced state does not determine which
    operational mixture produced it.
    """
    big = apparatus_evolve(c, s)
    reduced = partial_trace(ket_bra(big), (c.system_obs.dim, c.apparatus_dim), keep=0)
    target = standard_density(nonselective_measure(c.system_obs, s))
    return max_abs(reduced - target)
