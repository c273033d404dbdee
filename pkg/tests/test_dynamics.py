import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_generalized, random_state
from esr.dynamics import (
    NO,
    ApparatusCoupling,
    apparatus_evolve,
    gpp_apply,
    glp_apply,
    measure,
    nonselective_density,
    nonselective_measure,
    pointer_probabilities,
    sequential_joint_probability,
    verify_partial_trace_consistency,
)
from esr.linalg import max_abs
from esr.observables import (
    PerOutcome,
    Uniform,
    ZeroProbabilityError,
    outcome_probabilities,
    pauli_observable,
)
from esr.states import OperationalMixture, PureState, standard_density

ZERO, ONE = np.array([1, 0]), np.array([0, 1])
PLUS = np.array([1, 1]) / np.sqrt(2)
A0_STATE = np.array([0.2, 0.5]) / np.sqrt(0.29)


@pytest.fixture
def sz():
    return pauli_observable("z", PerOutcome((0.8, 0.5)))


def same_ray(u, v, tol=1e-12):
    return abs(abs(np.vdot(u, v)) - 1) < tol


def test_gpp_full_detection_is_projection():
    g = pauli_observable("x")
    s = PureState(ZERO)
    assert same_ray(gpp_apply(g, s, {1}).vector, PLUS)


def test_gpp_a0_branch_uniform_leaves_state():
    rng = np.random.default_rng(0)
    s = random_state(rng, 3)
    g = random_generalized(rng, 3).with_detection(Uniform(0.4))
    assert same_ray(gpp_apply(g, s, {0}).vector, s.vector)


def test_gpp_a0_branch_sigma_z(sz):
    out = gpp_apply(sz, PureState(PLUS), {0}).vector
    assert max_abs(out - A0_STATE) < 1e-15


def test_gpp_no_branch_uses_complement(sz):
    # "no" for {+1} is {-1, a0}
    yes = gpp_apply(sz, PureState(PLUS), {2, 0}).vector
    no = gpp_apply(sz, PureState(PLUS), {1}, NO).vector
    assert max_abs(yes - no) < 1e-15


def test_gpp_zero_branch(sz):
    with pytest.raises(ZeroProbabilityError, match="zero probability"):
        gpp_apply(sz, PureState(ZERO), {2})
    with pytest.raises(ValueError):
        gpp_apply(sz, PureState(ZERO), {1}, "maybe")


def test_glp_bayes_weights():
    g = pauli_observable("z", Uniform(1.0))
    u = np.array([np.sqrt(0.4), np.sqrt(0.6)])
    v = np.array([np.sqrt(0.2), np.sqrt(0.8)])
    post = glp_apply(g, OperationalMixture(((0.5, u), (0.5, v))), {1})
    assert np.allclose(post.weights, [2 / 3, 1 / 3], atol=1e-14)


def test_glp_single_component_wraps_gpp(sz):
    post = glp_apply(sz, OperationalMixture.pure(PLUS), {0})
    assert len(post) == 1 and max_abs(post.states[0].vector - A0_STATE) < 1e-15


def test_glp_prunes_and_rejects(sz):
    rec = measure(sz, OperationalMixture(((0.5, ZERO), (0.5, ONE))), {1})
    assert rec.pruned == (1,)
    assert len(rec.post_state) == 1
    with pytest.raises(ZeroProbabilityError, match="branch impossible"):
        glp_apply(pauli_observable("z"), OperationalMixture.pure(ZERO), {2})


def test_measure_record_serializes(sz):
    rec = measure(sz, PureState(PLUS), {0})
    d = rec.to_dict()
    assert d["probability"] == pytest.approx(0.35)
    json.dumps(d)


def test_nonselective_examples(sz):
    g = pauli_observable("x", Uniform(0.0))
    m = nonselective_measure(g, PureState(PLUS))
    assert len(m) == 1 and same_ray(m.states[0].vector, PLUS)

    m = nonselective_measure(sz, PureState(PLUS))
    assert np.allclose(m.weights, [0.4, 0.25, 0.35])
    assert same_ray(m.states[0].vector, ZERO)
    assert same_ray(m.states[1].vector, ONE)
    assert same_ray(m.states[2].vector, A0_STATE)

    full = pauli_observable("z")
    rho = standard_density(nonselective_measure(full, PureState(PLUS)))
    assert max_abs(rho - np.eye(2) / 2) < 1e-15


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 100_000))
def test_nonselective_closed_form(seed):
    rng = np.random.default_rng(seed)
    g = random_generalized(rng)
    s = random_state(rng, g.dim)
    assert max_abs(standard_density(nonselective_measure(g, s)) - nonselective_density(g, s)) < 1e-12


def test_sequential_examples(sz):
    full_z, full_x = pauli_observable("z"), pauli_observable("x")
    rng = np.random.default_rng(1)
    s = random_state(rng, 2)
    born = outcome_probabilities(full_z, s.vector)
    for n in (1, 2):
        for p in (1, 2):
            expected = born[n] if n == p else 0.0
            assert sequential_joint_probability(full_z, full_z, s, n, p) == pytest.approx(expected, abs=1e-14)
    assert sequential_joint_probability(full_z, full_x, PureState(ZERO), 1, 1) == pytest.approx(0.5)
    assert sequential_joint_probability(sz, full_x, PureState(ZERO), 1, 1) == pytest.approx(0.4)
    assert sequential_joint_probability(sz, full_x, PureState(ZERO), 2, 1) == 0.0


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 100_000))
def test_sequential_product_formula(seed):
    rng = np.random.default_rng(seed)
    dim = int(rng.integers(2, 5))
    g_a, g_b = random_generalized(rng, dim), random_generalized(rng, dim)
    s = random_state(rng, dim)
    psi = s.vector
    for n in range(1, g_a.k + 1):
        pn = g_a.base.projectors[n - 1]
        if np.vdot(psi, pn @ psi).real < 1e-9:
            continue
        mid = gpp_apply(g_a, s, {n}).vector
        for p in range(1, g_b.k + 1):
            pp = g_b.base.projectors[p - 1]
            oracle = (g_a.detection_values(psi)[n - 1] * g_b.detection_values(mid)[p - 1]
                      * np.vdot(psi, pn @ pp @ pn @ psi).real)
            assert abs(sequential_joint_probability(g_a, g_b, s, n, p) - oracle) < 1e-12


def test_apparatus_sigma_z_amplitudes(sz):
    big = apparatus_evolve(ApparatusCoupling(sz), PureState(PLUS))
    expected = (np.sqrt(0.8 / 2) * np.kron(ZERO, np.eye(3)[1])
                + np.sqrt(0.5 / 2) * np.kron(ONE, np.eye(3)[2])
                + np.sqrt(0.35) * np.kron(A0_STATE, np.eye(3)[0]))
    assert max_abs(big - expected) < 1e-15


def test_apparatus_limits():
    rng = np.random.default_rng(2)
    s = random_state(rng, 2)
    g = pauli_observable("x")
    big = apparatus_evolve(ApparatusCoupling(g), s)
    ideal = sum(np.kron(p @ s.vector, np.eye(3)[n]) for n, p in enumerate(g.base.projectors, start=1))
    assert max_abs(big - ideal) < 1e-15
    blind = apparatus_evolve(ApparatusCoupling(g.with_detection(Uniform(0.0))), s)
    assert same_ray(blind, np.kron(s.vector, np.eye(3)[0]))


def test_apparatus_validation(sz):
    with pytest.raises(ValueError):
        ApparatusCoupling(sz, apparatus_dim=2)
    with pytest.raises(ValueError):
        ApparatusCoupling(sz, pointer_basis=[[1, 0, 0], [1, 0, 0], [0, 0, 1]])
    with pytest.raises(ValueError):
        ApparatusCoupling(sz, phases=[0.0])


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 100_000))
def test_apparatus_norm_and_pointers(seed):
    rng = np.random.default_rng(seed)
    g = random_generalized(rng)
    s = random_state(rng, g.dim)
    extra = int(rng.integers(0, 3))
    dim = g.k + 1 + extra
    # random orthonormal pointers in a bigger apparatus space, random phases
    q, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    c = ApparatusCoupling(g, dim, q.T[: g.k + 1], rng.uniform(0, 6, g.k), float(rng.uniform(0, 6)))
    big = apparatus_evolve(c, s)
    assert abs(np.vdot(big, big).real - 1) < 1e-12
    pp = pointer_probabilities(c, big)
    op = outcome_probabilities(g, s.vector)
    assert all(abs(pp[n] - op[n]) < 1e-12 for n in op)
    # phases never matter for the reduced state when pointers are orthonormal
    assert verify_partial_trace_consistency(c, s) < 1e-10


def test_partial_trace_trivial_limits():
    rng = np.random.default_rng(3)
    s = random_state(rng, 3)
    g = random_generalized(rng, 3)
    for det in (Uniform(1.0), Uniform(0.0)):
        assert verify_partial_trace_consistency(ApparatusCoupling(g.with_detection(det)), s) < 1e-14
