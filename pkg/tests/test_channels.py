import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from darwinlab import tensor as tn
from darwinlab.channels import (Channel, afw_mi_bound, afw_scenario, apply, cmi_afw_bound, dephasing, depolarizing,
                                epsilon_deviation, holevo_monotonicity_check, identity_channel, partial_swap,
                                petz_recovery, random_channel, recovery_bound_check, unitary_channel)
from darwinlab.errors import ArgumentError, DegenerateInputError, DegenerateSupportError, PreconditionError
from darwinlab.infotheory import holevo_of_ensemble
from darwinlab.states import Ensemble, QState, ghz_state, haar_unitary, rng_for
from darwinlab.tensor import HilbertSpace

from conftest import random_density, random_ket

seeds = st.integers(0, 2**32 - 1)
Q = HilbertSpace.qubits("X")
PLUS = np.array([1, 1]) / math.sqrt(2)


def _afw_formula(eps, d):
    x = eps / (1 + eps)
    h = 0.0 if x in (0, 1) else -x * math.log2(x) - (1 - x) * math.log2(1 - x)
    return 2 * eps * math.log2(d) + (1 + eps) * h


def test_apply_identity_and_depolarizing():
    sp = HilbertSpace.qubits("S", "T")
    rho = QState(sp, rho=np.kron(random_density(2, 1), random_density(2, 2)))
    assert np.allclose(apply(identity_channel(2), rho, ["S"]).rho, rho.rho)
    tau = rho.marginal(["T"])
    out = apply(depolarizing(2, 1.0), rho, ["S"])
    assert np.allclose(out.rho, np.kron(np.eye(2) / 2, tau), atol=1e-12)


def test_apply_dephasing_zeroes_coherences():
    out = apply(dephasing(2, 1.0), QState(Q, ket=PLUS), ["X"])
    assert np.allclose(out.rho, np.eye(2) / 2)


def test_apply_dimension_mismatch():
    with pytest.raises(ArgumentError):
        apply(identity_channel(3), QState(Q, ket=[1, 0]), ["X"])


def test_apply_dimension_changing_channel_keeps_position():
    sp = HilbertSpace.qubits("A", "B", "C")
    rho = QState(sp, rho=random_density(8, 3))
    ch = random_channel(2, 3, 2, rng_for(0, "tests"))
    out = apply(ch, rho, ["B"])
    assert out.space.ids == ["A", "B", "C"] and out.space.dims == [2, 3, 2]
    assert np.allclose(out.marginal(["A", "C"]), rho.marginal(["A", "C"]), atol=1e-12)


def test_rejects_non_trace_preserving():
    with pytest.raises(PreconditionError):
        Channel((np.eye(2) * 0.9,))


def test_stinespring_matches_kraus():
    u = haar_unitary(4, rng_for(1, "tests"))
    ch = Channel.from_stinespring(u, [1, 0], 2, 2)
    rho = random_density(2, 4)
    # direct oracle: U (rho (x) |0><0|) U^dag, trace out the environment
    full = u @ np.kron(rho, np.diag([1, 0])) @ u.conj().T
    direct = np.einsum("aebe->ab", full.reshape(2, 2, 2, 2))
    assert np.allclose(ch(rho), direct, atol=1e-12)


def test_epsilon_deviation_examples():
    sp = HilbertSpace.qubits("S", "F")
    r = QState(sp, rho=random_density(4, 5))
    assert epsilon_deviation(r, r) == pytest.approx(0, abs=1e-15)
    a, b = QState(Q, ket=[1, 0]), QState(Q, ket=[0, 1])
    assert epsilon_deviation(a, b) == pytest.approx(1.0)
    with pytest.raises(ArgumentError):
        epsilon_deviation(r, a)


def test_epsilon_deviation_of_mixture_with_orthogonal_support():
    lam = np.diag([0.6, 0.4, 0, 0])
    tau = np.diag([0, 0, 0.5, 0.5])
    sp = HilbertSpace.qubits("S", "F")
    for q in (0.0, 0.05, 0.2, 0.7):
        sigma = (1 - q) * lam + q * tau
        eps = epsilon_deviation(QState(sp, rho=sigma), QState(sp, rho=lam))
        assert eps <= q + 1e-12
        # disjoint supports: the deviation is exactly q
        assert eps == pytest.approx(q, abs=1e-12)


def test_afw_bound_values():
    assert afw_mi_bound(0, 2) == 0
    assert afw_mi_bound(1, 2) == pytest.approx(4.0)
    assert afw_mi_bound(0.1, 2) == pytest.approx(_afw_formula(0.1, 2), abs=1e-12)
    assert afw_mi_bound(0.1, 2) == pytest.approx(0.683447, abs=1e-6)
    assert cmi_afw_bound(0, 2) == 0
    with pytest.raises(ArgumentError):
        afw_mi_bound(1.5, 2)
    with pytest.raises(ArgumentError):
        afw_mi_bound(0.1, 1)


def test_afw_bounds_agree_and_increase():
    g = np.random.default_rng(0)
    for eps in g.uniform(0, 1, 100):
        assert cmi_afw_bound(eps, 3) == afw_mi_bound(eps, 3)
    grid = [afw_mi_bound(e, 2) for e in np.linspace(0, 1, 100)]
    assert all(b > a for a, b in zip(grid, grid[1:]))


@pytest.mark.parametrize("g", [0.2, 0.6, math.pi / 4])
def test_afw_on_partially_swapped_ghz(g):
    r = afw_scenario(ghz_state(8), partial_swap(g), mix=1.0)
    assert r.cmi <= r.cmi_bound + 1e-12
    assert r.mi_gain <= r.mi_bound + 1e-12


def test_afw_calibration_hits_requested_eps():
    sp = HilbertSpace.qubits("S", "F1", "F2")
    st_ = QState(sp, rho=random_density(8, 11, rank=2))
    u = haar_unitary(4, rng_for(2, "tests"))
    full = afw_scenario(st_, u, mix=1.0)
    eps = 0.5 * full.epsilon
    r = afw_scenario(st_, u, eps)
    assert r.epsilon == pytest.approx(eps, rel=1e-9)
    with pytest.raises(DegenerateInputError):
        afw_scenario(st_, u, min(1.0, 2 * full.epsilon + 0.01))


def test_holevo_monotonicity_examples():
    e = Ensemble.of([0.5, 0.5], [QState(Q, ket=[1, 0]), QState(Q, ket=PLUS)])
    r = holevo_monotonicity_check(e, unitary_channel(haar_unitary(2, rng_for(3, "tests"))))
    assert r.chi_out == pytest.approx(r.chi_in, abs=1e-12) and r.ok
    r = holevo_monotonicity_check(e, depolarizing(2, 1.0))
    assert r.chi_out == pytest.approx(0, abs=1e-12) and r.ok


def test_petz_of_unitary_is_inverse():
    u = haar_unitary(2, rng_for(4, "tests"))
    ch = unitary_channel(u)
    rec = petz_recovery(ch, random_density(2, 12))
    rho = random_density(2, 13)
    assert np.allclose(rec(ch(rho)), rho, atol=1e-10)


def test_petz_dephasing_diagonal_ensemble_exact():
    ch = dephasing(2, 0.8)
    e = Ensemble.of([0.3, 0.7], [QState(Q, rho=np.diag([0.9, 0.1])), QState(Q, rho=np.diag([0.2, 0.8]))])
    rep = recovery_bound_check(e, ch, petz_recovery(ch, e.average()))
    assert rep.chi_in_bits == pytest.approx(rep.chi_out_bits, abs=1e-12)
    assert rep.rhs_bits == pytest.approx(0, abs=1e-9)
    assert rep.satisfied


def test_petz_depolarizing_example():
    e = Ensemble.of([0.5, 0.5], [QState(Q, ket=[1, 0]), QState(Q, ket=PLUS)])
    ch = depolarizing(2, 0.3)
    rep = recovery_bound_check(e, ch, petz_recovery(ch, e.average()))
    assert rep.satisfied and rep.margin >= -1e-9
    assert all(0 <= f <= 1 for _, f in rep.fidelity_terms)
    assert rep.rhs_bits == pytest.approx(-2 * math.log2(sum(p * f for p, f in rep.fidelity_terms)))


def test_petz_is_cptp_on_rank_deficient_output():
    # amplitude damping to |0> makes L(sigma) rank one
    ch = Channel((np.array([[1, 0], [0, 0]]), np.array([[0, 1], [0, 0]])))
    rec = petz_recovery(ch, random_density(2, 14))
    assert rec.trace_preservation_error() <= 1e-9


def test_petz_degenerate_support():
    with pytest.raises(DegenerateSupportError):
        petz_recovery(identity_channel(2), np.zeros((2, 2)))


def test_perfect_recovery_report():
    e = Ensemble.of([0.5, 0.5], [QState(Q, ket=[1, 0]), QState(Q, ket=[0, 1])])
    ch = identity_channel(2)
    rep = recovery_bound_check(e, ch, identity_channel(2))
    assert rep.lhs_bits == pytest.approx(0, abs=1e-12)
    assert rep.rhs_bits == pytest.approx(0, abs=1e-12)
    assert rep.margin == pytest.approx(0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_composition_is_trace_preserving(seed):
    g = rng_for(seed, "tests/compose")
    a = random_channel(2, 3, int(g.integers(1, 3)), g)
    b = random_channel(3, 2, int(g.integers(2, 4)), g)
    assert b.compose(a).trace_preservation_error() <= 1e-9


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_epsilon_deviation_is_metric_like(seed):
    sp = HilbertSpace.qubits("S", "F")
    a, b, c = (QState(sp, rho=random_density(4, seed + k)) for k in range(3))
    ab, bc, ac = epsilon_deviation(a, b), epsilon_deviation(b, c), epsilon_deviation(a, c)
    assert ab == pytest.approx(epsilon_deviation(b, a), abs=1e-12)
    assert ac <= ab + bc + 1e-9


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_holevo_monotonicity_random(seed):
    g = rng_for(seed, "tests/holevo")
    size = int(g.integers(2, 5))
    e = Ensemble.of(g.dirichlet(np.ones(size)), [QState(Q, rho=random_density(2, seed + k)) for k in range(size)])
    ch = random_channel(2, int(g.integers(1, 4)) + 1, int(g.integers(1, 4)), g)
    assert holevo_monotonicity_check(e, ch).ok


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_recovery_bound_random(seed):
    g = rng_for(seed, "tests/recovery")
    size = int(g.integers(2, 4))
    e = Ensemble.of(g.dirichlet(np.ones(size)), [QState(Q, rho=random_density(2, seed + k, rank=int(g.integers(1, 3))))
                                                 for k in range(size)])
    ch = random_channel(2, 2, int(g.integers(1, 5)), g)
    rep = recovery_bound_check(e, ch, petz_recovery(ch, e.average()))
    assert rep.margin >= -1e-9
    assert rep.chi_in_bits == pytest.approx(holevo_of_ensemble(e), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(0, 0.3))
def test_afw_mi_bound_random_kicks(seed, frac):
    sp = HilbertSpace.qubits("S", "F1", "F2")
    st_ = QState(sp, rho=random_density(8, seed, rank=1 + seed % 8))
    u = haar_unitary(4, rng_for(seed, "tests/kick"))
    r = afw_scenario(st_, u, mix=frac)
    assert r.mi_ok and r.cmi_ok


def test_partial_swap_limits():
    assert np.allclose(partial_swap(0), np.eye(4))
    swap = partial_swap(math.pi / 2) / 1j
    ket = np.kron([1, 0], random_ket(2, 1))
    assert np.allclose(swap @ ket, np.kron(random_ket(2, 1), [1, 0]))
    u = partial_swap(0.37)
    assert np.allclose(u @ u.conj().T, np.eye(4))
    assert tn.trace_norm(u) == pytest.approx(4)
