import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from darwinlab.channels import apply, random_channel
from darwinlab.errors import ArgumentError, CapacityError
from darwinlab.infotheory import (OptimizerConfig, accessible_J, avg_fragmentary_discord, binary_entropy,
                                  conditional_mutual_information, discord, entropy, holevo_of_ensemble,
                                  holevo_pointer, measure_and_condition, mutual_information, shannon)
from darwinlab.states import (Ensemble, PointerBasis, QState, cq_state, fragment_ids, ghz_state, product_state,
                              rng_for)
from darwinlab.tensor import HilbertSpace, SubsystemLabel

from conftest import random_density, random_ket

seeds = st.integers(0, 2**32 - 1)
AB = HilbertSpace.qubits("A", "B")
BELL = QState(AB, ket=np.array([1, 0, 0, 1]) / math.sqrt(2))
PLUS = np.array([1, 1]) / math.sqrt(2)


def _h(p):
    return -sum(x * math.log2(x) for x in p if x > 0)


def test_entropy_examples():
    q = HilbertSpace.qubits("Q")
    assert entropy(QState(q, rho=np.eye(2) / 2)) == pytest.approx(1.0)
    assert entropy(QState(q, ket=[1, 0])) == 0
    assert entropy(np.diag([0.25, 0.75])) == pytest.approx(-0.25 * math.log2(0.25) - 0.75 * math.log2(0.75))
    assert entropy(np.diag([0.25, 0.75])) == pytest.approx(0.811278, abs=1e-6)


def test_mutual_information_examples():
    assert mutual_information(BELL, ["A"], ["B"]) == pytest.approx(2.0)
    prod = QState(AB, rho=np.kron(random_density(2, 1), random_density(2, 2)))
    assert mutual_information(prod, ["A"], ["B"]) == pytest.approx(0, abs=1e-12)
    cc = QState(AB, rho=np.diag([0.5, 0, 0, 0.5]))
    assert mutual_information(cc, ["A"], ["B"]) == pytest.approx(1.0)
    with pytest.raises(ArgumentError):
        mutual_information(BELL, ["A"], ["A", "B"])


def test_cmi_examples():
    g = ghz_state(3).reduce(["S", "F1", "F2"])
    assert conditional_mutual_information(g, ["S"], ["F2"], ["F1"]) == pytest.approx(0, abs=1e-12)
    # pure three-qubit GHZ: H(SF1)=H(F1F2)=H(F1)=1, H(SF1F2)=0
    assert conditional_mutual_information(ghz_state(2), ["S"], ["F2"], ["F1"]) == pytest.approx(1.0, abs=1e-12)
    # B decoupled from a correlated A-C pair
    dec = QState(HilbertSpace.qubits("A", "C", "B"), rho=np.kron(random_density(4, 6), random_density(2, 7)))
    assert conditional_mutual_information(dec, ["A"], ["B"], ["C"]) == pytest.approx(0, abs=1e-12)
    with pytest.raises(ArgumentError):
        conditional_mutual_information(dec, ["A"], ["B"], ["B"])


def test_measure_and_condition_examples():
    b = PointerBasis.computational(SubsystemLabel("A", 2))
    e = measure_and_condition(BELL, b, ["B"])
    assert np.allclose(e.probs, [0.5, 0.5])
    assert np.allclose(e.states[0].rho, np.diag([1, 0]))
    assert np.allclose(e.states[1].rho, np.diag([0, 1]))
    tau = random_density(2, 8)
    prod = QState(AB, rho=np.kron(random_density(2, 9), tau))
    assert all(np.allclose(s.rho, tau) for s in measure_and_condition(prod, b, ["B"]).states)
    g = ghz_state(8)
    e = measure_and_condition(g, PointerBasis.computational(SubsystemLabel("S", 2)), ["F1", "F2", "F3"])
    assert np.allclose(e.probs, [0.5, 0.5])
    assert np.allclose(np.diag(e.states[0].rho)[[0, 7]], [1, 0])
    assert np.allclose(np.diag(e.states[1].rho)[[0, 7]], [0, 1])


def test_measure_drops_zero_probability_outcomes():
    st_ = QState(AB, ket=[1, 0, 0, 0])
    e = measure_and_condition(st_, PointerBasis.computational(SubsystemLabel("A", 2)), ["B"])
    assert len(e) == 1


def test_holevo_examples():
    q = HilbertSpace.qubits("X")
    k0, k1, kp = QState(q, ket=[1, 0]), QState(q, ket=[0, 1]), QState(q, ket=PLUS)
    assert holevo_of_ensemble(Ensemble.of([0.5, 0.5], [k0, k1])) == pytest.approx(1.0)
    assert holevo_of_ensemble(Ensemble.of([0.5, 0.5], [kp, kp])) == pytest.approx(0, abs=1e-12)
    # mixture eigenvalues (1 +- 1/sqrt 2)/2, members pure
    oracle = binary_entropy((1 + 1 / math.sqrt(2)) / 2)
    assert holevo_of_ensemble(Ensemble.of([0.5, 0.5], [k0, kp])) == pytest.approx(oracle, abs=1e-12)
    assert oracle == pytest.approx(0.600876, abs=1e-6)


def test_holevo_pointer_examples():
    g = ghz_state(8)
    b = PointerBasis.computational(SubsystemLabel("S", 2))
    assert holevo_pointer(g, b, ["F5"]) == pytest.approx(1.0)
    prod = product_state([QState(HilbertSpace.qubits("S"), ket=PLUS), QState(HilbertSpace.qubits("F1"), ket=[1, 0])])
    assert holevo_pointer(prod, b, ["F1"]) == pytest.approx(0, abs=1e-12)
    frags = fragment_ids(8)
    for ell in range(1, 9):
        vals = [holevo_pointer(g, b, list(c)) for c in itertools.combinations(frags, ell)]
        assert np.mean(vals) >= (1 - 0.1) * 1.0


def test_accessible_j_bell_and_cq():
    assert accessible_J(BELL, ["B"], ["A"]).optimum == pytest.approx(1.0, abs=1e-9)
    b = PointerBasis.computational(SubsystemLabel("S", 2))
    f = HilbertSpace.qubits("F")
    cq = cq_state([0.3, 0.7], b, [QState(f, rho=random_density(2, 1)), QState(f, rho=random_density(2, 2))])
    assert accessible_J(cq, ["S"], ["F"]).optimum == pytest.approx(mutual_information(cq, ["S"], ["F"]), abs=1e-8)


def _grid_accessible(rho: np.ndarray, n: int = 200) -> float:
    """max over (theta, phi) of I(A : outcome of measuring B along that axis), by brute force."""
    best = 0.0
    t = rho.reshape(2, 2, 2, 2)
    h_a = _h(np.linalg.eigvalsh(np.einsum("abcb->ac", t)))
    for theta in np.linspace(0, math.pi, n):
        for phi in np.linspace(0, 2 * math.pi, n, endpoint=False):
            v0 = np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)])
            v1 = np.array([-np.exp(-1j * phi) * math.sin(theta / 2), math.cos(theta / 2)])
            cond = 0.0
            for v in (v0, v1):
                blk = np.einsum("m,amcn,n->ac", v.conj(), t, v)
                p = blk.trace().real
                if p > 1e-14:
                    cond += p * _h(np.linalg.eigvalsh(blk / p))
            best = max(best, h_a - cond)
    return best


def test_accessible_j_werner_against_grid():
    p = 0.5
    psi_m = np.array([0, 1, -1, 0]) / math.sqrt(2)
    w = p * np.outer(psi_m, psi_m) + (1 - p) * np.eye(4) / 4
    st_ = QState(AB, rho=w)
    oracle = _grid_accessible(w)
    assert accessible_J(st_, ["B"], ["A"]).optimum == pytest.approx(oracle, abs=1e-4)


def test_accessible_j_generic_state_against_grid():
    rho = random_density(4, 21, rank=2)
    res = accessible_J(QState(AB, rho=rho), ["B"], ["A"])
    oracle = _grid_accessible(rho, 120)
    assert res.optimum >= oracle - 1e-9
    assert res.optimum == pytest.approx(oracle, abs=1e-3)


def test_accessible_j_capacity():
    sp = HilbertSpace.qubits("S", "F1", "F2", "F3", "F4")
    st_ = QState(sp, ket=random_ket(32, 1))
    with pytest.raises(CapacityError):
        accessible_J(st_, ["F1", "F2", "F3", "F4"], ["S"])


def test_discord_examples():
    assert discord(BELL, ["B"], ["A"]) == pytest.approx(1.0, abs=1e-9)
    b = PointerBasis.computational(SubsystemLabel("S", 2))
    f = HilbertSpace.qubits("F")
    cq = cq_state([0.5, 0.5], b, [QState(f, ket=[1, 0]), QState(f, ket=PLUS)])
    assert discord(cq, ["S"], ["F"]) == pytest.approx(0, abs=1e-6)
    sp = HilbertSpace.qubits("S", "E1", "E2")
    psi = QState(sp, ket=random_ket(8, 3))
    assert discord(psi, ["E1", "E2"], ["S"]) == pytest.approx(entropy(psi, ["S"]), abs=1e-6)


def test_avg_fragmentary_discord_examples():
    assert avg_fragmentary_discord(ghz_state(8), fragment_ids(8)) == pytest.approx(0, abs=1e-6)
    s = QState(HilbertSpace.qubits("S"), rho=random_density(2, 4))
    frags = [QState(HilbertSpace.qubits(f), rho=random_density(2, 5 + i)) for i, f in enumerate(fragment_ids(3))]
    assert avg_fragmentary_discord(product_state([s] + frags), fragment_ids(3)) == pytest.approx(0, abs=1e-6)


def test_avg_fragmentary_discord_equal_copies():
    # every S-F_i pair has the same reduced state
    sp = HilbertSpace.qubits("S", "F1", "F2", "F3")
    a, b = np.array([1, 0]), np.array([0.6, 0.8])
    psi = (np.kron([1, 0], np.kron(np.kron(a, a), a)) + np.kron([0, 1], np.kron(np.kron(b, b), b))) / math.sqrt(2)
    st_ = QState.from_ket(sp, psi, normalize=True)
    single = discord(st_, ["F1"], ["S"])
    assert avg_fragmentary_discord(st_, fragment_ids(3)) == pytest.approx(single, abs=1e-8)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 8))
def test_strong_subadditivity(seed, rank):
    st_ = QState(HilbertSpace.qubits("A", "B", "C"), rho=random_density(8, seed, rank))
    assert conditional_mutual_information(st_, ["A"], ["B"], ["C"]) >= -1e-9


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_data_processing(seed):
    g = rng_for(seed, "tests/dpi")
    st_ = QState(AB, rho=random_density(4, seed))
    ch = random_channel(2, 2, int(g.integers(1, 4)), g)
    assert mutual_information(apply(ch, st_, ["B"]), ["A"], ["B"]) <= mutual_information(st_, ["A"], ["B"]) + 1e-9


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_chain_rule(seed):
    sp = HilbertSpace.qubits("S", "F1", "F2", "F3")
    st_ = QState(sp, ket=random_ket(16, seed))
    fk, fl = ["F1"], ["F2", "F3"]
    lhs = mutual_information(st_, ["S"], fk + fl) - mutual_information(st_, ["S"], fk)
    assert lhs == pytest.approx(conditional_mutual_information(st_, ["S"], fl, fk), abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_optimizer_bounds(seed):
    st_ = QState(AB, rho=random_density(4, seed))
    res = accessible_J(st_, ["B"], ["A"], OptimizerConfig(starts=8))
    i = mutual_information(st_, ["A"], ["B"])
    assert -1e-12 <= res.optimum <= i + 1e-9
    assert i - res.optimum >= -1e-6
    # the optimum is at least the value of the reference-basis measurement
    ref = holevo_pointer(st_, PointerBasis.computational(SubsystemLabel("B", 2)), ["A"])
    assert res.optimum >= ref - 1e-12


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 4))
def test_holevo_below_shannon(seed, size):
    g = rng_for(seed, "tests/holevo")
    q = HilbertSpace.qubits("X")
    probs = g.dirichlet(np.ones(size))
    e = Ensemble.of(probs, [QState(q, rho=random_density(2, seed + k)) for k in range(size)])
    assert -1e-12 <= holevo_of_ensemble(e) <= shannon(probs) + 1e-9


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_pure_bipartite_discord(seed):
    sp = HilbertSpace.qubits("S", "E")
    psi = QState(sp, ket=random_ket(4, seed))
    h = entropy(psi, ["S"])
    assert mutual_information(psi, ["S"], ["E"]) == pytest.approx(2 * h, abs=1e-9)
    for measured, other in ((["E"], ["S"]), (["S"], ["E"])):
        d, res = discord(psi, measured, other, return_result=True)
        assert d == pytest.approx(h, abs=1e-6)
        assert res.optimum == pytest.approx(h, abs=1e-6)
