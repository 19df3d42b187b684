"""Entropic functionals in bits: entropy, (conditional) mutual information,
Holevo quantities, measurement-optimized classical correlation and discord.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from . import tensor as tn
from .errors import ArgumentError, CapacityError
from .states import Ensemble, PointerBasis, QState, haar_unitary, rng_for

#: Eigenvalues at or below this are dropped from entropy sums (0 log 0 = 0).
ENTROPY_TOL = 1e-13
#: Measurement outcomes with smaller probability are discarded before conditioning.
ZERO_PROB = 1e-14


def entropy_of_spectrum(eigs) -> float:
    w = np.asarray(eigs, dtype=float)
    w = w[w > ENTROPY_TOL]
    return float(-np.sum(w * np.log2(w)))


def shannon(p) -> float:
    return entropy_of_spectrum(p)


def binary_entropy(x: float) -> float:
    """h(x) = -x log2 x - (1-x) log2(1-x)."""
    return shannon([x, 1 - x])


def entropy(state, labels=None) -> float:
    """Von Neumann entropy in bits of ``state`` (or its reduction onto ``labels``).

    Accepts a :class:`QState` or a bare density matrix.
    """
    if isinstance(state, QState):
        return entropy_of_spectrum(state.spectrum(labels))
    if labels is not None:
        raise ArgumentError("labels need a QState")
    return entropy_of_spectrum(tn.eigvalsh(state))


def _disjoint(*parts) -> list[list[str]]:
    out = [tn.label_ids(p) for p in parts]
    seen: set[str] = set()
    for p in out:
        if seen.intersection(p):
            raise ArgumentError(f"parts overlap: {out}")
        seen.update(p)
    return out


def mutual_information(state: QState, part_a, part_b) -> float:
    """I(A:B) = H(A) + H(B) - H(AB)."""
    a, b = _disjoint(part_a, part_b)
    return entropy(state, a) + entropy(state, b) - entropy(state, a + b)


def conditional_mutual_information(state: QState, part_a, part_b, part_c) -> float:
    """I(A:B|C) = H(AC) + H(BC) - H(C) - H(ABC)."""
    a, b, c = _disjoint(part_a, part_b, part_c)
    return entropy(state, a + c) + entropy(state, b + c) - entropy(state, c) - entropy(state, a + b + c)


def pointer_probabilities(state: QState, basis: PointerBasis) -> np.ndarray:
    rho_s = state.marginal([basis.subsystem.id])
    return np.real(np.einsum("mk,mn,nk->k", basis.vectors.conj(), rho_s, basis.vectors))


def pointer_entropy(state: QState, basis: PointerBasis) -> float:
    """Shannon entropy of the pointer statistics: the entropy of the dephased marginal."""
    return shannon(pointer_probabilities(state, basis))


def measure_and_condition(state: QState, basis: PointerBasis, rest) -> Ensemble:
    """Measure ``basis`` and return {p_s, rho_{rest|s}}, dropping p_s < 1e-14."""
    sid = basis.subsystem.id
    rest = tn.label_ids(rest)
    _disjoint([sid], rest)
    m = state.marginal([sid] + rest)
    d = basis.dim
    dr = m.shape[0] // d
    t = m.reshape(d, dr, d, dr)
    blocks = np.einsum("mk,monp,nk->kop", basis.vectors.conj(), t, basis.vectors)
    space = state.space.sub(rest)
    probs, states = [], []
    for blk in blocks:
        p = float(np.real(np.trace(blk)))
        if p < ZERO_PROB:
            continue
        probs.append(p)
        states.append(QState(space, rho=blk / p))
    probs = np.array(probs)
    return Ensemble.of(probs / probs.sum(), states)


def holevo_of_ensemble(e: Ensemble) -> float:
    """chi = H(sum p rho) - sum p H(rho)."""
    return entropy(e.average()) - sum(p * entropy(s) for p, s in e.entries)


def holevo_pointer(state: QState, basis: PointerBasis, fragment) -> float:
    return holevo_of_ensemble(measure_and_condition(state, basis, fragment))


# --------------------------------------------------------------------------- #
# Measurement optimization
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class OptimizerConfig:
    """Multi-start coordinate descent over rank-1 projective measurements.

    Start 0 is the reference (computational) basis; the others are Haar random.
    Each start is refined by sweeps of one-parameter Givens rotations until a
    sweep improves by less than ``tol`` or ``max_iter`` sweeps have run.
    """

    starts: int = 32
    max_iter: int = 500
    tol: float = 1e-9
    dim_cap: int = 8
    seed: int = 0
    top: int = 5
    early_exit: bool = True


@dataclass(frozen=True)
class MeasurementOptResult:
    optimum: float
    basis: PointerBasis
    starts_used: int
    converged: bool
    gap_estimate: float


class _ConditionalEntropyModel:
    """J(other : outcome) for rank-1 projective measurements on ``measured``."""

    def __init__(self, state: QState, measured: list[str], other: list[str]):
        self.dm = state.space.dim_of(measured)
        m = state.marginal(measured + other)
        self.do = m.shape[0] // self.dm
        self.t = m.reshape(self.dm, self.do, self.dm, self.do)
        self.h_other = entropy_of_spectrum(np.linalg.eigvalsh(np.einsum("mamb->ab", self.t)))

    def value(self, v: np.ndarray) -> float:
        blocks = np.einsum("mk,monp,nk->kop", v.conj(), self.t, v)
        mu = np.linalg.eigvalsh(blocks)
        p = mu.sum(axis=1)
        mu = mu[mu > ENTROPY_TOL]
        p = p[p > ENTROPY_TOL]
        cond = -np.sum(mu * np.log2(mu)) + np.sum(p * np.log2(p))
        return float(self.h_other - cond)

    @property
    def upper_bound(self) -> float:
        return min(self.h_other, math.log2(self.dm))


def _givens(d: int, i: int, j: int, t: float, imaginary: bool) -> np.ndarray:
    g = np.eye(d, dtype=complex)
    c, s = math.cos(t), math.sin(t)
    g[i, i] = g[j, j] = c
    if imaginary:
        g[i, j] = g[j, i] = 1j * s
    else:
        g[i, j], g[j, i] = -s, s
    return g


def _refine(model: _ConditionalEntropyModel, v: np.ndarray, cfg: OptimizerConfig):
    d = model.dm
    coords = [(i, j, im) for i in range(d) for j in range(i + 1, d) for im in (False, True)]
    best = model.value(v)
    for _ in range(cfg.max_iter):
        start = best
        for i, j, im in coords:
            res = minimize_scalar(lambda t: -model.value(v @ _givens(d, i, j, t, im)),
                                  bounds=(-math.pi / 4, math.pi / 4), method="bounded",
                                  options={"xatol": 1e-10})
            if -res.fun > best:
                v = v @ _givens(d, i, j, res.x, im)
                best = -res.fun
        if best - start < cfg.tol:
            return v, best, True
    return v, best, False


def accessible_J(state: QState, measured, other, opt: Optional[OptimizerConfig] = None) -> MeasurementOptResult:
    """Maximize I(other : outcome) over rank-1 projective measurements on ``measured``.

    ``measured`` must be a single factor or a block of factors; for a block
    the measurement acts on the joint space and the returned basis is tagged
    with a synthetic label joining the factor ids.
    """
    opt = opt or OptimizerConfig()
    measured, other = _disjoint(measured, other)
    dm = state.space.dim_of(measured)
    if dm > opt.dim_cap:
        raise CapacityError(f"measured dimension {dm} exceeds optimization cap {opt.dim_cap}")
    model = _ConditionalEntropyModel(state, measured, other)
    values, best_v, best_val, best_conv, used = [], None, -np.inf, False, 0
    rng = rng_for(opt.seed, "accessible_J")
    for k in range(opt.starts):
        v0 = np.eye(dm, dtype=complex) if k == 0 else haar_unitary(dm, rng)
        v, val, conv = _refine(model, v0, opt) if dm > 1 else (v0, model.value(v0), True)
        used += 1
        values.append(val)
        if val > best_val + 1e-12:
            best_v, best_val, best_conv = v, val, conv
        if opt.early_exit and best_val >= model.upper_bound - 1e-12:
            break
    top = sorted(values, reverse=True)[: opt.top]
    label = tn.SubsystemLabel("".join(measured) if len(measured) > 1 else measured[0], dm)
    q, _ = np.linalg.qr(best_v)
    basis = PointerBasis(label, q)
    return MeasurementOptResult(optimum=float(best_val), basis=basis, starts_used=used,
                                converged=best_conv, gap_estimate=float(top[0] - top[-1]))


def discord(state: QState, measured, other, opt: Optional[OptimizerConfig] = None, *,
            return_result: bool = False):
    """D = I(measured:other) - J(other : measured outcome).

    The optimizer may under-maximize J, so the value is an upper bound on the
    true (projective) discord.
    """
    res = accessible_J(state, measured, other, opt)
    d = mutual_information(state, measured, other) - res.optimum
    return (d, res) if return_result else d


def avg_fragmentary_discord(state: QState, fragments: Sequence, opt: Optional[OptimizerConfig] = None,
                            system: str = "S", *, return_gap: bool = False):
    """Mean of D(S : measured fragment) over the given fragments."""
    frags = [tn.label_ids(f) for f in fragments]
    _disjoint(*frags)
    vals, gap = [], 0.0
    for f in frags:
        d, res = discord(state, f, [system], opt, return_result=True)
        vals.append(d)
        gap = max(gap, res.gap_estimate)
    mean = float(np.mean(vals))
    return (mean, gap) if return_gap else mean
