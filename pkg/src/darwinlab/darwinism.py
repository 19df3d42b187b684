"""Partial-information scans, plateau detection, redundancy and the bound
checks on fragmentary discord and conditional mutual information.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import tensor as tn
from .errors import ArgumentError, DegenerateInputError
from .infotheory import (OptimizerConfig, accessible_J, avg_fragmentary_discord, conditional_mutual_information,
                         holevo_pointer, mutual_information, pointer_entropy)
from .states import PointerBasis, QState, rng_for

QUANTITIES = ("symmetric_I", "holevo_pointer", "accessible_J")
#: Float slack on the plateau threshold so exact-arithmetic ties count as crossings.
THRESHOLD_SLACK = 1e-12


@dataclass(frozen=True)
class SamplingConfig:
    exhaustive_cap: int = 10_000
    n_subsets: int = 200
    seed: int = 0


@dataclass(frozen=True)
class PIPPoint:
    ell: int
    mean_I: float
    std_I: float
    n_subsets_sampled: int


@dataclass(frozen=True)
class PIPCurve:
    n_fragments: int
    points: tuple
    h_s: float
    quantity: str
    single_fragment_values: tuple = ()

    @property
    def ells(self) -> list[int]:
        return [p.ell for p in self.points]

    @property
    def means(self) -> np.ndarray:
        return np.array([p.mean_I for p in self.points])

    def mean_at(self, ell: int) -> float:
        return self.points[ell - 1].mean_I


@dataclass(frozen=True)
class DarwinReport:
    delta: float
    f_delta_size: Optional[int]
    redundancy: float
    per_fragment_deficits: tuple
    avg_deficit: float
    plateau_found: bool


@dataclass(frozen=True)
class DiscordBoundReport:
    lhs: float
    rhs10: float
    rhs11: Optional[float]
    ok: bool
    h_s: float
    delta: float
    optimizer_gap: float


@dataclass(frozen=True)
class CMIScalingReport:
    delta: float
    region: tuple
    max_cmi_bits: float
    bound_bits: float
    satisfied: Optional[bool]
    f_delta_size: Optional[int] = None
    orderings_tested: int = 0
    argmax: Optional[tuple] = None

    @property
    def applicable(self) -> bool:
        return self.satisfied is not None


def _fragments(fragments) -> list[list[str]]:
    frags = [tn.label_ids(f) for f in fragments]
    if not frags:
        raise ArgumentError("empty fragment list")
    flat = [x for f in frags for x in f]
    if len(set(flat)) != len(flat):
        raise ArgumentError("fragments overlap")
    return frags


def default_basis(state: QState, system: str = "S") -> PointerBasis:
    return PointerBasis.computational(state.space.label(system))


def _quantity_fn(quantity: str, state: QState, basis: PointerBasis, opt: Optional[OptimizerConfig]):
    sid = basis.subsystem.id
    if quantity == "symmetric_I":
        return lambda labels: mutual_information(state, [sid], labels)
    if quantity == "holevo_pointer":
        return lambda labels: holevo_pointer(state, basis, labels)
    if quantity == "accessible_J":
        return lambda labels: accessible_J(state, labels, [sid], opt).optimum
    raise ArgumentError(f"unknown quantity {quantity!r}; expected one of {QUANTITIES}")


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    # pairwise (numpy) summation keeps the result independent of fan-out order
    v = np.asarray(values, dtype=float)
    return float(np.mean(v)), float(np.std(v))


def pip_scan(state: QState, fragments, quantity: str = "symmetric_I", sampling: Optional[SamplingConfig] = None,
             basis: Optional[PointerBasis] = None, opt: Optional[OptimizerConfig] = None) -> PIPCurve:
    """Average the chosen information quantity over size-ell fragment subsets, ell = 1..N.

    Subsets are enumerated exhaustively when C(N, ell) is at most
    ``sampling.exhaustive_cap``, otherwise ``sampling.n_subsets`` random
    subsets are drawn from a seeded stream.
    """
    sampling = sampling or SamplingConfig()
    frags = _fragments(fragments)
    basis = basis or default_basis(state)
    fn = _quantity_fn(quantity, state, basis, opt)
    n = len(frags)
    points = []
    singles: tuple = ()
    for ell in range(1, n + 1):
        if math.comb(n, ell) <= sampling.exhaustive_cap:
            subsets = list(itertools.combinations(range(n), ell))
        else:
            rng = rng_for(sampling.seed, "pip_scan", ell)
            subsets = [tuple(sorted(rng.choice(n, ell, replace=False))) for _ in range(sampling.n_subsets)]
        values = [fn([x for i in sub for x in frags[i]]) for sub in subsets]
        if ell == 1 and len(subsets) == n:
            singles = tuple(values)
        mean, std = _mean_std(values)
        points.append(PIPPoint(ell, mean, std, len(subsets)))
    if not singles:
        singles = tuple(fn(f) for f in frags)
    return PIPCurve(n, tuple(points), pointer_entropy(state, basis), quantity, singles)


def plateau_detect(curve: PIPCurve, delta: float, robust: bool = False) -> DarwinReport:
    """First-crossing plateau detector.

    #F_delta is the smallest ell with mean >= (1 - delta) H_S, and the
    redundancy is N / #F_delta. The plateau counts as found when the crossing
    lies strictly before N/2 (R > 2) and the condition still holds at
    ell = ceil(N/2). For pure states the mean at N/2 is about H_S whatever the
    structure, so a crossing there carries no redundancy. ``robust``
    additionally requires the condition on all of [#F_delta, N - #F_delta].
    """
    if not 0 < delta < 1:
        raise ArgumentError("delta must lie in (0, 1)")
    if curve.h_s <= 0:
        raise DegenerateInputError("H_S = 0: the system holds no classical information to record")
    n = curve.n_fragments
    thr = (1 - delta) * curve.h_s - THRESHOLD_SLACK
    crossing = crossing_size(curve, delta)
    deficits = tuple(1 - v / curve.h_s for v in curve.single_fragment_values)
    avg = float(np.mean(deficits)) if deficits else float("nan")
    if crossing is None:
        return DarwinReport(delta, None, 0.0, deficits, avg, False)
    found = crossing < n / 2 and curve.mean_at(math.ceil(n / 2)) >= thr
    if robust:
        found = found and all(curve.mean_at(ell) >= thr for ell in range(crossing, max(crossing, n - crossing) + 1))
    return DarwinReport(delta, crossing, n / crossing, deficits, avg, bool(found))


def crossing_size(curve: PIPCurve, delta: float) -> Optional[int]:
    """Smallest ell whose mean reaches (1 - delta) H_S; delta = 0 asks for the full H_S."""
    thr = (1 - delta) * curve.h_s - THRESHOLD_SLACK
    return next((p.ell for p in curve.points if p.mean_I >= thr), None)


def discord_bound_check(state: QState, fragments, delta_i: Sequence[float], opt: Optional[OptimizerConfig] = None,
                        basis: Optional[PointerBasis] = None, f_delta_size: Optional[int] = None,
                        tol: float = 1e-6) -> DiscordBoundReport:
    """Average fragmentary discord against delta H_S and [1 - (1-delta) R/N] H_S.

    ``delta`` is the mean of ``delta_i``. The second bound applies only when
    #F_delta <= N/2; #F_delta is detected from a symmetric-I scan at that
    delta unless supplied.
    """
    frags = _fragments(fragments)
    basis = basis or default_basis(state)
    n = len(frags)
    if len(delta_i) != n:
        raise ArgumentError("need one deficit per fragment")
    delta = float(np.mean(delta_i))
    h_s = pointer_entropy(state, basis)
    lhs, gap = avg_fragmentary_discord(state, frags, opt, basis.subsystem.id, return_gap=True)
    rhs10 = delta * h_s
    if f_delta_size is None and delta < 1 and h_s > 0:
        f_delta_size = crossing_size(pip_scan(state, frags, basis=basis), max(delta, 0.0))
    rhs11 = None
    if f_delta_size is not None and f_delta_size <= n / 2:
        rhs11 = (1 - (1 - delta) * (n / f_delta_size) / n) * h_s
    bound = min(r for r in (rhs10, rhs11) if r is not None)
    return DiscordBoundReport(lhs, rhs10, rhs11, lhs <= bound + tol, h_s, delta, gap)


def cmi_scaling_check(state: QState, fragments, delta: float, k_range: Optional[Sequence[int]] = None,
                      l_range: Optional[Sequence[int]] = None, orderings: int = 8, seed: int = 0,
                      basis: Optional[PointerBasis] = None, f_delta_size: Optional[int] = None,
                      tol: float = 1e-9) -> CMIScalingReport:
    """Max of I(S:F_l|F_k) over k >= #F_delta, k + l <= N - #F_delta against 2 delta H_S.

    F_k is the first k fragments of an ordering and F_l the next l. The
    canonical ordering is always tested, plus ``orderings`` random ones.
    """
    frags = _fragments(fragments)
    basis = basis or default_basis(state)
    sid = basis.subsystem.id
    n = len(frags)
    h_s = pointer_entropy(state, basis)
    bound = 2 * delta * h_s
    if f_delta_size is None:
        rep = plateau_detect(pip_scan(state, frags, basis=basis), delta)
        f_delta_size = rep.f_delta_size if rep.plateau_found else None
    if f_delta_size is None:
        return CMIScalingReport(delta, (), float("nan"), bound, None)
    region = tuple((k, l) for k in range(f_delta_size, n + 1) for l in range(1, n + 1)
                   if k + l <= n - f_delta_size
                   and (k_range is None or k in k_range) and (l_range is None or l in l_range))
    if not region:
        return CMIScalingReport(delta, (), float("nan"), bound, None, f_delta_size)
    rng = rng_for(seed, "cmi_orderings")
    perms = [list(range(n))] + [list(rng.permutation(n)) for _ in range(orderings)]
    best, arg = -np.inf, None
    for oi, perm in enumerate(perms):
        for k, l in region:
            fk = [x for i in perm[:k] for x in frags[i]]
            fl = [x for i in perm[k:k + l] for x in frags[i]]
            v = conditional_mutual_information(state, [sid], fl, fk)
            if v > best:
                best, arg = v, (k, l, oi)
    return CMIScalingReport(delta, region, float(best), bound, best <= bound + tol, f_delta_size, len(perms), arg)
