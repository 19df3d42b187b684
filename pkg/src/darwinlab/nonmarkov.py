"""Collision and spin-star models, ancilla constructions, information-backflow
series, and the backflow bound checks.

Dynamics act on state vectors over (A?, S, F1..FN). Each S-fragment
collision is a controlled phase in the fragment's Hadamard frame,

    U_SF = |0><0| (x) 1 + |1><1| (x) H P(theta) H,

so the S computational basis is exactly conserved (the pointer basis stays
fixed) and theta = pi copies the pointer into a fresh |0> fragment.
Intra-environment memory comes from partial swaps exp(i g SWAP) between a
fragment and its right neighbour, cyclically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import tensor as tn
from .channels import partial_swap
from .darwinism import crossing_size, pip_scan, plateau_detect
from .errors import ArgumentError, DegenerateInputError
from .infotheory import (OptimizerConfig, conditional_mutual_information, discord, holevo_pointer,
                         mutual_information, pointer_entropy)
from .states import (PointerBasis, QState, ancilla_extend_maxent, env_space, fragment_ids,
                     measured_ancilla_state)
from .tensor import HilbertSpace, SubsystemLabel

MODEL_KINDS = ("collision", "spin_star")
ANCILLA_MODES = ("none", "maxent", "measured")
#: Accepts g typed as a rounded pi/2 (e.g. 1.5708).
G_SLACK = 1e-4

_H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)


@dataclass(frozen=True)
class ModelConfig:
    """One stroboscopic model run.

    ``se_coupling`` is the controlled-phase angle per collision; ``g`` the
    partial-swap angle between neighbouring fragments (0 disables memory).
    ``amplitudes`` overrides the default |+> initial system state.
    """

    kind: str = "collision"
    n_env: int = 6
    se_coupling: float = math.pi
    g: float = 0.0
    steps: int = 6
    amplitudes: Optional[tuple] = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ArgumentError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        if self.n_env < 1:
            raise ArgumentError("n_env must be at least 1")
        if self.steps < 0:
            raise ArgumentError("steps must be non-negative")
        if not 0 <= self.g <= math.pi / 2 + G_SLACK:
            raise ArgumentError(f"g={self.g} outside [0, pi/2]")


@dataclass
class Trajectory:
    times: list
    states: list
    model: ModelConfig
    ancilla: str = "none"

    @property
    def final(self) -> QState:
        return self.states[-1]

    @property
    def fragments(self) -> list[str]:
        return fragment_ids(self.model.n_env)


@dataclass(frozen=True)
class BackflowSeries:
    times: tuple
    trace_distance: tuple
    cmi: tuple
    blp_total: float
    cmi_backflow_total: float


def coupling_unitary(theta: float) -> np.ndarray:
    """Controlled phase (S control) in the fragment's Hadamard frame."""
    f = _H @ np.diag([1, np.exp(1j * theta)]) @ _H
    u = np.eye(4, dtype=complex)
    u[2:, 2:] = f
    return u


def _initial_system(cfg: ModelConfig) -> np.ndarray:
    a = np.ones(2, dtype=complex) if cfg.amplitudes is None else np.asarray(cfg.amplitudes, dtype=complex)
    return a / np.linalg.norm(a)


def initial_state(cfg: ModelConfig, system_state=None) -> QState:
    """System state (default |+>, or ``amplitudes``) times |0...0> fragments."""
    space = HilbertSpace.qubits("S") + env_space(cfg.n_env)
    s = _initial_system(cfg) if system_state is None else np.asarray(system_state, dtype=complex)
    env = np.zeros(2**cfg.n_env, dtype=complex)
    env[0] = 1
    if s.ndim == 1:
        return QState(space, ket=np.kron(s, env))
    return QState(space, rho=np.kron(s, np.outer(env, env)))


def _evolve(x: np.ndarray, space: HilbertSpace, op: np.ndarray, labels) -> np.ndarray:
    return tn.apply_local(op, x, space, labels, both_sides=x.ndim == 2)


def step_schedule(cfg: ModelConfig, t: int) -> list[tuple[str, list[str]]]:
    """Gate list for step ``t`` as (gate, labels) pairs."""
    frags = fragment_ids(cfg.n_env)
    n = cfg.n_env
    if cfg.kind == "collision":
        i = t % n
        gates = [("couple", ["S", frags[i]])]
        if cfg.g > 0 and n > 1:
            gates.append(("swap", [frags[i], frags[(i + 1) % n]]))
        return gates
    gates = [("couple", ["S", f]) for f in frags]
    if cfg.g > 0 and n > 1:
        pairs = range(n) if n > 2 else range(1)
        gates += [("swap", [frags[i], frags[(i + 1) % n]]) for i in pairs]
    return gates


def _evolve_state(cfg: ModelConfig, state: QState):
    couple = coupling_unitary(cfg.se_coupling)
    swap = partial_swap(cfg.g)
    space = state.space
    x = state.ket if state.ket is not None else state.rho
    out = [QState(space, ket=x) if x.ndim == 1 else QState(space, rho=x)]
    for t in range(cfg.steps):
        for gate, labels in step_schedule(cfg, t):
            x = _evolve(x, space, couple if gate == "couple" else swap, labels)
        out.append(QState(space, ket=x) if x.ndim == 1 else QState(space, rho=x))
    return out


def run_model(cfg: ModelConfig, with_ancilla: str = "none", basis: Optional[PointerBasis] = None,
              system_state=None) -> Trajectory:
    """Run the model; the ancilla (if any) sits first and is never touched by the dynamics."""
    if with_ancilla not in ANCILLA_MODES:
        raise ArgumentError(f"unknown ancilla mode {with_ancilla!r}; expected one of {ANCILLA_MODES}")
    psi0 = initial_state(cfg, system_state)
    if with_ancilla == "maxent":
        psi0 = ancilla_extend_maxent(psi0.space)
    elif with_ancilla == "measured":
        basis = basis or PointerBasis.computational(SubsystemLabel("S", 2))
        psi0 = measured_ancilla_state(psi0, basis)
    states = _evolve_state(cfg, psi0)
    return Trajectory(list(range(cfg.steps + 1)), states, cfg, with_ancilla)


def _positive_increments(x: Sequence[float]) -> float:
    d = np.diff(np.asarray(x, dtype=float))
    return float(np.sum(d[d > 0]))


def blp_series(cfg: ModelConfig, state_pair=None) -> BackflowSeries:
    """Trace distance between the S marginals of two runs; BLP total = sum of its increases."""
    if state_pair is None:
        state_pair = (np.array([1, 1]) / math.sqrt(2), np.array([1, -1]) / math.sqrt(2))
    r1 = run_model(cfg, system_state=state_pair[0])
    r2 = run_model(cfg, system_state=state_pair[1])
    d = [0.5 * tn.trace_norm(a.marginal(["S"]) - b.marginal(["S"])) for a, b in zip(r1.states, r2.states)]
    return BackflowSeries(tuple(r1.times), tuple(d), (), _positive_increments(d), 0.0)


def cmi_backflow_series(cfg: ModelConfig, ancilla_mode: str = "maxent", e_sub=None) -> BackflowSeries:
    """I(A:E_sub|S) along an ancilla-extended run.

    ``cmi_backflow_total`` sums the decreases of the series: a drop of
    I(A:E|S) is correlation with A flowing back from E into S.
    """
    if ancilla_mode == "none":
        raise ArgumentError("cmi backflow needs an ancilla")
    traj = run_model(cfg, ancilla_mode)
    e_sub = traj.fragments if e_sub is None else tn.label_ids(e_sub)
    cmi = [conditional_mutual_information(s, ["A"], e_sub, ["S"]) if e_sub else 0.0 for s in traj.states]
    back = _positive_increments([-c for c in cmi])
    return BackflowSeries(tuple(traj.times), (), tuple(cmi), 0.0, back)


def good_decoherence_factor(state: QState, basis: PointerBasis) -> float:
    """Largest off-diagonal modulus of rho_S in the pointer basis."""
    rho_s = state.marginal([basis.subsystem.id])
    m = basis.vectors.conj().T @ rho_s @ basis.vectors
    off = np.abs(m - np.diag(np.diag(m)))
    return float(off.max()) if off.size else 0.0


def branch_coherence(state: QState, basis: PointerBasis, block) -> float:
    """Largest trace norm of an off-diagonal pointer block of rho_{S,block}."""
    sid = basis.subsystem.id
    block = tn.label_ids(block)
    m = state.marginal([sid] + block)
    d = basis.dim
    dr = m.shape[0] // d
    t = np.einsum("mk,monp,nl->kolp", basis.vectors.conj(), m.reshape(d, dr, d, dr), basis.vectors)
    return max((tn.trace_norm(t[k, :, l, :].reshape(dr, dr)) if dr else 0.0)
               for k in range(d) for l in range(d) if k != l)


# --------------------------------------------------------------------------- #
# Bound checks
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class Bound22Row:
    l: int
    lhs: float
    rhs: float
    applicable: bool
    ok: Optional[bool]


@dataclass(frozen=True)
class Bound22Report:
    delta: float
    delta_prime: float
    f_delta_size: int
    h_s: float
    discord_block: float
    optimizer_gap: float
    rows: tuple
    role_map: dict = field(default_factory=lambda: {"A*": "S", "S*": "F_1", "E*_sub": "F_l block"})

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows if r.applicable)


def bound22_check(state: QState, fragments, delta: float, delta_prime: Optional[float] = None,
                  f_delta_size: Optional[int] = None, opt: Optional[OptimizerConfig] = None,
                  basis: Optional[PointerBasis] = None, l_values: Optional[Sequence[int]] = None,
                  tol: float = 1e-6) -> Bound22Report:
    """Check I(S:F_l|F_1) <= (delta' + delta) H_S + D(S : measured F_{#F_delta}).

    The backflow quantity I(A*:E*_sub|S*) is evaluated under the role map
    A* -> S, S* -> F_1, E*_sub -> the next l fragments. Rows with
    l > N - 2 #F_delta fall outside the validity region and are marked not
    applicable. ``delta_prime`` defaults to 1 - I(S:F_1)/H_S.
    """
    frags = [tn.label_ids(f) for f in fragments]
    n = len(frags)
    basis = basis or PointerBasis.computational(state.space.label("S"))
    sid = basis.subsystem.id
    h_s = pointer_entropy(state, basis)
    if f_delta_size is None:
        curve = pip_scan(state, frags, basis=basis)
        if delta > 0:
            rep = plateau_detect(curve, delta)
            f_delta_size = rep.f_delta_size if rep.plateau_found else None
        else:
            f_delta_size = crossing_size(curve, 0.0)
        if f_delta_size is None:
            raise DegenerateInputError("no plateau at this delta; the bound needs #F_delta")
    if delta_prime is None:
        delta_prime = 1 - mutual_information(state, [sid], frags[0]) / h_s
    block = [x for f in frags[:f_delta_size] for x in f]
    d_block, res = discord(state, block, [sid], opt, return_result=True)
    rhs = (delta_prime + delta) * h_s + d_block
    slack = tol + res.gap_estimate
    l_max = n - 2 * f_delta_size
    rows = []
    for l in (l_values if l_values is not None else range(1, n)):
        if l < 1 or 1 + l > n:
            continue
        applicable = l <= l_max
        if not applicable:
            rows.append(Bound22Row(l, float("nan"), rhs, False, None))
            continue
        fl = [x for f in frags[1:1 + l] for x in f]
        lhs = conditional_mutual_information(state, [sid], fl, frags[0])
        rows.append(Bound22Row(l, lhs, rhs, True, lhs <= rhs + slack))
    return Bound22Report(delta, delta_prime, f_delta_size, h_s, d_block, res.gap_estimate, tuple(rows))


@dataclass(frozen=True)
class Bound29Report:
    """Identity chain for the measured-ancilla setup.

    (a) I(AS:E_sub) on psi' equals I(S:E_sub) on psi. (b) I(A:E_sub|S) on
    psi' equals I(S:E_sub) - chi(pointer S : E_sub) on psi; this holds for
    any dynamics that commutes with the pointer projectors. ``b_discord_ok``
    compares it with the optimized discord D(S-measured : E_sub), which
    coincides only when the pointer measurement is optimal, so it is asserted
    under good decoherence and left None otherwise. (c) D is small under
    good decoherence.
    """

    i_as_e: float
    i_s_e: float
    cmi: float
    holevo: float
    discord: float
    optimizer_gap: float
    decoherence_factor: float
    block_coherence: float
    a_ok: bool
    b_ok: bool
    b_discord_ok: Optional[bool]
    c_ok: Optional[bool]

    @property
    def ok(self) -> bool:
        return self.a_ok and self.b_ok and self.b_discord_ok is not False and self.c_ok is not False


def bound29_check(cfg: ModelConfig, e_sub=None, opt: Optional[OptimizerConfig] = None,
                  basis: Optional[PointerBasis] = None, decoherence_tol: float = 1e-9,
                  discord_tol: float = 1e-3) -> Bound29Report:
    """Run the model with and without a measured ancilla and check the chain on the final states.

    ``e_sub`` defaults to the first N-1 fragments. Sub-check (c) is asserted
    only when the good-decoherence factor is at most ``decoherence_tol``;
    otherwise it is reported as None alongside the factor.
    """
    basis = basis or PointerBasis.computational(SubsystemLabel("S", 2))
    plain = run_model(cfg).final
    extended = run_model(cfg, "measured", basis).final
    frags = fragment_ids(cfg.n_env)
    e_sub = frags[:-1] if e_sub is None else tn.label_ids(e_sub)
    sid = basis.subsystem.id
    factor = good_decoherence_factor(plain, basis)
    if not e_sub:
        return Bound29Report(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, factor, 0.0, True, True, True, True)
    i_as_e = mutual_information(extended, ["A", sid], e_sub)
    i_s_e = mutual_information(plain, [sid], e_sub)
    cmi = conditional_mutual_information(extended, ["A"], e_sub, [sid])
    chi = holevo_pointer(plain, basis, e_sub)
    d, res = discord(plain, [sid], e_sub, opt, return_result=True)
    decohered = factor <= decoherence_tol
    a_ok = abs(i_as_e - i_s_e) <= 1e-9
    b_ok = abs(cmi - (i_s_e - chi)) <= 1e-9
    b_discord_ok = (abs(cmi - d) <= 1e-6 + res.gap_estimate) if decohered else None
    c_ok = (d <= discord_tol) if decohered else None
    return Bound29Report(i_as_e, i_s_e, cmi, chi, d, res.gap_estimate, factor,
                         branch_coherence(plain, basis, e_sub), a_ok, b_ok, b_discord_ok, c_ok)


# --------------------------------------------------------------------------- #
# Sweeps
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class SweepRow:
    g: float
    r_delta: float
    f_delta_size: Optional[int]
    blp_total: float
    cmi_backflow_total: float
    bound22_ok: Optional[bool] = None
    bound29_ok: Optional[bool] = None


def sweep_row(cfg: ModelConfig, delta: float, checks: Sequence[str] = (),
              opt: Optional[OptimizerConfig] = None) -> SweepRow:
    final = run_model(cfg).final
    frags = fragment_ids(cfg.n_env)
    rep = plateau_detect(pip_scan(final, frags), delta)
    blp = blp_series(cfg).blp_total
    back = cmi_backflow_series(cfg, "maxent").cmi_backflow_total
    b22 = b29 = None
    if "bound22" in checks:
        b22 = bound22_check(final, frags, delta, f_delta_size=rep.f_delta_size, opt=opt).ok \
            if rep.plateau_found else None
    if "bound29" in checks:
        b29 = bound29_check(cfg, opt=opt).ok
    return SweepRow(cfg.g, rep.redundancy, rep.f_delta_size, blp, back, b22, b29)


def redundancy_vs_nonmarkovianity_sweep(cfg_base: ModelConfig, g_values: Sequence[float], delta: float = 0.1,
                                        checks: Sequence[str] = (), opt: Optional[OptimizerConfig] = None,
                                        executor=None) -> list[SweepRow]:
    """R_delta and both backflow totals for each intra-environment coupling g."""
    cfgs = [replace(cfg_base, g=float(g)) for g in g_values]
    run = lambda c: sweep_row(c, delta, checks, opt)  # noqa: E731
    if executor is None:
        return [run(c) for c in cfgs]
    return list(executor.map(run, cfgs))
