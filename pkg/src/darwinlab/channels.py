"""Channels in Kraus form, approximate-CPTP deviations, continuity bounds,
Holevo monotonicity and Petz recovery.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import tensor as tn
from .errors import ArgumentError, DegenerateInputError, DegenerateSupportError, PreconditionError
from .infotheory import (binary_entropy, conditional_mutual_information, holevo_of_ensemble,
                         mutual_information)
from .states import Ensemble, QState, haar_unitary
from .tensor import HilbertSpace, SubsystemLabel

CHANNEL_TOL = 1e-9
#: Eigenvalue cutoff for the support pseudo-inverse in the Petz map.
PETZ_CUTOFF = 1e-12


@dataclass(frozen=True)
class Stinespring:
    """Environment presentation: X -> tr_env[U (X (x) |e><e|) U^dag]."""

    unitary: np.ndarray
    env_state: np.ndarray
    in_dim: int
    env_dim: int

    def kraus(self) -> list[np.ndarray]:
        u = np.asarray(self.unitary).reshape(self.in_dim, self.env_dim, self.in_dim, self.env_dim)
        iso = np.einsum("aebf,f->aeb", u, np.asarray(self.env_state, dtype=complex))
        return [iso[:, k, :] for k in range(self.env_dim)]


@dataclass(frozen=True)
class Channel:
    """CPTP map sum_k K_k X K_k^dag with Kraus operators of shape (out_dim, in_dim).

    ``out_factors`` optionally names the output factors when the map changes
    the shape of the space it acts on.
    """

    kraus: tuple
    stinespring: Optional[Stinespring] = None
    out_factors: Optional[tuple] = None
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        ks = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not ks:
            raise ArgumentError("channel needs at least one Kraus operator")
        if any(k.shape != ks[0].shape for k in ks):
            raise ArgumentError("Kraus operators differ in shape")
        object.__setattr__(self, "kraus", ks)
        if self.out_factors is not None:
            object.__setattr__(self, "out_factors", tuple(self.out_factors))
            if math.prod(f.dim for f in self.out_factors) != self.out_dim:
                raise ArgumentError("out_factors do not match the output dimension")
        if self.check:
            err = np.max(np.abs(sum(k.conj().T @ k for k in ks) - np.eye(self.in_dim)))
            if err > CHANNEL_TOL:
                raise PreconditionError(f"Kraus family is not trace preserving (error {err:.3e})")
            if self.stinespring is not None:
                other = Channel(self.stinespring.kraus(), check=False)
                if np.max(np.abs(other.choi() - self.choi())) > CHANNEL_TOL:
                    raise PreconditionError("Stinespring presentation does not match the Kraus family")

    @classmethod
    def from_stinespring(cls, unitary, env_state, in_dim: int, env_dim: int) -> "Channel":
        st = Stinespring(np.asarray(unitary, dtype=complex), np.asarray(env_state, dtype=complex), in_dim, env_dim)
        return cls(tuple(st.kraus()), stinespring=st)

    @property
    def in_dim(self) -> int:
        return self.kraus[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.kraus[0].shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        return sum(k @ x @ k.conj().T for k in self.kraus)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        return sum(k.conj().T @ y @ k for k in self.kraus)

    def compose(self, first: "Channel") -> "Channel":
        """The channel ``self o first``."""
        if first.out_dim != self.in_dim:
            raise ArgumentError("dimension mismatch in composition")
        return Channel(tuple(a @ b for a in self.kraus for b in first.kraus), out_factors=self.out_factors)

    def choi(self) -> np.ndarray:
        d = self.in_dim
        omega = np.zeros((d * d, d * d), dtype=complex)
        for i in range(d):
            for j in range(d):
                e = np.zeros((d, d), dtype=complex)
                e[i, j] = 1
                omega += np.kron(e, self(e))
        return omega

    def trace_preservation_error(self) -> float:
        return float(np.max(np.abs(sum(k.conj().T @ k for k in self.kraus) - np.eye(self.in_dim))))


# --------------------------------------------------------------------------- #
# Standard channels
# --------------------------------------------------------------------------- #


def identity_channel(d: int) -> Channel:
    return Channel((np.eye(d),))


def unitary_channel(u: np.ndarray) -> Channel:
    return Channel((np.asarray(u),))


def depolarizing(d: int, q: float) -> Channel:
    """(1-q) X + q tr(X) 1/d."""
    if not 0 <= q <= 1:
        raise ArgumentError("q must lie in [0, 1]")
    ks = [math.sqrt(1 - q) * np.eye(d)]
    for i in range(d):
        for j in range(d):
            k = np.zeros((d, d))
            k[i, j] = math.sqrt(q / d)
            ks.append(k)
    return Channel(tuple(ks))


def dephasing(d: int, p: float, basis: Optional[np.ndarray] = None) -> Channel:
    """(1-p) X + p sum_i P_i X P_i with P_i the projectors of ``basis`` (columns)."""
    if not 0 <= p <= 1:
        raise ArgumentError("p must lie in [0, 1]")
    v = np.eye(d) if basis is None else np.asarray(basis)
    ks = [math.sqrt(1 - p) * np.eye(d)] + [math.sqrt(p) * np.outer(v[:, i], v[:, i].conj()) for i in range(d)]
    return Channel(tuple(ks))


def amplitude_damping(gamma: float) -> Channel:
    return Channel((np.array([[1, 0], [0, math.sqrt(1 - gamma)]]), np.array([[0, math.sqrt(gamma)], [0, 0]])))


def random_channel(d_in: int, d_out: int, n_kraus: int, rng: np.random.Generator) -> Channel:
    """Kraus operators cut from a Haar-random isometry C^d_in -> C^d_out (x) C^n_kraus."""
    big = max(d_in, d_out * n_kraus)
    if d_out * n_kraus < d_in:
        raise ArgumentError("d_out * n_kraus must be at least d_in")
    iso = haar_unitary(big, rng)[: d_out * n_kraus, :d_in]
    ks = iso.reshape(d_out, n_kraus, d_in).transpose(1, 0, 2)
    return Channel(tuple(ks))


def partial_swap(g: float, d: int = 2) -> np.ndarray:
    """exp(i g SWAP) = cos g 1 + i sin g SWAP on two d-level systems."""
    swap = np.zeros((d * d, d * d))
    for a in range(d):
        for b in range(d):
            swap[b * d + a, a * d + b] = 1
    return math.cos(g) * np.eye(d * d) + 1j * math.sin(g) * swap


# --------------------------------------------------------------------------- #
# Action on labeled states
# --------------------------------------------------------------------------- #


def apply(ch: Channel, state: QState, target) -> QState:
    """Apply ``ch`` to the factors ``target`` of ``state``.

    The output factors take the place of the first target factor. Unless the
    channel names them, they keep the target labels (same shape) or, for a
    single target factor, its id with the new dimension.
    """
    target = tn.label_ids(target)
    space = state.space
    d_t = space.dim_of(target)
    if d_t != ch.in_dim:
        raise ArgumentError(f"channel input dimension {ch.in_dim} does not match target dimension {d_t}")
    if ch.out_factors is not None:
        out_factors = ch.out_factors
    elif ch.out_dim == d_t:
        out_factors = tuple(space.label(t) for t in target)
    elif len(target) == 1:
        out_factors = (SubsystemLabel(target[0], ch.out_dim),)
    else:
        raise ArgumentError("channel changes the shape of a multi-factor target; give out_factors")
    rest = space.complement(target)
    m = tn.permute_matrix(state.rho, space, target + rest)
    d_r = space.total_dim // d_t
    t = m.reshape(d_t, d_r, d_t, d_r)
    out = sum(np.einsum("ai,irjs,bj->arbs", k, t, k.conj()) for k in ch.kraus)
    out = out.reshape(ch.out_dim * d_r, ch.out_dim * d_r)
    tmp = HilbertSpace(tuple(out_factors) + tuple(space.label(r) for r in rest))
    pos = space.index(target[0])
    final_ids = [r for r in space.ids[:pos] if r in rest] + [f.id for f in out_factors] + \
        [r for r in space.ids[pos:] if r in rest]
    out = tn.permute_matrix(out, tmp, final_ids)
    return QState(tmp.sub(final_ids), rho=out)


def epsilon_deviation(sigma_target: QState, mapped: QState) -> float:
    """Half trace-norm distance between a target state and a channel output."""
    if sigma_target.space != mapped.space:
        raise ArgumentError(f"space mismatch: {sigma_target.space.ids} vs {mapped.space.ids}")
    return min(1.0, 0.5 * tn.trace_norm(sigma_target.rho - mapped.rho))


def afw_mi_bound(epsilon: float, dim_s: int) -> float:
    """2 eps log2|S| + (1 + eps) h(eps / (1 + eps)), in bits."""
    if not 0 <= epsilon <= 1:
        raise ArgumentError(f"epsilon={epsilon} outside [0, 1]")
    if dim_s < 2:
        raise ArgumentError("dim_s must be at least 2")
    return 2 * epsilon * math.log2(dim_s) + (1 + epsilon) * binary_entropy(epsilon / (1 + epsilon))


def cmi_afw_bound(epsilon: float, dim_s: int) -> float:
    """Same right-hand side as :func:`afw_mi_bound`, applied to I(S:F_l|F_k)."""
    return afw_mi_bound(epsilon, dim_s)


@dataclass(frozen=True)
class HolevoMonotonicity:
    chi_in: float
    chi_out: float
    ok: bool


def _map_ensemble(e: Ensemble, ch: Channel, target=None) -> Ensemble:
    target = e.space.ids if target is None else target
    return Ensemble.of(e.probs, [apply(ch, s, target) for s in e.states])


def holevo_monotonicity_check(e_in: Ensemble, ch: Channel, target=None) -> HolevoMonotonicity:
    chi_in = holevo_of_ensemble(e_in)
    chi_out = holevo_of_ensemble(_map_ensemble(e_in, ch, target))
    return HolevoMonotonicity(chi_in, chi_out, chi_in >= chi_out - CHANNEL_TOL)


# --------------------------------------------------------------------------- #
# Petz recovery
# --------------------------------------------------------------------------- #


def petz_recovery(ch: Channel, reference, complete: bool = True) -> Channel:
    """Petz map X -> s^1/2 L^dag(L(s)^-1/2 X L(s)^-1/2) s^1/2 for reference s.

    Inverse square roots act on the support of L(s) (cutoff 1e-12). The bare
    map is trace preserving only on that support; with ``complete`` an extra
    branch X -> tr(Q X) s, Q the projector onto the kernel of L(s), makes it a
    full CPTP map without changing its action on supported inputs.
    """
    sigma = reference.rho if isinstance(reference, QState) else np.asarray(reference, dtype=complex)
    if sigma.shape != (ch.in_dim, ch.in_dim):
        raise ArgumentError("reference does not live on the channel input space")
    out = ch(sigma)
    w, v = tn.eigh(out)
    supp = w > PETZ_CUTOFF
    if not np.any(supp):
        raise DegenerateSupportError("reference has no overlap with the channel range")
    inv_sqrt = (v[:, supp] / np.sqrt(w[supp])) @ v[:, supp].conj().T
    s_half = tn.sqrt_psd(sigma, PETZ_CUTOFF)
    ks = [s_half @ k.conj().T @ inv_sqrt for k in ch.kraus]
    if complete and not np.all(supp):
        ws, vs = tn.eigh(sigma)
        kernel = v[:, ~supp]
        for j in range(ws.size):
            if ws[j] <= 0:
                continue
            for m in range(kernel.shape[1]):
                ks.append(math.sqrt(ws[j]) * np.outer(vs[:, j], kernel[:, m].conj()))
    return Channel(tuple(ks), check=complete)


@dataclass(frozen=True)
class RecoveryReport:
    chi_in_bits: float
    chi_out_bits: float
    fidelity_terms: tuple
    rhs_bits: float
    satisfied: bool
    margin: float

    @property
    def lhs_bits(self) -> float:
        return self.chi_in_bits - self.chi_out_bits


def recovery_bound_check(e: Ensemble, ch: Channel, recovery: Channel) -> RecoveryReport:
    """Evaluate chi(S) - chi(F) >= -2 log2 sum_s p_s sqrtF(rho_s, R(L(rho_s)))."""
    chi_in = holevo_of_ensemble(e)
    outs = [ch(s.rho) for s in e.states]
    out_space = HilbertSpace((SubsystemLabel("out", ch.out_dim),))
    chi_out = holevo_of_ensemble(Ensemble.of(e.probs, [QState(out_space, rho=o) for o in outs]))
    terms = []
    for p, s, o in zip(e.probs, e.states, outs):
        rec = recovery(o)
        rec = rec / np.trace(rec).real
        terms.append((float(p), tn.root_fidelity(s.rho, rec)))
    total = sum(p * f for p, f in terms)
    rhs = -2 * math.log2(total) if total > 0 else math.inf
    margin = (chi_in - chi_out) - rhs
    return RecoveryReport(chi_in, chi_out, tuple(terms), rhs, margin >= -CHANNEL_TOL, margin)


# --------------------------------------------------------------------------- #
# Approximately CPTP evolutions
# --------------------------------------------------------------------------- #


def markov_extension_channel(unitary: np.ndarray, env_marginal: np.ndarray, out_factors) -> Channel:
    """F_k -> F_k F_l map X -> U (X (x) tau) U^dag with tau the uncorrelated F_l state."""
    w, v = tn.eigh(env_marginal)
    d_env = w.size
    u = np.asarray(unitary)
    d_in = u.shape[0] // d_env
    ks = []
    for j in range(d_env):
        if w[j] <= 1e-15:
            continue
        iso = np.kron(np.eye(d_in), v[:, j].reshape(-1, 1))
        ks.append(math.sqrt(w[j]) * u @ iso)
    return Channel(tuple(ks), out_factors=tuple(out_factors))


@dataclass(frozen=True)
class AFWReport:
    """Outcome of one approximately-CPTP scenario.

    ``epsilon`` is the deviation on the evolved F_k alone and bounds the
    mutual-information gain; ``epsilon_ext`` is the deviation on the full
    F_k F_l output and bounds the conditional mutual information of the
    pre-evolution state.
    """

    eps_requested: float
    mix: float
    epsilon: float
    epsilon_ext: float
    mi_gain: float
    mi_bound: float
    cmi: float
    cmi_bound: float
    dim_s: int

    @property
    def mi_ok(self) -> bool:
        return self.mi_gain <= self.mi_bound + CHANNEL_TOL

    @property
    def cmi_ok(self) -> bool:
        return self.cmi <= self.cmi_bound + CHANNEL_TOL


def afw_scenario(rho: QState, unitary: np.ndarray, eps: Optional[float] = None, *, system: str = "S",
                 fk: str = "F1", fl: str = "F2", mix: Optional[float] = None) -> AFWReport:
    """Perturb the Markovian channel on F_k by a correlated unitary kick and test both bounds.

    The CPTP reference map L: F_k -> F_k F_l attaches the uncorrelated F_l
    marginal and applies ``unitary``. The perturbed evolution is
    sigma = (1 - m) L(rho_{S F_k}) + m U rho U^dag, whose kick part feels the
    actual S-F_l correlations. The mixing weight m is calibrated so that the
    deviation on S F_k' equals ``eps`` (or given directly via ``mix``).
    """
    ids = [system, fk, fl]
    base_state = rho.permuted(ids + rho.space.complement(ids)).reduce(ids)
    space = base_state.space
    r = base_state.rho
    lam = markov_extension_channel(unitary, base_state.marginal([fl]), [space.label(fk), space.label(fl)])
    markov = apply(lam, base_state.reduce([system, fk]), [fk]).rho
    kicked = tn.apply_local(unitary, r, space, [fk, fl], both_sides=True)
    base_k = 0.5 * tn.trace_norm(tn.reduce_matrix(kicked - markov, space, [system, fk]))
    if mix is None:
        if eps is None:
            raise ArgumentError("give eps or mix")
        if eps > base_k + 1e-12:
            raise DegenerateInputError(f"requested eps={eps:.4g} exceeds the attainable {base_k:.4g}")
        mix = 0.0 if base_k == 0 else min(1.0, eps / base_k)
    sigma = (1 - mix) * markov + mix * kicked
    tau = tn.apply_local(unitary.conj().T, sigma, space, [fk, fl], both_sides=True)
    s_k = QState(space.sub([system, fk]), rho=tn.reduce_matrix(sigma, space, [system, fk]))
    m_k = QState(space.sub([system, fk]), rho=tn.reduce_matrix(markov, space, [system, fk]))
    epsilon = epsilon_deviation(s_k, m_k)
    epsilon_ext = epsilon_deviation(QState(space, rho=sigma), QState(space, rho=markov))
    dim_s = space.label(system).dim
    mi_gain = mutual_information(s_k, [system], [fk]) - mutual_information(base_state, [system], [fk])
    cmi = conditional_mutual_information(QState(space, rho=tau), [system], [fl], [fk])
    return AFWReport(eps if eps is not None else epsilon, mix, epsilon, epsilon_ext, mi_gain,
                     afw_mi_bound(epsilon, dim_s), cmi, cmi_afw_bound(epsilon_ext, dim_s), dim_s)

