"""Quantum states, pointer bases, ensembles and the constructors used by the models.

A :class:`QState` always carries its :class:`~darwinlab.tensor.HilbertSpace`.
Pure states keep their state vector, so reduced spectra can be computed from
a Schmidt decomposition instead of a dense density matrix.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import tensor as tn
from .errors import ArgumentError, CapacityError, PreconditionError
from .tensor import HilbertSpace, SubsystemLabel

STATE_TOL = 1e-10
#: Cap on the number of environment fragments accepted by the constructors.
MAX_FRAGMENTS = 13


class QState:
    """Density matrix on a labeled tensor product.

    Build through :meth:`from_ket` or :meth:`from_matrix`; the latter checks
    Hermiticity and unit trace within ``1e-10`` and clips rounding negativity.
    """

    __slots__ = ("space", "ket", "_rho")

    def __init__(self, space: HilbertSpace, rho: Optional[np.ndarray] = None, ket: Optional[np.ndarray] = None):
        if rho is None and ket is None:
            raise ArgumentError("QState needs a density matrix or a state vector")
        self.space = space
        self.ket = None if ket is None else np.asarray(ket, dtype=complex).reshape(-1)
        self._rho = None if rho is None else np.asarray(rho, dtype=complex)
        d = space.total_dim
        if self.ket is not None and self.ket.size != d:
            raise ArgumentError(f"state vector of length {self.ket.size} on a space of dimension {d}")
        if self._rho is not None and self._rho.shape != (d, d):
            raise ArgumentError(f"density matrix of shape {self._rho.shape} on a space of dimension {d}")

    @classmethod
    def from_ket(cls, space: HilbertSpace, psi, normalize: bool = False) -> "QState":
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        nrm = np.linalg.norm(psi)
        if nrm == 0:
            raise PreconditionError("zero state vector")
        if normalize:
            psi = psi / nrm
        elif abs(nrm - 1) > STATE_TOL:
            raise PreconditionError(f"state vector norm {nrm:.12g} is not 1")
        return cls(space, ket=psi)

    @classmethod
    def from_matrix(cls, space: HilbertSpace, rho, tol: float = STATE_TOL) -> "QState":
        rho = np.asarray(rho, dtype=complex)
        tn._check_square(rho, space.total_dim)
        tn.check_hermitian(rho, tol)
        tr = np.trace(rho).real
        if abs(tr - 1) > tol:
            raise PreconditionError(f"trace {tr:.12g} differs from 1")
        return cls(space, rho=tn.psd_project(rho, tol))

    @property
    def rho(self) -> np.ndarray:
        if self._rho is None:
            self._rho = tn.ket_to_dm(self.ket)
        return self._rho

    @property
    def dim(self) -> int:
        return self.space.total_dim

    @property
    def is_pure_vector(self) -> bool:
        return self.ket is not None

    def purity(self) -> float:
        if self.ket is not None:
            return 1.0
        return float(np.real(np.vdot(self.rho, self.rho)))

    def marginal(self, labels) -> np.ndarray:
        """Reduced density matrix on ``labels`` in the order given."""
        labels = tn.label_ids(labels)
        if not labels:
            return np.ones((1, 1), dtype=complex)
        if self.ket is not None and len(labels) < len(self.space):
            idx = self.space.indices(labels)
            rest = [i for i in range(len(self.space)) if i not in idx]
            dk = self.space.dim_of(labels)
            t = self.ket.reshape(self.space.dims).transpose(idx + rest).reshape(dk, -1)
            return t @ t.conj().T
        return tn.reduce_matrix(self.rho, self.space, labels)

    def reduce(self, labels) -> "QState":
        labels = tn.label_ids(labels)
        return QState(self.space.sub(labels), rho=self.marginal(labels))

    def spectrum(self, labels=None) -> np.ndarray:
        """Eigenvalues of the reduction onto ``labels`` (all factors if None)."""
        labels = self.space.ids if labels is None else tn.label_ids(labels)
        if not labels:
            return np.ones(1)
        if self.ket is not None:
            if len(labels) == len(self.space):
                return np.array([1.0])
            return tn.ket_schmidt_spectrum(self.ket, self.space, labels)
        return np.linalg.eigvalsh(tn.check_hermitian(self.marginal(labels), 1e-8))

    def permuted(self, order) -> "QState":
        order = tn.label_ids(order)
        space = self.space.sub(order)
        if self.ket is not None:
            return QState(space, ket=tn.permute_vector(self.ket, self.space, order))
        return QState(space, rho=tn.permute_matrix(self.rho, self.space, order))

    def __repr__(self):
        kind = "pure" if self.ket is not None else "mixed"
        return f"QState({kind}, factors={self.space.ids})"


@dataclass(frozen=True)
class PointerBasis:
    """Orthonormal rank-1 measurement basis on one subsystem.

    ``vectors`` holds the basis vectors as columns; ``labels`` are opaque
    eigenvalue tags of the pointer observable.
    """

    subsystem: SubsystemLabel
    vectors: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=complex)
        d = self.subsystem.dim
        if v.shape != (d, d):
            raise ArgumentError(f"pointer basis needs a {d}x{d} matrix of column vectors, got {v.shape}")
        if np.max(np.abs(v.conj().T @ v - np.eye(d))) > STATE_TOL:
            raise PreconditionError("pointer basis vectors are not orthonormal")
        object.__setattr__(self, "vectors", v)
        labels = tuple(self.labels) if len(self.labels) else tuple(float(i) for i in range(d))
        if len(labels) != d:
            raise ArgumentError("one label per basis vector required")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def computational(cls, subsystem: SubsystemLabel) -> "PointerBasis":
        return cls(subsystem, np.eye(subsystem.dim, dtype=complex))

    @property
    def dim(self) -> int:
        return self.subsystem.dim

    def projector(self, k: int) -> np.ndarray:
        v = self.vectors[:, k]
        return np.outer(v, v.conj())

    def __iter__(self):
        return iter(self.vectors.T)


@dataclass(frozen=True)
class Ensemble:
    """Probability-weighted family of states on a common space."""

    entries: tuple[tuple[float, QState], ...]

    def __post_init__(self):
        entries = tuple((float(p), s) for p, s in self.entries)
        if not entries:
            raise ArgumentError("empty ensemble")
        probs = np.array([p for p, _ in entries])
        if np.any(probs < -STATE_TOL) or abs(probs.sum() - 1) > STATE_TOL:
            raise PreconditionError(f"ensemble weights {probs} are not a probability vector")
        space = entries[0][1].space
        if any(s.space != space for _, s in entries):
            raise ArgumentError("ensemble members live on different spaces")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def of(cls, probs, states) -> "Ensemble":
        if len(probs) != len(states):
            raise ArgumentError("probabilities and states differ in length")
        return cls(tuple(zip(probs, states)))

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for p, _ in self.entries])

    @property
    def states(self) -> list[QState]:
        return [s for _, s in self.entries]

    @property
    def space(self) -> HilbertSpace:
        return self.entries[0][1].space

    def average(self) -> np.ndarray:
        return sum(p * s.rho for p, s in self.entries)

    def __len__(self):
        return len(self.entries)


# --------------------------------------------------------------------------- #
# Random generation
# --------------------------------------------------------------------------- #

RANDOM_KINDS = ("haar_pure", "ginibre_mixed", "random_pointer_ensemble")


@dataclass(frozen=True)
class RandomSpec:
    """What to sample and from which seed.

    ``rank`` applies to ``ginibre_mixed``; ``size`` to ``random_pointer_ensemble``.
    """

    kind: str
    seed: int = 0
    rank: Optional[int] = None
    size: Optional[int] = None

    def __post_init__(self):
        if self.kind not in RANDOM_KINDS:
            raise ArgumentError(f"unknown random kind {self.kind!r}; expected one of {RANDOM_KINDS}")


def rng_for(seed: int, purpose: str = "", index: int = 0) -> np.random.Generator:
    """Philox (counter-based) generator for one ``(seed, purpose, index)`` substream.

    The purpose string is hashed with CRC-32, so streams for different tasks
    never share state and each sample index gets its own substream.
    """
    seq = np.random.SeedSequence([int(seed) & (2**64 - 1), zlib.crc32(purpose.encode()), int(index)])
    return np.random.Generator(np.random.Philox(seq))


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(complex_gaussian(rng, (dim, dim)))
    ph = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * ph


def haar_ket(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = complex_gaussian(rng, dim)
    return v / np.linalg.norm(v)


def ginibre_dm(dim: int, rank: int, rng: np.random.Generator) -> np.ndarray:
    g = complex_gaussian(rng, (dim, rank))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_state(spec: RandomSpec, space: HilbertSpace) -> QState:
    """Sample a state; fully determined by ``spec.seed``."""
    rng = rng_for(spec.seed, "random_state")
    d = space.total_dim
    if spec.kind == "haar_pure":
        return QState(space, ket=haar_ket(d, rng))
    if spec.kind == "ginibre_mixed":
        rank = d if spec.rank is None else spec.rank
        if not 1 <= rank <= d:
            raise ArgumentError(f"Ginibre rank {rank} outside [1, {d}]")
        return QState(space, rho=ginibre_dm(d, rank, rng))
    raise ArgumentError("random_pointer_ensemble yields an Ensemble; use random_ensemble")


def random_ensemble(spec: RandomSpec, space: HilbertSpace) -> Ensemble:
    """Ensemble of ``spec.size`` Ginibre states with Dirichlet(1,...,1) weights."""
    if spec.kind != "random_pointer_ensemble":
        raise ArgumentError("random_ensemble needs kind='random_pointer_ensemble'")
    size = spec.size or 2
    rng = rng_for(spec.seed, "random_ensemble")
    probs = rng.dirichlet(np.ones(size))
    d = space.total_dim
    states = [QState(space, rho=ginibre_dm(d, int(rng.integers(1, d + 1)), rng)) for _ in range(size)]
    return Ensemble.of(probs, states)


# --------------------------------------------------------------------------- #
# Model states
# --------------------------------------------------------------------------- #


def fragment_ids(n: int) -> list[str]:
    return [f"F{i}" for i in range(1, n + 1)]


def env_space(n_env: int, dim: int = 2) -> HilbertSpace:
    if not 1 <= n_env <= MAX_FRAGMENTS:
        raise CapacityError(f"n_env={n_env} outside [1, {MAX_FRAGMENTS}]")
    return HilbertSpace(tuple(SubsystemLabel(f, dim) for f in fragment_ids(n_env)))


def ghz_state(n_env: int) -> QState:
    """(|0>|0...0> + |1>|1...1>)/sqrt(2) on S and ``n_env`` qubit fragments."""
    space = HilbertSpace.qubits("S") + env_space(n_env)
    psi = np.zeros(space.total_dim, dtype=complex)
    psi[0] = psi[-1] = 1 / math.sqrt(2)
    return QState(space, ket=psi)


def _as_unit(v, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    if abs(np.linalg.norm(v) - 1) > STATE_TOL:
        raise PreconditionError(f"{what} is not normalized")
    return v


def branching_state(probs: Sequence[float], branch_env_states, basis: Optional[PointerBasis] = None) -> QState:
    """Pure branching state sum_s sqrt(P_s) |s>_S (x)_i |phi_s>_{F_i}.

    ``branch_env_states[s]`` lists one normalized ket per fragment; the
    environment branch is their tensor product.
    """
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < 0) or abs(probs.sum() - 1) > STATE_TOL:
        raise PreconditionError(f"{probs} is not a probability vector")
    if len(branch_env_states) != len(probs):
        raise ArgumentError(f"{len(probs)} probabilities but {len(branch_env_states)} branches")
    branches = [[branch] if np.asarray(branch[0]).ndim == 0 else list(branch) for branch in branch_env_states]
    n_frag = len(branches[0])
    frag_dims = [np.asarray(f).size for f in branches[0]]
    for b in branches:
        if [np.asarray(f).size for f in b] != frag_dims:
            raise ArgumentError("branches disagree on fragment structure")
    s_dim = len(probs) if basis is None else basis.dim
    if basis is None:
        basis = PointerBasis.computational(SubsystemLabel("S", s_dim))
    if len(probs) > s_dim:
        raise ArgumentError("more branches than pointer states")
    if not 1 <= n_frag <= MAX_FRAGMENTS:
        raise CapacityError(f"{n_frag} fragments outside [1, {MAX_FRAGMENTS}]")
    space = HilbertSpace((basis.subsystem,) + tuple(SubsystemLabel(f, d) for f, d in zip(fragment_ids(n_frag), frag_dims)))
    psi = np.zeros(space.total_dim, dtype=complex)
    for k, (p, branch) in enumerate(zip(probs, branches)):
        env = tn.kron_all([_as_unit(f, f"branch {k} fragment state") for f in branch])
        psi += math.sqrt(p) * np.kron(basis.vectors[:, k], env)
    return QState(space, ket=psi / np.linalg.norm(psi))


def overlap_branching_state(n_env: int, overlap: float, probs: Sequence[float] = (0.5, 0.5)) -> QState:
    """Two-branch state with per-fragment branch overlap ``<phi_0|phi_1> = overlap``.

    ``overlap = 0`` reproduces the GHZ state.
    """
    if not 0 <= overlap <= 1:
        raise ArgumentError("overlap must lie in [0, 1]")
    phi0 = np.array([1, 0], dtype=complex)
    phi1 = np.array([overlap, math.sqrt(1 - overlap**2)], dtype=complex)
    return branching_state(probs, [[phi0] * n_env, [phi1] * n_env])


def system_superposition_state(env_kets, amplitudes=None, s_dim: int = 2) -> QState:
    """(sum_s a_s |s>_S) (x) |phi>_E with the amplitudes normalized at construction.

    Uniform amplitudes by default. ``env_kets`` lists one ket per fragment.
    """
    a = np.ones(s_dim, dtype=complex) if amplitudes is None else np.asarray(amplitudes, dtype=complex)
    if a.size != s_dim or np.linalg.norm(a) == 0:
        raise ArgumentError("amplitudes must be a nonzero vector of length s_dim")
    a = a / np.linalg.norm(a)
    env = [_as_unit(f, "fragment state") for f in env_kets]
    space = HilbertSpace((SubsystemLabel("S", s_dim),) + tuple(
        SubsystemLabel(f, v.size) for f, v in zip(fragment_ids(len(env)), env)))
    return QState(space, ket=tn.kron_all([a] + env))


def ancilla_extend_maxent(space: HilbertSpace, system: str = "S", ancilla: str = "A") -> QState:
    """|Phi>_AS (x) |0...0> on (A,) + space, with |Phi> maximally entangled."""
    if system not in space:
        raise ArgumentError(f"space has no {system!r} factor")
    d = space.label(system).dim
    full = HilbertSpace((SubsystemLabel(ancilla, d),)) + space
    order_as = [ancilla, system] + space.complement([system])
    phi = np.eye(d, dtype=complex).reshape(-1) / math.sqrt(d)
    rest = np.zeros(space.total_dim // d, dtype=complex)
    rest[0] = 1.0
    psi = np.kron(phi, rest)
    tmp = full.sub(order_as)
    return QState(full, ket=tn.permute_vector(psi, tmp, full.ids))


def measured_ancilla_state(psi_se: QState, basis: PointerBasis, ancilla: str = "A") -> QState:
    """sum_s |s>_A (x) (|s><s|_S (x) 1) |psi>: A becomes a copy register of the pointer."""
    if psi_se.ket is None:
        raise PreconditionError("measured_ancilla_state needs a pure input state")
    sid = basis.subsystem.id
    if sid not in psi_se.space or psi_se.space.label(sid).dim != basis.dim:
        raise ArgumentError(f"basis subsystem {sid!r} does not match the state")
    full = HilbertSpace((SubsystemLabel(ancilla, basis.dim),)) + psi_se.space
    out = np.zeros(full.total_dim, dtype=complex)
    for k in range(basis.dim):
        branch = tn.apply_local(basis.projector(k), psi_se.ket, psi_se.space, [sid])
        out += np.kron(basis.vectors[:, k], branch)
    return QState(full, ket=out)


def cq_state(probs: Sequence[float], basis: PointerBasis, conditional_states: Sequence[QState]) -> QState:
    """Classical-quantum state sum_s P_s |s><s| (x) tau_s."""
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < 0) or abs(probs.sum() - 1) > STATE_TOL:
        raise PreconditionError(f"{probs} is not a probability vector")
    if len(conditional_states) != len(probs) or len(probs) > basis.dim:
        raise ArgumentError("need one conditional state per pointer outcome")
    env = conditional_states[0].space
    if any(t.space != env for t in conditional_states):
        raise ArgumentError("conditional states live on different spaces")
    space = HilbertSpace((basis.subsystem,)) + env
    rho = sum(p * np.kron(basis.projector(k), t.rho) for k, (p, t) in enumerate(zip(probs, conditional_states)))
    return QState(space, rho=rho)


def product_state(states: Sequence[QState]) -> QState:
    space = states[0].space
    for s in states[1:]:
        space = space + s.space
    if all(s.ket is not None for s in states):
        return QState(space, ket=tn.kron_all([s.ket for s in states]))
    return QState(space, rho=tn.kron_all([s.rho for s in states]))
