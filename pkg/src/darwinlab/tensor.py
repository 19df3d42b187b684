"""Dense complex linear algebra over labeled tensor-product Hilbert spaces.

Matrices are plain ``numpy.ndarray`` objects in row-major layout. A
:class:`HilbertSpace` fixes the ordering of the tensor factors, and all
index arithmetic (partial traces, factor permutations, local operators) is
derived from that ordering.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ArgumentError, CapacityError, PreconditionError

#: Default cap on the total dimension of any composite space.
DIM_CAP = 2**14
#: Entrywise tolerance for Hermiticity checks.
HERMITIAN_TOL = 1e-10
#: Eigenvalues at or below this are treated as exact zeros by matrix functions.
SUPPORT_TOL = 1e-13


@dataclass(frozen=True)
class SubsystemLabel:
    """A named tensor factor of local dimension ``dim``."""

    id: str
    dim: int

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise ArgumentError(f"subsystem {self.id!r}: dim must be a positive integer, got {self.dim!r}")


LabelLike = Union[str, SubsystemLabel]


def _label_id(label: LabelLike) -> str:
    return label.id if isinstance(label, SubsystemLabel) else str(label)


def label_ids(labels) -> list[str]:
    """Normalize a label, or an iterable of labels, into a list of ids."""
    if isinstance(labels, (str, SubsystemLabel)):
        return [_label_id(labels)]
    return [_label_id(x) for x in labels]


@dataclass(frozen=True)
class HilbertSpace:
    """Ordered tensor product of :class:`SubsystemLabel` factors."""

    factors: tuple[SubsystemLabel, ...]

    def __post_init__(self):
        factors = tuple(self.factors)
        object.__setattr__(self, "factors", factors)
        ids = [f.id for f in factors]
        if len(set(ids)) != len(ids):
            raise ArgumentError(f"duplicate subsystem ids in {ids}")
        if math.prod(f.dim for f in factors) > DIM_CAP:
            raise CapacityError(f"total dimension {math.prod(f.dim for f in factors)} exceeds cap {DIM_CAP}")

    @classmethod
    def of(cls, *pairs: tuple[str, int]) -> "HilbertSpace":
        return cls(tuple(SubsystemLabel(i, d) for i, d in pairs))

    @classmethod
    def qubits(cls, *ids: str) -> "HilbertSpace":
        return cls(tuple(SubsystemLabel(i, 2) for i in ids))

    @property
    def ids(self) -> list[str]:
        return [f.id for f in self.factors]

    @property
    def dims(self) -> list[int]:
        return [f.dim for f in self.factors]

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    def __len__(self):
        return len(self.factors)

    def __contains__(self, label) -> bool:
        return _label_id(label) in self.ids

    def label(self, label: LabelLike) -> SubsystemLabel:
        return self.factors[self.index(label)]

    def index(self, label: LabelLike) -> int:
        key = _label_id(label)
        try:
            return self.ids.index(key)
        except ValueError:
            raise ArgumentError(f"unknown subsystem {key!r}; space has {self.ids}") from None

    def indices(self, labels) -> list[int]:
        return [self.index(x) for x in label_ids(labels)]

    def dim_of(self, labels) -> int:
        return math.prod(self.factors[i].dim for i in self.indices(labels))

    def sub(self, labels) -> "HilbertSpace":
        """Subspace made of ``labels``, in the order given."""
        return HilbertSpace(tuple(self.factors[i] for i in self.indices(labels)))

    def ordered(self, labels) -> list[str]:
        """``labels`` sorted by their position in this space."""
        return [self.ids[i] for i in sorted(self.indices(labels))]

    def complement(self, labels) -> list[str]:
        keep = set(label_ids(labels))
        return [i for i in self.ids if i not in keep]

    def __add__(self, other: "HilbertSpace") -> "HilbertSpace":
        return HilbertSpace(self.factors + other.factors)


def kron(a: np.ndarray, b: np.ndarray, cap: int = DIM_CAP) -> np.ndarray:
    """Kronecker product with a cap on the resulting dimension."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim == 1 or b.ndim == 1:
        size = a.size * b.size
    else:
        size = max(a.shape[0] * b.shape[0], a.shape[1] * b.shape[1])
    if size > cap:
        raise CapacityError(f"kron result dimension {size} exceeds cap {cap}")
    return np.kron(a, b)


def kron_all(mats: Iterable[np.ndarray], cap: int = DIM_CAP) -> np.ndarray:
    """Kronecker product of a sequence of vectors or matrices, left to right."""
    mats = [np.asarray(m) for m in mats]
    out = np.ones(1, dtype=complex) if all(m.ndim == 1 for m in mats) else np.ones((1, 1), dtype=complex)
    for m in mats:
        out = kron(out, m, cap)
    return out


def _check_square(m: np.ndarray, dim: int | None = None) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ArgumentError(f"expected a square matrix, got shape {m.shape}")
    if dim is not None and m.shape[0] != dim:
        raise ArgumentError(f"matrix dimension {m.shape[0]} does not match space dimension {dim}")
    return m


def reduce_matrix(m: np.ndarray, space: HilbertSpace, keep) -> np.ndarray:
    """Partial trace keeping ``keep`` in the order given (not the space order)."""
    m = _check_square(m, space.total_dim)
    keep_idx = space.indices(keep)
    if len(set(keep_idx)) != len(keep_idx):
        raise ArgumentError("repeated label in keep set")
    n = len(space)
    rest_idx = [i for i in range(n) if i not in keep_idx]
    dims = space.dims
    dk = math.prod(dims[i] for i in keep_idx)
    dr = math.prod(dims[i] for i in rest_idx)
    t = m.reshape(dims + dims)
    perm = keep_idx + rest_idx
    t = t.transpose(perm + [n + i for i in perm]).reshape(dk, dr, dk, dr)
    return np.einsum("ajbj->ab", t)


def partial_trace(m: np.ndarray, space: HilbertSpace, keep) -> np.ndarray:
    """Reduce ``m`` onto the factors in ``keep``; kept factors stay in space order."""
    return reduce_matrix(m, space, space.ordered(keep))


def permute_matrix(m: np.ndarray, space: HilbertSpace, order) -> np.ndarray:
    """Reorder the tensor factors of an operator on ``space`` to ``order``."""
    idx = space.indices(order)
    if sorted(idx) != list(range(len(space))):
        raise ArgumentError("order must be a permutation of all factors")
    n = len(space)
    t = np.asarray(m).reshape(space.dims + space.dims)
    d = space.total_dim
    return t.transpose(idx + [n + i for i in idx]).reshape(d, d)


def permute_vector(v: np.ndarray, space: HilbertSpace, order) -> np.ndarray:
    idx = space.indices(order)
    if sorted(idx) != list(range(len(space))):
        raise ArgumentError("order must be a permutation of all factors")
    return np.asarray(v).reshape(space.dims).transpose(idx).reshape(-1)


def ket_schmidt_spectrum(psi: np.ndarray, space: HilbertSpace, keep) -> np.ndarray:
    """Eigenvalues of the reduced state of a pure state on ``keep`` (via SVD)."""
    idx = space.indices(keep)
    rest = [i for i in range(len(space)) if i not in idx]
    dk = math.prod(space.dims[i] for i in idx)
    t = np.asarray(psi).reshape(space.dims).transpose(idx + rest).reshape(dk, -1)
    s = np.linalg.svd(t, compute_uv=False)
    return s**2


def apply_local(op: np.ndarray, vec_or_mat: np.ndarray, space: HilbertSpace, labels, *, both_sides: bool = False):
    """Apply ``op`` acting on the factors ``labels`` (in that order).

    For a vector returns ``op·v``; for a matrix returns ``op·m`` or, with
    ``both_sides``, ``op·m·op†``.
    """
    idx = space.indices(labels)
    n = len(space)
    dims = space.dims
    dl = math.prod(dims[i] for i in idx)
    op = np.asarray(op)
    if op.shape != (dl, dl):
        raise ArgumentError(f"operator shape {op.shape} does not match factors of dimension {dl}")
    rest = [i for i in range(n) if i not in idx]
    perm = idx + rest
    inv = np.argsort(perm).tolist()
    x = np.asarray(vec_or_mat)
    if x.ndim == 1:
        t = x.reshape(dims).transpose(perm).reshape(dl, -1)
        t = (op @ t).reshape([dims[i] for i in perm]).transpose(inv)
        return t.reshape(-1)
    d = space.total_dim
    t = x.reshape(dims + dims).transpose(perm + list(range(n, 2 * n))).reshape(dl, -1)
    t = (op @ t).reshape([dims[i] for i in perm] + dims).transpose(inv + list(range(n, 2 * n))).reshape(d, d)
    if both_sides:
        t = apply_local(op, t.conj().T, space, labels).conj().T
    return t


def check_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    m = _check_square(m)
    err = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if err > tol:
        raise PreconditionError(f"matrix is not Hermitian (max |m - m^H| = {err:.3e} > {tol:g})")
    return (m + m.conj().T) / 2


def eigh(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    The input is symmetrized after the Hermiticity check so that drift from
    long products of unitaries does not leak into the spectrum.
    """
    h = check_hermitian(m)
    return np.linalg.eigh(h)


def eigvalsh(m: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(check_hermitian(m))


def hermitian_function(m: np.ndarray, fn, tol: float = SUPPORT_TOL) -> np.ndarray:
    """Apply ``fn`` to the eigenvalues of ``m`` above ``tol``; the rest map to 0."""
    w, v = eigh(m)
    keep = w > tol
    fw = np.zeros_like(w)
    fw[keep] = fn(w[keep])
    return (v * fw) @ v.conj().T


def sqrt_psd(m: np.ndarray, tol: float = SUPPORT_TOL) -> np.ndarray:
    return hermitian_function(m, np.sqrt, tol)


def inv_sqrt_psd(m: np.ndarray, tol: float = SUPPORT_TOL) -> np.ndarray:
    """Inverse square root on the support (pseudo-inverse)."""
    return hermitian_function(m, lambda x: 1.0 / np.sqrt(x), tol)


def trace_norm(m: np.ndarray) -> float:
    """Sum of singular values."""
    m = _check_square(m)
    if m.size == 0:
        return 0.0
    if np.max(np.abs(m - m.conj().T)) <= HERMITIAN_TOL * max(1.0, np.max(np.abs(m))):
        return float(np.sum(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2))))
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def _check_density(m: np.ndarray, name: str, tol: float = 1e-9) -> np.ndarray:
    h = check_hermitian(m)
    w = np.linalg.eigvalsh(h)
    if w[0] < -tol:
        raise PreconditionError(f"{name} is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    tr = np.trace(h).real
    if abs(tr - 1) > tol:
        raise PreconditionError(f"{name} does not have unit trace (trace {tr:.12g})")
    return h


def root_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Root fidelity ||sqrt(rho) sqrt(sigma)||_1, clipped to [0, 1]."""
    rho = _check_density(rho, "rho")
    sigma = _check_density(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise ArgumentError(f"shape mismatch {rho.shape} vs {sigma.shape}")
    s = np.linalg.svd(sqrt_psd(rho) @ sqrt_psd(sigma), compute_uv=False)
    return float(min(1.0, max(0.0, np.sum(s))))


def psd_project(m: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Clip eigenvalues in [-tol, 0) to zero and renormalize the trace.

    Raises :class:`PreconditionError` for an eigenvalue below ``-tol``; that
    signals a genuinely invalid state rather than rounding noise.
    """
    w, v = eigh(m)
    if w.size and w[0] < -tol:
        raise PreconditionError(f"eigenvalue {w[0]:.3e} below -{tol:g}")
    if w.size and w[0] >= 0:
        h = (np.asarray(m) + np.asarray(m).conj().T) / 2
        return h / np.trace(h).real
    w = np.clip(w, 0.0, None)
    out = (v * w) @ v.conj().T
    return out / np.trace(out).real


def ket_to_dm(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(psi, psi.conj())


def basis_ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def operator_on(op: np.ndarray, space: HilbertSpace, labels: Sequence) -> np.ndarray:
    """Embed ``op`` (acting on ``labels``) as a full operator on ``space``."""
    return apply_local(op, np.eye(space.total_dim, dtype=complex), space, labels)
