"""Dense complex linear algebra for small bipartite systems.

Index convention: a vector of ``H1 (x) H2`` with ``dim H1 = n`` and
``dim H2 = m`` is indexed by ``p * m + r``, where ``p`` labels the first
factor (outer, slow index) and ``r`` the second factor. Every bipartite
operation in the package uses this convention, which coincides with
``numpy.kron``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg

from ._backend import kernels

#: Maximum total dimension ``n * m`` accepted by the bipartite routines.
MAX_DIM = 64

HERMITIAN_RTOL = 1e-10
PSD_CLAMP = 1e-12
SINGULAR_TOL = 1e-12


class DimensionError(ValueError):
    """Raised when matrix shapes do not match the declared dimensions."""


class NotHermitianError(ValueError):
    """Raised when a matrix expected to be Hermitian is not."""


class NotPSDError(ValueError):
    """Raised when a matrix expected to be positive semidefinite is not."""


class SingularMatrixError(ValueError):
    """Raised when an inverse (square root) of a singular matrix is requested."""


class BipartiteDims(NamedTuple):
    """Dimensions ``(n, m)`` of the factor spaces ``H1`` and ``H2``."""

    n: int
    m: int

    @property
    def total(self) -> int:
        return self.n * self.m

    @classmethod
    def parse(cls, text: str) -> "BipartiteDims":
        """Parse ``"NxM"`` (e.g. ``"2x3"``)."""
        try:
            n_text, m_text = text.lower().split("x")
            dims = cls(int(n_text), int(m_text))
        except ValueError as exc:
            raise DimensionError(f"cannot parse dimensions {text!r}; expected NxM") from exc
        return check_dims(dims)


def check_dims(dims, max_dim: int | None = None) -> BipartiteDims:
    dims = BipartiteDims(*dims)
    if dims.n < 1 or dims.m < 1:
        raise DimensionError(f"factor dimensions must be positive, got {dims}")
    limit = MAX_DIM if max_dim is None else max_dim
    if dims.total > limit:
        raise DimensionError(f"n*m = {dims.total} exceeds the configured limit {limit}")
    return dims


def as_matrix(a, dim: int | None = None) -> np.ndarray:
    """Return ``a`` as a C-contiguous complex128 square matrix with finite entries."""
    arr = np.ascontiguousarray(a, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(f"expected dimension {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


@dataclass(frozen=True)
class HermitianEig:
    """Eigendecomposition ``A = V diag(eigenvalues) V*`` with ascending eigenvalues."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def apply(self, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Functional calculus: ``V diag(func(eigenvalues)) V*``."""
        v = self.eigenvectors
        return (v * func(self.eigenvalues)) @ v.conj().T


class Norms(NamedTuple):
    operator: float
    trace: float
    frobenius: float


def tensor(a, b) -> np.ndarray:
    """Kronecker product ``A (x) B`` with the first factor as outer index."""
    return np.kron(as_matrix(a), as_matrix(b))


def partial_trace_first(x, dims) -> np.ndarray:
    """Trace out ``H1``: ``(Tr_1 X)[r, s] = sum_p X[(p, r), (p, s)]``."""
    n, m = check_dims(dims)
    x = as_matrix(x, n * m)
    return kernels.partial_trace_first(x, n, m)


def partial_trace_second(x, dims) -> np.ndarray:
    n, m = check_dims(dims)
    x = as_matrix(x, n * m)
    return np.einsum("prqr->pq", x.reshape(n, m, n, m))


def embed_second(y, dims) -> np.ndarray:
    """Return ``I_n (x) Y``."""
    n, m = check_dims(dims)
    return np.kron(np.eye(n, dtype=np.complex128), as_matrix(y, m))


def embed_first(y, dims) -> np.ndarray:
    """Return ``Y (x) I_m``."""
    n, m = check_dims(dims)
    return np.kron(as_matrix(y, n), np.eye(m, dtype=np.complex128))


def partial_transpose_second(x, dims) -> np.ndarray:
    """Transpose the second factor: ``X^T2[(p, r), (q, s)] = X[(p, s), (q, r)]``."""
    n, m = check_dims(dims)
    x = as_matrix(x, n * m)
    return kernels.partial_transpose_second(x, n, m)


def operator_norm(a) -> float:
    return float(np.linalg.norm(as_matrix(a), 2))


def trace_norm(a) -> float:
    return float(np.linalg.svd(as_matrix(a), compute_uv=False).sum())


def norms(a) -> Norms:
    """Operator, trace and Frobenius norms from one singular value decomposition."""
    sv = np.linalg.svd(as_matrix(a), compute_uv=False)
    return Norms(float(sv[0]) if sv.size else 0.0, float(sv.sum()), float(np.sqrt(np.sum(sv**2))))


def hermitian_part(a) -> np.ndarray:
    a = as_matrix(a)
    return 0.5 * (a + a.conj().T)


def is_hermitian(a, rtol: float = HERMITIAN_RTOL) -> bool:
    a = as_matrix(a)
    scale = max(1.0, operator_norm(a))
    return operator_norm(a - a.conj().T) <= rtol * scale


def herm_eig(a) -> HermitianEig:
    """Eigendecomposition of a Hermitian matrix.

    The input is symmetrized before decomposing; a deviation from
    Hermiticity larger than ``1e-10 * max(1, ||A||)`` is an error.
    """
    a = as_matrix(a)
    if not is_hermitian(a):
        raise NotHermitianError("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh(hermitian_part(a))
    return HermitianEig(w, v)


def _psd_eig(a) -> HermitianEig:
    eig = herm_eig(a)
    lo = eig.eigenvalues[0] if eig.eigenvalues.size else 0.0
    if lo < -PSD_CLAMP:
        raise NotPSDError(f"matrix is not PSD (min eigenvalue {lo:.3e})")
    return HermitianEig(np.clip(eig.eigenvalues, 0.0, None), eig.eigenvectors)


def herm_sqrt(a) -> np.ndarray:
    """Principal square root of a Hermitian PSD matrix.

    Eigenvalues in ``[-1e-12, 0)`` are clamped to zero.
    """
    return _psd_eig(a).apply(np.sqrt)


def herm_inv_sqrt(a) -> np.ndarray:
    """Inverse principal square root of a Hermitian positive definite matrix."""
    eig = herm_eig(a)
    lo = eig.eigenvalues[0]
    if lo <= SINGULAR_TOL:
        raise SingularMatrixError(f"matrix is singular (min eigenvalue {lo:.3e})")
    return eig.apply(lambda w: 1.0 / np.sqrt(w))


def superoperator_matrix(phi: Callable[[np.ndarray], np.ndarray], d: int) -> np.ndarray:
    """Matrix of a linear map on ``d x d`` matrices in row-major vectorization.

    Column ``q * d + s`` holds ``vec(phi(|q><s|))`` with
    ``vec(A)[a * d + b] = A[a, b]``, so that
    ``phi(A) == (M @ A.reshape(-1)).reshape(d, d)``.
    """
    out = np.empty((d * d, d * d), dtype=np.complex128)
    unit = np.zeros((d, d), dtype=np.complex128)
    for q in range(d):
        for s in range(d):
            unit[q, s] = 1.0
            out[:, q * d + s] = np.asarray(phi(unit.copy()), dtype=np.complex128).reshape(-1)
            unit[q, s] = 0.0
    return out


def apply_superoperator(mat: np.ndarray, a) -> np.ndarray:
    a = as_matrix(a)
    d = a.shape[0]
    return (mat @ a.reshape(-1)).reshape(d, d)


def matrix_exp(a, t: float = 1.0) -> np.ndarray:
    """``exp(t A)`` for ``t >= 0``."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    a = as_matrix(a)
    if t == 0:
        return np.eye(a.shape[0], dtype=np.complex128)
    return scipy.linalg.expm(t * a)
