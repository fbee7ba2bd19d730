"""Block spin-flip dynamics on ``H1 (x) H2``.

The reference state ``rho`` fixes the cocycle
``gamma = rho^(1/2) (I (x) (Tr_1 rho)^(-1/2))`` and the generalized
conditional expectation ``E(A) = I (x) Tr_1(gamma* A gamma)``. The Markov
generator is ``L = E - id``; ``T_t = exp(t L)`` acts on observables and its
trace dual ``T_t^d = exp(t (E^d - id))`` acts on states, where
``E^d(sigma) = gamma (I (x) Tr_1 sigma) gamma*``.

Semigroups are evaluated exactly through the superoperator matrices of
``E`` and ``E^d``; no series truncation is involved.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import linalg
from .linalg import BipartiteDims, HermitianEig, NotPSDError

DENSITY_TOL = 1e-10
FAITHFUL_TOL = 1e-10


class NotFaithfulError(ValueError):
    """Raised when the reference state has a (numerically) zero eigenvalue."""


def as_density(rho, dim: int | None = None, tol: float = DENSITY_TOL) -> np.ndarray:
    """Validate a density matrix and return its Hermitian part.

    Checks Hermiticity, eigenvalues ``>= -tol`` and unit trace, all within
    ``tol``.
    """
    rho = linalg.as_matrix(rho, dim)
    if linalg.operator_norm(rho - rho.conj().T) > tol:
        raise linalg.NotHermitianError("density matrix is not Hermitian")
    rho = linalg.hermitian_part(rho)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol:
        raise ValueError(f"density matrix must have unit trace, got {tr!r}")
    lo = np.linalg.eigvalsh(rho)[0]
    if lo < -tol:
        raise NotPSDError(f"density matrix has negative eigenvalue {lo:.3e}")
    return rho


def clean_density(rho, tol: float = DENSITY_TOL) -> np.ndarray:
    """Clamp eigenvalues in ``[-tol, 0)`` to zero and renormalize the trace."""
    eig = linalg.herm_eig(rho)
    w = eig.eigenvalues
    if w[0] < -tol:
        raise NotPSDError(f"state has negative eigenvalue {w[0]:.3e}")
    w = np.clip(w, 0.0, None)
    w = w / w.sum()
    return HermitianEig(w, eig.eigenvectors).reconstruct()


@dataclass(frozen=True, eq=False)
class SpinFlipModel:
    """Reference state together with the derived operators of the dynamics."""

    dims: BipartiteDims
    rho: np.ndarray
    rho_sqrt: np.ndarray
    reduced: np.ndarray
    reduced_inv_sqrt: np.ndarray
    gamma: np.ndarray
    reduced_eig: HermitianEig

    @property
    def dim(self) -> int:
        return self.dims.total

    def _check(self, a) -> np.ndarray:
        return linalg.as_matrix(a, self.dim)

    def cond_expectation(self, a) -> np.ndarray:
        """``E(A) = I (x) Tr_1(gamma* A gamma)``."""
        a = self._check(a)
        g = self.gamma
        return linalg.embed_second(linalg.partial_trace_first(g.conj().T @ a @ g, self.dims), self.dims)

    def generator(self, a) -> np.ndarray:
        """``L(A) = E(A) - A``."""
        a = self._check(a)
        return self.cond_expectation(a) - a

    def dual_map(self, sigma) -> np.ndarray:
        """``E^d(sigma) = gamma (I (x) Tr_1 sigma) gamma*``; trace preserving and CP."""
        sigma = self._check(sigma)
        g = self.gamma
        return g @ linalg.embed_second(linalg.partial_trace_first(sigma, self.dims), self.dims) @ g.conj().T

    @cached_property
    def generator_superop(self) -> np.ndarray:
        """Row-major superoperator matrix of ``L``."""
        m_e = linalg.superoperator_matrix(self.cond_expectation, self.dim)
        return m_e - np.eye(self.dim**2)

    @cached_property
    def dual_generator_superop(self) -> np.ndarray:
        """Row-major superoperator matrix of ``E^d - id``."""
        m_ed = linalg.superoperator_matrix(self.dual_map, self.dim)
        return m_ed - np.eye(self.dim**2)

    def heisenberg_propagator(self, t: float) -> np.ndarray:
        if t < 0:
            raise ValueError(f"t must be non-negative, got {t}")
        return linalg.matrix_exp(self.generator_superop, t)

    def schrodinger_propagator(self, t: float) -> np.ndarray:
        if t < 0:
            raise ValueError(f"t must be non-negative, got {t}")
        return linalg.matrix_exp(self.dual_generator_superop, t)

    def heisenberg_semigroup(self, a, t: float) -> np.ndarray:
        """``T_t(A) = exp(t L)(A)``."""
        a = self._check(a)
        if t == 0:
            return a.copy()
        return linalg.apply_superoperator(self.heisenberg_propagator(t), a)

    def schrodinger_semigroup(self, sigma, t: float) -> np.ndarray:
        """``T_t^d(sigma)``, cleaned to an exact density matrix.

        Eigenvalues in ``[-1e-10, 0)`` produced by rounding are clamped to
        zero and the trace is renormalized to one.
        """
        sigma = self._check(sigma)
        if t == 0:
            return sigma.copy()
        out = linalg.apply_superoperator(self.schrodinger_propagator(t), sigma)
        return clean_density(out)

    def liouville_inner(self, a, b) -> complex:
        """``<<A, B>> = Tr(rho^(1/2) A* rho^(1/2) B)``."""
        a = self._check(a)
        b = self._check(b)
        s = self.rho_sqrt
        return complex(np.trace(s @ a.conj().T @ s @ b))

    def expectation(self, a) -> complex:
        """``omega_rho(A) = Tr(rho A)``."""
        return complex(np.trace(self.rho @ self._check(a)))


def build_model(rho, dims) -> SpinFlipModel:
    """Build the dynamics for the faithful reference state ``rho`` on ``dims``.

    Raises
    ------
    NotFaithfulError
        If the smallest eigenvalue of ``rho`` is not above ``1e-10``.
    """
    dims = linalg.check_dims(dims)
    rho = as_density(rho, dims.total)
    eig = linalg.herm_eig(rho)
    if eig.eigenvalues[0] <= FAITHFUL_TOL:
        raise NotFaithfulError(
            f"reference state must be faithful (min eigenvalue {eig.eigenvalues[0]:.3e})"
        )
    rho_sqrt = eig.apply(np.sqrt)
    reduced = linalg.hermitian_part(linalg.partial_trace_first(rho, dims))
    reduced_eig = linalg.herm_eig(reduced)
    # a faithful rho has a faithful marginal
    assert reduced_eig.eigenvalues[0] > 0
    reduced_inv_sqrt = reduced_eig.apply(lambda w: 1.0 / np.sqrt(w))
    gamma = rho_sqrt @ linalg.embed_second(reduced_inv_sqrt, dims)
    return SpinFlipModel(
        dims=dims,
        rho=rho,
        rho_sqrt=rho_sqrt,
        reduced=reduced,
        reduced_inv_sqrt=reduced_inv_sqrt,
        gamma=gamma,
        reduced_eig=reduced_eig,
    )
