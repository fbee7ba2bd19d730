"""States, separable decompositions and entanglement detection.

The two-qubit worked example lives here: the Bell-diagonal reference
family, the closed-form spectral decomposition of ``E^d(sigma)`` for
``sigma = sigma_I (x) diag(a, 1 - a)`` and the entanglement-onset scan of
``(1 - t) sigma + t E^d(sigma)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.stats import unitary_group

from . import linalg
from .dynamics import as_density, build_model
from .linalg import BipartiteDims, DimensionError

WEIGHT_TOL = 1e-12
PPT_TOL = 1e-10
EQUIVALENCE_TOL = 1e-10


class DecompositionTerm(NamedTuple):
    weight: float
    rho_I: np.ndarray
    rho_II: np.ndarray


@dataclass(frozen=True, eq=False)
class SeparableDecomposition:
    """Convex combination ``sum_i w_i rho_I[i] (x) rho_II[i]`` with ``w_i > 0``."""

    dims: BipartiteDims
    terms: tuple[DecompositionTerm, ...]

    def __post_init__(self):
        dims = linalg.check_dims(self.dims)
        object.__setattr__(self, "dims", dims)
        if not self.terms:
            raise ValueError("a decomposition needs at least one term")
        checked = []
        for w, r1, r2 in self.terms:
            w = float(w)
            if not w > 0:
                raise ValueError(f"decomposition weights must be positive, got {w}")
            checked.append(DecompositionTerm(w, as_density(r1, dims.n), as_density(r2, dims.m)))
        total = sum(t.weight for t in checked)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"decomposition weights sum to {total!r}, not 1")
        object.__setattr__(self, "terms", tuple(checked))

    @classmethod
    def from_terms(cls, dims, terms, renormalize_tol: float = 1e-10) -> "SeparableDecomposition":
        """Build a decomposition, rescaling weights whose sum is within ``renormalize_tol`` of 1."""
        terms = [DecompositionTerm(float(w), r1, r2) for w, r1, r2 in terms]
        total = sum(t.weight for t in terms)
        if abs(total - 1.0) > renormalize_tol:
            raise ValueError(f"decomposition weights sum to {total!r}, not 1")
        return cls(dims, tuple(DecompositionTerm(t.weight / total, t.rho_I, t.rho_II) for t in terms))

    @property
    def weights(self) -> np.ndarray:
        return np.array([t.weight for t in self.terms])

    @property
    def factors_I(self) -> list[np.ndarray]:
        return [t.rho_I for t in self.terms]

    @property
    def factors_II(self) -> list[np.ndarray]:
        return [t.rho_II for t in self.terms]

    def __len__(self) -> int:
        return len(self.terms)

    def assemble(self) -> np.ndarray:
        out = sum(w * np.kron(r1, r2) for w, r1, r2 in self.terms)
        return linalg.hermitian_part(out)


class PPTResult(NamedTuple):
    is_ppt: bool
    min_pt_eigenvalue: float
    negativity: float


def ppt_check(rho, dims, tol: float = PPT_TOL) -> PPTResult:
    """Peres-Horodecki test on the partial transpose over ``H2``.

    ``negativity = (||rho^T2||_1 - 1) / 2``. PPT is necessary for
    separability and sufficient when ``n * m <= 6``.
    """
    dims = linalg.check_dims(dims)
    rho = as_density(rho, dims.total)
    w = np.linalg.eigvalsh(linalg.hermitian_part(linalg.partial_transpose_second(rho, dims)))
    negativity = max(0.0, (np.abs(w).sum() - 1.0) / 2.0)
    return PPTResult(bool(w[0] >= -tol), float(w[0]), float(negativity))


# --- Bell-diagonal two-qubit family ------------------------------------------

_S = 1.0 / np.sqrt(2.0)
#: Columns x_1..x_4 in the product basis (xi1 xi1, xi1 xi2, xi2 xi1, xi2 xi2).
BELL_BASIS = np.array(
    [
        [_S, 0.0, 0.0, _S],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [_S, 0.0, 0.0, -_S],
    ],
    dtype=np.complex128,
).T

TWO_QUBITS = BipartiteDims(2, 2)


@dataclass(frozen=True)
class BellDiagonalParams:
    lambdas: tuple[float, float, float, float]

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lambdas)
        if len(lam) != 4:
            raise ValueError("exactly four weights are required")
        if not all(x > 0 for x in lam):
            raise ValueError(f"all weights must be positive, got {lam}")
        if abs(sum(lam) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1, got {sum(lam)!r}")
        object.__setattr__(self, "lambdas", lam)

    @property
    def reduced_diagonal(self) -> tuple[float, float]:
        """Eigenvalues of ``Tr_1 rho`` on ``xi1``, ``xi2``."""
        l1, l2, l3, l4 = self.lambdas
        half = (l1 + l4) / 2.0
        return half + l3, half + l2


def bell_reference(params: BellDiagonalParams) -> np.ndarray:
    """``rho = sum_i lambda_i |x_i><x_i|``."""
    lam = np.asarray(params.lambdas)
    return (BELL_BASIS * lam) @ BELL_BASIS.conj().T


def product_state_sigma(sigma_I, a: float) -> np.ndarray:
    """``sigma_I (x) (a |xi1><xi1| + (1 - a) |xi2><xi2|)``."""
    return np.kron(as_density(sigma_I, 2), np.diag([a, 1.0 - a]).astype(np.complex128))


@dataclass(frozen=True)
class ClosedFormDual:
    """Spectral data of ``E^d(sigma_I (x) diag(a, b))`` for ``lambda_2 == lambda_3``.

    ``abcx`` holds the coefficients ``(A, B, C, X)`` of the
    ``span{xi1 xi1, xi2 xi2}`` block (before the factor ``chi``). With
    ``verbatim=True`` they are the printed ones, which lack a factor 1/4
    and therefore do not give a unit-trace state.
    """

    lambdas_tilde: tuple[float, float, float, float]
    eta_plus: float
    eta_minus: float
    kappa_plus: float
    kappa_minus: float
    chi: float
    abcx: tuple[float, float, float, float]
    verbatim: bool = False

    def y_vectors(self) -> np.ndarray:
        """Columns ``y_1..y_4`` in the product basis."""
        y = np.zeros((4, 4), dtype=np.complex128)
        y[0, 0], y[3, 0] = self.eta_plus, self.kappa_plus
        y[1, 1] = 1.0
        y[2, 2] = 1.0
        y[0, 3], y[3, 3] = self.eta_minus, self.kappa_minus
        return y

    def reconstruct(self) -> np.ndarray:
        y = self.y_vectors()
        return (y * np.asarray(self.lambdas_tilde)) @ y.conj().T


def closed_form_dual(params: BellDiagonalParams, a: float, verbatim: bool = False) -> ClosedFormDual:
    """Closed-form eigen-decomposition of ``E^d(sigma)`` in the two-qubit example.

    Requires ``lambda_2 == lambda_3`` and ``lambda_1 > lambda_4``; the result
    does not depend on ``sigma_I``.
    """
    l1, l2, l3, l4 = params.lambdas
    if abs(l2 - l3) > 1e-12:
        raise ValueError("closed form requires lambda_2 == lambda_3")
    if not l1 > l4 + 1e-10:
        raise ValueError("closed form undefined: requires lambda_1 > lambda_4")
    if not 0.0 < a < 1.0:
        raise ValueError(f"a must lie in (0, 1), got {a}")
    b = 1.0 - a
    chi = 1.0 / ((l1 + l4) / 2.0 + l2)
    sp = (np.sqrt(l1) + np.sqrt(l4)) ** 2
    sm = (np.sqrt(l1) - np.sqrt(l4)) ** 2
    scale = 1.0 if verbatim else 0.25
    big_a = scale * (a * sp + b * sm)
    big_b = scale * (l1 - l4)
    big_c = scale * (a * sm + b * sp)
    d = big_a - big_c
    x = np.sqrt(d * d + 4.0 * big_b * big_b)
    lam_plus = (big_a + big_c + x) / 2.0
    lam_minus = (big_a + big_c - x) / 2.0
    norm_plus = np.sqrt(x * x - d * x)
    norm_minus = np.sqrt(x * x + d * x)
    return ClosedFormDual(
        lambdas_tilde=(chi * lam_plus, chi * b * l2, chi * a * l2, chi * lam_minus),
        eta_plus=float(np.sqrt(2.0) * big_b / norm_plus),
        eta_minus=float(np.sqrt(2.0) * big_b / norm_minus),
        kappa_plus=float((-d + x) / (np.sqrt(2.0) * norm_plus)),
        kappa_minus=float((-d - x) / (np.sqrt(2.0) * norm_minus)),
        chi=float(chi),
        abcx=(float(big_a), float(big_b), float(big_c), float(x)),
        verbatim=verbatim,
    )


def separation_bound(cfd: ClosedFormDual) -> float:
    """``lambda~_1 eta_+ kappa_+ + lambda~_4 eta_- kappa_-``.

    This is the ``<xi2 xi2| . |xi1 xi1>`` entry of the rank-two part
    ``E^d_0(sigma)``; not to be confused with ``cfd.abcx[0]``.
    """
    l1t, _, _, l4t = cfd.lambdas_tilde
    return float(l1t * cfd.eta_plus * cfd.kappa_plus + l4t * cfd.eta_minus * cfd.kappa_minus)


class OnsetRow(NamedTuple):
    t: float
    negativity: float
    is_ppt: bool
    exact_negativity: float
    exact_is_ppt: bool


def entanglement_onset(params: BellDiagonalParams, a: float, sigma_I, t_grid: Sequence[float]) -> list[OnsetRow]:
    """PPT data along ``(1 - t) sigma + t E^d(sigma)`` and along ``T_t^d(sigma)``."""
    model = build_model(bell_reference(params), TWO_QUBITS)
    sigma = product_state_sigma(sigma_I, a)
    ed = model.dual_map(sigma)
    rows = []
    for t in t_grid:
        t = float(t)
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"t must lie in [0, 1], got {t}")
        mixed = ppt_check((1.0 - t) * sigma + t * ed, TWO_QUBITS)
        exact = ppt_check(model.schrodinger_semigroup(sigma, t), TWO_QUBITS)
        rows.append(OnsetRow(t, mixed.negativity, mixed.is_ppt, exact.negativity, exact.is_ppt))
    return rows


# --- random ensembles ----------------------------------------------------------

def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Normalized Gram matrix ``G G*`` of a standard complex Gaussian ``d x rank`` matrix."""
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    r = g @ g.conj().T
    return linalg.hermitian_part(r / np.trace(r).real)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary."""
    if d == 1:
        return np.ones((1, 1), dtype=np.complex128)
    return np.asarray(unitary_group.rvs(d, random_state=rng), dtype=np.complex128)


def random_simplex(k: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample from the probability simplex with ``k`` vertices."""
    return rng.dirichlet(np.ones(k))


def random_separable(dims, num_terms: int, seed) -> SeparableDecomposition:
    """Random decomposition with Gram-matrix factors and flat simplex weights."""
    dims = linalg.check_dims(dims)
    if num_terms < 1:
        raise ValueError("num_terms must be at least 1")
    rng = np.random.default_rng(seed)
    w = random_simplex(num_terms, rng)
    terms = [
        DecompositionTerm(w[i], random_density(dims.n, rng), random_density(dims.m, rng))
        for i in range(num_terms)
    ]
    return SeparableDecomposition.from_terms(dims, terms)


def decomposition_equivalence(d1: SeparableDecomposition, d2: SeparableDecomposition,
                              tol: float = EQUIVALENCE_TOL) -> bool:
    """True iff both decompositions assemble to the same state in trace norm."""
    if d1.dims != d2.dims:
        raise DimensionError(f"dimension mismatch: {d1.dims} vs {d2.dims}")
    return linalg.trace_norm(d1.assemble() - d2.assemble()) <= tol
