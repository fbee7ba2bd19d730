"""Two-point correlation functions of the block spin-flip dynamics.

For ``f = F (x) I`` and ``g = I (x) G`` the correlation
``<E(f) g>_rho = Tr(rho E(f) g)`` is compared with the factorized value
``sum_i w_i <F>_{rho_I[i]} <G>_{rho_II[i]} = Tr(rho (F (x) G))``. In a
product basis ``{phi_k (x) psi_j}`` where ``psi_j`` diagonalize
``Tr_1 rho`` (eigenvalues ``a_j``), the correlation is the bilinear form

    sum_{klji} T[k, l, j, i] <phi_k|F|phi_l> <psi_i|G|psi_j>,
    T[k, l, j, i] = sum_{p,q} s_{pkjq} s_{lpqi} sqrt(a_j / a_i),

with ``s_{pqrs} = <phi_p psi_r| rho^(1/2) |phi_q psi_s>``, and the
factorized value is the same form with ``T[k, l, j, i]`` replaced by
``rho_{lkji}``. Factorization for every ``F, G`` is therefore the
entrywise identity ``T == rho_{lkji}``; its maximal violation is the
criterion residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from time import perf_counter
from typing import NamedTuple, Sequence

import numpy as np

from . import linalg
from ._backend import kernels
from .dynamics import SpinFlipModel, as_density
from .linalg import BipartiteDims, DimensionError, SingularMatrixError
from .states import (
    DecompositionTerm,
    SeparableDecomposition,
    random_density,
    random_separable,
    random_simplex,
    random_unitary,
)

FACTORIZATION_TOL = 1e-9
DEGENERACY_TOL = 1e-10
ZERO_BLOCK_TOL = 1e-10
COMMUTE_TOL = 1e-10
MAX_SERIES_ORDER = 8


class StructureError(ValueError):
    """Raised when a state lacks the block structure a construction needs."""


class HypothesisError(ValueError):
    """Raised when no abelian side can be found in a decomposition."""


class ObservablePair(NamedTuple):
    F: np.ndarray
    G: np.ndarray


def _check_pair(pair: ObservablePair, dims: BipartiteDims) -> tuple[np.ndarray, np.ndarray]:
    return linalg.as_matrix(pair.F, dims.n), linalg.as_matrix(pair.G, dims.m)


def _state_and_dims(state, dims=None) -> tuple[np.ndarray, BipartiteDims]:
    if isinstance(state, SpinFlipModel):
        return state.rho, state.dims
    if isinstance(state, SeparableDecomposition):
        return state.assemble(), state.dims
    if dims is None:
        raise DimensionError("dims are required when passing a bare matrix")
    dims = linalg.check_dims(dims)
    return as_density(state, dims.total), dims


def eigenvalue_cells(values: np.ndarray, tol: float = DEGENERACY_TOL) -> list[list[int]]:
    """Group ascending ``values`` into runs whose consecutive gaps are ``<= tol``."""
    cells: list[list[int]] = []
    for idx, v in enumerate(values):
        if cells and v - values[cells[-1][-1]] <= tol:
            cells[-1].append(idx)
        else:
            cells.append([idx])
    return cells


def is_nondegenerate(values: np.ndarray, tol: float = DEGENERACY_TOL) -> bool:
    return bool(np.all(np.diff(np.sort(np.asarray(values))) > tol))


@dataclass(frozen=True, eq=False)
class CriterionFrame:
    """State expressed in a product basis adapted to ``Tr_1 rho``.

    ``h1_basis`` and ``h2_basis`` hold the basis vectors as columns;
    ``h2_basis`` diagonalizes ``Tr_1 rho`` with eigenvalues ``reduced``.
    """

    dims: BipartiteDims
    h1_basis: np.ndarray
    h2_basis: np.ndarray
    reduced: np.ndarray
    rho: np.ndarray
    rho_sqrt: np.ndarray

    def correlation_tensor(self) -> np.ndarray:
        """``T[k, l, j, i]`` of the correlation bilinear form."""
        n, m = self.dims
        t = kernels.reshuffle_contract(np.ascontiguousarray(self.rho_sqrt), n, m)
        ratio = np.sqrt(self.reduced[:, None] / self.reduced[None, :])
        return t * ratio[None, None, :, :]

    def factorized_tensor(self) -> np.ndarray:
        """``rho_{lkji}`` arranged as ``[k, l, j, i]``."""
        n, m = self.dims
        return np.einsum("ljki->klji", self.rho.reshape(n, m, n, m))

    def gap_tensor(self) -> np.ndarray:
        return self.correlation_tensor() - self.factorized_tensor()


def criterion_frame(state, dims=None, h1_basis=None, h2_basis=None) -> CriterionFrame:
    """Rotate ``rho`` and ``rho^(1/2)`` into the criterion basis.

    ``h2_basis`` defaults to the ascending eigenbasis of ``Tr_1 rho``; when
    given it must diagonalize ``Tr_1 rho``. ``h1_basis`` defaults to the
    computational basis.
    """
    rho, dims = _state_and_dims(state, dims)
    reduced = linalg.partial_trace_first(rho, dims)
    if h2_basis is None:
        eig = linalg.herm_eig(reduced)
        v, a = eig.eigenvectors, eig.eigenvalues
    else:
        v = linalg.as_matrix(h2_basis, dims.m)
        rot = v.conj().T @ reduced @ v
        a = np.diag(rot).real.copy()
        if np.abs(rot - np.diag(a)).max() > 1e-10:
            raise StructureError("h2_basis does not diagonalize Tr_1 rho")
    if a.min() <= linalg.SINGULAR_TOL:
        raise SingularMatrixError(f"Tr_1 rho is singular (min eigenvalue {a.min():.3e})")
    w = np.eye(dims.n, dtype=np.complex128) if h1_basis is None else linalg.as_matrix(h1_basis, dims.n)
    u = np.kron(w, v)
    rho_b = u.conj().T @ rho @ u
    sqrt_b = u.conj().T @ linalg.herm_sqrt(rho) @ u
    return CriterionFrame(dims, w, v, a, np.ascontiguousarray(rho_b), np.ascontiguousarray(sqrt_b))


def correlation(model: SpinFlipModel, pair: ObservablePair) -> complex:
    """``<E(f) g>_rho`` evaluated through the matrix-element formula.

    Equal to ``Tr(rho E(F (x) I) (I (x) G))``; note the operator order.
    """
    f_mat, g_mat = _check_pair(pair, model.dims)
    frame = criterion_frame(model)
    fb = frame.h1_basis.conj().T @ f_mat @ frame.h1_basis
    gb = frame.h2_basis.conj().T @ g_mat @ frame.h2_basis
    return complex(np.einsum("klji,kl,ij->", frame.correlation_tensor(), fb, gb))


def correlation_trace_form(model: SpinFlipModel, pair: ObservablePair) -> complex:
    """``Tr(rho E(f) g)`` computed with operators instead of matrix elements."""
    f_mat, g_mat = _check_pair(pair, model.dims)
    ef = model.cond_expectation(linalg.embed_first(f_mat, model.dims))
    return complex(np.trace(model.rho @ ef @ linalg.embed_second(g_mat, model.dims)))


def factorized_value(decomp: SeparableDecomposition, pair: ObservablePair) -> complex:
    """``sum_i w_i Tr(rho_I[i] F) Tr(rho_II[i] G)``."""
    f_mat, g_mat = _check_pair(pair, decomp.dims)
    return complex(sum(w * np.trace(r1 @ f_mat) * np.trace(r2 @ g_mat) for w, r1, r2 in decomp.terms))


def factorization_criterion(state, dims=None, h1_basis=None) -> float:
    """Maximal entrywise violation of the factorization identity.

    ``state`` is a :class:`SpinFlipModel`, a :class:`SeparableDecomposition`
    or a density matrix together with ``dims``. Only ``Tr_1 rho`` needs to
    be invertible.
    """
    frame = criterion_frame(state, dims, h1_basis=h1_basis)
    return float(np.abs(frame.gap_tensor()).max())


def factorizes(state, dims=None, tol: float = FACTORIZATION_TOL) -> bool:
    return factorization_criterion(state, dims) <= tol


# --- quasi-abelian families ----------------------------------------------------

@dataclass(frozen=True)
class QuasiAbelianDiagnosis:
    is_quasi_abelian: bool
    K: int
    partition: list[tuple[int, ...]]
    cell_eigenvalues: list[float] = field(default_factory=list)
    max_cross_element: float = 0.0


def quasi_abelian_diagnose(family: Sequence[np.ndarray], weights: Sequence[float],
                           tol: float = DEGENERACY_TOL) -> QuasiAbelianDiagnosis:
    """Decide whether every member commutes with the spectral projectors of the average.

    The average ``rho_0 = sum_i w_i rho_i`` is diagonalized, its eigenvalues
    are grouped into cells of equal value (within ``tol``) and each member
    is checked for vanishing matrix elements between different cells.
    ``partition`` lists the cells as index tuples into the ascending
    eigenvalue order; ``K`` is the number of cells.
    """
    weights = np.asarray(weights, dtype=float)
    if len(family) != len(weights) or len(family) == 0:
        raise ValueError("family and weights must be non-empty and of equal length")
    if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-10:
        raise ValueError("weights must be positive and sum to 1")
    mats = [linalg.as_matrix(r) for r in family]
    rho0 = sum(w * r for w, r in zip(weights, mats))
    eig = linalg.herm_eig(rho0)
    cells = eigenvalue_cells(eig.eigenvalues, tol)
    label = np.empty(len(eig.eigenvalues), dtype=int)
    for c, cell in enumerate(cells):
        label[cell] = c
    cross = label[:, None] != label[None, :]
    v = eig.eigenvectors
    worst = 0.0
    for r in mats:
        rot = v.conj().T @ r @ v
        if cross.any():
            worst = max(worst, float(np.abs(rot[cross]).max()))
    return QuasiAbelianDiagnosis(
        is_quasi_abelian=worst <= tol,
        K=len(cells),
        partition=[tuple(c) for c in cells],
        cell_eigenvalues=[float(eig.eigenvalues[c[0]]) for c in cells],
        max_cross_element=worst,
    )


def is_abelian(family: Sequence[np.ndarray], tol: float = COMMUTE_TOL) -> bool:
    """Pairwise commutativity within ``tol`` (operator norm)."""
    mats = [linalg.as_matrix(r) for r in family]
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            if linalg.operator_norm(mats[i] @ mats[j] - mats[j] @ mats[i]) > tol:
                return False
    return True


def common_eigenbasis(family: Sequence[np.ndarray], tol: float = COMMUTE_TOL) -> np.ndarray:
    """Orthonormal basis diagonalizing every member of a commuting Hermitian family."""
    mats = [linalg.hermitian_part(r) for r in family]
    # fixed generic coefficients: distinct joint eigenspaces get distinct eigenvalues
    coeffs = np.random.default_rng(20240611).uniform(0.5, 1.5, size=len(mats))
    v = linalg.herm_eig(sum(c * r for c, r in zip(coeffs, mats))).eigenvectors
    for r in mats:
        rot = v.conj().T @ r @ v
        if np.abs(rot - np.diag(np.diag(rot))).max() > tol:
            raise HypothesisError("family is not simultaneously diagonalizable")
    return v


# --- decompositions from zero-block structure ----------------------------------

def abelian_decomposition_from_zeros(rho, dims, side: str, basis=None,
                                     tol: float = ZERO_BLOCK_TOL) -> SeparableDecomposition:
    """Canonical decomposition with rank-one projectors on one side.

    For ``side="I"`` the state must satisfy ``<phi_k psi_j|rho|phi_l psi_i> = 0``
    for ``k != l`` in the given ``H1`` basis; the result is
    ``sum_s w_s |phi_s><phi_s| (x) rho_II[s]`` with ``w_s = sum_p rho_{sspp}``.
    ``side="II"`` mirrors this with an ``H2`` basis. ``basis`` holds basis
    vectors as columns and defaults to the computational basis. Blocks with
    vanishing weight are dropped.
    """
    dims = linalg.check_dims(dims)
    rho = as_density(rho, dims.total)
    n, m = dims
    if side not in ("I", "II"):
        raise ValueError(f"side must be 'I' or 'II', got {side!r}")
    k_dim = n if side == "I" else m
    b = np.eye(k_dim, dtype=np.complex128) if basis is None else linalg.as_matrix(basis, k_dim)
    if np.abs(b.conj().T @ b - np.eye(k_dim)).max() > 1e-10:
        raise ValueError("basis must be orthonormal")
    if side == "I":
        u = np.kron(b, np.eye(m))
    else:
        u = np.kron(np.eye(n), b)
    r4 = (u.conj().T @ rho @ u).reshape(n, m, n, m)
    if side == "I":
        blocks = np.einsum("kjli->klji", r4)  # [k, l] blocks over H2
    else:
        blocks = np.einsum("kjli->jikl", r4)  # [j, i] blocks over H1
    off = ~np.eye(k_dim, dtype=bool)
    worst = float(np.abs(blocks[off]).max()) if off.any() else 0.0
    if worst > tol:
        raise StructureError(f"off-diagonal block structure present (max element {worst:.3e})")
    terms = []
    for s in range(k_dim):
        block = blocks[s, s]
        w = float(np.trace(block).real)
        if w <= 1e-14:
            continue
        proj = np.outer(b[:, s], b[:, s].conj())
        other = linalg.hermitian_part(block / w)
        terms.append(DecompositionTerm(w, proj, other) if side == "I" else DecompositionTerm(w, other, proj))
    return SeparableDecomposition.from_terms(dims, terms)


def sqrt_separable(decomp: SeparableDecomposition) -> np.ndarray:
    """Separable square root of a state with an abelian side.

    If the first (or second) factors commute, the state is rewritten as
    ``sum_k w_k |phi_k><phi_k| (x) tau_k`` in their common eigenbasis and
    ``sum_k sqrt(w_k) |phi_k><phi_k| (x) tau_k^(1/2)`` is returned. It is
    PSD, separable by construction and squares to the state.
    """
    dims = decomp.dims
    rho = decomp.assemble()
    for side, family in (("I", decomp.factors_I), ("II", decomp.factors_II)):
        if not is_abelian(family):
            continue
        basis = common_eigenbasis(family)
        canon = abelian_decomposition_from_zeros(rho, dims, side, basis=basis, tol=1e-9)
        out = np.zeros((dims.total, dims.total), dtype=np.complex128)
        for w, r1, r2 in canon.terms:
            if side == "I":
                out += np.sqrt(w) * np.kron(r1, linalg.herm_sqrt(r2))
            else:
                out += np.sqrt(w) * np.kron(linalg.herm_sqrt(r1), r2)
        return linalg.hermitian_part(out)
    raise HypothesisError("no abelian side in the decomposition; square-root construction not applicable")


# --- density of non-factorizing states -----------------------------------------

@dataclass(frozen=True, eq=False)
class Perturbation:
    """Perturbed decomposition and the total mixing strength ``eta`` used.

    The construction guarantees ``||rho - rho_hat||_op <= 2 * eta``.
    """

    decomposition: SeparableDecomposition
    eta: float
    passes: int = 0


def _reduced_eig(decomp: SeparableDecomposition) -> linalg.HermitianEig:
    reduced = sum(w * r2 for w, _, r2 in decomp.terms)
    eig = linalg.herm_eig(reduced)
    if eig.eigenvalues[0] <= linalg.SINGULAR_TOL:
        raise SingularMatrixError("Tr_1 rho is singular")
    return eig


def perturb_nondegenerate(decomp: SeparableDecomposition, epsilon: float, seed=None,
                          tol: float = DEGENERACY_TOL) -> Perturbation:
    """Mix in ``(I/n) (x) |psi><psi|`` until ``Tr_1 rho`` has a simple spectrum.

    Each pass splits one vector ``psi`` off a degenerate eigenspace of the
    reduced state, with strength ``eta_k < (1/2) min(eps_k, gaps)`` and
    budget ``eps_k = epsilon / 2**(k+1)``, so the total distance stays below
    ``epsilon``. ``seed`` selects ``psi`` at random inside the degenerate
    eigenspace; without it the first eigenvector is used. A decomposition
    whose reduced state is already nondegenerate is returned unchanged.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    n, m = decomp.dims
    rng = None if seed is None else np.random.default_rng(seed)
    current = decomp
    eta_total = 0.0
    for k in range(m):
        eig = _reduced_eig(current)
        cells = eigenvalue_cells(eig.eigenvalues, tol)
        degenerate = [c for c in cells if len(c) > 1]
        if not degenerate:
            return Perturbation(current, eta_total, k)
        cell = degenerate[0]
        e_c = eig.eigenvalues[cell[0]]
        gaps = [abs(eig.eigenvalues[j] - e_c) for j in range(m) if j not in cell]
        budget = epsilon / 2.0 ** (k + 1)
        eta = 0.9 * 0.5 * min([budget] + gaps)
        vecs = eig.eigenvectors[:, cell]
        if rng is None:
            psi = vecs[:, 0]
        else:
            c = rng.standard_normal(len(cell)) + 1j * rng.standard_normal(len(cell))
            psi = vecs @ (c / np.linalg.norm(c))
        terms = [DecompositionTerm(w * (1.0 - eta), r1, r2) for w, r1, r2 in current.terms]
        terms.append(DecompositionTerm(eta, np.eye(n) / n, np.outer(psi, psi.conj())))
        current = SeparableDecomposition.from_terms(current.dims, terms)
        eta_total += eta
    eig = _reduced_eig(current)
    # at most m - 1 splits are ever needed
    assert is_nondegenerate(eig.eigenvalues, tol), "degeneracy removal did not converge"
    return Perturbation(current, eta_total, m)


def perturb_nonfactorizable(decomp: SeparableDecomposition, epsilon: float, eta: float | None = None,
                            tol: float = FACTORIZATION_TOL) -> Perturbation:
    """Destroy factorization of a state with nondegenerate reduced spectrum.

    The state is rewritten as ``sum_j w_j rho_j (x) |psi_j><psi_j|`` in the
    eigenbasis of ``Tr_1 rho`` ordered by decreasing eigenvalue, scaled by
    ``1 - eta`` and completed by the two terms
    ``(eta/2) |phi_1><phi_1| (x) tau_+`` and ``(eta/2) |phi_2><phi_2| (x) tau_-``
    with ``tau_{+-} = (P_1 + P_2)/2 +- (i/4)(|psi_1><psi_2| - |psi_2><psi_1|)``.
    The default strength is ``eta = 0.45 * epsilon``. A state that already
    fails the criterion is returned unchanged with ``eta = 0``.

    Raises
    ------
    StructureError
        If ``n < 2`` or ``m < 2``, if the reduced spectrum is degenerate or
        if the state factorizes without admitting the canonical side-II
        decomposition.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    dims = decomp.dims
    n, m = dims
    rho = decomp.assemble()
    if factorization_criterion(rho, dims) > tol:
        return Perturbation(decomp, 0.0)
    if n < 2 or m < 2:
        raise StructureError("construction needs dim H1 >= 2 and dim H2 >= 2")
    eta = 0.45 * epsilon if eta is None else float(eta)
    if not (0.0 < eta < epsilon / 2.0 and eta < 1.0):
        raise ValueError(f"eta must satisfy 0 < eta < epsilon/2, got {eta}")
    eig = _reduced_eig(decomp)
    if not is_nondegenerate(eig.eigenvalues):
        raise StructureError("reduced spectrum is degenerate; apply perturb_nondegenerate first")
    v = eig.eigenvectors[:, ::-1]
    canon = abelian_decomposition_from_zeros(rho, dims, "II", basis=v, tol=1e-9)
    p1, p2 = np.outer(v[:, 0], v[:, 0].conj()), np.outer(v[:, 1], v[:, 1].conj())
    swap = np.outer(v[:, 0], v[:, 1].conj())
    skew = 0.25j * (swap - swap.conj().T)
    tau_plus = 0.5 * (p1 + p2) + skew
    tau_minus = 0.5 * (p1 + p2) - skew
    e1 = np.zeros((n, n), dtype=np.complex128)
    e1[0, 0] = 1.0
    e2 = np.zeros((n, n), dtype=np.complex128)
    e2[1, 1] = 1.0
    terms = [DecompositionTerm(w * (1.0 - eta), r1, r2) for w, r1, r2 in canon.terms]
    terms += [DecompositionTerm(eta / 2.0, e1, tau_plus), DecompositionTerm(eta / 2.0, e2, tau_minus)]
    return Perturbation(SeparableDecomposition.from_terms(dims, terms), eta)


def random_factorizable(dims, rng: np.random.Generator, degenerate: bool = False) -> SeparableDecomposition:
    """Random state ``sum_j w_j rho_j (x) |psi_j><psi_j|`` (abelian second side).

    With ``degenerate=True`` the weights are equal, so ``Tr_1 rho = I/m``.
    """
    dims = linalg.check_dims(dims)
    n, m = dims
    v = random_unitary(m, rng)
    w = np.full(m, 1.0 / m) if degenerate else random_simplex(m, rng)
    terms = [DecompositionTerm(w[j], random_density(n, rng), np.outer(v[:, j], v[:, j].conj())) for j in range(m)]
    return SeparableDecomposition.from_terms(dims, terms)


class DensityTrial(NamedTuple):
    index: int
    distance: float
    eta: float
    residual: float
    reduced_gap: float
    success: bool


@dataclass(frozen=True)
class DensitySummary:
    dims: BipartiteDims
    ensemble: str
    epsilon: float
    seed: int
    trials: list[DensityTrial]
    runtime_s: float

    @property
    def successes(self) -> int:
        return sum(t.success for t in self.trials)

    @property
    def fraction(self) -> float | None:
        return self.successes / len(self.trials) if self.trials else None

    def to_dict(self) -> dict:
        """Summary statistics; the runtime is left out so reports are reproducible."""
        dist = [t.distance for t in self.trials]
        return {
            "dims": f"{self.dims.n}x{self.dims.m}",
            "ensemble": self.ensemble,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "trials": len(self.trials),
            "successes": self.successes,
            "success_fraction": self.fraction,
            "max_distance": max(dist) if dist else None,
            "mean_distance": float(np.mean(dist)) if dist else None,
            "max_distance_over_2eta": max((t.distance / (2 * t.eta) for t in self.trials if t.eta > 0), default=None),
            "min_residual": min((t.residual for t in self.trials), default=None),
            "min_reduced_gap": min((t.reduced_gap for t in self.trials), default=None),
        }


ENSEMBLES = ("separable", "factorizable", "degenerate")


def density_experiment(dims, num_trials: int, epsilon: float, seed: int,
                       ensemble: str = "separable", tol: float = FACTORIZATION_TOL) -> DensitySummary:
    """Push random separable states into the non-factorizing, nondegenerate set.

    Each trial draws a state (``ensemble``: ``"separable"`` uses
    :func:`random_separable` with a random number of terms, ``"factorizable"``
    and ``"degenerate"`` use :func:`random_factorizable`), applies
    :func:`perturb_nondegenerate` and :func:`perturb_nonfactorizable` with
    half of ``epsilon`` each, and succeeds when the result fails the
    criterion (residual ``> tol``), has a simple reduced spectrum and lies
    within ``2 * eta < epsilon`` of the input. Trial ``i`` uses the ``i``-th
    child of ``SeedSequence(seed)``.
    """
    dims = linalg.check_dims(dims)
    if ensemble not in ENSEMBLES:
        raise ValueError(f"ensemble must be one of {ENSEMBLES}, got {ensemble!r}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    start = perf_counter()
    children = np.random.SeedSequence(seed).spawn(num_trials) if num_trials > 0 else []
    trials = []
    for idx, child in enumerate(children):
        rng = np.random.default_rng(child)
        if ensemble == "separable":
            num_terms = int(rng.integers(1, dims.total + 1))
            decomp = random_separable(dims, num_terms, rng)
        else:
            decomp = random_factorizable(dims, rng, degenerate=ensemble == "degenerate")
        first = perturb_nondegenerate(decomp, epsilon / 2.0, seed=rng)
        second = perturb_nonfactorizable(first.decomposition, epsilon / 2.0, tol=tol)
        eta = first.eta + second.eta
        rho, rho_hat = decomp.assemble(), second.decomposition.assemble()
        distance = linalg.operator_norm(rho - rho_hat)
        residual = factorization_criterion(second.decomposition)
        gap = float(np.diff(_reduced_eig(second.decomposition).eigenvalues).min()) if dims.m > 1 else math.inf
        success = residual > tol and gap > DEGENERACY_TOL and distance <= 2 * eta and 2 * eta < epsilon
        trials.append(DensityTrial(idx, distance, eta, residual, gap, bool(success)))
    return DensitySummary(dims, ensemble, float(epsilon), int(seed), trials, perf_counter() - start)


# --- correlation reports and time series ---------------------------------------

@dataclass(frozen=True)
class CorrelationReport:
    correlation_value: complex
    factorized_value: complex
    residual: float
    k_quasi_abelian_II: int | None
    reduced_nondegenerate: bool


def correlation_report(model: SpinFlipModel, pair: ObservablePair,
                       decomposition: SeparableDecomposition | None = None) -> CorrelationReport:
    """Correlation, factorized value and criterion diagnostics for ``(rho, F, G)``.

    The residual depends on the assembled state only. Without a
    decomposition the factorized value is ``Tr(rho (F (x) G))``, which every
    decomposition reproduces.
    """
    f_mat, g_mat = _check_pair(pair, model.dims)
    if decomposition is None:
        fact = complex(np.trace(model.rho @ np.kron(f_mat, g_mat)))
        k_ii = None
    else:
        fact = factorized_value(decomposition, pair)
        diag = quasi_abelian_diagnose(decomposition.factors_II, decomposition.weights)
        k_ii = diag.K if diag.is_quasi_abelian else None
    return CorrelationReport(
        correlation_value=correlation(model, pair),
        factorized_value=fact,
        residual=factorization_criterion(model),
        k_quasi_abelian_II=k_ii,
        reduced_nondegenerate=is_nondegenerate(model.reduced_eig.eigenvalues),
    )


def _observables(model: SpinFlipModel, pair: ObservablePair) -> tuple[np.ndarray, np.ndarray]:
    f_mat, g_mat = _check_pair(pair, model.dims)
    return linalg.embed_first(f_mat, model.dims), linalg.embed_second(g_mat, model.dims)


def correlation_series_terms(model: SpinFlipModel, pair: ObservablePair, order: int) -> list[complex]:
    """``[C^q, C^{L,1}, ..., C^{L,order}]`` with ``C^{L,k} = w(g L^k f) - w(g) w(L^k f)``."""
    if not 0 <= order <= MAX_SERIES_ORDER:
        raise ValueError(f"order must lie in [0, {MAX_SERIES_ORDER}], got {order}")
    f, g = _observables(model, pair)
    wg = model.expectation(g)
    out = []
    x = f
    for _ in range(order + 1):
        out.append(model.expectation(g @ x) - wg * model.expectation(x))
        x = model.generator(x)
    return out


def series_partial_sum(terms: Sequence[complex], t: float) -> complex:
    return complex(sum(c * t**k / math.factorial(k) for k, c in enumerate(terms)))


def truncated_correlation(model: SpinFlipModel, pair: ObservablePair, t: float) -> complex:
    """``w(g T_t(f)) - w(g) w(T_t(f))`` from the exact semigroup."""
    f, g = _observables(model, pair)
    tf = model.heisenberg_semigroup(f, t)
    return model.expectation(g @ tf) - model.expectation(g) * model.expectation(tf)
