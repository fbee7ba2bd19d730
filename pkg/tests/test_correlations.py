import numpy as np
import pytest
from numpy.testing import assert_allclose

from blockflip import linalg
from blockflip.correlations import (
    HypothesisError,
    ObservablePair,
    StructureError,
    abelian_decomposition_from_zeros,
    correlation,
    correlation_report,
    correlation_series_terms,
    correlation_trace_form,
    criterion_frame,
    density_experiment,
    factorization_criterion,
    factorized_value,
    perturb_nondegenerate,
    perturb_nonfactorizable,
    quasi_abelian_diagnose,
    random_factorizable,
    series_partial_sum,
    sqrt_separable,
    truncated_correlation,
)
from blockflip.dynamics import build_model
from blockflip.states import (
    BellDiagonalParams,
    DecompositionTerm,
    SeparableDecomposition,
    bell_reference,
    random_density,
    random_separable,
    random_unitary,
)

import oracles

Z = np.diag([1.0, -1.0]).astype(complex)


def _rand(d, rng):
    return rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))


def _pair(dims, rng):
    return ObservablePair(_rand(dims[0], rng), _rand(dims[1], rng))


def _single(r1, r2):
    n, m = r1.shape[0], r2.shape[0]
    return SeparableDecomposition.from_terms((n, m), [DecompositionTerm(1.0, r1, r2)])


# --- correlation formula ----------------------------------------------------------

def test_correlation_maximally_mixed():
    model = build_model(np.eye(4) / 4, (2, 2))
    assert abs(correlation(model, ObservablePair(Z, Z))) < 1e-15


def test_correlation_product_state():
    rng = np.random.default_rng(1)
    r1, r2 = random_density(2, rng), random_density(3, rng)
    model = build_model(np.kron(r1, r2), (2, 3))
    pair = _pair((2, 3), rng)
    expected = np.trace(r1 @ pair.F) * np.trace(r2 @ pair.G)
    assert abs(correlation(model, pair) - expected) < 1e-12


def test_correlation_ordering_convention():
    model = build_model(bell_reference(BellDiagonalParams((0.4, 0.3, 0.2, 0.1))), (2, 2))
    pair = ObservablePair(Z, Z)
    assert abs(correlation(model, pair) - correlation_trace_form(model, pair)) < 1e-12
    rng = np.random.default_rng(2)
    rho = random_density(6, rng)
    model = build_model(rho, (2, 3))
    pair = _pair((2, 3), rng)
    value = correlation(model, pair)
    assert abs(value - correlation_trace_form(model, pair)) < 1e-12
    # the other ordering Tr(rho g E(f)) differs for generic states
    f = linalg.embed_first(pair.F, (2, 3))
    g = linalg.embed_second(pair.G, (2, 3))
    other = np.trace(rho @ g @ model.cond_expectation(f))
    assert abs(value - other) > 1e-3


def test_correlation_matches_loop_oracle():
    rng = np.random.default_rng(3)
    rho = random_density(6, rng)
    model = build_model(rho, (2, 3))
    frame = criterion_frame(model)
    u = np.kron(frame.h1_basis, frame.h2_basis)
    rho_b = u.conj().T @ rho @ u
    pair = _pair((2, 3), rng)
    fb = frame.h1_basis.conj().T @ pair.F @ frame.h1_basis
    gb = frame.h2_basis.conj().T @ pair.G @ frame.h2_basis
    assert abs(correlation(model, pair) - oracles.correlation_loops(rho_b, 2, 3, fb, gb)) < 1e-12


def test_factorized_value_trivial_cases():
    rng = np.random.default_rng(4)
    d = random_separable((2, 3), 3, seed=4)
    eye = ObservablePair(np.eye(2), np.eye(3))
    assert factorized_value(d, eye) == pytest.approx(1.0, abs=1e-14)
    g = _rand(3, rng)
    red = linalg.partial_trace_first(d.assemble(), (2, 3))
    assert factorized_value(d, ObservablePair(np.eye(2), g)) == pytest.approx(np.trace(red @ g), abs=1e-13)
    pair = _pair((2, 3), rng)
    assert factorized_value(d, pair) == pytest.approx(np.trace(d.assemble() @ np.kron(pair.F, pair.G)), abs=1e-13)


# --- criterion --------------------------------------------------------------------

def test_criterion_product_and_abelian_second_side():
    rng = np.random.default_rng(5)
    prod = _single(random_density(2, rng), random_density(3, rng))
    assert factorization_criterion(prod) <= 1e-12
    for _ in range(10):
        d = random_factorizable((2, 3), rng)
        assert factorization_criterion(d) <= 1e-12


def test_criterion_detects_generic_states():
    d = random_separable((2, 2), 3, seed=9)
    assert factorization_criterion(d) > 1e-4


def test_criterion_input_forms_agree():
    d = random_separable((2, 3), 2, seed=6)
    rho = d.assemble()
    r1 = factorization_criterion(d)
    assert r1 == factorization_criterion(rho, (2, 3))
    assert r1 == factorization_criterion(build_model(rho, (2, 3)))
    with pytest.raises(linalg.DimensionError):
        factorization_criterion(rho)


def test_criterion_requires_invertible_reduced_state():
    rng = np.random.default_rng(7)
    psi = np.zeros(3)
    psi[0] = 1
    d = _single(random_density(2, rng), np.outer(psi, psi).astype(complex))
    with pytest.raises(linalg.SingularMatrixError):
        factorization_criterion(d)


def test_criterion_h1_basis_invariance():
    rng = np.random.default_rng(8)
    fz = random_factorizable((2, 3), rng)
    gen = random_separable((2, 3), 3, seed=8)
    for _ in range(10):
        w = random_unitary(2, rng)
        assert factorization_criterion(fz, h1_basis=w) <= 1e-10
        assert factorization_criterion(gen, h1_basis=w) > 1e-6


def test_rank_one_probes_equal_gap_entries():
    d = random_separable((2, 2), 2, seed=10)
    rho = d.assemble()
    model = build_model(rho, (2, 2))
    frame = criterion_frame(model)
    gap = frame.gap_tensor()
    w, v = frame.h1_basis, frame.h2_basis
    k, l, j, i = 0, 1, 1, 0
    f = np.outer(w[:, k], w[:, l].conj())
    g = np.outer(v[:, i], v[:, j].conj())
    diff = correlation(model, ObservablePair(f, g)) - factorized_value(d, ObservablePair(f, g))
    assert abs(diff - gap[k, l, j, i]) < 1e-13


def test_report_decomposition_independence():
    d = random_separable((2, 3), 3, seed=11)
    rng = np.random.default_rng(11)
    pair = _pair((2, 3), rng)
    model = build_model(d.assemble(), (2, 3))
    a = correlation_report(model, pair, d)
    b = correlation_report(model, pair)
    reordered = SeparableDecomposition((2, 3), tuple(reversed(d.terms)))
    c = correlation_report(model, pair, reordered)
    assert a.residual == b.residual == c.residual
    assert a.correlation_value == b.correlation_value == c.correlation_value
    assert abs(a.factorized_value - b.factorized_value) < 1e-13
    assert abs(a.factorized_value - c.factorized_value) < 1e-13
    assert a.reduced_nondegenerate


def test_report_residual_bounds_probe_gap():
    fz = random_factorizable((2, 2), np.random.default_rng(12))
    model = build_model(fz.assemble(), (2, 2))
    rep = correlation_report(model, ObservablePair(Z, _rand(2, np.random.default_rng(1))), fz)
    assert rep.residual <= 1e-12
    assert abs(rep.correlation_value - rep.factorized_value) < 1e-12
    assert rep.k_quasi_abelian_II == 2


# --- quasi-abelian families -------------------------------------------------------

def test_quasi_abelian_singleton():
    diag = quasi_abelian_diagnose([np.diag([0.5, 0.25, 0.25]).astype(complex)], [1.0])
    assert diag.is_quasi_abelian and diag.K == 2
    assert diag.partition == [(0, 1), (2,)]


def test_quasi_abelian_plus_minus():
    plus = np.full((2, 2), 0.5, dtype=complex)
    minus = np.array([[0.5, -0.5], [-0.5, 0.5]], dtype=complex)
    diag = quasi_abelian_diagnose([plus, minus], [0.5, 0.5])
    assert diag.is_quasi_abelian and diag.K == 1
    assert diag.partition == [(0, 1)]


def test_quasi_abelian_commuting_diagonal():
    fam = [np.diag([0.7, 0.2, 0.1]), np.diag([0.1, 0.3, 0.6])]
    diag = quasi_abelian_diagnose(fam, [0.6, 0.4])
    assert diag.is_quasi_abelian and diag.K == 3
    assert sorted(i for cell in diag.partition for i in cell) == [0, 1, 2]


def test_quasi_abelian_failure():
    plus = np.full((2, 2), 0.5, dtype=complex)
    diag = quasi_abelian_diagnose([plus, np.diag([1.0, 0.0])], [0.5, 0.5])
    assert not diag.is_quasi_abelian
    assert diag.max_cross_element > 0.1
    with pytest.raises(ValueError):
        quasi_abelian_diagnose([plus], [0.5])


# --- decompositions from block structure ------------------------------------------

def test_decomposition_from_zeros_recovers_terms():
    rng = np.random.default_rng(13)
    v = random_unitary(2, rng)
    taus = [random_density(3, rng) for _ in range(2)]
    p = [0.3, 0.7]
    rho = sum(p[s] * np.kron(np.outer(v[:, s], v[:, s].conj()), taus[s]) for s in range(2))
    d = abelian_decomposition_from_zeros(rho, (2, 3), "I", basis=v)
    assert_allclose(d.weights, p, atol=1e-12)
    for s in range(2):
        assert_allclose(d.factors_II[s], taus[s], atol=1e-12)
    assert_allclose(d.assemble(), rho, atol=1e-12)


def test_decomposition_from_zeros_side_two_and_edge_cases():
    rng = np.random.default_rng(14)
    r1 = random_density(2, rng)
    psi = np.array([1.0, 0.0])
    prod = np.kron(np.outer(psi, psi), r1).astype(complex)
    d = abelian_decomposition_from_zeros(prod, (2, 2), "I")
    assert len(d) == 1
    mm = abelian_decomposition_from_zeros(np.eye(4) / 4, (2, 2), "II")
    assert_allclose(mm.weights, [0.5, 0.5])
    for r in mm.factors_I:
        assert_allclose(r, np.eye(2) / 2)
    fz = random_factorizable((3, 2), rng)
    v = np.linalg.eigh(linalg.partial_trace_first(fz.assemble(), (3, 2)))[1]
    back = abelian_decomposition_from_zeros(fz.assemble(), (3, 2), "II", basis=v)
    assert_allclose(back.assemble(), fz.assemble(), atol=1e-10)


def test_decomposition_from_zeros_rejects():
    d = random_separable((2, 2), 3, seed=15)
    with pytest.raises(StructureError, match="off-diagonal block structure present"):
        abelian_decomposition_from_zeros(d.assemble(), (2, 2), "I")
    with pytest.raises(ValueError):
        abelian_decomposition_from_zeros(d.assemble(), (2, 2), "III")


# --- separable square root --------------------------------------------------------

def test_sqrt_separable_two_terms():
    rng = np.random.default_rng(16)
    v = random_unitary(2, rng)
    t1, t2 = random_density(2, rng), random_density(2, rng)
    p1, p2 = np.outer(v[:, 0], v[:, 0].conj()), np.outer(v[:, 1], v[:, 1].conj())
    d = SeparableDecomposition.from_terms((2, 2), [DecompositionTerm(0.3, p1, t1), DecompositionTerm(0.7, p2, t2)])
    root = sqrt_separable(d)
    expected = np.sqrt(0.3) * np.kron(p1, oracles.psd_sqrt(t1)) + np.sqrt(0.7) * np.kron(p2, oracles.psd_sqrt(t2))
    assert_allclose(root, expected, atol=1e-12)


def test_sqrt_separable_maximally_mixed_and_random():
    d = SeparableDecomposition.from_terms((2, 2), [DecompositionTerm(1.0, np.eye(2) / 2, np.eye(2) / 2)])
    assert_allclose(sqrt_separable(d), np.eye(4) / 2, atol=1e-14)
    rng = np.random.default_rng(17)
    fz = random_factorizable((2, 3), rng)
    root = sqrt_separable(fz)
    assert_allclose(root @ root, fz.assemble(), atol=1e-12)
    assert np.linalg.eigvalsh(root).min() > -1e-12
    assert_allclose(root, oracles.psd_sqrt(fz.assemble()), atol=1e-10)


def test_sqrt_separable_commuting_non_projector_side():
    rng = np.random.default_rng(18)
    fam = [np.diag([0.8, 0.2]), np.diag([0.3, 0.7]), np.diag([0.5, 0.5])]
    terms = [DecompositionTerm(w, f.astype(complex), random_density(3, rng)) for w, f in zip((0.2, 0.5, 0.3), fam)]
    d = SeparableDecomposition.from_terms((2, 3), terms)
    root = sqrt_separable(d)
    assert_allclose(root @ root, d.assemble(), atol=1e-12)


def test_sqrt_separable_without_abelian_side():
    d = random_separable((2, 2), 3, seed=19)
    with pytest.raises(HypothesisError, match="no abelian side"):
        sqrt_separable(d)


# --- perturbations ----------------------------------------------------------------

def _mm_decomposition(n, m):
    return SeparableDecomposition.from_terms((n, m), [DecompositionTerm(1.0, np.eye(n) / n, np.eye(m) / m)])


def test_perturb_nondegenerate_maximally_mixed():
    d = _mm_decomposition(2, 2)
    out = perturb_nondegenerate(d, 0.1)
    w = np.linalg.eigvalsh(linalg.partial_trace_first(out.decomposition.assemble(), (2, 2)))
    assert np.diff(w).min() > 1e-10
    dist = linalg.operator_norm(out.decomposition.assemble() - d.assemble())
    assert dist <= 2 * out.eta < 0.1


def test_perturb_nondegenerate_iterates_over_clusters():
    d = _mm_decomposition(2, 4)
    out = perturb_nondegenerate(d, 1e-3, seed=3)
    w = np.linalg.eigvalsh(linalg.partial_trace_first(out.decomposition.assemble(), (2, 4)))
    assert np.diff(w).min() > 1e-10
    assert out.passes == 3
    assert linalg.operator_norm(out.decomposition.assemble() - d.assemble()) <= 2 * out.eta < 1e-3


def test_perturb_nondegenerate_unchanged_when_simple():
    d = random_separable((2, 2), 2, seed=20)
    out = perturb_nondegenerate(d, 0.1)
    assert out.eta == 0.0 and out.decomposition is d


def test_perturb_nondegenerate_respects_gaps():
    # reduced spectrum (0.25, 0.25, 0.5): eta must stay below half the gap 0.25
    tau = np.diag([0.25, 0.25, 0.5]).astype(complex)
    d = SeparableDecomposition.from_terms((2, 3), [DecompositionTerm(1.0, np.eye(2) / 2, tau)])
    out = perturb_nondegenerate(d, 1.0)
    assert 0 < out.eta < 0.5 * 0.25
    w = np.linalg.eigvalsh(linalg.partial_trace_first(out.decomposition.assemble(), (2, 3)))
    assert np.diff(w).min() > 1e-10
    with pytest.raises(ValueError):
        perturb_nondegenerate(d, 0.0)


def test_perturb_nonfactorizable_witness():
    # lambda_1 == lambda_4 makes the Bell-diagonal state diagonal in the product basis
    params = BellDiagonalParams((0.3, 0.25, 0.15, 0.3))
    rho = bell_reference(params)
    red = linalg.partial_trace_first(rho, (2, 2))
    v = np.linalg.eigh(red)[1]
    d = abelian_decomposition_from_zeros(rho, (2, 2), "II", basis=v)
    assert factorization_criterion(d) <= 1e-12
    eps = 0.05
    out = perturb_nonfactorizable(d, eps)
    rho_hat = out.decomposition.assemble()
    assert out.eta == pytest.approx(0.45 * eps)
    assert abs(np.trace(rho_hat) - 1) < 1e-15
    assert linalg.operator_norm(rho_hat - rho) <= 2 * out.eta < eps
    assert factorization_criterion(rho_hat, (2, 2)) > 1e-6
    w = np.linalg.eigvalsh(linalg.partial_trace_first(rho_hat, (2, 2)))
    assert np.diff(w).min() > 1e-10
    # added second factors have spectrum 1/2 +- 1/4
    tau = out.decomposition.terms[-1].rho_II
    assert_allclose(np.linalg.eigvalsh(tau), [0.25, 0.75], atol=1e-14)


def test_perturb_nonfactorizable_paths():
    gen = random_separable((2, 2), 3, seed=21)
    out = perturb_nonfactorizable(gen, 0.01)
    assert out.eta == 0.0 and out.decomposition is gen
    mm = _mm_decomposition(2, 2)
    with pytest.raises(StructureError, match="degenerate"):
        perturb_nonfactorizable(mm, 0.01)
    one = SeparableDecomposition.from_terms((1, 2), [DecompositionTerm(1.0, np.eye(1), np.diag([0.3, 0.7]))])
    with pytest.raises(StructureError):
        perturb_nonfactorizable(one, 0.01)
    fz = random_factorizable((2, 2), np.random.default_rng(2))
    with pytest.raises(ValueError):
        perturb_nonfactorizable(fz, 0.01, eta=0.006)


@pytest.mark.parametrize("ensemble", ["separable", "factorizable", "degenerate"])
def test_density_experiment_small(ensemble):
    s = density_experiment((2, 2), 10, 1e-3, seed=3, ensemble=ensemble)
    assert s.fraction == 1.0
    d = s.to_dict()
    assert d["trials"] == 10 and d["max_distance"] < 1e-3
    again = density_experiment((2, 2), 10, 1e-3, seed=3, ensemble=ensemble)
    assert again.to_dict() == d


def test_density_experiment_other_dims_and_empty():
    assert density_experiment((2, 3), 5, 1e-2, seed=1).fraction == 1.0
    assert density_experiment((3, 2), 5, 1e-2, seed=1, ensemble="degenerate").fraction == 1.0
    empty = density_experiment((2, 2), 0, 1e-2, seed=1)
    assert empty.fraction is None and empty.to_dict()["trials"] == 0


def test_density_experiment_tiny_epsilon():
    s = density_experiment((2, 2), 10, 1e-6, seed=4, ensemble="factorizable")
    assert s.fraction == 1.0
    assert all(t.distance <= 2 * t.eta < 1e-6 for t in s.trials)


# --- series -----------------------------------------------------------------------

def test_series_identity_observables():
    rng = np.random.default_rng(22)
    model = build_model(random_density(4, rng), (2, 2))
    for pair in (ObservablePair(np.eye(2), _rand(2, rng)), ObservablePair(_rand(2, rng), np.eye(2))):
        assert np.abs(correlation_series_terms(model, pair, 4)).max() < 1e-12


def test_series_product_state_has_no_static_correlation():
    rng = np.random.default_rng(23)
    model = build_model(np.kron(random_density(2, rng), random_density(3, rng)), (2, 3))
    terms = correlation_series_terms(model, _pair((2, 3), rng), 2)
    assert abs(terms[0]) < 1e-13


def test_series_matches_semigroup_at_half():
    rng = np.random.default_rng(24)
    model = build_model(random_density(6, rng), (2, 3))
    pair = _pair((2, 3), rng)
    terms = correlation_series_terms(model, pair, 8)
    assert len(terms) == 9
    assert abs(series_partial_sum(terms, 0.5) - truncated_correlation(model, pair, 0.5)) < 1e-8
    assert series_partial_sum(terms, 0.0) == terms[0]
    with pytest.raises(ValueError):
        correlation_series_terms(model, pair, 9)


def test_first_series_term_formula():
    rng = np.random.default_rng(25)
    model = build_model(random_density(4, rng), (2, 2))
    pair = _pair((2, 2), rng)
    f = linalg.embed_first(pair.F, (2, 2))
    g = linalg.embed_second(pair.G, (2, 2))
    lf = model.cond_expectation(f) - f
    expected = model.expectation(g @ lf) - model.expectation(g) * model.expectation(lf)
    assert abs(correlation_series_terms(model, pair, 1)[1] - expected) < 1e-13


def test_series_shortfall_is_truncation():
    # the generator has eigenvalue -1, so the order-8 remainder at t = 1 is about |C| / 9!
    rng = np.random.default_rng(26)
    model = build_model(random_density(4, rng), (2, 2))
    pair = _pair((2, 2), rng)
    f = linalg.embed_first(pair.F, (2, 2))
    g = linalg.embed_second(pair.G, (2, 2))
    wg = model.expectation(g)
    terms, x = [], f
    for _ in range(30):
        terms.append(model.expectation(g @ x) - wg * model.expectation(x))
        x = model.generator(x)
    assert_allclose(terms[:9], correlation_series_terms(model, pair, 8), atol=1e-13)
    exact = truncated_correlation(model, pair, 1.0)
    assert abs(series_partial_sum(terms, 1.0) - exact) < 1e-12
    tail = abs(series_partial_sum(terms[:9], 1.0) - exact)
    assert tail == pytest.approx(abs(series_partial_sum(terms, 1.0) - series_partial_sum(terms[:9], 1.0)), rel=1e-3)
