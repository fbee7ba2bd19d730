"""Command-line front end.

Exit codes: 0 success (or: the state factorizes), 1 negative finding
(the state does not factorize, a construction missed its contract),
2 invalid input.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from importlib.metadata import PackageNotFoundError, version
from time import perf_counter

import numpy as np

from . import linalg
from ._backend import BACKEND
from .correlations import (
    ENSEMBLES,
    FACTORIZATION_TOL,
    ObservablePair,
    abelian_decomposition_from_zeros,
    correlation_series_terms,
    density_experiment,
    eigenvalue_cells,
    factorization_criterion,
    perturb_nondegenerate,
    perturb_nonfactorizable,
    quasi_abelian_diagnose,
    random_factorizable,
    series_partial_sum,
    truncated_correlation,
)
from .dynamics import build_model
from .linalg import BipartiteDims
from .statefile import StateFileError, read_state, write_state
from .states import (
    BellDiagonalParams,
    DecompositionTerm,
    SeparableDecomposition,
    bell_reference,
    closed_form_dual,
    ppt_check,
    product_state_sigma,
    random_density,
    random_separable,
)

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_INVALID = 2

DEMO_COLUMNS = (
    "t",
    "negativity_mix",
    "ppt_mix",
    "negativity_semigroup",
    "ppt_semigroup",
    "closed_form_max_dev",
)
CORRELATE_COLUMNS = ("t", "series_re", "series_im", "exact_re", "exact_im", "abs_diff")


class UsageError(ValueError):
    """Invalid command-line values detected after argument parsing."""


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0+unknown"


def default_tol() -> float:
    text = os.environ.get("BLOCKFLIP_TOL")
    if not text:
        return FACTORIZATION_TOL
    try:
        tol = float(text)
    except ValueError as exc:
        raise UsageError(f"BLOCKFLIP_TOL is not a number: {text!r}") from exc
    if not tol > 0:
        raise UsageError(f"BLOCKFLIP_TOL must be positive, got {tol}")
    return tol


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from exc


def _complex_json(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def parse_operator(spec: str, dim: int) -> np.ndarray:
    """Parse an observable specification on a ``dim``-dimensional space.

    Accepted forms: ``I``; ``e:k,l`` for ``|k><l|``; ``x:k,l``, ``y:k,l``,
    ``z:k,l`` for the Pauli matrices on the span of ``|k>, |l>``;
    ``diag:v0,v1,...``; or an inline JSON matrix of numbers or
    ``[re, im]`` pairs.
    """
    spec = spec.strip()
    if spec.upper() == "I":
        return np.eye(dim, dtype=np.complex128)
    if spec.startswith("["):
        try:
            arr = np.array(json.loads(spec), dtype=float)
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            raise UsageError(f"cannot parse inline matrix {spec!r}") from exc
        if arr.ndim == 3 and arr.shape[-1] == 2:
            arr = arr[..., 0] + 1j * arr[..., 1]
        if arr.shape != (dim, dim):
            raise UsageError(f"inline matrix must be {dim}x{dim}, got shape {arr.shape}")
        return np.asarray(arr, dtype=np.complex128)
    kind, _, rest = spec.partition(":")
    kind = kind.lower()
    if kind == "diag":
        vals = _floats(rest, "diag")
        if len(vals) != dim:
            raise UsageError(f"diag needs {dim} entries, got {len(vals)}")
        return np.diag(vals).astype(np.complex128)
    if kind in ("e", "x", "y", "z"):
        try:
            k, l = (int(x) for x in rest.split(","))
        except ValueError as exc:
            raise UsageError(f"{kind}: expected two indices 'k,l', got {rest!r}") from exc
        if not (0 <= k < dim and 0 <= l < dim):
            raise UsageError(f"indices must lie in [0, {dim}), got {k},{l}")
        if kind != "e" and k == l:
            raise UsageError(f"{kind}: indices must differ")
        out = np.zeros((dim, dim), dtype=np.complex128)
        if kind == "e":
            out[k, l] = 1.0
        elif kind == "x":
            out[k, l] = out[l, k] = 1.0
        elif kind == "y":
            out[k, l], out[l, k] = -1j, 1j
        else:
            out[k, k], out[l, l] = 1.0, -1.0
        return out
    raise UsageError(f"unknown operator specification {spec!r}")


def _write_csv(path, columns, rows) -> None:
    def emit(handle):
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(x) if isinstance(x, float) else x for x in row])

    if path is None or path == "-":
        emit(sys.stdout)
    else:
        with open(path, "w", newline="") as handle:
            emit(handle)


def _emit_report(args, results: dict, digest: str | None = None, tolerances: dict | None = None,
                 seed: int | None = None) -> None:
    if not getattr(args, "report", None):
        return
    report = {
        "command": args.argv,
        "version": _version(),
        "backend": BACKEND,
        "input_digest": digest,
        "tolerances": tolerances or {},
        "seed": seed,
        "results": results,
    }
    with open(args.report, "w") as handle:
        json.dump(report, handle, indent=1)
        handle.write("\n")


def _info(lines: dict, stream=None) -> None:
    stream = sys.stdout if stream is None else stream
    for key, value in lines.items():
        print(f"{key}: {value}", file=stream)


# --- commands ------------------------------------------------------------------

def cmd_demo(args) -> int:
    lam = _floats(args.lambdas, "--lambdas")
    params = BellDiagonalParams(tuple(lam))
    if not 0 < args.a < 1:
        raise UsageError(f"--a must lie in (0, 1), got {args.a}")
    if args.steps < 1 or not 0 <= args.t_max <= 1:
        raise UsageError("--steps must be >= 1 and --t-max must lie in [0, 1]")
    rho = bell_reference(params)
    model = build_model(rho, (2, 2))
    sigma = product_state_sigma(np.eye(2) / 2, args.a)
    ed = model.dual_map(sigma)
    l1, l2, l3, l4 = params.lambdas
    closed = None
    if abs(l2 - l3) <= 1e-12 and l1 > l4:
        closed = closed_form_dual(params, args.a).reconstruct()
    rows = []
    for t in np.linspace(0.0, args.t_max, args.steps + 1):
        t = float(t)
        mix = (1 - t) * sigma + t * ed
        pm = ppt_check(mix, (2, 2))
        ps = ppt_check(model.schrodinger_semigroup(sigma, t), (2, 2))
        dev = "" if closed is None else float(np.abs((1 - t) * sigma + t * closed - mix).max())
        rows.append((t, pm.negativity, int(pm.is_ppt), ps.negativity, int(ps.is_ppt), dev))
    _write_csv(args.out, DEMO_COLUMNS, rows)
    results = {
        "lambdas": list(params.lambdas),
        "a": args.a,
        "negativity_dual_map": ppt_check(ed, (2, 2)).negativity,
        "max_negativity_mix": max(r[1] for r in rows),
        "max_negativity_semigroup": max(r[3] for r in rows),
        "closed_form_available": closed is not None,
    }
    _info({k: results[k] for k in ("negativity_dual_map", "max_negativity_mix", "max_negativity_semigroup")},
          sys.stderr)
    _emit_report(args, results)
    return EXIT_OK


def _reduced_summary(rho, dims) -> dict:
    w = np.linalg.eigvalsh(linalg.partial_trace_first(rho, dims))
    cells = eigenvalue_cells(w)
    return {
        "reduced_spectrum": [float(x) for x in w],
        "reduced_nondegenerate": all(len(c) == 1 for c in cells),
        "reduced_cells": [list(c) for c in cells],
    }


def cmd_check(args) -> int:
    tol = args.tol if args.tol is not None else default_tol()
    state = read_state(args.state_file)
    residual = factorization_criterion(state.rho, state.dims)
    results = {"residual": residual, "factorizes": residual <= tol}
    results.update(_reduced_summary(state.rho, state.dims))
    if state.decomposition is not None:
        d = state.decomposition
        for side, fam in (("I", d.factors_I), ("II", d.factors_II)):
            diag = quasi_abelian_diagnose(fam, d.weights)
            results[f"quasi_abelian_{side}"] = diag.is_quasi_abelian
            results[f"K_{side}"] = diag.K if diag.is_quasi_abelian else None
    _info(results)
    _emit_report(args, results, state.digest, {"factorization": tol})
    return EXIT_OK if results["factorizes"] else EXIT_NEGATIVE


def _as_decomposition(state) -> SeparableDecomposition:
    if state.decomposition is not None:
        return state.decomposition
    # a bare matrix is usable when it has block structure on one side
    for side in ("II", "I"):
        basis = None
        if side == "II":
            basis = np.linalg.eigh(linalg.partial_trace_first(state.rho, state.dims))[1]
        try:
            return abelian_decomposition_from_zeros(state.rho, state.dims, side, basis=basis, tol=1e-9)
        except ValueError:
            continue
    raise UsageError("matrix input has no block structure; supply a file with 'terms'")


def cmd_perturb(args) -> int:
    tol = args.tol if args.tol is not None else default_tol()
    if not args.epsilon > 0:
        raise UsageError(f"--epsilon must be positive, got {args.epsilon}")
    state = read_state(args.state_file)
    decomp = _as_decomposition(state)
    if args.mode == "nondegenerate":
        result = perturb_nondegenerate(decomp, args.epsilon, seed=args.seed)
    else:
        result = perturb_nonfactorizable(decomp, args.epsilon, tol=tol)
    rho_hat = result.decomposition.assemble()
    write_state(args.out, state.dims, decomposition=result.decomposition)
    diff = linalg.norms(state.rho - rho_hat)
    before = _reduced_summary(state.rho, state.dims)
    after = _reduced_summary(rho_hat, state.dims)
    residual = factorization_criterion(rho_hat, state.dims)
    results = {
        "mode": args.mode,
        "eta": result.eta,
        "distance_op": diff.operator,
        "distance_tr": diff.trace,
        "reduced_spectrum_before": before["reduced_spectrum"],
        "reduced_spectrum_after": after["reduced_spectrum"],
        "reduced_nondegenerate_after": after["reduced_nondegenerate"],
        "residual_after": residual,
    }
    _info(results)
    _emit_report(args, results, state.digest, {"factorization": tol}, args.seed)
    ok = diff.operator < args.epsilon and after["reduced_nondegenerate"]
    if args.mode == "nonfactorizable":
        ok = ok and residual > tol
    return EXIT_OK if ok else EXIT_NEGATIVE


def cmd_correlate(args) -> int:
    state = read_state(args.state_file)
    n, m = state.dims
    pair = ObservablePair(parse_operator(args.F, n), parse_operator(args.G, m))
    model = build_model(state.rho, state.dims)
    terms = correlation_series_terms(model, pair, args.order)
    rows = []
    for t in _floats(args.t, "--t"):
        if t < 0:
            raise UsageError(f"times must be non-negative, got {t}")
        s = series_partial_sum(terms, t)
        e = truncated_correlation(model, pair, t)
        rows.append((t, s.real, s.imag, e.real, e.imag, abs(s - e)))
    _write_csv(args.out, CORRELATE_COLUMNS, rows)
    results = {"order": args.order, "terms": [_complex_json(c) for c in terms]}
    _info({"C_q": terms[0], **{f"C_L{k}": c for k, c in enumerate(terms[1:], start=1)}}, sys.stderr)
    _emit_report(args, results, state.digest)
    return EXIT_OK


def cmd_density(args) -> int:
    tol = args.tol if args.tol is not None else default_tol()
    dims = BipartiteDims.parse(args.dims)
    if args.trials < 0:
        raise UsageError("--trials must be non-negative")
    if dims.total > 16:
        raise UsageError(f"density experiment is limited to n*m <= 16, got {dims.total}")
    start = perf_counter()
    summary = density_experiment(dims, args.trials, args.epsilon, args.seed, ensemble=args.ensemble, tol=tol)
    results = summary.to_dict()
    _info(results)
    print(f"runtime_s: {perf_counter() - start:.3f}", file=sys.stderr)
    _emit_report(args, results, None, {"factorization": tol}, args.seed)
    frac = summary.fraction
    return EXIT_OK if frac is None or frac == 1.0 else EXIT_NEGATIVE


def cmd_state(args) -> int:
    rng = np.random.default_rng(args.seed)
    dims = BipartiteDims.parse(args.dims)
    kind = args.kind
    rho = decomp = None
    if kind == "bell":
        if dims != (2, 2):
            raise UsageError("bell states need --dims 2x2")
        rho = bell_reference(BellDiagonalParams(tuple(_floats(args.lambdas, "--lambdas"))))
    elif kind == "mixed":
        rho = np.eye(dims.total, dtype=np.complex128) / dims.total
    elif kind == "product":
        decomp = SeparableDecomposition.from_terms(
            dims, [DecompositionTerm(1.0, random_density(dims.n, rng), random_density(dims.m, rng))]
        )
    elif kind == "separable":
        decomp = random_separable(dims, args.terms, rng)
    elif kind == "factorizable":
        decomp = random_factorizable(dims, rng)
    else:
        # maximally mixed state as a degenerate side-II decomposition
        decomp = random_factorizable(dims, rng, degenerate=True)
    write_state(args.out, dims, rho=rho, decomposition=decomp)
    return EXIT_OK


# --- argument parsing ------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockflip",
        description="Block spin-flip dynamics: entanglement production and correlation factorization.",
        epilog="Exit codes: 0 success or factorizes, 1 negative finding, 2 invalid input. "
        "BLOCKFLIP_TOL overrides the default factorization tolerance (1e-9).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, tol=False):
        p.add_argument("--report", metavar="PATH", help="write a JSON run report")
        if tol:
            p.add_argument("--tol", type=float, default=None, help="factorization tolerance (default 1e-9)")

    p = sub.add_parser(
        "demo",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        help="two-qubit entanglement production scan",
        description="Scan t in [0, t-max] for the Bell-diagonal reference state and the product state "
        "(I/2) (x) diag(a, 1-a).\n\nCSV columns:\n"
        "  t                     time / mixing parameter\n"
        "  negativity_mix        negativity of (1-t) sigma + t E^d(sigma)\n"
        "  ppt_mix               1 if that state has positive partial transpose\n"
        "  negativity_semigroup  negativity of T_t^d(sigma)\n"
        "  ppt_semigroup         1 if T_t^d(sigma) has positive partial transpose\n"
        "  closed_form_max_dev   max entry deviation of the closed-form mix (empty if not applicable)",
    )
    p.add_argument("--lambdas", default="0.7,0.1,0.1,0.1", help="four positive weights summing to 1")
    p.add_argument("--a", type=float, default=0.9, help="product state parameter in (0, 1)")
    p.add_argument("--t-max", type=float, default=1.0, help="largest t, at most 1")
    p.add_argument("--steps", type=int, default=20, help="number of intervals on the t grid")
    p.add_argument("--out", help="CSV path (default stdout)")
    common(p)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("check", help="factorization criterion for a state file")
    p.add_argument("state_file")
    common(p, tol=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("perturb", help="move a state into the nondegenerate or non-factorizing set")
    p.add_argument("state_file")
    p.add_argument("--mode", choices=("nondegenerate", "nonfactorizable"), required=True,
                   help="target set")
    p.add_argument("--epsilon", type=float, required=True, help="operator-norm distance budget")
    p.add_argument("--seed", type=int, default=None, help="RNG seed for the nondegenerate mode")
    p.add_argument("--out", required=True, help="output state file")
    common(p, tol=True)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser(
        "correlate",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        help="truncated correlation series versus exact semigroup",
        description="Compare the order-N series of w(g T_t f) - w(g) w(T_t f) with its exact value, "
        "f = F (x) I, g = I (x) G.\n\nOperator specs: I | e:k,l | x:k,l | y:k,l | z:k,l | diag:v0,v1,... | "
        "inline JSON matrix.\n\nCSV columns:\n"
        "  t                     time\n"
        "  series_re, series_im  partial sum of the series up to --order\n"
        "  exact_re, exact_im    value from the exact semigroup\n"
        "  abs_diff              |series - exact|",
    )
    p.add_argument("state_file")
    p.add_argument("--F", required=True, help="observable on H1")
    p.add_argument("--G", required=True, help="observable on H2")
    p.add_argument("--order", type=int, default=8, help="series order, at most 8")
    p.add_argument("--t", default="0,0.25,0.5,0.75,1", help="comma-separated times")
    p.add_argument("--out", help="CSV path (default stdout)")
    common(p)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("density", help="density experiment for non-factorizing states")
    p.add_argument("--dims", default="2x2", help="NxM")
    p.add_argument("--trials", type=int, default=100, help="number of sampled states")
    p.add_argument("--epsilon", type=float, default=0.01, help="distance budget per trial")
    p.add_argument("--seed", type=int, default=0, help="master RNG seed")
    p.add_argument("--ensemble", choices=ENSEMBLES, default="separable", help="family the trial states are drawn from")
    common(p, tol=True)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("state", help="write an example state file")
    p.add_argument("kind", choices=("bell", "mixed", "product", "separable", "factorizable", "degenerate"))
    p.add_argument("--dims", default="2x2", help="NxM (ignored for bell)")
    p.add_argument("--lambdas", default="0.7,0.1,0.1,0.1", help="Bell weights for bell")
    p.add_argument("--terms", type=int, default=3, help="number of product terms for separable")
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    p.add_argument("--out", required=True, help="output state file")
    p.set_defaults(func=cmd_state)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    args.argv = ["blockflip", *argv]
    try:
        return args.func(args)
    except (StateFileError, UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
