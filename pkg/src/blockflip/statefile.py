"""JSON state files.

A state file is a JSON object::

    {
      "format": "blockflip-state",
      "version": 1,
      "dims": {"n": 2, "m": 2},
      "matrix": [[[re, im], ...], ...]
    }

``matrix`` is a list of rows, each row a list of ``[re, im]`` pairs. Instead
of ``matrix`` a file may carry ``terms``, a list of
``{"weight": w, "rho_I": <matrix>, "rho_II": <matrix>}`` objects with the
same entry encoding. Floats are written with the shortest representation
that parses back to the same double, so a write/read cycle is lossless.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import linalg
from .dynamics import as_density, clean_density
from .linalg import BipartiteDims
from .states import DecompositionTerm, SeparableDecomposition

FORMAT_NAME = "blockflip-state"
FORMAT_VERSION = 1
#: Tolerance for Hermiticity, trace and positivity of file contents.
FILE_TOL = 1e-8


class StateFileError(ValueError):
    """Raised for malformed or physically invalid state files."""


@dataclass(frozen=True, eq=False)
class StateFile:
    dims: BipartiteDims
    rho: np.ndarray
    decomposition: SeparableDecomposition | None = None
    digest: str = ""


def encode_matrix(a: np.ndarray) -> list:
    a = np.asarray(a, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def decode_matrix(data, dim: int, what: str = "matrix") -> np.ndarray:
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise StateFileError(f"{what}: entries must be [re, im] number pairs") from exc
    if arr.shape != (dim, dim, 2):
        raise StateFileError(f"{what}: expected shape ({dim}, {dim}, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise StateFileError(f"{what}: non-finite entries")
    return np.ascontiguousarray(arr[..., 0] + 1j * arr[..., 1])


def _normalize_density(a: np.ndarray, what: str) -> np.ndarray:
    """Validate at file tolerance, then snap to an exact density matrix."""
    try:
        a = as_density(a, tol=FILE_TOL)
    except ValueError as exc:
        raise StateFileError(f"{what}: {exc}") from exc
    tr = np.trace(a).real
    # leave rounding-level trace errors alone so valid files load bit-exactly
    if abs(tr - 1.0) > 1e-14:
        a = a / tr
    if np.linalg.eigvalsh(a)[0] < 0:
        a = clean_density(a, tol=FILE_TOL)
    return a


def parse_state(obj: dict) -> StateFile:
    if not isinstance(obj, dict):
        raise StateFileError("state file must hold a JSON object")
    if obj.get("format", FORMAT_NAME) != FORMAT_NAME:
        raise StateFileError(f"unknown format {obj.get('format')!r}")
    if obj.get("version", FORMAT_VERSION) != FORMAT_VERSION:
        raise StateFileError(f"unsupported version {obj.get('version')!r}")
    try:
        dims = linalg.check_dims((int(obj["dims"]["n"]), int(obj["dims"]["m"])))
    except (KeyError, TypeError, ValueError) as exc:
        raise StateFileError(f"invalid dims: {exc}") from exc
    has_matrix, has_terms = "matrix" in obj, "terms" in obj
    if has_matrix == has_terms:
        raise StateFileError("exactly one of 'matrix' or 'terms' is required")
    digest = hashlib.sha256(canonical_json(obj).encode()).hexdigest()
    if has_matrix:
        rho = _normalize_density(decode_matrix(obj["matrix"], dims.total), "matrix")
        return StateFile(dims, rho, None, digest)
    terms = []
    if not isinstance(obj["terms"], list) or not obj["terms"]:
        raise StateFileError("'terms' must be a non-empty list")
    for idx, term in enumerate(obj["terms"]):
        try:
            w = float(term["weight"])
            r1 = decode_matrix(term["rho_I"], dims.n, f"terms[{idx}].rho_I")
            r2 = decode_matrix(term["rho_II"], dims.m, f"terms[{idx}].rho_II")
        except (KeyError, TypeError) as exc:
            raise StateFileError(f"terms[{idx}]: missing or malformed field {exc}") from exc
        if not w > 0:
            raise StateFileError(f"terms[{idx}]: weight must be positive, got {w}")
        terms.append(DecompositionTerm(
            w, _normalize_density(r1, f"terms[{idx}].rho_I"), _normalize_density(r2, f"terms[{idx}].rho_II")
        ))
    try:
        decomp = SeparableDecomposition.from_terms(dims, terms, renormalize_tol=FILE_TOL)
    except ValueError as exc:
        raise StateFileError(str(exc)) from exc
    return StateFile(dims, decomp.assemble(), decomp, digest)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def state_to_dict(dims, rho=None, decomposition: SeparableDecomposition | None = None) -> dict:
    dims = linalg.check_dims(dims)
    out = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "dims": {"n": dims.n, "m": dims.m}}
    if decomposition is not None:
        out["terms"] = [
            {"weight": float(w), "rho_I": encode_matrix(r1), "rho_II": encode_matrix(r2)}
            for w, r1, r2 in decomposition.terms
        ]
    elif rho is not None:
        out["matrix"] = encode_matrix(rho)
    else:
        raise ValueError("either rho or decomposition is required")
    return out


def read_state(path) -> StateFile:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise StateFileError(f"cannot read {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StateFileError(f"{path}: invalid JSON ({exc})") from exc
    return parse_state(obj)


def write_state(path, dims, rho=None, decomposition: SeparableDecomposition | None = None) -> None:
    obj = state_to_dict(dims, rho, decomposition)
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")
