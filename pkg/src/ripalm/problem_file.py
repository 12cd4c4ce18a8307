"""JSON problem files.

Layout::

    {
      "n": 3,
      "objective": {"kind": "quadratic", "Q": [[...]], "c": [...]},
      "prox": {"kind": "l1", "weight": 0.5},
      "equality": {"A": [[...]], "b": [...]},
      "inequalities": [
        {"kind": "affine", "G": [[...]], "h": [...]},
        {"kind": "quadratic", "rows": [{"Q": [[...]], "q": [...], "c": -1.0}]}
      ],
      "x0": [...]
    }

Objective kinds: ``quadratic`` (0.5 x'Qx + c'x), ``least_squares``
(0.5 ||Mx - d||^2, keys ``M``, ``d``) and ``zero``. Prox kinds: ``none``,
``l1`` (``weight``), ``nonneg``, ``box`` (``lo``, ``hi``, scalars or
vectors). ``A`` is a dense nested list or a sparse
``{"format": "csr", "shape": [m, n], "data": [...], "indices": [...],
"indptr": [...]}``. Everything except ``n`` and ``objective`` is optional.
"""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np
import scipy.sparse as sp

from . import problem as pm

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM}
_MAT = {"type": "array", "items": _VEC}
_NUM_OR_VEC = {"oneOf": [_NUM, _VEC]}

_CSR = {
    "type": "object",
    "required": ["format", "shape", "data", "indices", "indptr"],
    "properties": {
        "format": {"const": "csr"},
        "shape": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2},
        "data": _VEC,
        "indices": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "indptr": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    },
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "required": ["n", "objective"],
    "additionalProperties": False,
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "name": {"type": "string"},
        "objective": {
            "oneOf": [
                {"type": "object", "required": ["kind", "Q", "c"], "additionalProperties": False,
                 "properties": {"kind": {"const": "quadratic"}, "Q": _MAT, "c": _VEC}},
                {"type": "object", "required": ["kind", "M", "d"], "additionalProperties": False,
                 "properties": {"kind": {"const": "least_squares"}, "M": _MAT, "d": _VEC}},
                {"type": "object", "required": ["kind"], "additionalProperties": False,
                 "properties": {"kind": {"const": "zero"}}},
            ]
        },
        "prox": {
            "oneOf": [
                {"type": "object", "required": ["kind"], "additionalProperties": False,
                 "properties": {"kind": {"enum": ["none", "nonneg"]}}},
                {"type": "object", "required": ["kind", "weight"], "additionalProperties": False,
                 "properties": {"kind": {"const": "l1"}, "weight": {"type": "number", "minimum": 0}}},
                {"type": "object", "required": ["kind", "lo", "hi"], "additionalProperties": False,
                 "properties": {"kind": {"const": "box"}, "lo": _NUM_OR_VEC, "hi": _NUM_OR_VEC}},
            ]
        },
        "equality": {
            "type": "object",
            "required": ["A", "b"],
            "additionalProperties": False,
            "properties": {"A": {"oneOf": [_MAT, _CSR]}, "b": _VEC},
        },
        "inequalities": {
            "type": "array",
            "items": {
                "oneOf": [
                    {"type": "object", "required": ["kind", "G", "h"], "additionalProperties": False,
                     "properties": {"kind": {"const": "affine"}, "G": _MAT, "h": _VEC}},
                    {"type": "object", "required": ["kind", "rows"], "additionalProperties": False,
                     "properties": {
                         "kind": {"const": "quadratic"},
                         "rows": {"type": "array", "items": {
                             "type": "object", "required": ["Q", "q", "c"], "additionalProperties": False,
                             "properties": {"Q": _MAT, "q": _VEC, "c": _NUM}}},
                     }},
                ]
            },
        },
        "x0": _VEC,
    },
}


class ProblemFileError(ValueError):
    pass


def _where(path) -> str:
    return ".".join(str(p) for p in path) or "<root>"


def _matrix(data, shape, where):
    arr = np.asarray(data, dtype=float)
    if arr.size == 0:
        arr = arr.reshape(0, shape[1])
    if arr.ndim != 2 or arr.shape[1] != shape[1] or (shape[0] is not None and arr.shape[0] != shape[0]):
        raise ProblemFileError(f"{where}: expected shape {shape}, got {arr.shape}")
    return arr


def _vector(data, n, where):
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 1 or (n is not None and arr.shape[0] != n):
        raise ProblemFileError(f"{where}: expected length {n}, got shape {arr.shape}")
    return arr


def _equality_matrix(spec, n):
    if isinstance(spec, dict):
        m, cols = spec["shape"]
        if cols != n:
            raise ProblemFileError(f"equality.A: sparse shape has {cols} columns, expected {n}")
        try:
            return sp.csr_matrix((spec["data"], spec["indices"], spec["indptr"]), shape=(m, n))
        except ValueError as exc:
            raise ProblemFileError(f"equality.A: invalid CSR data ({exc})") from exc
    return _matrix(spec, (None, n), "equality.A")


def program_from_dict(doc: dict) -> tuple[pm.ConvexProgram, np.ndarray | None]:
    """Validate a problem description and build the program and optional ``x0``."""
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ProblemFileError(f"{_where(exc.absolute_path)}: {exc.message}") from None

    n = doc["n"]
    obj = doc["objective"]
    if obj["kind"] == "quadratic":
        smooth = pm.quadratic(_matrix(obj["Q"], (n, n), "objective.Q"), _vector(obj["c"], n, "objective.c"))
    elif obj["kind"] == "least_squares":
        M = _matrix(obj["M"], (None, n), "objective.M")
        smooth = pm.least_squares(M, _vector(obj["d"], M.shape[0], "objective.d"))
    else:
        smooth = pm.zero_smooth()

    pr = doc.get("prox", {"kind": "none"})
    if pr["kind"] == "l1":
        prox = pm.l1(pr["weight"])
    elif pr["kind"] == "nonneg":
        prox = pm.nonneg_indicator()
    elif pr["kind"] == "box":
        try:
            prox = pm.box_indicator(pr["lo"], pr["hi"])
        except ValueError as exc:
            raise ProblemFileError(f"prox: {exc}") from None
    else:
        prox = pm.no_prox()

    A = b = None
    if "equality" in doc:
        A = _equality_matrix(doc["equality"]["A"], n)
        b = _vector(doc["equality"]["b"], A.shape[0], "equality.b")

    blocks = []
    for i, item in enumerate(doc.get("inequalities", [])):
        where = f"inequalities.{i}"
        if item["kind"] == "affine":
            G = _matrix(item["G"], (None, n), where + ".G")
            blocks.append(pm.affine_rows(G, _vector(item["h"], G.shape[0], where + ".h")))
        else:
            rows = item["rows"]
            Qs = [_matrix(r["Q"], (n, n), f"{where}.rows.{j}.Q") for j, r in enumerate(rows)]
            qs = [_vector(r["q"], n, f"{where}.rows.{j}.q") for j, r in enumerate(rows)]
            for j, Q in enumerate(Qs):
                if np.min(np.linalg.eigvalsh(0.5 * (Q + Q.T))) < -1e-12 * max(1.0, np.abs(Q).max()):
                    raise ProblemFileError(f"{where}.rows.{j}.Q: matrix is not positive semidefinite")
            blocks.append(pm.quadratic_rows(Qs, qs, [r["c"] for r in rows]))
    ineq = pm.stack_inequalities(n, blocks)

    x0 = _vector(doc["x0"], n, "x0") if "x0" in doc else None
    return pm.make_program(n, smooth, prox, A, b, ineq), x0


def load_problem(path) -> tuple[pm.ConvexProgram, np.ndarray | None]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProblemFileError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return program_from_dict(doc)
    except ProblemFileError as exc:
        raise ProblemFileError(f"{path}: {exc}") from None
