"""Plain-text file formats and canonical report encoding.

Grid function file::

    gridfunction <n> <points_per_axis> <side> <center_1> ... <center_n>
    <one sample per line, C order>

Atom files append ``atom <p> <p0> <d> <a_weight> <cube_center...> <cube_side>``;
potential files append ``potential <n> <m> <branch> <C>``.  Every float is
written with 17 significant digits so a round trip is exact.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Any

import numpy as np

from .atoms import Atom
from .core_grid import Cube, Grid, GridFunction
from .weights import Weight


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _grid_lines(f: GridFunction) -> list[str]:
    g = f.grid
    head = ["gridfunction", str(g.n), str(g.points_per_axis), fmt(g.domain.side)] + [fmt(c) for c in g.domain.center]
    return [" ".join(head)] + [fmt(v) for v in f.values.ravel()]


def dumps_grid_function(f: GridFunction) -> str:
    return "\n".join(_grid_lines(f)) + "\n"


def _parse_grid(lines: list[str], source: str) -> tuple[GridFunction, list[str]]:
    if not lines or not lines[0].startswith("gridfunction"):
        raise ValueError(f"{source}: missing 'gridfunction' header")
    head = lines[0].split()
    try:
        n, npts = int(head[1]), int(head[2])
        side = float(head[3])
        center = tuple(float(c) for c in head[4 : 4 + n])
    except (IndexError, ValueError) as exc:
        raise ValueError(f"{source}: malformed header {lines[0]!r}") from exc
    if len(center) != n:
        raise ValueError(f"{source}: header needs {n} centre coordinates")
    count = npts**n
    body = lines[1 : 1 + count]
    if len(body) != count:
        raise ValueError(f"{source}: expected {count} samples, found {len(body)}")
    vals = np.array([float(v) for v in body])
    grid = Grid(Cube(center, side), npts)
    return GridFunction(grid, vals.reshape(grid.shape)), lines[1 + count :]


def loads_grid_function(text: str, source: str = "<string>") -> GridFunction:
    f, rest = _parse_grid([ln for ln in text.splitlines() if ln.strip()], source)
    return f


def dumps_atom(a: Atom) -> str:
    if a.weight.kind != "power":
        raise ValueError("atom files support power weights only")
    trailer = ["atom", fmt(a.p), fmt(a.p0), str(a.d), fmt(a.weight.a)] + [fmt(c) for c in a.cube.center] + [fmt(a.cube.side)]
    return dumps_grid_function(a.samples) + " ".join(trailer) + "\n"


def loads_atom(text: str, source: str = "<string>") -> Atom:
    samples, rest = _parse_grid([ln for ln in text.splitlines() if ln.strip()], source)
    if not rest or not rest[0].startswith("atom"):
        raise ValueError(f"{source}: missing 'atom' trailer")
    t = rest[0].split()
    n = samples.grid.n
    try:
        p, p0, d, a = float(t[1]), float(t[2]), int(t[3]), float(t[4])
        center = tuple(float(c) for c in t[5 : 5 + n])
        side = float(t[5 + n])
    except (IndexError, ValueError) as exc:
        raise ValueError(f"{source}: malformed atom trailer {rest[0]!r}") from exc
    return Atom(Cube(center, side), samples, p, p0, d, Weight.power(a, n))


def dumps_potential(b: GridFunction, fs) -> str:
    return dumps_grid_function(b) + " ".join(["potential", str(fs.n), str(fs.m), fs.branch, fmt(fs.C)]) + "\n"


def loads_potential(text: str, source: str = "<string>") -> tuple[GridFunction, dict]:
    b, rest = _parse_grid([ln for ln in text.splitlines() if ln.strip()], source)
    if not rest or not rest[0].startswith("potential"):
        raise ValueError(f"{source}: missing 'potential' trailer")
    t = rest[0].split()
    return b, {"n": int(t[1]), "m": int(t[2]), "branch": t[3], "C": float(t[4])}


def read_text(path: str | Path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror}") from exc


def write_text(path: str | Path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


# --- canonical JSON ------------------------------------------------------------------------


def _encode(obj: Any, indent: int) -> str:
    pad, inner = "  " * indent, "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        return fmt(x)
    if isinstance(obj, str):
        import json

        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{_encode(str(k), 0)}: {_encode(obj[k], indent + 1)}" for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        return "[\n" + ",\n".join(inner + _encode(v, indent + 1) for v in seq) + "\n" + pad + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def canonical_json(obj: Any) -> str:
    """Sorted keys, two-space indent, 17-significant-digit floats, non-finite floats as strings."""
    return _encode(obj, 0) + "\n"


def checks_csv(checks: list[dict]) -> str:
    """One row per check: name, passed, value, tolerance, provenance."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["name", "passed", "value", "tolerance", "provenance"])
    for c in checks:
        val = c.get("value")
        tol = c.get("tolerance")
        writer.writerow(
            [
                c["name"],
                "true" if c["passed"] else "false",
                fmt(val) if isinstance(val, (int, float)) and not isinstance(val, bool) else ("" if val is None else str(val)),
                fmt(tol) if isinstance(tol, (int, float)) and not isinstance(tol, bool) else ("" if tol is None else str(tol)),
                c.get("provenance", ""),
            ]
        )
    return buf.getvalue()
