"""CSV and JSON readers/writers for profiles, potentials, operators and reports."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .grid import Grid, make_grid
from .nls import PotentialPair

__all__ = [
    "write_csv",
    "read_csv",
    "read_potentials_csv",
    "write_potentials_csv",
    "write_triplets",
    "write_vec2field",
    "to_jsonable",
    "dump_json",
    "write_json",
    "read_json",
]


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def read_csv(path) -> tuple[list, np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric entry ({exc})") from exc
    return header, data.reshape(-1, len(header))


def read_potentials_csv(path, rtol: float = 1e-9) -> tuple[Grid, PotentialPair]:
    """Read ``x,U,W`` rows on a uniform symmetric one-dimensional grid."""
    header, data = read_csv(path)
    if header != ["x", "U", "W"]:
        raise ValidationError(f"potentials file header must be x,U,W, got {','.join(header)}")
    if data.shape[0] < 8:
        raise ValidationError("potentials file needs at least 8 rows")
    x = data[:, 0]
    steps = np.diff(x)
    h = (x[-1] - x[0]) / (len(x) - 1)
    if h <= 0 or np.max(np.abs(steps - h)) > rtol * max(1.0, abs(h)) * 1e3:
        raise ValidationError("potentials file grid is not uniform and increasing")
    if abs(x[0] + x[-1]) > 1e-9 * max(1.0, abs(x[-1])):
        raise ValidationError("potentials file grid must be symmetric about 0")
    g = make_grid(1, float(x[-1]), len(x))
    return g, PotentialPair(g, data[:, 1], data[:, 2])


def write_potentials_csv(path, pots: PotentialPair) -> Path:
    g = pots.grid
    if g.dim != 1:
        raise ValidationError("potentials CSV is one-dimensional")
    return write_csv(path, ["x", "U", "W"], zip(g.axis, pots.U, pots.W))


def write_triplets(path, matrix) -> Path:
    """Sparse matrix as ``row,col,re,im`` rows (zero-based, row-major order)."""
    coo = matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    rows = ((int(coo.row[k]), int(coo.col[k]), coo.data[k].real, coo.data[k].imag) for k in order)
    return write_csv(path, ["row", "col", "re", "im"], rows)


def write_vec2field(path, v) -> Path:
    """Node coordinates followed by re/im of both components."""
    g = v.grid
    coords = [f"x{k + 1}" for k in range(g.dim)] if g.dim > 1 else ["x"]
    cols = [g.nodes[:, k] for k in range(g.dim)]
    cols += [v.first.real, v.first.imag, v.second.real, v.second.imag]
    return write_csv(path, coords + ["re1", "im1", "re2", "im2"], zip(*cols))


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dump_json(obj, canonical: bool = False) -> str:
    data = to_jsonable(obj)
    if canonical:
        if isinstance(data, dict) and "timing" in data:
            data = {**data, "timing": {}}
        return json.dumps(data, sort_keys=True, indent=2, separators=(",", ": ")) + "\n"
    return json.dumps(data, indent=2) + "\n"


def write_json(path, obj, canonical: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_json(obj, canonical))
    return path


def read_json(path):
    return json.loads(Path(path).read_text())
