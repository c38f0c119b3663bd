"""Output formatting, config hashing and field snapshot files.

Snapshot layout (all little-endian)::

    b"MBF1" | uint32 header length | UTF-8 JSON header | float64 values

The JSON header carries ``N``, ``p``, the domain kind and parameters, the
resolution ``n`` and an optional ``meta`` dictionary (multipliers etc.).
Values are the grid's nodal values in row-major order.
"""
from __future__ import annotations

import hashlib
import json
import math
import re
import struct
from typing import Any, Mapping

import numpy as np

from .grid import DomainSpec, Field, Grid, build_grid

__all__ = ["fmt", "config_hash", "dump_json", "write_snapshot", "read_snapshot", "SnapshotError"]

MAGIC = b"MBF1"


class SnapshotError(ValueError):
    pass


def fmt(x) -> str:
    """Float with 17 significant digits (integers and strings pass through)."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return _float_token(float(x))


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


_FLOAT_TAG = "\u2063f17:"
_FLOAT_RE = re.compile('"' + _FLOAT_TAG + '([^"]*)"')


def _float_token(x: float) -> str:
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    if math.isnan(x):
        return "NaN"
    return f"{x:.17g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _FLOAT_TAG + _float_token(float(obj))
    return obj


def dump_json(obj: Mapping[str, Any], path=None, indent: int | None = 2) -> str:
    """Serialize with 17 significant digits; non-finite floats as ``Infinity``/``NaN``."""
    text = json.dumps(_jsonable(obj), indent=indent, ensure_ascii=False)
    text = _FLOAT_RE.sub(lambda m: m.group(1), text)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


def write_snapshot(path, field: Field, N: int, p: float, meta: Mapping | None = None) -> None:
    g = field.grid
    header = {
        "N": N,
        "p": p,
        "kind": g.domain.kind,
        "params": list(g.domain.params),
        "n": g.n,
        "size": g.size,
        "meta": dict(meta or {}),
    }
    hbytes = dump_json(header, indent=None).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(hbytes)))
        fh.write(hbytes)
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_snapshot(path, grid: Grid | None = None):
    """Return ``(field, header)``; the grid is rebuilt from the header when not given."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise SnapshotError(f"{path}: bad magic {data[:4]!r}")
    (hlen,) = struct.unpack("<I", data[4:8])
    header = json.loads(data[8:8 + hlen].decode("utf-8"))
    values = np.frombuffer(data[8 + hlen:], dtype="<f8").astype(float)
    if grid is None:
        grid = build_grid(DomainSpec(header["kind"], tuple(header["params"])), header["n"])
    if values.size != grid.size:
        raise SnapshotError(f"{path}: {values.size} values for a grid of {grid.size}")
    return Field(grid, values), header
