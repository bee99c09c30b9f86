"""Canonical serialization helpers: deterministic JSON and float formatting."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np


def format_float(x: float) -> str:
    """Shortest decimal that round-trips to the same float; integral floats drop '.0'."""
    s = repr(float(x))
    return s[:-2] if s.endswith(".0") else s


def _json_default(o):
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON-serializable: {type(o)!r}")


def canonical_json(obj, *, indent: int | None = None) -> str:
    """Deterministic JSON text: sorted keys, no NaN, trailing newline."""
    if indent is None:
        sep = (",", ":")
    else:
        sep = (",", ": ")
    return (
        json.dumps(obj, sort_keys=True, indent=indent, separators=sep,
                   allow_nan=False, default=_json_default)
        + "\n"
    )


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def write_json(path: str | Path, obj, *, indent: int | None = 2) -> None:
    Path(path).write_text(canonical_json(obj, indent=indent), encoding="utf-8")


def read_json(path: str | Path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
