"""Byte-stable CSV and metadata sidecar writers."""

from __future__ import annotations

import math
import os
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import NonFiniteError


def format_value(v) -> str:
    """Shortest round-trip text for floats (never more than 17 significant digits)."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if hasattr(v, "value") and isinstance(getattr(v, "value"), str):
        return v.value
    return str(v)


def ensure_finite(stage: str, *arrays) -> None:
    for a in arrays:
        arr = np.asarray(a)
        if arr.dtype.kind in "fc" and not np.all(np.isfinite(arr)):
            raise NonFiniteError(stage)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        for v in row:
            if isinstance(v, (float, np.floating)) and not math.isfinite(v):
                raise NonFiniteError("csv", f"{path.name}: {header}")
        lines.append(",".join(format_value(v) for v in row))
    data = "\n".join(lines) + "\n"
    with open(path, "w", newline="\n") as fh:
        fh.write(data)
    return path


def write_metadata(path, items: Mapping[str, object]) -> Path:
    """key=value sidecar, keys in insertion order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        for k, v in items.items():
            fh.write(f"{k}={format_value(v)}\n")
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path) as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


def output_dir(explicit: str | os.PathLike | None, config_value: str | None = None) -> Path:
    if explicit:
        return Path(explicit)
    if config_value:
        return Path(config_value)
    env = os.environ.get("GAUGELINE_OUT")
    if env:
        return Path(env)
    return Path("gaugeline_out")
