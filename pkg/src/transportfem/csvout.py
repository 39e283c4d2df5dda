"""Deterministic CSV output.

Floats are written with Python's shortest round-trip representation, so a
re-run with the same configuration produces byte-identical files.  Newlines
are always ``\\n`` regardless of platform.
"""

from __future__ import annotations

import os
from typing import Iterable, Sequence

import numpy as np


def fmt(value) -> str:
    """Shortest decimal string that round-trips to the same value."""
    if isinstance(value, (bool, np.bool_)):
        raise TypeError("booleans have no CSV representation here")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path: str | os.PathLike, header: Sequence[str],
              rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
