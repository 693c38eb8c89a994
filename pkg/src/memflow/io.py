"""Deterministic, atomic CSV and JSON output."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence


def fmt(x) -> str:
    """17 significant digits for floats, plain text otherwise."""
    if isinstance(x, (float,)) or type(x).__name__.startswith("float"):
        return f"{float(x):.17g}"
    if x is None:
        return ""
    return str(x)


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str | os.PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    atomic_write_text(path, buf.getvalue())


def write_json(path: str | os.PathLike, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=False) + "\n")


def read_coefficients(path: str | os.PathLike, jmax: int):
    """Read ``j,a_j`` rows into a length-``jmax`` array (missing modes are 0)."""
    import numpy as np

    from memflow.errors import MemflowError

    a = np.zeros(jmax)
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().startswith("#"):
                continue
            if lineno == 1 and row[0].strip().lower() == "j":
                continue
            try:
                j, val = int(row[0]), float(row[1])
            except (ValueError, IndexError):
                raise MemflowError(f"{path}: line {lineno}: expected 'j,a_j'") from None
            if not 1 <= j <= jmax:
                raise MemflowError(f"{path}: line {lineno}: mode {j} outside 1..{jmax}")
            a[j - 1] = val
    return a
