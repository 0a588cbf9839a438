"""CSV/JSON reading and writing.

Numbers are written with 17 significant digits so that doubles survive a
round trip; every file is written to a temporary sibling first and then
renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import (
    GridLengthMismatch,
    NegativeCount,
    NonNumericCell,
    ParseError,
    RaggedRows,
)
from .fpca import FPCAResult
from .grid_penalty import PenaltyOperator, TimeGrid, build_grid
from .selection import SelectionTrace

log = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]
HEADER = "header"


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def atomic_write_text(path: PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: PathLike, header: Optional[Sequence[str]], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header is not None:
        w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])
    atomic_write_text(path, buf.getvalue())


def write_json(path: PathLike, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=1, allow_nan=True) + "\n")


def _parse_rows(path: PathLike):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            rows.append((lineno, row))
    if not rows:
        raise ParseError(f"{path}: no data")
    return rows


def _to_floats(lineno: int, row: Sequence[str]) -> list:
    out = []
    for col, cell in enumerate(row, start=1):
        try:
            out.append(float(cell))
        except ValueError:
            raise NonNumericCell(f"line {lineno}, column {col}: not a number: {cell!r}") from None
    return out


def load_matrix(path: PathLike, grid_source: Optional[PathLike] = None):
    """Read an ``n x m`` numeric CSV and its time grid.

    ``grid_source`` is ``"header"`` (the first row holds the ``m`` grid
    values), a path to a one-column grid file, or ``None`` for the unit
    grid ``1..m`` (a warning is logged).
    """
    rows = _parse_rows(path)
    width = len(rows[0][1])
    for lineno, row in rows:
        if len(row) != width:
            raise RaggedRows(f"line {lineno}: expected {width} fields, found {len(row)}")

    grid_values = None
    if grid_source == HEADER:
        lineno, row = rows.pop(0)
        grid_values = _to_floats(lineno, row)
        if not rows:
            raise ParseError(f"{path}: header present but no data rows")

    X = np.array([_to_floats(lineno, row) for lineno, row in rows], dtype=float)

    if grid_source not in (None, HEADER):
        grid_rows = _parse_rows(grid_source)
        grid_values = []
        for lineno, row in grid_rows:
            if len(row) != 1:
                raise ParseError(f"{grid_source}, line {lineno}: grid file must have one column")
            grid_values.extend(_to_floats(lineno, row))
    if grid_values is None:
        log.warning("no grid given; using unit spacing 1..%d", width)
        grid_values = np.arange(1, width + 1, dtype=float)
    if len(grid_values) != width:
        raise GridLengthMismatch(f"grid has {len(grid_values)} points, data has {width} columns")
    return X, build_grid(grid_values)


def sqrt_count_transform(N) -> np.ndarray:
    """Variance-stabilizing ``sqrt(N + 1/4)`` for count data."""
    N = np.asarray(N, dtype=float)
    if np.any(N < 0):
        i, j = np.argwhere(N < 0)[0] if N.ndim == 2 else (0, int(np.argmax(N < 0)))
        raise NegativeCount(f"negative count at row {i + 1}, column {j + 1}")
    return np.sqrt(N + 0.25)


def write_matrix(path: PathLike, X, grid: Optional[TimeGrid] = None) -> None:
    """Matrix CSV, optionally with the grid as a header row (readable by ``load_matrix``)."""
    X = np.asarray(X, dtype=float)
    rows = [[fmt(x) for x in row] for row in X]
    header = None if grid is None else [fmt(t) for t in grid.times]
    write_csv(path, header, rows)


def save_result(path: PathLike, result: FPCAResult) -> None:
    write_json(path, result.to_dict())


def load_result(path: PathLike) -> FPCAResult:
    with open(path, encoding="utf-8") as fh:
        return FPCAResult.from_dict(json.load(fh))


def write_trace(path: PathLike, trace: SelectionTrace) -> None:
    rows = [
        (fmt(a), fmt(s), int(k == trace.chosen_index))
        for k, (a, s) in enumerate(zip(trace.alphas, trace.scores))
    ]
    write_csv(path, ["alpha", "score", "chosen"], rows)


def write_curve(path: PathLike, t, values, names: Sequence[str] = ("value",)) -> None:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    rows = [[fmt(ti)] + [fmt(x) for x in row] for ti, row in zip(np.asarray(t), values)]
    write_csv(path, ["time", *names], rows)


def dump_penalty(directory: PathLike, penalty: PenaltyOperator) -> None:
    d = Path(directory)
    write_matrix(d / "penalty_omega.csv", penalty.omega)
    write_matrix(d / "penalty_eigvecs.csv", penalty.eigvecs)
    write_csv(d / "penalty_eigvals.csv", None, [[fmt(x)] for x in penalty.eigvals])
