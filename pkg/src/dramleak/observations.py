"""Observation CSV persistence.

Schema (fixed column order)::

    cell_id,dimm,mechanism,pattern,flip,hc_flip,t_lo_s,t_hi_s

Non-applicable fields are empty. ``flip`` is ``0``/``1``. Times are written
with 17 significant digits so a save/load cycle is lossless.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path
from typing import Iterable

from dramleak.cell import Mechanism, Pattern
from dramleak.errors import InvalidParameterError, ObservationParseError
from dramleak.stress import FlipObservation

COLUMNS = ("cell_id", "dimm", "mechanism", "pattern", "flip", "hc_flip", "t_lo_s", "t_hi_s")


def format_float(x: float | None) -> str:
    return "" if x is None else f"{x:.17g}"


def _row(o: FlipObservation) -> list[str]:
    return [str(o.cell_id), o.dimm, o.mechanism.value, o.pattern.value,
            "1" if o.flipped else "0",
            "" if o.flip_hc is None else str(o.flip_hc),
            format_float(o.t_lo), format_float(o.t_hi)]


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file in the same directory and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def observations_to_csv(data: Iterable[FlipObservation]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for o in data:
        w.writerow(_row(o))
    return buf.getvalue()


def save_observations(path: str | os.PathLike, data: Iterable[FlipObservation]) -> None:
    write_atomic(path, observations_to_csv(data))


def _parse_int(value: str, line: int, column: str) -> int | None:
    if value == "":
        return None
    try:
        return int(value)
    except ValueError:
        raise ObservationParseError(f"not an integer: {value!r}", line, column) from None


def _parse_float(value: str, line: int, column: str) -> float | None:
    if value == "":
        return None
    try:
        return float(value)
    except ValueError:
        raise ObservationParseError(f"not a number: {value!r}", line, column) from None


def parse_observations(text: str) -> list[FlipObservation]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ObservationParseError("empty file, header row missing", 1) from None
    missing = [c for c in COLUMNS if c not in header]
    if missing:
        raise ObservationParseError(f"missing column(s): {', '.join(missing)}", 1, missing[0])
    extra = [c for c in header if c not in COLUMNS]
    if extra:
        raise ObservationParseError(f"unknown column(s): {', '.join(extra)}", 1, extra[0])
    index = {c: header.index(c) for c in COLUMNS}
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ObservationParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
        get = {c: row[i] for c, i in index.items()}
        cell_id = _parse_int(get["cell_id"], lineno, "cell_id")
        if cell_id is None:
            raise ObservationParseError("cell_id is required", lineno, "cell_id")
        try:
            mechanism = Mechanism(get["mechanism"])
        except ValueError:
            raise ObservationParseError(f"unknown mechanism {get['mechanism']!r}",
                                        lineno, "mechanism") from None
        try:
            pattern = Pattern(get["pattern"])
        except ValueError:
            raise ObservationParseError(f"unknown pattern {get['pattern']!r}",
                                        lineno, "pattern") from None
        if get["flip"] not in ("0", "1"):
            raise ObservationParseError(f"flip must be 0 or 1, got {get['flip']!r}", lineno, "flip")
        try:
            out.append(FlipObservation(
                cell_id=cell_id, mechanism=mechanism, pattern=pattern,
                flipped=get["flip"] == "1",
                flip_hc=_parse_int(get["hc_flip"], lineno, "hc_flip"),
                t_lo=_parse_float(get["t_lo_s"], lineno, "t_lo_s"),
                t_hi=_parse_float(get["t_hi_s"], lineno, "t_hi_s"),
                dimm=get["dimm"]))
        except InvalidParameterError as exc:
            raise ObservationParseError(str(exc), lineno) from None
    return out


def load_observations(path: str | os.PathLike) -> list[FlipObservation]:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_observations(fh.read())
