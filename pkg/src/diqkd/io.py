"""CSV readers and writers for ledgers, correlation tables and scans."""
from __future__ import annotations

import csv
import hashlib
import io
import os
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

from .emission import WindowCurvePoint
from .errors import ParseError, SchemaError
from .protocol import CorrelationTable, EventLedger, EventRecord

DATA_DIR_ENV = "DIQKD_DATA_DIR"
LEDGER_HEADER = ["round_id", "herald_time_ns", "x", "y", "a", "b"]
TABLE_HEADER = ["x", "y", "n", "n_same"]
SCAN_HEADER = ["t_s_ns", "S", "Q", "relative_rate", "key_per_time"]
BOUNDS_HEADER = ["s_min", "q0_max", "q1_max", "tail"]
FINITE_KEY_HEADER = ["eps", "n_min"]


def data_dir() -> Path:
    override = os.environ.get(DATA_DIR_ENV)
    if override:
        return Path(override)
    return Path(__file__).resolve().parent / "data"


def resolve_data_path(path) -> Path:
    """Return ``path`` if it exists, else the file of that name in the data directory."""
    p = Path(path)
    if p.exists():
        return p
    candidate = data_dir() / p.name
    if candidate.exists():
        return candidate
    raise ParseError(f"file not found: {path}")


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def fmt(x) -> str:
    """Six significant digits, the fixed report precision."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.6g}"


def _rows(text: str, header: Sequence[str]):
    lines = text.splitlines()
    if not lines or not any(line.strip() for line in lines):
        raise ParseError("file is empty", line=1)
    reader = csv.reader(lines)
    got = [h.strip() for h in next(reader)]
    if got != list(header):
        raise ParseError(f"expected header {','.join(header)}, got {','.join(got)}", line=1)
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
        try:
            yield lineno, [int(c.strip()) for c in row]
        except ValueError:
            raise ParseError(f"non-integer field in {row}", line=lineno) from None


def parse_correlation_table(text: str) -> CorrelationTable:
    n = np.zeros((4, 2), dtype=np.int64)
    same = np.zeros((4, 2), dtype=np.int64)
    seen = set()
    for lineno, (x, y, cnt, cnt_same) in _rows(text, TABLE_HEADER):
        if x not in range(4) or y not in range(2):
            raise SchemaError(f"line {lineno}: setting ({x}, {y}) out of range")
        if (x, y) in seen:
            raise SchemaError(f"line {lineno}: duplicate cell ({x}, {y})")
        if cnt < 0 or not 0 <= cnt_same <= cnt:
            raise SchemaError(f"line {lineno}: need 0 <= n_same <= n, got n={cnt}, n_same={cnt_same}")
        seen.add((x, y))
        n[x, y] = cnt
        same[x, y] = cnt_same
    missing = sorted({(x, y) for x in range(4) for y in range(2)} - seen)
    if missing:
        raise SchemaError(f"missing cells: {missing}")
    return CorrelationTable(n, same)


def load_correlation_table(path) -> CorrelationTable:
    return parse_correlation_table(Path(path).read_text())


def format_correlation_table(t: CorrelationTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_HEADER)
    for y in range(2):
        for x in range(4):
            w.writerow([x, y, int(t.n[x, y]), int(t.n_same[x, y])])
    return buf.getvalue()


def parse_ledger(text: str) -> EventLedger:
    ledger = EventLedger()
    for lineno, fields in _rows(text, LEDGER_HEADER):
        try:
            ledger.append(EventRecord(*fields))
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from None
    return ledger


def load_ledger(path) -> EventLedger:
    return parse_ledger(Path(path).read_text())


def format_ledger(ledger: Iterable[EventRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LEDGER_HEADER)
    for r in ledger:
        w.writerow([r.round_id, r.herald_time_ns, r.x, r.y, r.a, r.b])
    return buf.getvalue()


def format_scan(points: Iterable[WindowCurvePoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCAN_HEADER)
    for p in points:
        w.writerow([repr(float(v)) for v in (p.t_s_ns, p.s_value, p.qber, p.relative_rate, p.key_per_time)])
    return buf.getvalue()


def parse_scan(text: str) -> List[WindowCurvePoint]:
    lines = text.splitlines()
    if not lines:
        raise ParseError("file is empty", line=1)
    reader = csv.reader(lines)
    if next(reader) != SCAN_HEADER:
        raise ParseError("unexpected scan header", line=1)
    out = []
    for lineno, row in enumerate(reader, start=2):
        try:
            out.append(WindowCurvePoint(*(float(c) for c in row)))
        except (TypeError, ValueError):
            raise ParseError(f"bad scan row {row}", line=lineno) from None
    return out
