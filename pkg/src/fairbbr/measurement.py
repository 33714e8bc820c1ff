"""Per-window metrics, latency-class labels, datasets and CSV import/export."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .simcore import NS_PER_S

CSV_COLUMNS = ("window_start", "flow_id", "send_rate", "block_size", "throughput", "avg_latency")
DEFAULT_THRESHOLD = 1.0
WINDOW_S = 1.0


class NegativeLatency(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, line: int, column: str, text: str, reason: str = ""):
        self.line = line
        self.column = column
        self.text = text
        msg = f"line {line}, column {column!r}: cannot parse {text!r}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)


class LatencyClass(Enum):
    LOW = "Low"
    HIGH = "High"

    @property
    def code(self) -> int:
        return 1 if self is LatencyClass.HIGH else 0


def label_latency(avg_latency: float, threshold: float = DEFAULT_THRESHOLD) -> LatencyClass:
    if avg_latency < 0:
        raise NegativeLatency(f"average latency must be >= 0, got {avg_latency}")
    return LatencyClass.LOW if avg_latency <= threshold else LatencyClass.HIGH


@dataclass(frozen=True)
class MetricsRow:
    window_start: float
    flow_id: str
    send_rate: float
    block_size: int
    throughput: float
    avg_latency: Optional[float]


class WindowRecorder:
    """Counts sends and deliveries per flow into fixed windows.

    Rows are emitted (to `on_row` listeners and `self.rows`) when close_through()
    passes a window's end, so a window is reported exactly once.
    """

    def __init__(self, window: float = WINDOW_S):
        self.window = window
        self.window_ns = int(round(window * NS_PER_S))
        self.rows: list = []
        self.listeners: list = []
        self._flows: dict = {}
        self._cells: dict = {}
        self._closed_until = 0

    def add_flow(self, flow_id: str, block_size: int, start: float = 0.0, stop: Optional[float] = None):
        first = int(math.floor(start / self.window + 1e-9))
        last = None if stop is None else int(math.ceil(stop / self.window - 1e-9)) - 1
        self._flows[flow_id] = (block_size, first, last)

    def _cell(self, flow_id, now_ns):
        key = (flow_id, now_ns // self.window_ns)
        cell = self._cells.get(key)
        if cell is None:
            cell = self._cells[key] = [0, 0, 0]
        return cell

    def sent(self, flow_id: str, now_ns: int) -> None:
        self._cell(flow_id, now_ns)[0] += 1

    def delivered(self, flow_id: str, now_ns: int, latency_ns: int) -> None:
        cell = self._cell(flow_id, now_ns)
        cell[1] += 1
        cell[2] += latency_ns

    def record(self, flow_id: str, event: str, now: float, latency: Optional[float] = None) -> None:
        """Seconds-based entry point: event is 'sent' or 'delivered'."""
        now_ns = int(round(now * NS_PER_S))
        if event == "sent":
            self.sent(flow_id, now_ns)
        elif event == "delivered":
            if latency is None:
                raise ValueError("a delivered event needs a latency")
            self.delivered(flow_id, now_ns, int(round(latency * NS_PER_S)))
        else:
            raise ValueError(f"unknown event {event!r}")

    def close_through(self, now_ns: int) -> list:
        """Emit rows for every window that ends at or before now_ns."""
        upto = now_ns // self.window_ns
        emitted = []
        for w in range(self._closed_until, upto):
            for flow_id, (block_size, first, last) in self._flows.items():
                if w < first or (last is not None and w > last):
                    continue
                sent, delivered, lat_sum = self._cells.pop((flow_id, w), (0, 0, 0))
                avg = lat_sum / delivered / NS_PER_S if delivered else None
                row = MetricsRow(
                    window_start=w * self.window,
                    flow_id=flow_id,
                    send_rate=sent / self.window,
                    block_size=block_size,
                    throughput=delivered / self.window,
                    avg_latency=avg,
                )
                emitted.append(row)
        self._closed_until = max(self._closed_until, upto)
        self.rows.extend(emitted)
        for listener in self.listeners:
            listener(emitted)
        return emitted


@dataclass
class Dataset:
    """Windows that delivered at least one message, with their latency class."""

    rows: list
    threshold: float = DEFAULT_THRESHOLD
    provenance: str = "simulator"
    block_size: np.ndarray = field(init=False)
    send_rate: np.ndarray = field(init=False)
    throughput: np.ndarray = field(init=False)
    avg_latency: np.ndarray = field(init=False)
    labels: np.ndarray = field(init=False)

    def __post_init__(self):
        kept = [r for r in self.rows if r.avg_latency is not None]
        for r in kept:
            values = (r.send_rate, r.block_size, r.throughput, r.avg_latency)
            if not all(math.isfinite(v) for v in values):
                raise ValueError(f"non-finite feature in row {r}")
        self.rows = kept
        self.block_size = np.array([r.block_size for r in kept], dtype=np.float64)
        self.send_rate = np.array([r.send_rate for r in kept], dtype=np.float64)
        self.throughput = np.array([r.throughput for r in kept], dtype=np.float64)
        self.avg_latency = np.array([r.avg_latency for r in kept], dtype=np.float64)
        self.labels = np.array([label_latency(r.avg_latency, self.threshold).code for r in kept],
                               dtype=np.int64)

    def __len__(self):
        return len(self.rows)

    @property
    def features(self) -> np.ndarray:
        """Classifier inputs: (block size, throughput)."""
        return np.column_stack([self.block_size, self.throughput]) if len(self) else np.empty((0, 2))

    @property
    def classes(self) -> list:
        return [LatencyClass.HIGH if c else LatencyClass.LOW for c in self.labels]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def export_csv(rows: Iterable[MetricsRow], path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([_fmt(r.window_start), r.flow_id, _fmt(r.send_rate), r.block_size,
                             _fmt(r.throughput), _fmt(r.avg_latency)])


def _parse_float(text, line, column, optional=False):
    text = text.strip()
    if text == "" and optional:
        return None
    try:
        value = float(text)
    except ValueError:
        raise ParseError(line, column, text, "not a number") from None
    if not math.isfinite(value):
        raise ParseError(line, column, text, "not finite")
    return value


def _parse_int(text, line, column):
    value = _parse_float(text, line, column)
    if value != int(value):
        raise ParseError(line, column, text, "not an integer")
    return int(value)


def read_rows(path, strict: bool = True) -> tuple:
    """Read MetricsRows by header name; returns (rows, skipped_count).

    Columns may come in any order and extra columns are ignored. In strict mode a
    malformed row raises ParseError; otherwise it is skipped and counted.
    """
    path = Path(path)
    rows, skipped = [], 0
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(1, "", "", "missing header row") from None
        header = [h.strip() for h in header]
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise ParseError(1, missing[0], ",".join(header), f"missing columns {missing}")
        idx = {c: header.index(c) for c in CSV_COLUMNS}
        for lineno, record in enumerate(reader, start=2):
            if not record or all(not f.strip() for f in record):
                continue
            try:
                if len(record) < len(header):
                    raise ParseError(lineno, "", ",".join(record), "too few fields")
                row = MetricsRow(
                    window_start=_parse_float(record[idx["window_start"]], lineno, "window_start"),
                    flow_id=record[idx["flow_id"]].strip(),
                    send_rate=_parse_float(record[idx["send_rate"]], lineno, "send_rate"),
                    block_size=_parse_int(record[idx["block_size"]], lineno, "block_size"),
                    throughput=_parse_float(record[idx["throughput"]], lineno, "throughput"),
                    avg_latency=_parse_float(record[idx["avg_latency"]], lineno, "avg_latency",
                                             optional=True),
                )
                if row.avg_latency is not None and row.avg_latency < 0:
                    raise ParseError(lineno, "avg_latency", record[idx["avg_latency"]], "negative")
            except ParseError:
                if strict:
                    raise
                skipped += 1
                continue
            rows.append(row)
    return rows, skipped


def import_csv(path, strict: bool = True, threshold: float = DEFAULT_THRESHOLD) -> Dataset:
    rows, skipped = read_rows(path, strict=strict)
    ds = Dataset(rows, threshold=threshold, provenance="imported")
    ds.skipped = skipped
    return ds
