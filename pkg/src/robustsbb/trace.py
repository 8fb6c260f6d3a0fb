"""Convergence trace: timestamped bound records written as CSV."""
from __future__ import annotations

import csv
import enum
import io
import math
import time
from dataclasses import astuple, dataclass, field

HEADER = ("wall_ms", "event", "ub", "lb", "gap", "node_id", "cut_round", "value")


class TraceEvent(str, enum.Enum):
    NODE_SOLVED = "NodeSolved"
    CUT_ADDED = "CutAdded"
    INCUMBENT_UPDATED = "IncumbentUpdated"
    NODE_FATHOMED = "NodeFathomed"
    STORE_REFRESH = "StoreRefresh"


def relative_gap(ub: float, lb: float) -> float:
    """``|ub - lb| / |lb|``; infinite when either bound is missing."""
    if not (math.isfinite(ub) and math.isfinite(lb)):
        return math.inf
    if ub == lb:
        return 0.0
    if lb == 0.0:
        return math.inf
    return abs(ub - lb) / abs(lb)


@dataclass(frozen=True)
class TraceRecord:
    wall_ms: float
    event: TraceEvent
    ub: float
    lb: float
    gap: float
    node_id: int
    cut_round: int
    value: float | None = None


@dataclass
class ConvergenceTrace:
    records: list[TraceRecord] = field(default_factory=list)
    t0: float = field(default_factory=time.perf_counter, repr=False, compare=False)

    def log(self, event: TraceEvent, ub: float, lb: float, node_id: int = -1,
            cut_round: int = 0, value: float | None = None) -> TraceRecord:
        ms = round((time.perf_counter() - self.t0) * 1000.0, 3)
        if self.records and ms < self.records[-1].wall_ms:
            ms = self.records[-1].wall_ms
        ub, lb = float(ub), float(lb)
        value = None if value is None else float(value)
        rec = TraceRecord(ms, TraceEvent(event), ub, lb, relative_gap(ub, lb), int(node_id),
                          int(cut_round), value)
        self.records.append(rec)
        return rec

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def events(self, kind: TraceEvent) -> list[TraceRecord]:
        return [r for r in self.records if r.event is kind]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HEADER)
        for r in self.records:
            row = list(astuple(r))
            row[1] = r.event.value
            w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])
        return buf.getvalue()

    def write(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "ConvergenceTrace":
        reader = csv.reader(io.StringIO(text))
        header = tuple(next(reader))
        if header != HEADER:
            raise ValueError(f"unexpected trace header {header!r}")
        out = cls()
        for row in reader:
            if not row:
                continue
            wall, ev, ub, lb, gap, nid, rnd, val = row
            out.records.append(TraceRecord(float(wall), TraceEvent(ev), float(ub), float(lb),
                                           float(gap), int(nid), int(rnd),
                                           float(val) if val else None))
        return out


def check_invariants(trace: ConvergenceTrace, tol: float = 1e-9) -> list[str]:
    """Bound sandwich and monotonicity problems found in ``trace`` (empty when clean)."""
    problems = []
    prev_ub, prev_lb = math.inf, -math.inf
    for k, r in enumerate(trace.records):
        if r.ub > prev_ub + tol:
            problems.append(f"record {k}: UB rose from {prev_ub} to {r.ub}")
        if r.lb < prev_lb - tol:
            problems.append(f"record {k}: LB fell from {prev_lb} to {r.lb}")
        if math.isfinite(r.ub) and r.lb > r.ub + tol:
            problems.append(f"record {k}: LB {r.lb} above UB {r.ub}")
        prev_ub, prev_lb = min(prev_ub, r.ub), max(prev_lb, r.lb)
    return problems
