"""Transaction-level, cycle-accounting simulator for a checker IP.

Dataflow per request: read/write Ax handler -> round-robin arbiter -> checker
-> demultiplexer (target on allow, error handler on deny). Each channel keeps
one transaction outstanding, so a single isolated request pays exactly the
checker latency on top of the pass-through path.
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass, field
from statistics import fmean
from typing import Iterable, Optional, Sequence

from .core import AccessRequest, ConfigError, Decision, ErrorKind, Kind, Op
from .regmap import RegisterImage


@dataclass(frozen=True)
class TraceItem:
    cycle: int
    req: AccessRequest
    data: Optional[int] = None


@dataclass(frozen=True)
class MmioWrite:
    cycle: int
    offset: int
    value: int
    width: int = 4


@dataclass
class Scenario:
    name: str
    image: Optional[RegisterImage]
    trace: list[TraceItem]
    baseline: bool = False
    mmio: list[MmioWrite] = field(default_factory=list)
    beat_bytes: int = 4
    single_beat: bool = True
    target_latency: int = 1
    poison_byte: int = 0xA5

    @property
    def backend(self) -> str:
        return "baseline" if self.baseline or self.image is None else self.image.kind.value


@dataclass
class TxRecord:
    backend: str
    request: AccessRequest
    issue_cycle: int
    complete_cycle: int
    decision: Decision
    error: Optional[ErrorKind]
    added_latency: int
    rule: Optional[int] = None
    rdata: Optional[bytes] = None

    @property
    def response(self) -> str:
        if self.decision is Decision.ALLOW:
            return "OKAY"
        return "DECERR" if self.error is ErrorKind.BUS_ERROR else "POISON"


def validate(s: Scenario):
    if not s.baseline and s.image is None:
        raise ConfigError(f"scenario {s.name}: no checker configuration and not a baseline run")
    last = None
    for n, item in enumerate(s.trace):
        if item.cycle < 0 or (last is not None and item.cycle < last):
            raise ConfigError(f"scenario {s.name}: trace[{n}] issue cycle goes backwards")
        last = item.cycle
        if s.single_beat and item.req.len != s.beat_bytes:
            raise ConfigError(f"scenario {s.name}: trace[{n}] len {item.req.len} is not one "
                              f"{s.beat_bytes}-byte beat")
        if not s.baseline and item.req.iid >= s.image.n_iid:
            raise ConfigError(f"scenario {s.name}: trace[{n}] iid {item.req.iid} out of range")
    for m in s.mmio:
        if m.cycle < 0:
            raise ConfigError(f"scenario {s.name}: register write at negative cycle")


class _Target:
    def __init__(self):
        self.mem: dict[int, int] = {}

    def read(self, addr: int, n: int) -> bytes:
        return bytes(self.mem.get(addr + i, 0) for i in range(n))

    def write(self, addr: int, data: bytes):
        for i, b in enumerate(data):
            self.mem[addr + i] = b


def _checker_occupancy(kind: Kind, latency: int) -> int:
    # WC accepts a request every cycle; IOPMP holds stage 2 for each MD pass.
    return 1 if kind.is_wc else max(1, latency - 2)


def run_scenario(s: Scenario) -> list[TxRecord]:
    validate(s)
    target = _Target()
    queues = {Op.READ: deque(), Op.WRITE: deque()}
    for seq, item in enumerate(s.trace):
        queues[item.req.op].append((seq, item))
    mmio = deque(sorted(s.mmio, key=lambda m: m.cycle))
    ch_free = {Op.READ: 0, Op.WRITE: 0}
    checker_free = 0
    priority = Op.READ
    done = []
    order = 0
    while queues[Op.READ] or queues[Op.WRITE]:
        ready = {op: max(q[0][1].cycle, ch_free[op]) for op, q in queues.items() if q}
        t = min(ready.values())
        grant = t if s.baseline else max(t, checker_free)
        contenders = [op for op, c in ready.items() if c <= grant]
        if s.baseline:
            contenders = [op for op, c in ready.items() if c == t]
        op = contenders[0] if len(contenders) == 1 else priority
        priority = Op.WRITE if op is Op.READ else Op.READ
        _, item = queues[op].popleft()
        req = item.req
        issue = ready[op]

        if s.baseline:
            decision, err, rule, latency = Decision.ALLOW, None, None, 0
        else:
            while mmio and mmio[0].cycle <= grant:
                m = mmio.popleft()
                s.image.write(m.offset, m.value, m.width, now=m.cycle)
            out = s.image.check(req, now=grant)
            decision, err, rule, latency = out.decision, out.error, out.matched_rule, out.latency_cycles
            checker_free = grant + _checker_occupancy(s.image.kind, latency)

        complete = grant + latency + s.target_latency
        ch_free[op] = complete
        rdata = None
        if decision is Decision.ALLOW:
            if op is Op.READ:
                rdata = target.read(req.addr, req.len)
            else:
                data = (item.data or 0) & ((1 << 8 * req.len) - 1)
                target.write(req.addr, data.to_bytes(req.len, "little"))
        elif err is ErrorKind.POISON and op is Op.READ:
            rdata = bytes([s.poison_byte]) * req.len
        done.append((complete, order, TxRecord(
            s.backend, req, issue, complete, decision, err,
            complete - issue - s.target_latency, rule, rdata)))
        order += 1
    done.sort(key=lambda d: (d[0], d[1]))
    return [d[2] for d in done]


CSV_FIELDS = ("backend", "iid", "op", "addr", "len", "issue_cycle", "complete_cycle",
              "decision", "error", "added_latency", "rule", "rdata")


def records_csv(records: Iterable[TxRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in records:
        w.writerow([r.backend, r.request.iid, r.request.op.value, f"0x{r.request.addr:x}",
                    r.request.len, r.issue_cycle, r.complete_cycle, r.decision.value,
                    r.error.value if r.error else "none", r.added_latency,
                    "" if r.rule is None else r.rule, r.rdata.hex() if r.rdata is not None else ""])
    return buf.getvalue()


@dataclass(frozen=True)
class LatencyRow:
    group: tuple
    count: int
    min: int
    max: int
    mean: float


def _group_value(r: TxRecord, key: str):
    if key == "op":
        return r.request.op.value
    if key == "iid":
        return r.request.iid
    return getattr(r, key)


def latency_table(records: Sequence[TxRecord],
                  grouping: Sequence[str] = ("backend", "op")) -> list[LatencyRow]:
    if not records:
        raise ValueError("latency table needs at least one record")
    groups: dict[tuple, list[int]] = {}
    for r in records:
        key = tuple(_group_value(r, g) for g in grouping)
        groups.setdefault(key, []).append(r.added_latency)
    return [LatencyRow(k, len(v), min(v), max(v), round(fmean(v), 6))
            for k, v in groups.items()]


def table_csv(rows: Sequence[LatencyRow], grouping: Sequence[str] = ("backend", "op"),
              label: Optional[str] = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow((["scenario"] if label is not None else []) + list(grouping)
               + ["count", "min", "max", "mean"])
    for row in rows:
        w.writerow(([label] if label is not None else []) + list(row.group)
                   + [row.count, row.min, row.max, f"{row.mean:g}"])
    return buf.getvalue()
