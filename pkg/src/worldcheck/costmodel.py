"""Resource proxies for checker configurations.

``state_bits`` counts reconfigurable register bits (flip-flop proxy) and
``compare_units`` counts comparators and selector inputs (LUT proxy). These
are structural counts, not technology-mapped results: only trends and
orderings are meaningful.

Formula sheet (``d`` = dynamic slots = rules - 2 for worlds checkers, whose
first and last slots are pinned and carry no reconfigurable state)::

    S-WC   state = d * (64 addr + 32 cfg + 2*iids perm)          + WC_PIPELINE
           units = d * (2 addr cmp + 2*iids selector inputs)     + 2 static
    PE-WC  state = d * (64 + 32 + N*32)                          + WC_PIPELINE
           units = d * (2 + N wid cmp)                           + 2 static
    M-WC   state = d * (64 + 64 eaddr + 32 + N*32)               + WC_PIPELINE
           units = d * (2 + N)                                   + 2 static
    IOPMP  state = rules * (64 + 32) + rrids * 64 SRCMD          + IOPMP_PIPELINE
           units = 2*k analyzers + md_count + rrids + rules entry select
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .core import Kind

ADDR_BITS = 64
CFG_BITS = 32
PERM_ENTRY_BITS = 32
SRCMD_ROW_BITS = 64
# request attributes captured per pipeline stage: addr, len, op, iid
REQ_ATTR_BITS = 64 + 8 + 1 + 16
WC_PIPELINE_BITS = 2 * REQ_ATTR_BITS
IOPMP_PIPELINE_BITS = 2 * REQ_ATTR_BITS + 64 + 6
STATIC_SLOTS = 2

METRIC = "state_bits+compare_units"


@dataclass(frozen=True)
class CheckerConfigPoint:
    kind: Kind
    rules: int
    iids: int
    perm_entries: int = 4
    k: Optional[int] = None
    md_count: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.rules < 1 or self.iids < 1 or self.perm_entries < 1:
            raise ValueError(f"counts must be >= 1: {self}")
        if self.kind.is_wc and self.rules < STATIC_SLOTS:
            raise ValueError("worlds checkers need at least the two pinned slots")
        if self.kind is Kind.IOPMP:
            k = self.k or self.rules
            mds = self.md_count or math.ceil(self.rules / k)
            if k < 1 or mds < 1 or k * mds > self.rules:
                raise ValueError(f"k={k} x {mds} MDs does not fit in {self.rules} entries")
            object.__setattr__(self, "k", k)
            object.__setattr__(self, "md_count", mds)


@dataclass(frozen=True)
class CostReport:
    state_bits: int
    compare_units: int
    perm_bits: int
    breakdown: dict = field(default_factory=dict, compare=False)
    notes: str = ""

    @property
    def total(self) -> int:
        return self.state_bits + self.compare_units


def cost(point: CheckerConfigPoint) -> CostReport:
    p = point
    if p.kind is Kind.IOPMP:
        entries = p.rules * (ADDR_BITS + CFG_BITS)
        srcmd = p.iids * SRCMD_ROW_BITS
        units = 2 * p.k + p.md_count + p.iids + p.rules
        return CostReport(entries + srcmd + IOPMP_PIPELINE_BITS, units, p.rules * 2,
                          dict(entries=entries, srcmd=srcmd, pipeline=IOPMP_PIPELINE_BITS))
    dyn = p.rules - STATIC_SLOTS
    if p.kind is Kind.SWC:
        perm, addr, sel = 2 * p.iids, ADDR_BITS, 2 * p.iids
    elif p.kind is Kind.PEWC:
        perm, addr, sel = p.perm_entries * PERM_ENTRY_BITS, ADDR_BITS, p.perm_entries
    else:
        perm, addr, sel = p.perm_entries * PERM_ENTRY_BITS, 2 * ADDR_BITS, p.perm_entries
    slot = addr + CFG_BITS + perm
    return CostReport(dyn * slot + WC_PIPELINE_BITS, dyn * (2 + sel) + STATIC_SLOTS, dyn * perm,
                      dict(slots=dyn * slot, pipeline=WC_PIPELINE_BITS),
                      notes="first/last slots static: decode logic only")


def crossover(a: Kind, b: Kind, rules: int, iids: Sequence[int], **kw) -> Optional[int]:
    """Smallest IID count at which ``a`` stops being cheaper than ``b``.

    Returns None when ``a`` is never strictly cheaper at the start of the sweep
    or never catches up.
    """
    if not iids:
        raise ValueError("empty IID sweep")
    totals = [(n, cost(CheckerConfigPoint(a, rules, n, **kw)).total,
               cost(CheckerConfigPoint(b, rules, n, **kw)).total) for n in iids]
    if totals[0][1] >= totals[0][2]:
        return None
    for n, ta, tb in totals:
        if ta >= tb:
            return n
    return None


def soc_impact(point: CheckerConfigPoint, baseline_overhead: float,
               baseline_point: CheckerConfigPoint) -> float:
    """Scale a measured SoC area overhead by the proxy-cost ratio to its reference point."""
    if not 0 < baseline_overhead < 1:
        raise ValueError("baseline overhead must be a fraction in (0, 1)")
    if point == baseline_point:
        return baseline_overhead
    return baseline_overhead * cost(point).total / cost(baseline_point).total


DEFAULT_BASELINE = CheckerConfigPoint(Kind.SWC, 64, 32)
DEFAULT_OVERHEAD = 0.15


@dataclass(frozen=True)
class SweepRow:
    point: CheckerConfigPoint
    report: CostReport
    impact: float


def sweep(kinds: Iterable[Kind], rules: Iterable[int], iids: Iterable[int],
          baseline: CheckerConfigPoint = DEFAULT_BASELINE,
          overhead: float = DEFAULT_OVERHEAD, **kw) -> list[SweepRow]:
    rules, iids = list(rules), list(iids)
    out = []
    for kind in kinds:
        for r in rules:
            for n in iids:
                pt = CheckerConfigPoint(Kind(kind), r, n, **kw)
                out.append(SweepRow(pt, cost(pt), soc_impact(pt, overhead, baseline)))
    return out


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["backend", "rules", "iids", "state_bits", "compare_units", "impact"])
    for row in rows:
        w.writerow([row.point.kind.value, row.point.rules, row.point.iids,
                    row.report.state_bits, row.report.compare_units, f"{row.impact:.6f}"])
    return buf.getvalue()
