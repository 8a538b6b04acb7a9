"""IOPMP checker with SRCMD format 0 and MDCFG format 1.

Stage 1 picks the entry indices of the requester's first associated memory
domain (MD); every stage-2 pass evaluates one MD's ``k`` entries in parallel.
A miss in one MD re-invokes stage 2 with the next associated MD, so the cost
of a check grows with the ordinal of the MD that decides it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .core import (AccessRequest, AddressMode, CheckOutcome, ConfigError, Decision,
                   ErrorKind, Op, Region, region_contains)

SRCMD_BITS = 64

# cfg layout follows the IOPMP ENTRY_CFG register: r, w, x, A[4:3]; bit 8 suppresses errors.
CFG_R_BIT = 0
CFG_W_BIT = 1
CFG_A_SHIFT = 3
CFG_A_MASK = 0x3 << CFG_A_SHIFT
CFG_SUPPRESS_BIT = 8
CFG_MASK = 1 << CFG_R_BIT | 1 << CFG_W_BIT | CFG_A_MASK | 1 << CFG_SUPPRESS_BIT

SETUP_CYCLES = 1
PASS_CYCLES = 1
ROUTE_CYCLES = 1


@dataclass(frozen=True)
class IopmpEntry:
    addr: int
    mode: AddressMode
    r: bool
    w: bool
    suppress: bool
    region: Region

    @classmethod
    def from_regs(cls, addr: int, cfg: int, region: Region) -> "IopmpEntry":
        return cls(addr, AddressMode((cfg & CFG_A_MASK) >> CFG_A_SHIFT),
                   bool(cfg >> CFG_R_BIT & 1), bool(cfg >> CFG_W_BIT & 1),
                   bool(cfg >> CFG_SUPPRESS_BIT & 1), region)


@dataclass(frozen=True)
class SrcmdRow:
    rrid: int
    md_bitmap: int

    def mds(self) -> list[int]:
        return [m for m in range(SRCMD_BITS) if self.md_bitmap >> m & 1]


@dataclass(frozen=True)
class MdcfgFixedK:
    k: int
    md_count: int

    def entries(self, md: int) -> range:
        return range(md * self.k, (md + 1) * self.k)


def hit_latency(ordinal: int) -> int:
    """Cycles added when the n-th associated MD (1-based) decides the request."""
    return SETUP_CYCLES + ordinal * PASS_CYCLES + ROUTE_CYCLES


def miss_latency(md_total: int) -> int:
    # An RRID with no MDs still spends one empty stage-2 pass.
    return SETUP_CYCLES + max(md_total, 1) * PASS_CYCLES + ROUTE_CYCLES


def _deny(entry_index, entry, latency):
    err = ErrorKind.POISON if entry is not None and entry.suppress else ErrorKind.BUS_ERROR
    return CheckOutcome(Decision.DENY, entry_index, latency, err)


def iopmp_check(entries: Sequence[IopmpEntry], srcmd: Mapping[int, SrcmdRow],
                mdcfg: MdcfgFixedK, req: AccessRequest) -> CheckOutcome:
    if req.iid not in srcmd:
        raise ConfigError(f"RRID {req.iid} has no SRCMD row")
    if mdcfg.k * mdcfg.md_count > len(entries):
        raise ConfigError(f"k={mdcfg.k} x {mdcfg.md_count} MDs exceeds {len(entries)} entries")
    mds = [m for m in srcmd[req.iid].mds() if m < mdcfg.md_count]
    for ordinal, md in enumerate(mds, start=1):
        for idx in mdcfg.entries(md):
            e = entries[idx]
            if region_contains(e.region, req):
                ok = e.r if req.op is Op.READ else e.w
                if ok:
                    return CheckOutcome(Decision.ALLOW, idx, hit_latency(ordinal))
                return _deny(idx, e, hit_latency(ordinal))
            if e.region.overlaps(req.addr, req.len):
                return _deny(idx, e, hit_latency(ordinal))
    return _deny(None, None, miss_latency(len(mds)))
