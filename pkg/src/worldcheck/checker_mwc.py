"""Modified Worlds Checker: start-end matching, general-read bit, WID-permission entries."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .checker_wc import CFG_GR_BIT, CFG_SUPPRESS_BIT, check_iid, entries_grant, wc_resolve
from .core import AccessRequest, AddressMode, CheckOutcome, Region

CFG_A_MASK = 0x7
MAX_WID = 127
MAX_PERM_ENTRIES = 8
DEFAULT_PERM_ENTRIES = 4

PERM_WID_MASK = 0x7F
PERM_W_BIT = 30
PERM_R_BIT = 31
PERM_MASK = PERM_WID_MASK | 1 << PERM_W_BIT | 1 << PERM_R_BIT
PERM_RESET = 1 << PERM_W_BIT | 1 << PERM_R_BIT


@dataclass(frozen=True)
class PermEntry:
    wid: int = 0
    r: bool = True
    w: bool = True

    @classmethod
    def from_reg(cls, value: int) -> "PermEntry":
        return cls(value & PERM_WID_MASK, bool(value >> PERM_R_BIT & 1), bool(value >> PERM_W_BIT & 1))

    def to_reg(self) -> int:
        return (self.wid & PERM_WID_MASK) | int(self.w) << PERM_W_BIT | int(self.r) << PERM_R_BIT


UNUSED = PermEntry(0, False, False)


@dataclass(frozen=True)
class MwcSlot:
    addr: int
    eaddr: int
    cfg: int
    region: Region
    perms: tuple[PermEntry, ...] = field(default_factory=tuple)

    @property
    def mode(self) -> AddressMode:
        a = self.cfg & CFG_A_MASK
        return AddressMode(a) if a <= AddressMode.SE else AddressMode.OFF

    @property
    def gr(self) -> bool:
        return bool(self.cfg >> CFG_GR_BIT & 1)

    @property
    def suppress(self) -> bool:
        return bool(self.cfg >> CFG_SUPPRESS_BIT & 1)


def mwc_check(slots: Sequence[MwcSlot], req: AccessRequest,
              identifier_count: int = MAX_WID + 1) -> CheckOutcome:
    check_iid(req, min(identifier_count, MAX_WID + 1))
    return wc_resolve(slots, req, lambda s: entries_grant(s.perms, s.gr, req))


@dataclass
class SlotShare:
    entries_needed: int
    via_gr: list[int]
    overflow: list[int]
    extra_slots: int


@dataclass
class ShareReport:
    slots: list[SlotShare]

    @property
    def extra_slots(self) -> int:
        return sum(s.extra_slots for s in self.slots)


def mwc_shareability(slots: Sequence[Mapping[int, str]], n_entries: int = DEFAULT_PERM_ENTRIES,
                     use_gr: bool | Iterable[bool] = True) -> ShareReport:
    """How many IIDs each slot cannot serve with its own perm entries.

    ``slots`` maps, per region, each IID to the access it needs ("r", "w" or "rw").
    Read-only IIDs ride on the general-read bit when ``use_gr`` allows it for that
    slot; everyone else needs an entry, and entries beyond ``n_entries`` force extra
    overlapping slots.
    """
    if isinstance(use_gr, bool):
        use_gr = [use_gr] * len(slots)
    out = []
    for grants, gr in zip(slots, use_gr):
        readers = sorted(i for i, p in grants.items() if p == "r")
        via_gr = readers if gr else []
        need = sorted(i for i, p in grants.items() if p and i not in via_gr)
        out.append(SlotShare(
            entries_needed=len(need),
            via_gr=via_gr,
            overflow=need[n_entries:],
            extra_slots=max(0, math.ceil(len(need) / n_entries) - 1),
        ))
    return ShareReport(out)
