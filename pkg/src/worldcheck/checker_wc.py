"""Standard Worlds Checker (S-WC) and the PE-WC ablation.

Both evaluate every slot at once and OR the per-slot grants together; there is
no priority between slots, so the outcome never depends on slot order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Sequence

from .core import (AccessRequest, AddressMode, CheckOutcome, ConfigError, Decision,
                   ErrorKind, Op, Region, region_contains)

if TYPE_CHECKING:
    from .checker_mwc import PermEntry

WC_LATENCY = 2

CFG_A_MASK = 0x3
CFG_GR_BIT = 24
CFG_SUPPRESS_BIT = 25
SWC_MAX_IIDS = 32


@dataclass(frozen=True)
class SwcSlot:
    addr: int
    perm: int
    cfg: int
    region: Region

    @property
    def mode(self) -> AddressMode:
        return AddressMode(self.cfg & CFG_A_MASK)

    @property
    def suppress(self) -> bool:
        return bool(self.cfg >> CFG_SUPPRESS_BIT & 1)


@dataclass(frozen=True)
class PewcSlot:
    addr: int
    cfg: int
    region: Region
    perms: tuple[PermEntry, ...] = field(default_factory=tuple)

    @property
    def mode(self) -> AddressMode:
        return AddressMode(self.cfg & CFG_A_MASK)

    @property
    def gr(self) -> bool:
        return bool(self.cfg >> CFG_GR_BIT & 1)

    @property
    def suppress(self) -> bool:
        return bool(self.cfg >> CFG_SUPPRESS_BIT & 1)


def bitmap_grants(perm: int, req: AccessRequest) -> bool:
    bit = 2 * req.iid + (1 if req.op is Op.WRITE else 0)
    return bool(perm >> bit & 1)


def entries_grant(perms, gr: bool, req: AccessRequest) -> bool:
    """Explicit WID-permission resolution: any matching entry OR general-read."""
    if gr and req.op is Op.READ:
        return True
    for e in perms:
        if e.wid == req.iid and (e.r if req.op is Op.READ else e.w):
            return True
    return False


def check_iid(req: AccessRequest, identifier_count: int):
    if req.iid >= identifier_count:
        raise ConfigError(f"iid {req.iid} out of range (checker supports {identifier_count})")


def wc_resolve(slots: Sequence, req: AccessRequest, grants: Callable[[object], bool]) -> CheckOutcome:
    """OR-reduce slot grants; on deny, pick the disposition of the first containing slot."""
    granting = None
    containing = None
    for i, slot in enumerate(slots):
        if not region_contains(slot.region, req):
            continue
        if containing is None:
            containing = i
        if grants(slot):
            granting = i
            break
    if granting is not None:
        return CheckOutcome(Decision.ALLOW, granting, WC_LATENCY)
    if containing is None:
        return CheckOutcome(Decision.DENY, None, WC_LATENCY, ErrorKind.BUS_ERROR)
    err = ErrorKind.POISON if slots[containing].suppress else ErrorKind.BUS_ERROR
    return CheckOutcome(Decision.DENY, containing, WC_LATENCY, err)


def swc_check(slots: Sequence[SwcSlot], req: AccessRequest,
              identifier_count: int = SWC_MAX_IIDS) -> CheckOutcome:
    check_iid(req, identifier_count)
    return wc_resolve(slots, req, lambda s: bitmap_grants(s.perm, req))


def pewc_check(slots: Sequence[PewcSlot], req: AccessRequest,
               identifier_count: int = 128) -> CheckOutcome:
    check_iid(req, identifier_count)
    return wc_resolve(slots, req, lambda s: entries_grant(s.perms, s.gr, req))
