"""Brute-force reference semantics for every checker kind.

Deliberately slow and literal. It reads the raw register words itself (own
offsets, own bit positions) and never calls backend code, so a layout or
resolution bug in a backend shows up as a disagreement here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .core import AccessRequest, AddressMode, Decision, Kind, Op, Region, decode_rule


@dataclass(frozen=True)
class DecodedRule:
    region: Region
    bitmap: int = 0
    perms: tuple[tuple[int, bool, bool], ...] = ()
    gr: bool = False
    r: bool = False
    w: bool = False


@dataclass
class OraclePolicy:
    kind: Kind
    rules: list[DecodedRule]
    identifier_count: int
    k: Optional[int] = None
    md_count: Optional[int] = None
    srcmd: dict[int, int] = field(default_factory=dict)


def _bits(value: int, hi: int, lo: int) -> int:
    return (value >> lo) & ((1 << (hi - lo + 1)) - 1)


def _rd(image, off: int, nbytes: int) -> int:
    return sum(image.read(off + i, 4) << (8 * i) for i in range(0, nbytes, 4))


def _mode(a: int) -> AddressMode:
    return AddressMode(a) if a <= 4 else AddressMode.OFF


def policy_from_image(image) -> OraclePolicy:
    """Reconstruct the configured policy from raw register contents."""
    kind = image.kind
    n = image.read(0xF08)
    iids = image.read(0xF0C)
    rules = []
    if kind is Kind.IOPMP:
        k, mds = image.read(0xF10), image.read(0xF14)
        addrs = [_rd(image, 0x1000 + 16 * i, 8) for i in range(n)]
        for i in range(n):
            cfg = image.read(0x1000 + 16 * i + 8)
            region = decode_rule(_mode(_bits(cfg, 4, 3)), addrs[i], addrs[i - 1] if i else 0)
            rules.append(DecodedRule(region, r=bool(cfg & 1), w=bool(cfg & 2)))
        srcmd = {r: _rd(image, 8 * r, 8) for r in range(iids)}
        return OraclePolicy(kind, rules, iids, k, mds, srcmd)

    stride = image.stride
    nperm = image.read(0xF18) if kind in (Kind.PEWC, Kind.MWC) else 0
    addrs = [_rd(image, 0x1000 + stride * i, 8) for i in range(n)]
    for i in range(n):
        base = 0x1000 + stride * i
        cfg = image.read(base + 0x10)
        a = _bits(cfg, 2, 0) if kind is Kind.MWC else _bits(cfg, 1, 0)
        mode = _mode(a)
        if mode is AddressMode.SE:
            region = decode_rule(mode, addrs[i], eaddr=_rd(image, base + 8, 8))
        else:
            region = decode_rule(mode, addrs[i], addrs[i - 1] if i else 0)
        if kind is Kind.SWC:
            # perm words in bitmap order: 0x08, 0x0C, then the extended spill words
            bitmap = 0
            offs = [0x08, 0x0C, 0x14, 0x18, 0x1C] + list(range(0x20, 0x40, 4))
            for j, off in enumerate(offs):
                if off >= stride:
                    break
                bitmap |= image.read(base + off) << (32 * j)
            rules.append(DecodedRule(region, bitmap=bitmap))
        else:
            perms = []
            for j in range(nperm):
                p = image.read(base + 0x20 + 4 * j)
                perms.append((_bits(p, 6, 0), bool(_bits(p, 31, 31)), bool(_bits(p, 30, 30))))
            rules.append(DecodedRule(region, perms=tuple(perms), gr=bool(_bits(cfg, 24, 24))))
    return OraclePolicy(kind, rules, iids)


def _inside(region: Region, req: AccessRequest) -> bool:
    return all(region.start <= b < region.end for b in (req.addr, req.addr + req.len - 1))


def _touches(region: Region, req: AccessRequest) -> bool:
    return max(region.start, req.addr) < min(region.end, req.addr + req.len)


def _wc_grants(policy: OraclePolicy, rule: DecodedRule, req: AccessRequest) -> bool:
    want_read = req.op is Op.READ
    if policy.kind is Kind.SWC:
        pos = 2 * req.iid if want_read else 2 * req.iid + 1
        return (rule.bitmap >> pos) % 2 == 1
    if want_read and rule.gr:
        return True
    return any(wid == req.iid and (r if want_read else w) for wid, r, w in rule.perms)


def oracle_decide(policy: OraclePolicy, req: AccessRequest) -> Decision:
    if req.iid >= policy.identifier_count:
        raise ValueError(f"iid {req.iid} outside policy ({policy.identifier_count})")
    if policy.kind is not Kind.IOPMP:
        for rule in policy.rules:
            if _inside(rule.region, req) and _wc_grants(policy, rule, req):
                return Decision.ALLOW
        return Decision.DENY

    bitmap = policy.srcmd.get(req.iid, 0)
    for md in range(policy.md_count):
        if not (bitmap >> md) & 1:
            continue
        for idx in range(md * policy.k, md * policy.k + policy.k):
            rule = policy.rules[idx]
            if _inside(rule.region, req):
                ok = rule.r if req.op is Op.READ else rule.w
                return Decision.ALLOW if ok else Decision.DENY
            if _touches(rule.region, req):
                return Decision.DENY
    return Decision.DENY
