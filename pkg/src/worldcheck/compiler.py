"""Lower declarative memory-map policies into checker register programs.

A policy names non-overlapping regions and grants (domain, region, r/w).
Access is judged per 4-byte granule; anything not granted is denied. The
compiler picks the cheapest address lowering per region (fewest rules, then
least over-coverage), packs permissions into the backend's format, and emits
the register writes that program a fresh image.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from . import checker_iopmp as iopmp
from . import checker_wc as wc
from .checker_mwc import DEFAULT_PERM_ENTRIES, PermEntry, UNUSED
from .core import (GRANULE, AccessRequest, AddressMode, ConfigError, Decision, Kind, Op,
                   Region, aligned_blocks, napot_cover, napot_encode)
from .oracle import oracle_decide, policy_from_image
from .regmap import CTRL, RegisterImage, make_image


class CompileError(ConfigError):
    pass


def _int(v) -> int:
    return int(v, 0) if isinstance(v, str) else int(v)


@dataclass(frozen=True)
class PolicyRegion:
    label: str
    base: int
    size: int
    heat: int = 0
    suppress: bool = False

    @property
    def end(self) -> int:
        return self.base + self.size


@dataclass(frozen=True)
class Grant:
    domain: int
    region: str
    read: bool
    write: bool


@dataclass
class Policy:
    space: tuple[int, int]
    domains: int
    regions: list[PolicyRegion]
    grants: list[Grant]
    allow_overcover: bool = False
    lock: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        lo, hi = self.space
        if lo % GRANULE or hi % GRANULE or lo >= hi:
            raise ConfigError(f"address space 0x{lo:x}-0x{hi:x} must be granule aligned")
        if self.domains < 1:
            raise ConfigError("policy needs at least one domain")
        labels = set()
        for r in self.regions:
            if r.label in labels:
                raise ConfigError(f"duplicate region label {r.label!r}")
            labels.add(r.label)
            if r.size < GRANULE or r.base % GRANULE or r.size % GRANULE:
                raise ConfigError(f"region {r.label!r} must be granule aligned and non-empty")
            if r.base < lo or r.end > hi:
                raise ConfigError(f"region {r.label!r} lies outside the address space")
        ordered = sorted(self.regions, key=lambda r: r.base)
        for a, b in zip(ordered, ordered[1:]):
            if b.base < a.end:
                raise ConfigError(f"regions {a.label!r} and {b.label!r} overlap")
        for g in self.grants:
            if g.region not in labels:
                raise ConfigError(f"grant references unknown region {g.region!r}")
            if not 0 <= g.domain < self.domains:
                raise ConfigError(f"grant domain {g.domain} outside 0..{self.domains - 1}")

    def access(self, label: str) -> dict[int, tuple[bool, bool]]:
        """Effective (read, write) per domain on one region; multiple grants OR together."""
        out: dict[int, tuple[bool, bool]] = {}
        for g in self.grants:
            if g.region == label and (g.read or g.write):
                r, w = out.get(g.domain, (False, False))
                out[g.domain] = (r or g.read, w or g.write)
        return dict(sorted(out.items()))

    def region_at(self, addr: int) -> Optional[PolicyRegion]:
        for r in self.regions:
            if r.base <= addr < r.end:
                return r
        return None

    def allows(self, domain: int, op: Op, addr: int) -> Optional[bool]:
        """Policy verdict for one granule; None when the granule is a don't-care."""
        r = self.region_at(addr)
        if r is None:
            return None if self.allow_overcover else False
        rd, wr = self.access(r.label).get(domain, (False, False))
        return rd if op is Op.READ else wr

    @classmethod
    def from_dict(cls, d: dict) -> "Policy":
        try:
            heat = {h["region"]: int(h["heat"]) for h in d.get("heat", [])}
            regions = [PolicyRegion(r["label"], _int(r["base"]), _int(r["size"]),
                                    int(r.get("heat", heat.get(r["label"], 0))),
                                    bool(r.get("suppress", False)))
                       for r in d["regions"]]
            grants = []
            for g in d.get("grants", []):
                perms = g.get("perms", "")
                grants.append(Grant(int(g["domain"]), g["region"], "r" in perms, "w" in perms))
            space = tuple(_int(x) for x in d["address_space"])
            return cls(space, int(d["domains"]), regions, grants,
                       bool(d.get("allow_overcover", False)), bool(d.get("lock", False)))
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"malformed policy: {e!r}") from None

    def to_dict(self) -> dict:
        return {
            "address_space": [hex(self.space[0]), hex(self.space[1])],
            "domains": self.domains,
            "regions": [{"label": r.label, "base": hex(r.base), "size": hex(r.size),
                         "heat": r.heat, "suppress": r.suppress} for r in self.regions],
            "grants": [{"domain": g.domain, "region": g.region,
                        "perms": ("r" if g.read else "") + ("w" if g.write else "")}
                       for g in self.grants],
            "allow_overcover": self.allow_overcover,
            "lock": self.lock,
        }


@dataclass
class CompiledProgram:
    kind: Kind
    params: dict
    writes: list[tuple[int, int, int]]
    stats: dict
    warnings: list[str] = field(default_factory=list)

    def image(self) -> RegisterImage:
        image = make_image(self.kind, **self.params)
        for off, value, width in self.writes:
            image.write(off, value, width)
        return image

    def hexdump(self) -> str:
        return self.image().dump()

    def to_json(self) -> str:
        params = {k: ([hex(x) for x in v] if k == "space" else v) for k, v in self.params.items()}
        return json.dumps({
            "backend": self.kind.value,
            "params": params,
            "writes": [{"offset": hex(o), "value": hex(v), "width": w} for o, v, w in self.writes],
            "stats": self.stats,
            "warnings": self.warnings,
        }, indent=2) + "\n"


# -- address lowering -----------------------------------------------------------

@dataclass(frozen=True)
class Lowering:
    """Word-granule rule sequence for one region: (mode, addr register) pairs."""
    rules: tuple[tuple[AddressMode, int], ...]
    waste: int
    style: str

    @property
    def cost(self) -> int:
        return len(self.rules)


def _block_rule(base: int, size: int) -> tuple[AddressMode, int]:
    if size == GRANULE:
        return AddressMode.NA4, base >> 2
    return AddressMode.NAPOT, napot_encode(base, size)


def lowerings(region: PolicyRegion, policy: Policy, anchor: Optional[int],
              style: str = "auto") -> list[Lowering]:
    """Candidate word-granule lowerings; ``anchor`` is the preceding rule's addr register."""
    out = []
    blocks = aligned_blocks(region.base, region.end)
    if style in ("auto", "napot"):
        out.append(Lowering(tuple(_block_rule(b, s) for b, s in blocks), 0, "napot"))
        if len(blocks) > 1 and policy.allow_overcover:
            base, size = napot_cover(region.base, region.end)
            cov = Region(base, base + size)
            clash = any(r is not region and cov.overlaps(r.base, r.size) for r in policy.regions)
            inside = policy.space[0] <= base and base + size <= policy.space[1]
            if not clash and inside:
                out.append(Lowering((_block_rule(base, size),), size - region.size, "napot-cover"))
    if style in ("auto", "tor"):
        top = (AddressMode.TOR, region.end >> 2)
        if anchor == region.base >> 2:
            out.append(Lowering((top,), 0, "tor"))
        else:
            out.append(Lowering(((AddressMode.OFF, region.base >> 2), top), 0, "tor"))
    return out


def choose(cands: list[Lowering]) -> Lowering:
    return min(cands, key=lambda c: (c.cost, c.waste, c.style != "napot"))


# -- worlds checkers ----------------------------------------------------------------

def _entry_groups(access: dict[int, tuple[bool, bool]], domains: int,
                  n_entries: int) -> tuple[bool, list[list[PermEntry]]]:
    gr = len(access) == domains and all(r for r, _ in access.values())
    if gr:
        entries = [PermEntry(d, True, True) for d, (_, w) in access.items() if w]
    else:
        entries = [PermEntry(d, r, w) for d, (r, w) in access.items()]
    groups = [entries[i:i + n_entries] for i in range(0, len(entries), n_entries)]
    return gr, groups or [[]]


def _compile_wc(policy: Policy, kind: Kind, slots: Optional[int], perm_entries: int,
                style: str) -> CompiledProgram:
    if kind is Kind.SWC and style == "se":
        raise CompileError("S-WC has no start-end mode; use tor or napot")
    if kind is not Kind.MWC and style == "se":
        raise CompileError(f"{kind.value} has no start-end mode")
    rules = []  # (mode, addr, eaddr, cfg_extra, perm payload)
    lo, _ = policy.space
    anchor = lo >> 2
    stats = dict(rules_used=0, bytes_overcovered=0, extra_overlay_slots=0)
    warnings = []
    for region in sorted(policy.regions, key=lambda r: r.base):
        access = policy.access(region.label)
        if not access:
            continue
        cfg = int(region.suppress) << wc.CFG_SUPPRESS_BIT
        if kind is Kind.SWC:
            bitmap = 0
            for d, (r, w) in access.items():
                bitmap |= int(r) << 2 * d | int(w) << 2 * d + 1
            groups, gr = [bitmap], False
        else:
            gr, groups = _entry_groups(access, policy.domains, perm_entries)
            if gr:
                cfg |= 1 << wc.CFG_GR_BIT
        for n, payload in enumerate(groups):
            if kind is Kind.MWC and style in ("auto", "se"):
                chosen = Lowering(((AddressMode.SE, region.base),), 0, "se")
            else:
                cands = lowerings(region, policy, anchor, "auto" if style == "se" else style)
                if not cands:
                    raise CompileError(f"no lowering for region {region.label!r}")
                chosen = choose(cands)
            for mode, addr in chosen.rules:
                eaddr = region.end if mode is AddressMode.SE else 0
                grants = mode is not AddressMode.OFF
                rules.append((mode, addr, eaddr, cfg if grants else 0, payload if grants else None))
                anchor = addr
            if n == 0:
                stats["rules_used"] += chosen.cost
                stats["bytes_overcovered"] += chosen.waste
                if chosen.waste:
                    warnings.append(f"region {region.label!r} over-covered by {chosen.waste} bytes")
            else:
                stats["extra_overlay_slots"] += chosen.cost

    needed = len(rules) + 2
    if slots is None:
        slots = needed
    elif needed > slots:
        raise CompileError(f"slot exhaustion: policy needs {needed} slots "
                           f"({len(rules)} rules + 2 pinned), target has {slots}")
    params = dict(slots=slots, iids=policy.domains, space=policy.space)
    if kind is Kind.SWC:
        if policy.domains > wc.SWC_MAX_IIDS:
            params["extended"] = True
    else:
        params["perm_entries"] = perm_entries
    image = make_image(kind, **params)
    writes = []
    for i in range(slots):
        pinned = i in (0, slots - 1)
        mode, addr, eaddr, cfg, payload = (rules[i - 1] if 0 < i <= len(rules)
                                           else (AddressMode.OFF, 0, 0, 0, None))
        if not pinned and i <= len(rules):
            writes += image.field_writes(i, "addr", addr)
            if kind is Kind.MWC:
                writes += image.field_writes(i, "eaddr", eaddr)
            writes += image.field_writes(i, "cfg", int(mode) | cfg)
        # every perm field is written: the M-WC/PE-WC reset value grants WID 0
        if kind is Kind.SWC:
            writes += image.field_writes(i, "perm", payload or 0)
        else:
            entries = list(payload or []) + [UNUSED] * perm_entries
            for n in range(perm_entries):
                writes += image.field_writes(i, f"perm{n}", entries[n].to_reg())
    if policy.lock:
        writes.append((CTRL, 1, 4))
    stats["slots"] = slots
    return CompiledProgram(kind, image.params(), writes, stats, warnings)


# -- IOPMP ------------------------------------------------------------------------

@dataclass
class _Item:
    heat: int
    signature: tuple[int, ...]
    base: int
    entries: list[tuple[AddressMode, int]]
    r: bool
    w: bool
    suppress: bool


def _compile_iopmp(policy: Policy, k: int, entries: Optional[int], style: str) -> CompiledProgram:
    if style == "se":
        raise CompileError("IOPMP has no start-end mode; use tor or napot")
    if k < 1:
        raise CompileError("k must be >= 1")
    items = []
    stats = dict(rules_used=0, bytes_overcovered=0, extra_overlay_slots=0)
    warnings = []
    for region in sorted(policy.regions, key=lambda r: r.base):
        by_perm: dict[tuple[bool, bool], list[int]] = {}
        for d, rw in policy.access(region.label).items():
            by_perm.setdefault(rw, []).append(d)
        if not by_perm:
            continue
        cands = [c for c in lowerings(region, policy, None, style)
                 if k >= 2 or c.style != "tor"]
        if not cands:
            raise CompileError(f"region {region.label!r} needs TOR but k={k} cannot hold "
                               f"an anchor and its top in one MD")
        chosen = choose(cands)
        for (r, w), doms in sorted(by_perm.items()):
            stats["rules_used"] += chosen.cost
            stats["bytes_overcovered"] += chosen.waste
            sig = tuple(doms)
            if chosen.style == "tor":
                items.append(_Item(region.heat, sig, region.base, list(chosen.rules), r, w,
                                   region.suppress))
            else:
                for rule in chosen.rules:
                    items.append(_Item(region.heat, sig, region.base, [rule], r, w, region.suppress))
        if chosen.waste:
            warnings.append(f"region {region.label!r} over-covered by {chosen.waste} bytes")

    # hottest first; equal heat keeps same-signature rules adjacent so they share MDs
    items.sort(key=lambda it: (-it.heat, it.signature, it.base))
    mds: list[tuple[tuple[int, ...], list[_Item]]] = []
    for it in items:
        if mds and mds[-1][0] == it.signature and \
                sum(len(x.entries) for x in mds[-1][1]) + len(it.entries) <= k:
            mds[-1][1].append(it)
        else:
            mds.append((it.signature, [it]))
    md_count = max(1, len(mds))
    if md_count > iopmp.SRCMD_BITS:
        raise CompileError(f"MD exhaustion: policy needs {md_count} MDs, SRCMD holds "
                           f"{iopmp.SRCMD_BITS}")
    if entries is None:
        entries = md_count * k
    elif md_count * k > entries:
        raise CompileError(f"entry exhaustion: {md_count} MDs x k={k} needs {md_count * k} "
                           f"entries, target has {entries}")
    image = make_image(Kind.IOPMP, entries=entries, rrids=policy.domains, md_count=md_count, k=k)
    writes = []
    srcmd = [0] * policy.domains
    for m, (sig, members) in enumerate(mds):
        for d in sig:
            srcmd[d] |= 1 << m
        idx = m * k
        for it in members:
            for mode, addr in it.entries:
                cfg = int(mode) << iopmp.CFG_A_SHIFT
                if mode is not AddressMode.OFF:
                    cfg |= int(it.r) << iopmp.CFG_R_BIT | int(it.w) << iopmp.CFG_W_BIT
                    cfg |= int(it.suppress) << iopmp.CFG_SUPPRESS_BIT
                writes += image.field_writes(idx, "addr", addr)
                writes += image.field_writes(idx, "cfg", cfg)
                idx += 1
    for d, bits in enumerate(srcmd):
        writes += image.field_writes(d, "srcmd", bits)
    if policy.lock:
        writes.append((CTRL, 1, 4))
    stats.update(mds_used=len(mds), k=k, entries=entries)
    return CompiledProgram(Kind.IOPMP, image.params(), writes, stats, warnings)


def compile_policy(policy: Policy, backend: Kind | str, *, slots: Optional[int] = None,
                   perm_entries: int = DEFAULT_PERM_ENTRIES, k: int = 4,
                   entries: Optional[int] = None, style: str = "auto") -> CompiledProgram:
    """Compile ``policy`` for one backend.

    ``style`` forces an address lowering: "tor", "napot", "se" (M-WC only) or
    "auto" for the cheapest legal choice.
    """
    kind = Kind(backend)
    if style not in ("auto", "tor", "napot", "se"):
        raise CompileError(f"unknown lowering style {style!r}")
    if kind is Kind.IOPMP:
        return _compile_iopmp(policy, k, entries, style)
    return _compile_wc(policy, kind, slots, perm_entries, style)


# -- verification -------------------------------------------------------------------

@dataclass(frozen=True)
class Counterexample:
    domain: int
    op: Op
    addr: int
    expected: bool
    got: bool

    def __str__(self):
        want = "allow" if self.expected else "deny"
        got = "allow" if self.got else "deny"
        return f"domain={self.domain} op={self.op.value} addr=0x{self.addr:x} expected={want} got={got}"


@dataclass
class VerifyReport:
    probes: int
    counterexamples: list[Counterexample]

    @property
    def ok(self) -> bool:
        return not self.counterexamples


def probe_addresses(policy: Policy, rules: list[Region]) -> list[int]:
    lo, hi = policy.space
    points = {lo, hi - GRANULE}
    for r in policy.regions:
        mid = (r.base + r.size // 2) & ~(GRANULE - 1)
        points.update((r.base - GRANULE, r.base, r.base + GRANULE, mid,
                       r.end - 2 * GRANULE, r.end - GRANULE, r.end))
    for reg in rules:
        if not reg.empty:
            points.update((reg.start - GRANULE, reg.start, reg.end - GRANULE, reg.end))
    return sorted(p - p % GRANULE for p in points if lo <= p <= hi - GRANULE)


def verify(program: CompiledProgram, policy: Policy) -> VerifyReport:
    """Check the programmed configuration against the policy on boundary granules.

    Decisions come from the oracle, evaluated on the register image that the
    program's writes produce.
    """
    opolicy = policy_from_image(program.image())
    addrs = probe_addresses(policy, [r.region for r in opolicy.rules])
    bad = []
    probes = 0
    for addr in addrs:
        for d in range(policy.domains):
            for op in (Op.READ, Op.WRITE):
                want = policy.allows(d, op, addr)
                if want is None:
                    continue
                probes += 1
                got = oracle_decide(opolicy, AccessRequest(d, op, addr, GRANULE)) is Decision.ALLOW
                if got != want:
                    bad.append(Counterexample(d, op, addr, want, got))
    return VerifyReport(probes, bad)


def napot_costs(start: int, end: int) -> dict:
    """NAPOT costs of one range: exact tiling size and single-block over-coverage."""
    blocks = aligned_blocks(start, end)
    base, size = napot_cover(start, end)
    return dict(exact_slots=len(blocks), cover_slots=1, cover_waste=size - (end - start),
                cover=(base, size))
