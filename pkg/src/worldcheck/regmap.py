"""Bit-exact memory-mapped register images for every checker backend.

Register space, relative to each checker's base::

    0x000-0xEFF  IOPMP only: SRCMD rows, 8 bytes per RRID (MD bitmap)
    0xF00        CTRL     bit 0 LOCK (sticky)
    0xF08        NRULES   read-only slot/entry count
    0xF0C        NIID     read-only identifier count
    0xF10        MDCFG_K  IOPMP only, WARL (k * md_count <= entries)
    0xF14        NMD      IOPMP only, read-only
    0xF18        NPERM    PE-WC/M-WC only, read-only perm entries per slot
    0x1000+      rule array (slot / entry stride depends on the backend)

Slot-relative layouts:

    S-WC (32 B)     0x00 addr[33:2]  0x04 addr[65:34]  0x08 perm (8 B)  0x10 cfg
    PE-WC (64 B)    0x00 addr (8 B, word granule)  0x10 cfg  0x20+4n permN
    M-WC (64 B)     0x00 addr  0x08 eaddr  0x10 cfg  0x20+4n permN
    IOPMP (16 B)    0x00 addr (8 B, word granule)  0x08 cfg

Rule address writes are decoded once into start-end form. The decoded region
becomes effective ``decode_latency`` cycles after the write; checks before
then still see the old region.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from . import checker_iopmp as iopmp
from . import checker_mwc as mwc
from . import checker_wc as wc
from .core import (AccessRequest, AddressMode, CheckOutcome, ConfigError, InterfaceError,
                   Kind, Region, decode_rule)

CTRL = 0xF00
NRULES = 0xF08
NIID = 0xF0C
MDCFG_K = 0xF10
NMD = 0xF14
NPERM = 0xF18
RULE_BASE = 0x1000
SRCMD_BASE = 0x000
LOCK_BIT = 1

WORD = 4
M32 = 0xFFFFFFFF
M64 = (1 << 64) - 1
_NEG_INF = float("-inf")


@dataclass(frozen=True)
class Field:
    name: str
    index: int
    words: tuple[int, ...]  # absolute word offsets, least significant first
    mask: int
    reset: int = 0
    decode: bool = False

    @property
    def offset(self) -> int:
        return self.words[0]

    @property
    def width_bits(self) -> int:
        return 32 * len(self.words)


@dataclass
class AuditEntry:
    offset: int
    value: int
    width: int
    now: Optional[int]
    reason: str


def _words(base: int, nbytes: int) -> tuple[int, ...]:
    return tuple(base + i for i in range(0, nbytes, WORD))


class RegisterImage:
    kind: Kind
    stride: int

    def __init__(self, n_rules: int, n_iid: int, decode_latency: int = 1):
        if n_iid < 1:
            raise ConfigError("need at least one identifier")
        if decode_latency < 0:
            raise ConfigError("decode latency must be >= 0")
        self.n_rules = n_rules
        self.n_iid = n_iid
        self.decode_latency = decode_latency
        self.audit: list[AuditEntry] = []
        self._mem: dict[int, int] = {}
        self._wmask: dict[int, int] = {}
        self._owner: dict[int, Field] = {}
        self.fields: dict[tuple[int, str], Field] = {}
        for f in self._layout():
            self._add_field(f)
        self._info(NRULES, n_rules)
        self._info(NIID, n_iid)
        self._wmask[CTRL] = LOCK_BIT
        self._mem[CTRL] = 0
        self._history: list[list[tuple[float, Region]]] = [
            [(_NEG_INF, r)] for r in self._decode_all()]

    # -- layout --------------------------------------------------------------

    def _layout(self) -> list[Field]:
        raise NotImplementedError

    def _add_field(self, f: Field):
        self.fields[(f.index, f.name)] = f
        for n, w in enumerate(f.words):
            self._wmask[w] = f.mask >> (32 * n) & M32
            self._mem[w] = f.reset >> (32 * n) & M32
            self._owner[w] = f

    def _info(self, offset: int, value: int):
        self._wmask[offset] = 0
        self._mem[offset] = value & M32

    def rule_base(self, index: int) -> int:
        return RULE_BASE + index * self.stride

    def params(self) -> dict:
        raise NotImplementedError

    # -- raw access ------------------------------------------------------------

    @property
    def locked(self) -> bool:
        return bool(self._mem[CTRL] & LOCK_BIT)

    @staticmethod
    def _check_access(offset: int, width: int):
        if width not in (4, 8):
            raise InterfaceError(f"unsupported access width {width}")
        if offset < 0 or offset % width:
            raise InterfaceError(f"offset 0x{offset:x} not aligned to {width}")

    def read(self, offset: int, width: int = 4) -> int:
        self._check_access(offset, width)
        value = 0
        for n in range(width // WORD):
            value |= self._mem.get(offset + WORD * n, 0) << (32 * n)
        return value

    def write(self, offset: int, value: int, width: int = 4, now: Optional[int] = None):
        """Store a register write; ``now=None`` means boot-time (effective at once)."""
        self._check_access(offset, width)
        value &= (1 << (8 * width)) - 1
        if self.locked:
            self.audit.append(AuditEntry(offset, value, width, now, "locked"))
            return
        touched = set()
        for n in range(width // WORD):
            w = offset + WORD * n
            v = value >> (32 * n) & M32
            if self._special_write(w, v):
                continue
            mask = self._wmask.get(w, 0)
            if not mask:
                continue
            self._mem[w] = (self._mem[w] & ~mask) | (v & mask)
            owner = self._owner.get(w)
            if owner is not None and owner.decode:
                touched.add(owner.index)
        if touched:
            self._redecode(now, touched)

    def _special_write(self, word: int, value: int) -> bool:
        return False

    def read_field(self, index: int, name: str) -> int:
        f = self.fields[(index, name)]
        return sum(self._mem[w] << (32 * n) for n, w in enumerate(f.words))

    def field_writes(self, index: int, name: str, value: int) -> list[tuple[int, int, int]]:
        """Raw (offset, value, width) accesses that store ``value`` into a field."""
        f = self.fields[(index, name)]
        if value < 0 or value >> f.width_bits:
            raise ConfigError(f"value 0x{value:x} too wide for {name}")
        # 8-byte-aligned pairs go out as one 64-bit access, the rest as words
        out = []
        n = 0
        while n < len(f.words):
            w = f.words[n]
            if n + 1 < len(f.words) and w % 8 == 0 and f.words[n + 1] == w + 4:
                out.append((w, value >> (32 * n) & M64, 8))
                n += 2
            else:
                out.append((w, value >> (32 * n) & M32, 4))
                n += 1
        return out

    def write_field(self, index: int, name: str, value: int, now: Optional[int] = None):
        for off, v, width in self.field_writes(index, name, value):
            self.write(off, v, width, now)

    # -- decode-at-write -------------------------------------------------------

    def _decode(self, index: int) -> Region:
        raise NotImplementedError

    def _decode_all(self) -> list[Region]:
        return [self._decode(i) for i in range(self.n_rules)]

    def _redecode(self, now: Optional[int], touched: set[int]):
        # a TOR rule also depends on its predecessor's address
        for i in sorted(touched | {t + 1 for t in touched if t + 1 < self.n_rules}):
            region = self._decode(i)
            hist = self._history[i]
            if now is None:
                hist[:] = [(_NEG_INF, region)]
            elif hist[-1][1] != region:
                eff = now + self.decode_latency
                while len(hist) > 1 and hist[-1][0] >= eff:
                    hist.pop()
                hist.append((eff, region))

    def region(self, index: int, now: Optional[int] = None) -> Region:
        hist = self._history[index]
        if now is None:
            return hist[-1][1]
        current = hist[0][1]
        for eff, r in hist:
            if eff > now:
                break
            current = r
        return current

    def pending(self, now: int) -> list[tuple[int, int]]:
        """(rule index, effective cycle) for decodes not yet active at ``now``."""
        return [(i, int(eff)) for i, hist in enumerate(self._history)
                for eff, _ in hist if eff > now]

    def check(self, req: AccessRequest, now: Optional[int] = None) -> CheckOutcome:
        raise NotImplementedError

    # -- dump / restore ----------------------------------------------------------

    def dump(self) -> str:
        head = " ".join(f"{k}={_fmt_param(v)}" for k, v in self.params().items())
        lines = [f"# kind={self.kind.value} {head}"]
        for off in sorted(self._mem):
            if self._mem[off]:
                lines.append(f"0x{off:05x}: 0x{self._mem[off]:08x}")
        return "\n".join(lines) + "\n"


def _fmt_param(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, tuple):
        return ":".join(f"0x{x:x}" for x in v)
    return str(v)


class _WcImage(RegisterImage):
    """Shared pinning rules: slot 0 is OFF at the lower bound, the last slot is TOR at the top."""

    a_mask = wc.CFG_A_MASK
    cfg_bits = 1 << wc.CFG_SUPPRESS_BIT

    def __init__(self, slots: int, iids: int, space: tuple[int, int] = (0, 1 << 32),
                 decode_latency: int = 1):
        if slots < 2:
            raise ConfigError("a worlds checker needs at least 2 slots")
        lo, hi = space
        if lo % 4 or hi % 4 or not lo < hi:
            raise ConfigError(f"bad protected space 0x{lo:x}-0x{hi:x}")
        self.space = (lo, hi)
        super().__init__(slots, iids, decode_latency)

    def _pinned(self, i: int, name: str, mask: int, reset: int) -> tuple[int, int]:
        last = self.n_rules - 1
        lo, hi = self.space
        if name == "addr" and i == 0:
            return 0, lo >> 2
        if name == "addr" and i == last:
            return 0, hi >> 2
        if name == "eaddr" and i in (0, last):
            return 0, 0
        if name == "cfg" and i == 0:
            return 0, 0
        if name == "cfg" and i == last:
            return mask & ~self.a_mask, AddressMode.TOR
        return mask, reset

    def _field(self, i: int, name: str, rel: int, nbytes: int, mask: int, reset: int = 0,
               decode: bool = False) -> Field:
        mask, reset = self._pinned(i, name, mask, reset)
        return Field(name, i, _words(self.rule_base(i) + rel, nbytes), mask, reset, decode)

    def _mode(self, i: int) -> AddressMode:
        a = self.read_field(i, "cfg") & self.a_mask
        return AddressMode(a) if a <= AddressMode.SE else AddressMode.OFF

    def _decode(self, index: int) -> Region:
        prev = self.read_field(index - 1, "addr") if index else 0
        return decode_rule(self._mode(index), self.read_field(index, "addr"), prev)


class SwcImage(_WcImage):
    kind = Kind.SWC

    def __init__(self, slots: int, iids: int, space=(0, 1 << 32), decode_latency: int = 1,
                 extended: bool = False):
        if iids > wc.SWC_MAX_IIDS and not extended:
            raise ConfigError(f"S-WC bitmap holds {wc.SWC_MAX_IIDS} worlds; set extended for more")
        self.extended = extended
        self.perm_words = self._perm_layout(iids, extended)
        self.stride = 64 if self.perm_words[-1] >= 0x20 else 32
        super().__init__(slots, iids, space, decode_latency)

    @staticmethod
    def _perm_layout(iids: int, extended: bool) -> tuple[int, ...]:
        # extended mode spills into the reserved bytes, then into a second 32 B half
        order = (0x08, 0x0C) + ((0x14, 0x18, 0x1C) + tuple(range(0x20, 0x40, 4)) if extended else ())
        need = max(2, -(-2 * iids // 32))
        if need > len(order):
            raise ConfigError(f"S-WC extended mode supports at most {len(order) * 16} worlds")
        return order[:need]

    def _layout(self):
        perm_mask = (1 << 2 * self.n_iid) - 1
        for i in range(self.n_rules):
            base = self.rule_base(i)
            yield self._field(i, "addr", 0x00, 8, M64, decode=True)
            yield Field("perm", i, tuple(base + w for w in self.perm_words), perm_mask)
            yield self._field(i, "cfg", 0x10, 4, self.a_mask | self.cfg_bits, decode=True)

    def params(self):
        return dict(slots=self.n_rules, iids=self.n_iid, space=self.space,
                    decode_latency=self.decode_latency, extended=self.extended)

    def slots(self, now: Optional[int] = None) -> list[wc.SwcSlot]:
        return [wc.SwcSlot(self.read_field(i, "addr"), self.read_field(i, "perm"),
                           self.read_field(i, "cfg"), self.region(i, now))
                for i in range(self.n_rules)]

    def check(self, req, now=None):
        return wc.swc_check(self.slots(now), req, self.n_iid)


class _EntryWcImage(_WcImage):
    stride = 64

    def __init__(self, slots: int, iids: int, space=(0, 1 << 32), decode_latency: int = 1,
                 perm_entries: int = mwc.DEFAULT_PERM_ENTRIES):
        if not 1 <= perm_entries <= mwc.MAX_PERM_ENTRIES:
            raise ConfigError(f"perm entries must be 1..{mwc.MAX_PERM_ENTRIES}")
        if iids > mwc.MAX_WID + 1:
            raise ConfigError(f"WID field is 7 bits; {iids} identifiers do not fit")
        self.perm_entries = perm_entries
        super().__init__(slots, iids, space, decode_latency)
        self._info(NPERM, perm_entries)

    def _perm_fields(self, i: int):
        for n in range(self.perm_entries):
            yield Field(f"perm{n}", i, (self.rule_base(i) + 0x20 + 4 * n,), mwc.PERM_MASK,
                        mwc.PERM_RESET)

    def _perms(self, i: int) -> tuple[mwc.PermEntry, ...]:
        return tuple(mwc.PermEntry.from_reg(self.read_field(i, f"perm{n}"))
                     for n in range(self.perm_entries))

    def params(self):
        return dict(slots=self.n_rules, iids=self.n_iid, space=self.space,
                    decode_latency=self.decode_latency, perm_entries=self.perm_entries)


class PewcImage(_EntryWcImage):
    kind = Kind.PEWC
    cfg_bits = 1 << wc.CFG_GR_BIT | 1 << wc.CFG_SUPPRESS_BIT

    def _layout(self):
        for i in range(self.n_rules):
            yield self._field(i, "addr", 0x00, 8, M64, decode=True)
            yield self._field(i, "cfg", 0x10, 4, self.a_mask | self.cfg_bits, decode=True)
            yield from self._perm_fields(i)

    def slots(self, now=None) -> list[wc.PewcSlot]:
        return [wc.PewcSlot(self.read_field(i, "addr"), self.read_field(i, "cfg"),
                            self.region(i, now), self._perms(i))
                for i in range(self.n_rules)]

    def check(self, req, now=None):
        return wc.pewc_check(self.slots(now), req, self.n_iid)


class MwcImage(_EntryWcImage):
    kind = Kind.MWC
    a_mask = mwc.CFG_A_MASK
    cfg_bits = 1 << wc.CFG_GR_BIT | 1 << wc.CFG_SUPPRESS_BIT

    def _layout(self):
        for i in range(self.n_rules):
            yield self._field(i, "addr", 0x00, 8, M64, decode=True)
            yield self._field(i, "eaddr", 0x08, 8, M64, decode=True)
            yield self._field(i, "cfg", 0x10, 4, self.a_mask | self.cfg_bits, decode=True)
            yield from self._perm_fields(i)

    def _decode(self, index):
        mode = self._mode(index)
        if mode is AddressMode.SE:
            return decode_rule(mode, self.read_field(index, "addr"),
                               eaddr=self.read_field(index, "eaddr"))
        return super()._decode(index)

    def slots(self, now=None) -> list[mwc.MwcSlot]:
        return [mwc.MwcSlot(self.read_field(i, "addr"), self.read_field(i, "eaddr"),
                            self.read_field(i, "cfg"), self.region(i, now), self._perms(i))
                for i in range(self.n_rules)]

    def check(self, req, now=None):
        return mwc.mwc_check(self.slots(now), req, self.n_iid)


class IopmpImage(RegisterImage):
    kind = Kind.IOPMP
    stride = 16

    def __init__(self, entries: int, rrids: int, md_count: int, k: int, decode_latency: int = 1):
        if not 1 <= md_count <= iopmp.SRCMD_BITS:
            raise ConfigError(f"md_count must be 1..{iopmp.SRCMD_BITS}")
        if k < 1 or k * md_count > entries:
            raise ConfigError(f"k={k} x {md_count} MDs does not fit in {entries} entries")
        if rrids * 8 > CTRL - SRCMD_BASE:
            raise ConfigError(f"too many RRIDs for the SRCMD window: {rrids}")
        self.md_count = md_count
        super().__init__(entries, rrids, decode_latency)
        self._info(NMD, md_count)
        self._wmask[MDCFG_K] = 0
        self._mem[MDCFG_K] = k

    @property
    def k(self) -> int:
        return self._mem[MDCFG_K]

    def _layout(self):
        for r in range(self.n_iid):
            yield Field("srcmd", r, _words(SRCMD_BASE + 8 * r, 8), (1 << self.md_count) - 1)
        for i in range(self.n_rules):
            base = self.rule_base(i)
            yield Field("addr", i, _words(base, 8), M64, decode=True)
            yield Field("cfg", i, (base + 8,), iopmp.CFG_MASK, decode=True)

    def _special_write(self, word, value):
        if word != MDCFG_K:
            return False
        if 1 <= value and value * self.md_count <= self.n_rules:
            self._mem[MDCFG_K] = value
        return True

    def _decode(self, index):
        cfg = self.read_field(index, "cfg")
        mode = AddressMode((cfg & iopmp.CFG_A_MASK) >> iopmp.CFG_A_SHIFT)
        prev = self.read_field(index - 1, "addr") if index else 0
        return decode_rule(mode, self.read_field(index, "addr"), prev)

    def params(self):
        return dict(entries=self.n_rules, rrids=self.n_iid, md_count=self.md_count, k=self.k,
                    decode_latency=self.decode_latency)

    def entries(self, now=None) -> list[iopmp.IopmpEntry]:
        return [iopmp.IopmpEntry.from_regs(self.read_field(i, "addr"), self.read_field(i, "cfg"),
                                           self.region(i, now))
                for i in range(self.n_rules)]

    def srcmd(self) -> dict[int, iopmp.SrcmdRow]:
        return {r: iopmp.SrcmdRow(r, self.read_field(r, "srcmd")) for r in range(self.n_iid)}

    def mdcfg(self) -> iopmp.MdcfgFixedK:
        return iopmp.MdcfgFixedK(self.k, self.md_count)

    def check(self, req, now=None):
        if req.iid >= self.n_iid:
            raise ConfigError(f"RRID {req.iid} out of range ({self.n_iid} configured)")
        return iopmp.iopmp_check(self.entries(now), self.srcmd(), self.mdcfg(), req)


IMAGES = {Kind.SWC: SwcImage, Kind.PEWC: PewcImage, Kind.MWC: MwcImage, Kind.IOPMP: IopmpImage}


def make_image(kind: Kind | str, **params) -> RegisterImage:
    kind = Kind(kind)
    if "space" in params:
        params["space"] = tuple(int(x, 0) if isinstance(x, str) else int(x) for x in params["space"])
    try:
        return IMAGES[kind](**params)
    except TypeError as e:
        raise ConfigError(f"bad parameters for {kind.value}: {e}") from None


_LINE = re.compile(r"^\s*(0x[0-9a-fA-F]+|\d+)\s*:\s*(0x[0-9a-fA-F]+|\d+)\s*$")


def restore(text: str) -> RegisterImage:
    """Rebuild an image from :meth:`RegisterImage.dump` output."""
    header = None
    values = []
    for n, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            if header is None and "kind=" in s:
                header = dict(tok.split("=", 1) for tok in s[1:].split())
            continue
        m = _LINE.match(s)
        if not m:
            raise ConfigError(f"line {n}: expected 'offset: value', got {line!r}")
        values.append((int(m.group(1), 0), int(m.group(2), 0)))
    if header is None:
        raise ConfigError("register dump lacks a '# kind=...' header")
    kind = header.pop("kind")
    params = {}
    for k, v in header.items():
        params[k] = tuple(int(x, 0) for x in v.split(":")) if k == "space" else int(v, 0)
    if "extended" in params:
        params["extended"] = bool(params["extended"])
    image = make_image(kind, **params)
    # control last so a dumped lock does not block the rest of the restore
    for off, val in sorted(values, key=lambda ov: (ov[0] == CTRL, ov[0])):
        image.write(off, val, 4)
    return image
