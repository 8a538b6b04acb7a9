"""Shared value types and address-rule decoding for every checker backend."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

ADDR_LIMIT = 1 << 64
GRANULE = 4


class ConfigError(ValueError):
    """Configuration rejected before any check is simulated."""


class InterfaceError(ValueError):
    """Malformed register access (bad width or alignment)."""


class Op(enum.Enum):
    READ = "r"
    WRITE = "w"

    @classmethod
    def parse(cls, text: str) -> "Op":
        t = text.strip().lower()
        if t in ("r", "read"):
            return cls.READ
        if t in ("w", "write"):
            return cls.WRITE
        raise ValueError(f"unknown op {text!r}")


class AddressMode(enum.IntEnum):
    OFF = 0
    TOR = 1
    NA4 = 2
    NAPOT = 3
    SE = 4


class Decision(enum.Enum):
    ALLOW = "allow"
    DENY = "deny"


class ErrorKind(enum.Enum):
    BUS_ERROR = "bus_error"
    POISON = "poison"


class Kind(enum.Enum):
    SWC = "swc"
    PEWC = "pewc"
    MWC = "mwc"
    IOPMP = "iopmp"

    @property
    def is_wc(self) -> bool:
        return self is not Kind.IOPMP


@dataclass(frozen=True)
class AccessRequest:
    iid: int
    op: Op
    addr: int
    len: int = 4

    def __post_init__(self):
        if self.iid < 0:
            raise ValueError(f"negative iid {self.iid}")
        if self.len < 1:
            raise ValueError(f"length must be >= 1, got {self.len}")
        if self.addr < 0 or self.addr + self.len > ADDR_LIMIT:
            raise ValueError(f"access 0x{self.addr:x}+{self.len} exceeds 64-bit space")

    @property
    def end(self) -> int:
        return self.addr + self.len


@dataclass(frozen=True)
class Region:
    start: int
    end: int

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError(f"region end 0x{self.end:x} below start 0x{self.start:x}")

    @property
    def empty(self) -> bool:
        return self.start == self.end

    @property
    def size(self) -> int:
        return self.end - self.start

    def overlaps(self, addr: int, length: int) -> bool:
        return addr < self.end and self.start < addr + length

    def __str__(self):
        return f"[0x{self.start:x}, 0x{self.end:x})"


EMPTY = Region(0, 0)


@dataclass(frozen=True)
class CheckOutcome:
    decision: Decision
    matched_rule: Optional[int]
    latency_cycles: int
    error: Optional[ErrorKind] = None

    def __post_init__(self):
        if self.decision is Decision.ALLOW:
            if self.matched_rule is None or self.error is not None:
                raise ValueError("allow outcome needs a matched rule and no error")
        elif self.error is None:
            raise ValueError("deny outcome needs an error disposition")

    @property
    def allowed(self) -> bool:
        return self.decision is Decision.ALLOW


def _clamp(value: int) -> int:
    return min(value, ADDR_LIMIT)


def _trailing_ones(value: int) -> int:
    return ((value ^ (value + 1)) >> 1).bit_length()


def decode_rule(mode: AddressMode, reg_value: int, prev_reg_value: int = 0,
                eaddr: Optional[int] = None) -> Region:
    """Decode an encoded address register into canonical start-end form.

    OFF/TOR/NA4/NAPOT registers hold word-granule values (byte address >> 2);
    SE registers hold full byte addresses, with ``eaddr`` as the exclusive end.
    Anything that does not decode to a sane range yields the empty region.
    """
    mode = AddressMode(mode)
    if mode is AddressMode.OFF:
        return EMPTY
    if mode is AddressMode.SE:
        if eaddr is None or reg_value >= eaddr:
            return EMPTY
        return Region(_clamp(reg_value), _clamp(eaddr))
    if mode is AddressMode.NA4:
        start = _clamp(reg_value << 2)
        return Region(start, _clamp(start + 4))
    if mode is AddressMode.TOR:
        lo, hi = _clamp(prev_reg_value << 2), _clamp(reg_value << 2)
        return Region(lo, hi) if lo < hi else EMPTY
    t = _trailing_ones(reg_value)
    base = (reg_value & ~((1 << (t + 1)) - 1)) << 2
    start = _clamp(base)
    return Region(start, _clamp(base + (1 << (t + 3))))


def region_contains(region: Region, req: AccessRequest) -> bool:
    return region.start <= req.addr and req.end <= region.end


def napot_encode(base: int, size: int) -> int:
    """Word-granule NAPOT register value for an aligned power-of-two block (size >= 8)."""
    if size < 8 or size & (size - 1) or base % size:
        raise ValueError(f"[0x{base:x}, +0x{size:x}) is not a NAPOT block")
    return (base >> 2) | ((size >> 3) - 1)


def aligned_blocks(start: int, end: int, min_size: int = GRANULE) -> list[tuple[int, int]]:
    """Greedy split of [start, end) into naturally aligned power-of-two blocks.

    The greedy choice (largest aligned block at the current cursor) is minimal
    for exact tilings; the tests check that against exhaustive search.
    """
    if start % min_size or end % min_size:
        raise ValueError("bounds must be granule aligned")
    blocks = []
    cur = start
    while cur < end:
        size = (cur & -cur) if cur else 1 << 64
        while size > end - cur:
            size >>= 1
        blocks.append((cur, size))
        cur += size
    return blocks


def napot_cover(start: int, end: int) -> tuple[int, int]:
    """Smallest single aligned power-of-two block (>= 8 bytes) containing [start, end)."""
    size = 8
    while True:
        base = start - start % size
        if base + size >= end:
            return base, size
        size <<= 1
