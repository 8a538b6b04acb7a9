"""Randomized backend-vs-oracle differential testing.

Every case is generated from ``(seed, index)`` alone, so shards can run in
any order or process and still merge to the same result.
"""

from __future__ import annotations

import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

from .core import AccessRequest, AddressMode, Kind, Op
from .oracle import oracle_decide, policy_from_image
from .regmap import RegisterImage, make_image

SPACE = 1 << 16
MAX_SLOTS = 8
MAX_IIDS = 8
MAX_MDS = 4
MAX_K = 4

FieldWrite = tuple[int, str, int]


@dataclass
class Case:
    index: int
    kind: Kind
    params: dict
    writes: list[FieldWrite]
    req: AccessRequest
    _image: Optional[RegisterImage] = None

    def build(self, writes: Optional[list[FieldWrite]] = None) -> RegisterImage:
        if writes is None and self._image is not None:
            return self._image
        image = make_image(self.kind, **self.params)
        for idx, name, value in self.writes if writes is None else writes:
            image.write_field(idx, name, value)
        return image

    def describe(self, writes=None) -> str:
        lines = [f"case {self.index}: {self.kind.value} {self.params}"]
        for idx, name, value in self.writes if writes is None else writes:
            lines.append(f"  rule {idx} {name} = 0x{value:x}")
        r = self.req
        lines.append(f"  request iid={r.iid} op={r.op.value} addr=0x{r.addr:x} len={r.len}")
        return "\n".join(lines)


def _word_addr(rng: random.Random, mode: AddressMode) -> int:
    if mode is AddressMode.NAPOT:
        t = rng.randrange(0, 12)
        base = rng.randrange(0, SPACE >> (t + 3)) << (t + 1)
        return base | ((1 << t) - 1)
    return rng.randrange(0, SPACE >> 2)


def _wc_writes(rng, kind: Kind, slots: int, iids: int, nperm: int) -> list[FieldWrite]:
    writes = []
    modes = [AddressMode.OFF, AddressMode.TOR, AddressMode.NA4, AddressMode.NAPOT]
    if kind is Kind.MWC:
        modes += [AddressMode.SE, AddressMode.SE]
    for i in range(slots):
        interior = 0 < i < slots - 1
        if interior:
            mode = rng.choice(modes)
            if mode is AddressMode.SE:
                a, b = rng.randrange(0, SPACE), rng.randrange(0, SPACE + 1)
                if rng.random() < 0.8:
                    a, b = min(a, b), max(a, b)
                writes += [(i, "addr", a), (i, "eaddr", b)]
            else:
                writes.append((i, "addr", _word_addr(rng, mode)))
        else:
            mode = AddressMode.OFF
        cfg = int(mode) | rng.getrandbits(1) << 25
        if kind is not Kind.SWC:
            cfg |= int(rng.random() < 0.3) << 24
        if i == slots - 1:
            cfg = cfg & ~0x7 | AddressMode.TOR
        if i:
            writes.append((i, "cfg", cfg))
        if kind is Kind.SWC:
            writes.append((i, "perm", rng.getrandbits(2 * iids)))
        else:
            for n in range(nperm):
                if rng.random() < 0.3:
                    value = 0
                else:
                    value = (rng.randrange(iids) | rng.getrandbits(1) << 30
                             | rng.getrandbits(1) << 31)
                writes.append((i, f"perm{n}", value))
    return writes


def _iopmp_writes(rng, entries: int, rrids: int, mds: int) -> list[FieldWrite]:
    writes = []
    for i in range(entries):
        mode = rng.choice(list(AddressMode)[:4])
        writes.append((i, "addr", _word_addr(rng, mode)))
        cfg = rng.getrandbits(2) | int(mode) << 3 | rng.getrandbits(1) << 8
        writes.append((i, "cfg", cfg))
    for r in range(rrids):
        writes.append((r, "srcmd", rng.getrandbits(mds)))
    return writes


def _request(rng, iids: int, image: RegisterImage) -> AccessRequest:
    length = rng.choice((1, 2, 4, 4, 8))
    regions = [image.region(i) for i in range(image.n_rules)]
    regions = [r for r in regions if not r.empty]
    if regions and rng.random() < 0.7:
        r = rng.choice(regions)
        anchor = rng.choice((r.start, r.end, (r.start + r.end) // 2))
        addr = anchor + rng.randrange(-8, 8)
    else:
        addr = rng.randrange(0, SPACE)
    addr = min(max(addr, 0), SPACE - length)
    return AccessRequest(rng.randrange(iids), rng.choice((Op.READ, Op.WRITE)), addr, length)


def make_case(kind: Kind, seed: int, index: int) -> Case:
    rng = random.Random(f"{kind.value}:{seed}:{index}")
    iids = rng.randint(1, MAX_IIDS)
    if kind is Kind.IOPMP:
        mds = rng.randint(1, MAX_MDS)
        k = rng.randint(1, MAX_K)
        params = dict(entries=mds * k + rng.randint(0, 2), rrids=iids, md_count=mds, k=k)
        writes = _iopmp_writes(rng, params["entries"], iids, mds)
    else:
        slots = rng.randint(2, MAX_SLOTS)
        params = dict(slots=slots, iids=iids, space=(0, SPACE))
        nperm = 0
        if kind is not Kind.SWC:
            nperm = rng.randint(1, 8)
            params["perm_entries"] = nperm
        writes = _wc_writes(rng, kind, slots, iids, nperm)
    case = Case(index, kind, params, writes, AccessRequest(0, Op.READ, 0, 1))
    case._image = case.build()
    case.req = _request(rng, iids, case._image)
    return case


def mismatch(case: Case, writes=None) -> bool:
    image = case.build(writes)
    got = image.check(case.req).decision
    want = oracle_decide(policy_from_image(image), case.req)
    return got is not want


def minimize(case: Case) -> list[FieldWrite]:
    """Greedily drop configuration writes while the disagreement persists."""
    writes = list(case.writes)
    changed = True
    while changed:
        changed = False
        for j in range(len(writes)):
            trial = writes[:j] + writes[j + 1:]
            if mismatch(case, trial):
                writes = trial
                changed = True
                break
    return writes


@dataclass
class DiffResult:
    kind: Kind
    cases: int
    seed: int
    failures: list[int]
    counterexample: Optional[str] = None

    @property
    def passed(self) -> bool:
        return not self.failures


def _run_shard(kind: Kind, seed: int, indices: range) -> list[int]:
    return [i for i in indices if mismatch(make_case(kind, seed, i))]


def run_difftest(kind: Kind | str, cases: int, seed: int = 0, workers: int = 1) -> DiffResult:
    kind = Kind(kind)
    if cases < 1:
        raise ValueError("need at least one case")
    if workers <= 1:
        failures = _run_shard(kind, seed, range(cases))
    else:
        step = -(-cases // workers)
        shards = [range(s, min(s + step, cases)) for s in range(0, cases, step)]
        with ProcessPoolExecutor(workers) as pool:
            parts = pool.map(_run_shard, [kind] * len(shards), [seed] * len(shards), shards)
            failures = sorted(i for part in parts for i in part)
    result = DiffResult(kind, cases, seed, failures)
    if failures:
        case = make_case(kind, seed, failures[0])
        result.counterexample = case.describe(minimize(case))
    return result
