import random

import pytest
from hypothesis import given, settings, strategies as st

from worldcheck.core import AccessRequest, AddressMode, ConfigError, InterfaceError, Op, Region
from worldcheck.regmap import (CTRL, MDCFG_K, NIID, NPERM, NRULES, RULE_BASE, make_image,
                               restore)

SPACE = (0, 1 << 16)


def images():
    return [make_image("swc", slots=4, iids=8, space=SPACE),
            make_image("swc", slots=4, iids=64, space=SPACE, extended=True),
            make_image("pewc", slots=4, iids=8, space=SPACE),
            make_image("mwc", slots=4, iids=8, space=SPACE),
            make_image("mwc", slots=3, iids=8, space=SPACE, perm_entries=8),
            make_image("iopmp", entries=8, rrids=4, md_count=2, k=4)]


def test_slot_strides():
    assert make_image("swc", slots=4, iids=8).stride == 32
    assert make_image("pewc", slots=4, iids=8).stride == 64
    assert make_image("mwc", slots=4, iids=8).stride == 64


def test_swc_slot_offsets():
    im = make_image("swc", slots=4, iids=32)
    base = RULE_BASE + 32
    assert im.fields[(1, "addr")].words == (base, base + 4)
    assert im.fields[(1, "perm")].words == (base + 8, base + 0xC)
    assert im.fields[(1, "cfg")].words == (base + 0x10,)


def test_mwc_slot_offsets():
    im = make_image("mwc", slots=4, iids=8)
    base = RULE_BASE + 64
    assert im.fields[(1, "addr")].words == (base, base + 4)
    assert im.fields[(1, "eaddr")].words == (base + 8, base + 0xC)
    assert im.fields[(1, "cfg")].words == (base + 0x10,)
    for n in range(4):
        assert im.fields[(1, f"perm{n}")].words == (base + 0x20 + 4 * n,)


def test_perm_default_and_example_write():
    im = make_image("mwc", slots=4, iids=8)
    base = RULE_BASE + 64
    assert im.read(base + 0x20) == 0xC000_0000
    im.write(base + 0x20, 0xC000_0005)
    assert im.read_field(1, "perm0") == 0xC000_0005
    im.write(base + 0x20, 0xFFFF_FFFF)
    assert im.read(base + 0x20) == 0xC000_007F  # reserved bits stay zero


def test_mwc_gr_bit_and_reserved_space():
    im = make_image("mwc", slots=4, iids=8)
    base = RULE_BASE + 64
    im.write(base + 0x10, 1 << 24 | 4)
    assert im.read(base + 0x10) >> 24 & 1
    im.write(base + 0x30, 0xDEAD)
    assert im.read(base + 0x30) == 0 and im.read(base + 0x14) == 0


def test_eaddr_roundtrip_64bit():
    im = make_image("mwc", slots=4, iids=8)
    im.write(RULE_BASE + 64 + 8, 0x1234_5678_9ABC_DEF0, 8)
    assert im.read(RULE_BASE + 64 + 8, 8) == 0x1234_5678_9ABC_DEF0


def test_info_registers():
    im = make_image("pewc", slots=6, iids=8, perm_entries=3)
    assert (im.read(NRULES), im.read(NIID), im.read(NPERM)) == (6, 8, 3)
    im.write(NRULES, 99)
    assert im.read(NRULES) == 6


def test_pinned_slots():
    im = make_image("swc", slots=4, iids=8, space=(0x1000, 0x9000))
    assert im.read_field(0, "addr") == 0x400 and im.read_field(3, "addr") == 0x9000 >> 2
    im.write_field(0, "addr", 0x123)
    im.write_field(0, "cfg", 3)
    im.write_field(3, "cfg", 3)
    assert im.read_field(0, "addr") == 0x400 and im.read_field(0, "cfg") == 0
    assert im.read_field(3, "cfg") & 3 == AddressMode.TOR
    im.write_field(3, "cfg", 1 << 25)
    assert im.read_field(3, "cfg") == 1 << 25 | 1  # suppress stays writable


def test_access_width_and_alignment():
    im = make_image("swc", slots=4, iids=8)
    with pytest.raises(InterfaceError):
        im.write(RULE_BASE + 2, 0)
    with pytest.raises(InterfaceError):
        im.read(RULE_BASE + 4, 8)
    with pytest.raises(InterfaceError):
        im.write(RULE_BASE, 0, 2)


def test_lock_is_sticky_and_audited():
    im = make_image("swc", slots=4, iids=8)
    im.write(CTRL, 1)
    im.write_field(1, "perm", 0xFF)
    im.write(CTRL, 0)
    assert im.locked and im.read_field(1, "perm") == 0
    assert [a.reason for a in im.audit] == ["locked"] * len(im.audit) and len(im.audit) == 2


def test_decode_latency():
    im = make_image("swc", slots=4, iids=8, space=SPACE)
    im.write_field(1, "perm", 0b1)
    im.write_field(1, "cfg", AddressMode.NAPOT)
    im.write_field(1, "addr", 0x5FF, now=10)
    assert im.region(1, now=10) != Region(0x1000, 0x2000)
    assert im.region(1, now=11) == Region(0x1000, 0x2000)
    assert im.pending(10) == [(1, 11)]
    req = AccessRequest(0, Op.READ, 0x1000)
    assert not im.check(req, now=10).allowed and im.check(req, now=11).allowed


def test_tor_redecodes_when_predecessor_changes():
    im = make_image("swc", slots=5, iids=8, space=SPACE)
    im.write_field(2, "cfg", AddressMode.TOR)
    im.write_field(2, "addr", 0x800)
    im.write_field(1, "addr", 0x400)
    assert im.region(2) == Region(0x1000, 0x2000)


def test_iopmp_k_is_warl():
    im = make_image("iopmp", entries=8, rrids=2, md_count=2, k=2)
    im.write(MDCFG_K, 4)
    assert im.read(MDCFG_K) == 4
    im.write(MDCFG_K, 5)  # 5 x 2 > 8 entries: keep the old value
    assert im.read(MDCFG_K) == 4


def test_bad_params():
    with pytest.raises(ConfigError):
        make_image("swc", slots=4, iids=33)
    with pytest.raises(ConfigError):
        make_image("swc", slots=1, iids=4)
    with pytest.raises(ConfigError):
        make_image("iopmp", entries=4, rrids=2, md_count=3, k=2)
    with pytest.raises(ConfigError):
        make_image("swc", slots=4, iids=4, bogus=1)


def _snapshot(im):
    return {key: im.read_field(*key) for key in im.fields}


def _fuzz_image(im, rng, rounds):
    keys = list(im.fields)
    for _ in range(rounds):
        idx, name = key = rng.choice(keys)
        f = im.fields[key]
        before = _snapshot(im)
        value = rng.getrandbits(f.width_bits)
        im.write_field(idx, name, value)
        after = _snapshot(im)
        assert after[key] == (before[key] & ~f.mask) | (value & f.mask)
        for other in keys:
            if other != key:
                assert after[other] == before[other], f"{key} write disturbed {other}"


def test_field_roundtrip_fuzz():
    rng = random.Random(1234)
    for im in images():
        _fuzz_image(im, rng, 250)


@given(st.data())
@settings(max_examples=30)
def test_dump_restore_roundtrip(data):
    im = data.draw(st.sampled_from(images()))
    rng = random.Random(data.draw(st.integers(0, 1 << 30)))
    for _ in range(20):
        idx, name = rng.choice(list(im.fields))
        im.write_field(idx, name, rng.getrandbits(im.fields[(idx, name)].width_bits))
    if data.draw(st.booleans()):
        im.write(CTRL, 1)
    back = restore(im.dump())
    assert back.dump() == im.dump()
    assert _snapshot(back) == _snapshot(im)
    assert [back.region(i) for i in range(back.n_rules)] == [im.region(i) for i in range(im.n_rules)]


def test_restore_rejects_garbage():
    with pytest.raises(ConfigError):
        restore("0x1000: 0x1\n")
    with pytest.raises(ConfigError):
        restore("# kind=swc slots=4 iids=4\nnot a line\n")
