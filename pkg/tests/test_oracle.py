import pytest

from worldcheck import checker_wc
from worldcheck.core import AccessRequest, AddressMode, Decision, Kind, Op
from worldcheck.difftest import make_case, mismatch, run_difftest
from worldcheck.oracle import oracle_decide, policy_from_image
from worldcheck.regmap import make_image

SPACE = (0, 1 << 16)


def test_oracle_reads_swc_bitmap():
    im = make_image("swc", slots=4, iids=8, space=SPACE)
    im.write_field(1, "addr", 0x5FF)
    im.write_field(1, "cfg", AddressMode.NAPOT)
    im.write_field(1, "perm", 0b01 << 4)
    pol = policy_from_image(im)
    assert oracle_decide(pol, AccessRequest(2, Op.READ, 0x1800)) is Decision.ALLOW
    assert oracle_decide(pol, AccessRequest(2, Op.WRITE, 0x1800)) is Decision.DENY


def test_oracle_reads_extended_bitmap():
    im = make_image("swc", slots=4, iids=64, space=SPACE, extended=True)
    im.write_field(1, "addr", 0x5FF)
    im.write_field(1, "cfg", AddressMode.NAPOT)
    im.write_field(1, "perm", 1 << (2 * 50 + 1))
    pol = policy_from_image(im)
    assert oracle_decide(pol, AccessRequest(50, Op.WRITE, 0x1000)) is Decision.ALLOW
    assert im.check(AccessRequest(50, Op.WRITE, 0x1000)).allowed


def test_oracle_mwc_se_and_gr():
    im = make_image("mwc", slots=4, iids=8, space=SPACE)
    im.write_field(1, "addr", 0x1000)
    im.write_field(1, "eaddr", 0x1A00)
    im.write_field(1, "cfg", 1 << 24 | AddressMode.SE)
    for n in range(4):
        im.write_field(1, f"perm{n}", 0)
    pol = policy_from_image(im)
    assert oracle_decide(pol, AccessRequest(3, Op.READ, 0x19FC)) is Decision.ALLOW
    assert oracle_decide(pol, AccessRequest(3, Op.READ, 0x1A00)) is Decision.DENY
    assert oracle_decide(pol, AccessRequest(3, Op.WRITE, 0x1000)) is Decision.DENY


def test_oracle_iopmp_md_walk():
    im = make_image("iopmp", entries=4, rrids=2, md_count=2, k=2)
    im.write_field(2, "addr", 0x5FF)
    im.write_field(2, "cfg", 3 << 3 | 0b01)
    im.write_field(1, "srcmd", 0b10)
    pol = policy_from_image(im)
    assert oracle_decide(pol, AccessRequest(1, Op.READ, 0x1000)) is Decision.ALLOW
    assert oracle_decide(pol, AccessRequest(0, Op.READ, 0x1000)) is Decision.DENY


@pytest.mark.parametrize("kind", list(Kind))
def test_difftest_smoke(kind):
    res = run_difftest(kind, 300, seed=3)
    assert res.passed, res.counterexample


def test_cases_are_reproducible():
    a, b = make_case(Kind.MWC, 9, 17), make_case(Kind.MWC, 9, 17)
    assert a.describe() == b.describe()


def test_sharded_run_matches_serial():
    assert run_difftest(Kind.IOPMP, 200, 5, workers=2).failures == \
        run_difftest(Kind.IOPMP, 200, 5).failures


def test_difftest_catches_injected_bug(monkeypatch):
    # swap read and write bits in the backend only
    def broken(perm, req):
        bit = 2 * req.iid + (0 if req.op is Op.WRITE else 1)
        return bool(perm >> bit & 1)
    monkeypatch.setattr(checker_wc, "bitmap_grants", broken)
    res = run_difftest(Kind.SWC, 400, seed=1)
    assert not res.passed
    assert "request" in res.counterexample
    assert mismatch(make_case(Kind.SWC, 1, res.failures[0]))


def test_difftest_rejects_zero_cases():
    with pytest.raises(ValueError):
        run_difftest(Kind.SWC, 0)
