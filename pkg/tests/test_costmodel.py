import pytest
from hypothesis import given, strategies as st

from worldcheck.core import Kind
from worldcheck.costmodel import (DEFAULT_BASELINE, DEFAULT_OVERHEAD, CheckerConfigPoint, cost,
                                  crossover, soc_impact, sweep, sweep_csv)

WC = [Kind.SWC, Kind.PEWC, Kind.MWC]


def pt(kind, rules, iids, **kw):
    return CheckerConfigPoint(kind, rules, iids, **kw)


def test_swc_perm_state():
    assert cost(pt(Kind.SWC, 8, 32)).perm_bits == 6 * 64


def test_pewc_perm_state_per_slot():
    assert cost(pt(Kind.PEWC, 3, 8)).perm_bits == 4 * 32
    assert cost(pt(Kind.PEWC, 3, 128)).perm_bits == 4 * 32


@given(st.sampled_from(list(Kind)), st.integers(2, 63), st.integers(1, 127))
def test_state_bits_nondecreasing(kind, rules, iids):
    base = cost(pt(kind, rules, iids)).state_bits
    assert cost(pt(kind, rules + 1, iids)).state_bits >= base
    assert cost(pt(kind, rules, iids + 1)).state_bits >= base


@given(st.integers(3, 64), st.integers(1, 127))
def test_swc_slope_per_iid(rules, iids):
    d = cost(pt(Kind.SWC, rules, iids + 1)).state_bits - cost(pt(Kind.SWC, rules, iids)).state_bits
    assert d == 2 * (rules - 2)


@given(st.sampled_from([Kind.PEWC, Kind.MWC]), st.integers(2, 64), st.integers(1, 128))
def test_entry_encodings_flat_in_iids(kind, rules, iids):
    assert cost(pt(kind, rules, iids)) == cost(pt(kind, rules, 1))


@given(st.integers(1, 64), st.integers(1, 127))
def test_iopmp_grows_per_rrid(rules, iids):
    d = cost(pt(Kind.IOPMP, rules, iids + 1)).state_bits - cost(pt(Kind.IOPMP, rules, iids)).state_bits
    assert d >= 64


def test_crossovers_exist_and_order():
    iids = range(2, 129)
    pe = crossover(Kind.SWC, Kind.PEWC, 8, iids)
    m = crossover(Kind.SWC, Kind.MWC, 8, iids)
    assert pe is not None and m is not None and pe < m


def test_crossover_none_when_never_cheaper():
    assert crossover(Kind.MWC, Kind.SWC, 8, range(2, 129)) is None
    with pytest.raises(ValueError):
        crossover(Kind.SWC, Kind.MWC, 8, [])


def test_soc_impact_identity():
    assert soc_impact(DEFAULT_BASELINE, DEFAULT_OVERHEAD, DEFAULT_BASELINE) == 0.15
    with pytest.raises(ValueError):
        soc_impact(DEFAULT_BASELINE, 1.5, DEFAULT_BASELINE)


def test_soc_impact_rows():
    pe = [soc_impact(pt(Kind.PEWC, 64, n), 0.15, DEFAULT_BASELINE) for n in (32, 64, 128)]
    sw = [soc_impact(pt(Kind.SWC, 64, n), 0.15, DEFAULT_BASELINE) for n in (32, 64, 128)]
    assert pe[0] == pe[1] == pe[2]
    assert sw[0] < sw[1] < sw[2]


def test_invalid_points():
    with pytest.raises(ValueError):
        pt(Kind.SWC, 1, 4)
    with pytest.raises(ValueError):
        pt(Kind.IOPMP, 8, 4, k=4, md_count=3)
    p = pt(Kind.IOPMP, 8, 4)
    assert (p.k, p.md_count) == (8, 1)


def test_sweep_shape_and_csv():
    rows = sweep(WC, range(2, 65), [8])
    assert len(rows) == 3 * 63
    text = sweep_csv(rows)
    assert text.count("\n") == 1 + len(rows)
    assert len(sweep([Kind.SWC], [8], [8])) == 1
