import pytest

from worldcheck.config import load_scenario, scenario_from_dict
from worldcheck.core import AccessRequest, ConfigError, Decision, Op
from worldcheck.regmap import make_image
from worldcheck.sim import (MmioWrite, Scenario, TraceItem, latency_table, records_csv,
                            run_scenario)

SPACE = (0, 1 << 16)


def open_swc():
    im = make_image("swc", slots=4, iids=4, space=SPACE)
    im.write_field(1, "addr", 0x5FF)   # [0x1000, 0x2000)
    im.write_field(1, "cfg", 3)
    im.write_field(1, "perm", 0xFF)
    return im


def item(cycle, op, addr, iid=0, data=None):
    return TraceItem(cycle, AccessRequest(iid, op, addr), data)


@pytest.mark.parametrize("name,lat", [("fig5_swc", 2), ("fig5_mwc", 2), ("fig5_pewc", 2),
                                      ("fig5_iopmp_best", 3), ("fig5_iopmp_md8", 10),
                                      ("fig5_baseline", 0)])
def test_bundled_latencies(data_dir, name, lat):
    records = run_scenario(load_scenario(data_dir / f"{name}.json"))
    assert records and {r.added_latency for r in records} == {lat}
    assert {r.request.op for r in records} == {Op.READ, Op.WRITE}


def test_isolated_request_cycle_accounting():
    s = Scenario("one", open_swc(), [item(5, Op.READ, 0x1000)])
    (rec,) = run_scenario(s)
    assert (rec.issue_cycle, rec.complete_cycle, rec.added_latency) == (5, 8, 2)


def test_write_then_read_returns_data():
    s = Scenario("rw", open_swc(), [item(0, Op.WRITE, 0x1000, data=0xDEADBEEF),
                                    item(10, Op.READ, 0x1000)])
    recs = run_scenario(s)
    assert recs[-1].rdata == (0xDEADBEEF).to_bytes(4, "little")


def test_denied_write_does_not_reach_target():
    s = Scenario("deny", open_swc(), [item(0, Op.WRITE, 0x3000, data=0x1),
                                      item(10, Op.READ, 0x3000)])
    recs = run_scenario(s)
    assert recs[0].response == "DECERR"
    assert recs[1].rdata is None and recs[1].decision is Decision.DENY


def test_poison_read_returns_pattern():
    im = open_swc()
    im.write_field(1, "perm", 0)
    im.write_field(1, "cfg", 3 | 1 << 25)
    (rec,) = run_scenario(Scenario("p", im, [item(0, Op.READ, 0x1000)]))
    assert rec.response == "POISON" and rec.rdata == b"\xa5" * 4


def test_read_write_contention_alternates():
    trace = [item(0, Op.READ, 0x1000), item(0, Op.WRITE, 0x1004),
             item(0, Op.READ, 0x1008), item(0, Op.WRITE, 0x100C)]
    recs = run_scenario(Scenario("c", open_swc(), trace))
    # one grant per cycle, priority flips after each grant
    assert [r.request.op for r in recs] == [Op.READ, Op.WRITE, Op.READ, Op.WRITE]
    assert [r.complete_cycle for r in recs[:2]] == [3, 4]


def test_mmio_write_applies_after_decode_latency():
    im = make_image("swc", slots=4, iids=4, space=SPACE)
    im.write_field(1, "perm", 0xFF)
    im.write_field(1, "cfg", 3)
    mmio = [MmioWrite(10, im.fields[(1, "addr")].words[0], 0x5FF, 4)]
    trace = [item(10, Op.READ, 0x1000), item(20, Op.READ, 0x1000)]
    recs = run_scenario(Scenario("m", im, trace, mmio=mmio))
    assert [r.decision for r in recs] == [Decision.DENY, Decision.ALLOW]


def test_latency_table_grouping():
    trace = [item(0, Op.READ, 0x1000), item(10, Op.WRITE, 0x1000), item(20, Op.WRITE, 0x9000)]
    rows = latency_table(run_scenario(Scenario("t", open_swc(), trace)))
    assert {r.group: (r.count, r.min, r.max) for r in rows} == {
        ("swc", "r"): (1, 2, 2), ("swc", "w"): (2, 2, 2)}
    with pytest.raises(ValueError):
        latency_table([])


def test_records_csv_header_only_for_empty():
    assert records_csv([]).count("\n") == 1


def test_validation_errors():
    with pytest.raises(ConfigError):
        run_scenario(Scenario("x", None, []))
    with pytest.raises(ConfigError):
        run_scenario(Scenario("x", open_swc(), [item(5, Op.READ, 0), item(1, Op.READ, 0)]))
    with pytest.raises(ConfigError):
        run_scenario(Scenario("x", open_swc(), [TraceItem(0, AccessRequest(0, Op.READ, 0, 8))]))
    with pytest.raises(ConfigError):
        run_scenario(Scenario("x", open_swc(), [item(0, Op.READ, 0, iid=9)]))


def test_scenario_schema_names_field():
    with pytest.raises(ConfigError, match=r"trace\[0\]"):
        scenario_from_dict({"backend": "swc", "params": {"slots": 4, "iids": 4},
                            "trace": [{"cycle": 0, "op": "r", "addr": 0}]})
    with pytest.raises(ConfigError, match="addr"):
        scenario_from_dict({"backend": "swc", "params": {"slots": 4, "iids": 4},
                            "trace": [{"cycle": 0, "iid": 0, "op": "r", "addr": "zz"}]})


def test_run_is_deterministic(data_dir):
    a = records_csv(run_scenario(load_scenario(data_dir / "fig5_iopmp_md8.json")))
    b = records_csv(run_scenario(load_scenario(data_dir / "fig5_iopmp_md8.json")))
    assert a == b
