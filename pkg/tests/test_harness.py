import math

import pytest

from resetsim.config import build, build_sweep, bundled
from resetsim.harness import (
    CsvTable,
    analytic_campaign_rate,
    format_value,
    metric_names,
    run_single,
    run_sweep,
)
from resetsim.errors import UnknownColumn


@pytest.fixture(scope="module")
def engine_table():
    doc = bundled("engine_sweep")
    doc["horizon"] = 3.0
    return run_sweep(build_sweep(doc))


def test_engine_sweep_shape(engine_table):
    assert len(engine_table.rows) == 50
    assert engine_table.column("cell_index") == list(range(50))
    assert engine_table.columns[-1] == "error"


def test_error_cells_are_exactly_the_invalid_windows(engine_table):
    for r in engine_table.records():
        bad = r["controller.reset_strategy.d_R"] >= r["scheduler.T_R"]
        assert bool(r["error"]) == bad
        if bad:
            assert r["speed_ratio_pct"] is None and "RangeViolation" in r["error"]


def test_serial_equals_parallel():
    doc = bundled("engine_sweep")
    doc["horizon"] = 2.0
    doc["sweep"]["axes"][1]["values"] = [0.005, 0.3]
    spec = build_sweep(doc)
    assert run_sweep(spec, 1).to_csv() == run_sweep(spec, 2).to_csv()


def test_braking_sweep_values():
    t = run_sweep(build_sweep(bundled("braking")))
    assert t.column("effective_decel") == pytest.approx([8.0, 7.2, 6.72])
    assert t.column("stop_time") == pytest.approx([3.75, 4.25, 4.47], abs=0.001)
    # measured deceleration tracks the duty-cycle estimate
    for m, e in zip(t.column("measured_decel"), t.column("effective_decel")):
        assert m == pytest.approx(e, rel=0.03)


def test_quad_sweep_monotone():
    doc = bundled("quad_r_sweep")
    doc["horizon"] = 22.0
    ys = run_sweep(build_sweep(doc)).column("rate_stddev")
    assert all(a > b for a, b in zip(ys, ys[1:]))


def test_run_single_metrics():
    trace, m = run_single(build(bundled("ecu_default")))
    assert set(m) == set(metric_names("engine", False, False))
    assert m["n_resets"] == 80
    assert m["d_S"] == pytest.approx(0.04)
    assert m["speed_ratio_pct"] > 95
    assert len(trace) == 20_000


def test_analytic_rate():
    sc = build(bundled("attack_guessing")).scenario
    p = 0.98 * 1000 / 65536
    assert analytic_campaign_rate(sc) == pytest.approx(1 - (1 - p) ** 60)
    assert math.isnan(analytic_campaign_rate(build(bundled("ecu_default")).scenario))


def test_format_value():
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(float("nan")) == "nan"
    assert format_value(True) == "1"
    assert format_value(None) == ""
    assert format_value(-math.inf) == "-inf"


def test_csv_roundtrip(tmp_path):
    t = CsvTable(["a", "b", "c"], [(1, 0.25, "x"), (2, math.inf, "")])
    p = tmp_path / "t.csv"
    t.write(p)
    back = CsvTable.read(p)
    assert back.columns == t.columns
    assert back.rows == [(1, 0.25, "x"), (2, math.inf, None)]
    assert back.to_csv() == t.to_csv()


def test_unknown_column():
    with pytest.raises(UnknownColumn, match="nope"):
        CsvTable(["a"], []).column("nope")


def test_empty_csv():
    assert CsvTable.from_csv("").columns == []
