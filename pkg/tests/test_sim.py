import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from resetsim.controller import PowerCycle, SnapshotRestore
from resetsim.errors import InvalidScenario
from resetsim.plants import WindProfile
from resetsim.scheduler import Adaptive, Periodic, Random
from resetsim.security import Disclosure, PathRandomization
from resetsim.sim import COMMON_COLUMNS, PLANT_COLUMNS, ControllerConfig, Scenario, SimClock, run_scenario


def test_clock():
    c = SimClock(0.0005)
    for _ in range(4):
        c.advance()
    assert c.now == pytest.approx(0.002)
    with pytest.raises(InvalidScenario):
        SimClock(0.002)


@settings(max_examples=10)
@given(st.sampled_from(["engine", "quad", "brake"]), st.integers(0, 2**63))
def test_deterministic(plant, seed):
    sc = Scenario(plant, scheduler=Random(0.1, 0.2), horizon=0.5, seed=seed,
                  controller=ControllerConfig(PowerCycle(0.005) if plant != "quad" else SnapshotRestore(0.003)))
    assert run_scenario(sc).equals(run_scenario(sc))


def test_columns_and_rows():
    for plant in ("engine", "quad", "brake"):
        tr = run_scenario(Scenario(plant, horizon=0.1))
        assert tr.names == list(COMMON_COLUMNS + PLANT_COLUMNS[plant])
        assert len(tr) == 200
        assert tr["t"][0] == 0.0


def test_first_reset_at_time_zero():
    tr = run_scenario(Scenario("brake", scheduler=Periodic(0.25), horizon=1.0))
    assert tr.reset_times == pytest.approx([0.0, 0.25, 0.5, 0.75])
    assert tr["reset"][0] == 1
    assert tr["reset"].sum() == 4


def test_brake_released_during_downtime():
    sc = Scenario("brake", scheduler=Periodic(0.5), controller=ControllerConfig(PowerCycle(0.1)), horizon=1.0)
    tr = run_scenario(sc)
    # downtime is 200 rows after each reset
    assert tr["braking"][:200].sum() == 0
    assert tr["braking"][200:1000].all()


def test_brake_stop_matches_closed_form():
    tr = run_scenario(Scenario("brake", horizon=4.0))
    k = int(np.flatnonzero(tr["speed"] <= 0)[0])
    assert tr["t"][k] == pytest.approx(3.75, abs=0.001)
    assert tr["distance"][k] == pytest.approx(56.25, rel=1e-6)


def test_engine_holds_nominal_without_resets():
    tr = run_scenario(Scenario("engine", horizon=1.0))
    assert np.mean(tr["rpm"]) == pytest.approx(4500, rel=0.01)


def test_attack_outcome_recorded():
    sc = Scenario("brake", attacker=Disclosure(0.1), horizon=0.5)
    o = run_scenario(sc).attack_outcome
    assert o.succeeded and o.success_time == pytest.approx(0.1)


def test_adaptive_runs_and_logs_interval():
    sc = Scenario("quad", scheduler=Adaptive(0.5, 1.0, window=0.25), horizon=2.0,
                  controller=ControllerConfig(SnapshotRestore(0.003)),
                  wind=WindProfile(turbulence_sigma=0.02))
    tr = run_scenario(sc)
    assert set(np.round(tr["next_interval"][tr["reset"] == 1], 6)) <= {0.5, 1.0}


@pytest.mark.parametrize("kw,match", [
    (dict(plant="boat"), "plant"),
    (dict(plant="brake", horizon=0.0), "horizon"),
    (dict(plant="brake", dt=0.01), "dt"),
    (dict(plant="brake", scheduler=Periodic(0.01), controller=ControllerConfig(PowerCycle(0.02))), "d_R"),
    (dict(plant="brake", scheduler=Periodic(5.0), horizon=1.0), "horizon"),
    (dict(plant="brake", scheduler=Periodic(0.00075), controller=ControllerConfig(PowerCycle(0.0))), "multiple"),
    (dict(plant="brake", wind=WindProfile(turbulence_sigma=0.1)), "wind"),
    (dict(plant="quad", diversification=PathRandomization(slowdown=5.0),
          controller=ControllerConfig(SnapshotRestore(0.003), nominal_latency=0.002)), "exceeds"),
])
def test_validation_errors(kw, match):
    with pytest.raises(InvalidScenario, match=match):
        Scenario(**kw).validate()


def test_csv_format():
    tr = run_scenario(Scenario("brake", horizon=0.002))
    text = tr.to_csv()
    lines = text.splitlines()
    assert lines[0].split(",") == tr.names
    assert len(lines) == 5
    first = dict(zip(lines[0].split(","), lines[1].split(",")))
    assert first["phase"] == "2"
    assert first["speed"] == "30"
    buf = io.StringIO()
    tr.write_csv(buf)
    assert buf.getvalue() == text


def test_window():
    tr = run_scenario(Scenario("brake", scheduler=Periodic(0.25), horizon=1.0))
    w = tr.window(0.25, 0.5)
    assert len(w) == 500 and w.reset_times == [0.25]
