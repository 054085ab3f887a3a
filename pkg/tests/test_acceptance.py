"""End-to-end acceptance checks; each records a PASS/FAIL line in the summary."""

import math
from dataclasses import replace

import numpy as np

from resetsim import cli
from resetsim.config import build, bundled
from resetsim.controller import PowerCycle, SnapshotRestore, stabilization_time
from resetsim.errors import Stalled
from resetsim.plants import EngineParams, attitude_rate_stddev, effective_deceleration, engine_speed_ratio
from resetsim.scheduler import Periodic, Random, reset_ticks, recovery_ratio, safety_condition, SafetyParams
from resetsim.security import (
    FlashPersist,
    Guessing,
    campaign_success_prob,
    defeat_device_triggered,
    simulate_attack_campaign,
)
from resetsim.sim import ControllerConfig, Scenario, run_scenario


def criterion_test(n):
    def mark(fn):
        fn.criterion_number = n
        return fn
    return mark


@criterion_test(1)
def test_safety_calculus(criterion):
    ok_eq = safety_condition(0.125, 0.020, 0.039, 0.066)
    D = recovery_ratio(SafetyParams(0.125, 0.020, 0.039, 0.066))
    # equality: the four durations tile the interval exactly
    tight = math.isclose(0.020 + 0.039 + 0.066, 0.125, abs_tol=1e-12)
    ok = ok_eq and tight and abs(D - 1.119) <= 0.001
    criterion(1, ok, f"safety holds with equality={tight}, D={D:.4f}")
    assert ok


@criterion_test(2)
def test_engine_stabilization_time(criterion):
    d_S = stabilization_time("engine", EngineParams())
    # Simulated sync after a zero-downtime power cycle.  Ignition is off
    # while syncing, so the engine slows a little and sync takes slightly
    # longer than three revolutions at exactly 4500 RPM.
    sc = Scenario("engine", scheduler=Periodic(1.0), controller=ControllerConfig(PowerCycle(0.0)), horizon=1.0)
    tr = run_scenario(sc)
    syncing = int(np.sum(tr["phase"][:400] == 1)) * sc.dt
    ok = 0.039 <= d_S <= 0.040
    criterion(2, ok, f"d_S={d_S * 1e3:.2f} ms; simulated sync from 4500 RPM took {syncing * 1e3:.1f} ms")
    assert ok
    assert d_S <= syncing <= 1.05 * d_S


@criterion_test(3)
def test_brake_effective_deceleration(criterion):
    a1 = effective_deceleration(8.0, 0.0, 1.0, 0.1)
    a2 = effective_deceleration(8.0, 0.0, 0.125, 0.020)
    a0 = effective_deceleration(8.0, 0.0, 1.0, 0.0)
    ok = (abs(a1 - 7.27) / 7.27 <= 0.05 and abs(a2 - 6.96) / 6.96 <= 0.05 and a0 == 8.0
          and math.isclose(a1, 7.20) and math.isclose(a2, 6.72))
    criterion(3, ok, f"a_eff={a1:.3f} (ref 7.27), {a2:.3f} (ref 6.96), d_R=0 -> {a0}")
    assert ok


@criterion_test(4)
def test_flash_persistence_bound(criterion):
    def campaign(sched):
        sc = Scenario("brake", scheduler=sched, attacker=FlashPersist(), horizon=10.0, seed=11,
                      controller=ControllerConfig(PowerCycle(0.020)))
        return simulate_attack_campaign(sc, 1000, method="kernel").successes

    blocked = [Periodic(0.125), Periodic(0.25), Periodic(0.5), Periodic(0.67), Random(0.1, 0.67)]
    open_ = [Periodic(0.7), Periodic(1.0), Periodic(2.0), Random(0.5, 1.5)]
    zero = {repr(s): campaign(s) for s in blocked}
    some = {repr(s): campaign(s) for s in open_}
    ok = all(v == 0 for v in zero.values()) and all(v >= 1 for v in some.values())
    criterion(4, ok, f"T_R<=0.670 successes {list(zero.values())}; longer uptime {list(some.values())} of 1000")
    assert ok


@criterion_test(5)
def test_attack_probability(criterion):
    trials = 10_000
    sc = build(bundled("attack_guessing")).scenario
    res = simulate_attack_campaign(sc, trials)
    p = campaign_success_prob(0.980, 60, Guessing(1000, 65536), diversified=True)
    sigma = math.sqrt(p * (1 - p) / trials)
    disc = build(bundled("attack_disclosure")).scenario
    dres = simulate_attack_campaign(disc, trials)
    ok = abs(res.rate - p) <= 3 * sigma and dres.successes == 0
    criterion(5, ok, f"guessing {res.rate:.4f} vs analytic {p:.4f} ({abs(res.rate - p) / sigma:.2f} sigma); "
                     f"disclosure {dres.successes}/{trials}")
    assert ok


def _engine_ratio(T_R, d_R, horizon=12.0):
    sc = Scenario("engine", scheduler=Periodic(T_R), controller=ControllerConfig(PowerCycle(d_R)), horizon=horizon)
    try:
        return engine_speed_ratio(run_scenario(sc), 4500.0)
    except Stalled:
        return None


def _stall_boundary(T_R, tol=0.0025):
    lo, hi = 0.0, T_R - 0.0005
    assert _engine_ratio(T_R, hi) is None, "no stall even at the largest downtime"
    while hi - lo > tol:
        mid = round((lo + hi) / 2 / 0.0005) * 0.0005
        if mid in (lo, hi):
            break
        if _engine_ratio(T_R, mid) is None:
            hi = mid
        else:
            lo = mid
    return hi


@criterion_test(6)
def test_engine_sweep_properties(criterion):
    base = _engine_ratio(1.0, 0.020)
    monotone = True
    for T_R in (1.0, 0.5, 0.25, 0.125, 0.0625):
        ratios = [_engine_ratio(T_R, d) for d in (0.001, 0.002, 0.003, 0.005, 0.01, 0.02, 0.04, 0.08, 0.15, 0.3, 0.6)
                  if d < T_R]
        seen_stall = False
        prev = math.inf
        for r in ratios:
            if r is None:
                seen_stall = True
                continue
            # once stalled, larger downtime must stay stalled
            monotone &= not seen_stall and r <= prev + 1e-9
            prev = r
    bounds = [_stall_boundary(T_R) for T_R in (0.0625, 0.125, 0.25, 0.5, 1.0)]
    increasing = all(a < b for a, b in zip(bounds, bounds[1:]))
    ok = base is not None and base >= 99.0 and monotone and increasing
    criterion(6, ok, f"ratio(1 s, 20 ms)={base:.3f}%, monotone={monotone}, "
                     f"stall d_R by T_R={[round(b, 4) for b in bounds]}")
    assert ok


def _quad(T_R, seed=1):
    sc = Scenario("quad", scheduler=None if T_R is None else Periodic(T_R),
                  controller=ControllerConfig(SnapshotRestore(0.003)),
                  wind=build(bundled("quad_hover")).scenario.wind, horizon=66.0, seed=seed)
    return attitude_rate_stddev(run_scenario(sc), 2.0)


@criterion_test(7)
def test_quad_reset_interval(criterion):
    base, slow, fast = _quad(None), _quad(8.0), _quad(0.25)
    ok = abs(slow / base - 1) <= 0.10 and fast >= 2 * base
    criterion(7, ok, f"baseline {base:.4f}; T_R=8 s ratio {slow / base:.3f}; T_R=0.25 s ratio {fast / base:.1f}")
    assert ok


@criterion_test(8)
def test_adaptive_wind(criterion):
    doc = bundled("quad_att_wind")
    acc = {"adaptive": 0.0, "T_R=1": 0.0, "T_R=8": 0.0}
    seeds = (1, 2, 3)
    for seed in seeds:
        for name, sched in (("adaptive", doc["scheduler"]),
                            ("T_R=1", {"mode": "periodic", "T_R": 1.0}),
                            ("T_R=8", {"mode": "periodic", "T_R": 8.0})):
            sc = build({**doc, "seed": seed, "scheduler": sched}).scenario
            acc[name] += attitude_rate_stddev(run_scenario(sc), sc.warmup) ** 2
    pooled = {k: math.sqrt(v / len(seeds)) for k, v in acc.items()}
    a, f1, f8 = pooled["adaptive"], pooled["T_R=1"], pooled["T_R=8"]
    ok = a <= f1 and abs(a / f8 - 1) <= 0.15
    criterion(8, ok, f"pooled stddev adaptive {a:.4f}, T_R=1 {f1:.4f}, T_R=8 {f8:.4f} (ratio {a / f8:.3f})")
    assert ok


@criterion_test(9)
def test_defeat_device(criterion):
    horizon = 1000.0
    resets = [k * 0.0005 for k in reset_ticks(Periodic(1.0), int(horizon / 0.0005), 0.0005)]
    with_resets = defeat_device_triggered(resets, 0.020, 300.0, horizon)
    without = defeat_device_triggered([], 0.0, 300.0, horizon)
    sc = build(bundled("defeat_device")).scenario
    sim_with = simulate_attack_campaign(sc, 100).successes
    sim_without = simulate_attack_campaign(replace(sc, scheduler=None), 100).successes
    ok = not with_resets and without and sim_with == 0 and sim_without == 100
    criterion(9, ok, f"triggered with resets={with_resets} (sim {sim_with}/100), "
                     f"without={without} (sim {sim_without}/100)")
    assert ok


@criterion_test(10)
def test_determinism(criterion, tmp_path):
    import json

    sweep_doc = bundled("engine_sweep")
    sweep_doc["horizon"] = 3.0
    sweep_doc["sweep"]["axes"][1]["values"] = [0.005, 0.04, 0.3]
    cfg_path = tmp_path / "sweep.json"
    cfg_path.write_text(json.dumps(sweep_doc))
    plot_spec = tmp_path / "plot.json"
    plot_spec.write_text(json.dumps({"x": "controller.reset_strategy.d_R", "y": "speed_ratio_pct",
                                     "group": "scheduler.T_R"}))

    outputs = []
    for i, workers in enumerate((1, 1, 2)):
        run_dir = tmp_path / f"run{i}"
        assert cli.main(["run", "--config", "ecu_default", "--seed", "5", "--out", str(run_dir)]) == 0
        sw_dir = tmp_path / f"sweep{i}"
        assert cli.main(["sweep", "--config", str(cfg_path), "--workers", str(workers), "--out", str(sw_dir)]) == 0
        svg = tmp_path / f"plot{i}.svg"
        assert cli.main(["plot", "--in", str(sw_dir / "sweep.csv"), "--spec", str(plot_spec), "--out", str(svg)]) == 0
        outputs.append(tuple(p.read_bytes() for p in (run_dir / "trace.csv", run_dir / "metrics.csv",
                                                      sw_dir / "sweep.csv", svg)))
    runs_equal = outputs[0][:2] == outputs[1][:2] == outputs[2][:2]
    serial_equal = outputs[0][2:] == outputs[1][2:]
    parallel_equal = outputs[0][2:] == outputs[2][2:]
    ok = runs_equal and serial_equal and parallel_equal
    criterion(10, ok, f"run repeat identical={runs_equal}, sweep+svg repeat identical={serial_equal}, "
                      f"serial vs parallel identical={parallel_equal}")
    assert ok
