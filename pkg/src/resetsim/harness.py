"""Experiment harness: per-plant metrics, sweeps and CSV tables."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from . import config as cfg
from . import rng as rngmod
from .errors import ResetSimError, Stalled
from .plants import attitude_rate_stddev, effective_deceleration, engine_speed_ratio, stopping_metrics
from .scheduler import Periodic, SafetyParams, reset_ticks
from .security import campaign_success_prob, simulate_attack_campaign
from .sim import Scenario, TraceLog, run_scenario, scenario_d_S

PLANT_METRICS = {
    "engine": ("speed_ratio_pct", "stalled", "stall_time"),
    "quad": ("rate_stddev",),
    "brake": ("stop_time", "stop_distance", "effective_decel", "measured_decel"),
}
SCHEDULE_METRICS = ("n_resets", "d_S", "ratio_D")
ATTACK_METRICS = ("attack_success", "attack_time")
CAMPAIGN_METRICS = ("trials", "successes", "success_rate", "ci_low", "ci_high",
                    "mean_success_time", "analytic_rate")


def metric_names(plant: str, attacker: bool, campaign: bool) -> tuple:
    names = PLANT_METRICS[plant] + SCHEDULE_METRICS
    if campaign:
        names += CAMPAIGN_METRICS
    elif attacker:
        names += ATTACK_METRICS
    return names


# ------------------------------------------------------------------ metrics

def _ratio_D(sc: Scenario) -> float:
    if not isinstance(sc.scheduler, Periodic):
        return math.nan
    d_S = scenario_d_S(sc)
    try:
        return SafetyParams.from_interval(sc.scheduler.T_R, sc.d_R, d_S).ratio
    except ResetSimError:
        return math.nan


def trace_metrics(sc: Scenario, trace: TraceLog) -> dict:
    """Plant and schedule metrics of one simulated trace."""
    m: dict = {}
    if sc.plant == "engine":
        try:
            m["speed_ratio_pct"] = engine_speed_ratio(trace, sc.plant_params.nominal_rpm, sc.warmup)
            m["stalled"] = 0
            m["stall_time"] = math.nan
        except Stalled as exc:
            m["speed_ratio_pct"] = math.nan
            m["stalled"] = 1
            m["stall_time"] = exc.stall_time
    elif sc.plant == "quad":
        m["rate_stddev"] = attitude_rate_stddev(trace, sc.warmup)
    else:
        t_stop, dist = stopping_metrics(trace)
        p = sc.plant_params
        m["stop_time"] = t_stop
        m["stop_distance"] = dist
        if sc.scheduler is None:
            m["effective_decel"] = p.a_brake
        elif isinstance(sc.scheduler, Periodic):
            m["effective_decel"] = effective_deceleration(p.a_brake, p.a_coast, sc.scheduler.T_R, sc.d_R)
        else:
            m["effective_decel"] = math.nan
        m["measured_decel"] = p.v0 ** 2 / (2.0 * dist) if dist > 0 and not math.isnan(t_stop) else math.nan
    m["n_resets"] = len(trace.reset_times)
    m["d_S"] = scenario_d_S(sc)
    m["ratio_D"] = _ratio_D(sc)
    if trace.attack_outcome is not None:
        o = trace.attack_outcome
        m["attack_success"] = int(o.succeeded)
        m["attack_time"] = o.success_time if o.succeeded else math.nan
    return m


def analytic_campaign_rate(sc: Scenario) -> float:
    """Closed-form success probability when every epoch has the same uptime."""
    if sc.attacker is None:
        return math.nan
    diversified = sc.diversification.invalidates
    if sc.scheduler is None:
        return campaign_success_prob(sc.horizon, 1, sc.attacker, diversified)
    if not isinstance(sc.scheduler, Periodic):
        return math.nan
    k = len(reset_ticks(sc.scheduler, sc.n_steps, sc.dt))
    if abs(k * sc.scheduler.T_R - sc.horizon) > 1e-9:
        return math.nan  # last epoch is truncated
    return campaign_success_prob(sc.scheduler.T_R - sc.d_R, k, sc.attacker, diversified)


def campaign_metrics(sc: Scenario, trials: int, method: str = "auto") -> dict:
    res = simulate_attack_campaign(sc, trials, rngmod.RngStream(sc.seed), method)
    return {
        "trials": res.trials,
        "successes": res.successes,
        "success_rate": res.rate,
        "ci_low": res.ci_low,
        "ci_high": res.ci_high,
        "mean_success_time": res.mean_success_time,
        "analytic_rate": analytic_campaign_rate(sc),
    }


# --------------------------------------------------------------------- CSV

def format_value(v) -> str:
    """Fixed formatting so identical runs give identical bytes."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def _parse_value(s: str):
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


@dataclass
class CsvTable:
    columns: list
    rows: list

    def column(self, name: str) -> list:
        from .errors import UnknownColumn

        if name not in self.columns:
            raise UnknownColumn(f"unknown column {name!r}; have {', '.join(self.columns)}")
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def records(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([format_value(v) for v in r])
        return buf.getvalue()

    def write(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> CsvTable:
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            return cls([], [])
        return cls(header, [tuple(_parse_value(v) for v in row) for row in reader])

    @classmethod
    def read(cls, path) -> CsvTable:
        with open(path, encoding="utf-8", newline="") as fh:
            return cls.from_csv(fh.read())


def metrics_table(metrics: dict) -> CsvTable:
    return CsvTable(list(metrics), [tuple(metrics.values())])


# ------------------------------------------------------------------- sweeps

def _cell_job(args) -> tuple:
    index, doc, names, trials, method = args
    values = dict.fromkeys(names, None)
    error = ""
    try:
        rc = cfg.build(doc)
        sc = rc.scenario
        m = trace_metrics(sc, run_scenario(sc))
        if trials:
            m.update(campaign_metrics(sc, trials, method))
        for k in names:
            values[k] = m.get(k)
    except (ResetSimError, ValueError, ArithmeticError) as exc:
        error = f"{type(exc).__name__}: {exc}"
    return index, tuple(values[k] for k in names), error


def run_sweep(spec: cfg.SweepSpec, workers: int | None = None) -> CsvTable:
    """One scenario per cell; failing cells fill the ``error`` column."""
    workers = workers or spec.workers
    plant = spec.base["plant"]["type"]
    trials = spec.trials
    method = cfg.with_defaults(spec.base)["campaign"]["method"]
    names = metric_names(plant, spec.base.get("attacker") is not None, bool(trials))
    cells = list(spec.cells())
    jobs = [(c.index, c.document, names, trials, method) for c in cells]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell_job, jobs, chunksize=1))
    else:
        results = [_cell_job(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    params = spec.param_names
    columns = ["cell_index", *params, *names, "error"]
    rows = []
    for (index, values, error), cell in zip(results, cells):
        rows.append((index, *(cell.params[p] for p in params), *values, error))
    return CsvTable(columns, rows)


def run_single(rc: cfg.RunConfig):
    """Simulate one configured scenario; returns (trace, metrics dict)."""
    trace = run_scenario(rc.scenario)
    return trace, trace_metrics(rc.scenario, trace)
