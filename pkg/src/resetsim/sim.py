"""Fixed-step lockstep co-simulation.

Each step runs, in order: scheduler (may fire a reset), controller tick,
attacker, flash hardware, plant integration.  The trace row for step ``k``
holds the plant state at ``t = k*dt`` together with what every subsystem did
during ``[t, t+dt)``.
"""

from __future__ import annotations

import io
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import rng as rngmod
from .controller import (
    Down,
    FlashModel,
    PowerCycle,
    ResetStrategy,
    SnapshotRestore,
    Stable,
    PHASE_CODE,
    apply_reset,
    flash_advance,
    new_controller,
    snapshot_capture,
    stabilization_time,
    tick_controller,
)
from .errors import DeadlineViolation, InvalidScenario, NumericalDivergence
from .plants import (
    BrakeParams,
    EngineParams,
    QuadParams,
    WindProfile,
    WindState,
    brake_initial,
    brake_step,
    engine_initial,
    engine_step,
    pooled_rate_std,
    quad_initial,
    quad_step,
)
from .scheduler import Adaptive, Periodic, Random, ResetMode, next_interval_ticks
from .security import (
    AttackerModel,
    AttackerState,
    AttackOutcome,
    DiversificationStrategy,
    NoDiversification,
    attacker_observe_flash,
    attacker_on_reset,
    attacker_step,
    diversify,
)

DEFAULT_DT = 0.0005
MAX_DT = 0.001

PLANT_TYPES = {"engine": EngineParams, "quad": QuadParams, "brake": BrakeParams}

COMMON_COLUMNS = ("t", "phase", "reset", "epoch", "cmd_fresh", "attack_progress",
                  "attack_success", "sched_metric", "next_interval")
PLANT_COLUMNS = {
    "engine": ("omega", "rpm", "crank_angle", "stalled", "ignition"),
    "quad": ("roll", "pitch", "yaw", "p", "q", "r", "m1", "m2", "m3", "m4",
             "wind_roll", "wind_pitch", "wind_yaw"),
    "brake": ("speed", "distance", "braking"),
}
INT_COLUMNS = {"phase", "reset", "epoch", "cmd_fresh", "attack_success", "stalled", "ignition", "braking"}


@dataclass
class SimClock:
    dt: float = DEFAULT_DT
    step: int = 0

    def __post_init__(self):
        if not 0 < self.dt <= MAX_DT:
            raise InvalidScenario(f"dt must be in (0, {MAX_DT}] s, got {self.dt}")

    @property
    def now(self) -> float:
        return self.step * self.dt

    def advance(self):
        self.step += 1


@dataclass(frozen=True)
class ControllerConfig:
    strategy: ResetStrategy = PowerCycle(0.020)
    nominal_latency: Optional[float] = None
    control_period: Optional[float] = None
    ram_size: int = 4096
    flash_sectors: int = 4
    sector_size: int = 16 * 1024
    whitelist: frozenset = frozenset()
    setpoint: object = None


@dataclass(frozen=True)
class Scenario:
    plant: str
    plant_params: Union[EngineParams, QuadParams, BrakeParams, None] = None
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    scheduler: Optional[ResetMode] = None
    diversification: DiversificationStrategy = field(default_factory=NoDiversification)
    attacker: Optional[AttackerModel] = None
    wind: WindProfile = field(default_factory=WindProfile)
    horizon: float = 10.0
    seed: int = 1
    dt: float = DEFAULT_DT
    warmup: float = 2.0

    def __post_init__(self):
        if self.plant_params is None and self.plant in PLANT_TYPES:
            object.__setattr__(self, "plant_params", PLANT_TYPES[self.plant]())

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def d_R(self) -> float:
        return self.controller.strategy.d_R

    def validate(self) -> Scenario:
        """Raise :class:`InvalidScenario` naming the first failed constraint."""
        if self.plant not in PLANT_TYPES:
            raise InvalidScenario(f"plant must be one of {sorted(PLANT_TYPES)}, got {self.plant!r}")
        if not isinstance(self.plant_params, PLANT_TYPES[self.plant]):
            raise InvalidScenario(f"plant_params for {self.plant!r} must be {PLANT_TYPES[self.plant].__name__}")
        SimClock(self.dt)
        if not self.horizon > 0:
            raise InvalidScenario("horizon must be > 0")
        if not 0 <= self.seed < 2**64:
            raise InvalidScenario("seed must be a 64-bit unsigned integer")
        if self.warmup < 0:
            raise InvalidScenario("warmup must be >= 0")
        mode = self.scheduler
        if mode is not None:
            if self.horizon + 1e-9 < mode.max_interval:
                raise InvalidScenario(
                    f"horizon {self.horizon} shorter than one reset interval ({mode.max_interval})")
            if self.d_R >= mode.min_interval:
                raise InvalidScenario(
                    f"d_R={self.d_R} must be shorter than the reset interval ({mode.min_interval})")
            if isinstance(mode, Periodic) and not _is_multiple(mode.T_R, self.dt):
                raise InvalidScenario(f"periodic T_R={mode.T_R} is not a multiple of dt={self.dt}")
        period = self.controller.control_period
        if period is not None and not _is_multiple(period, self.dt):
            raise InvalidScenario(f"control period {period} is not a multiple of dt={self.dt}")
        if self.plant == "quad" and not _is_multiple(1.0 / self.plant_params.estimator_rate, self.dt):
            raise InvalidScenario("estimator sample period is not a multiple of dt")
        if self.wind != WindProfile() and self.plant != "quad":
            raise InvalidScenario("wind applies to the quad plant only")
        if isinstance(self.attacker, object) and self.attacker is not None:
            sector = getattr(self.attacker, "sector", None)
            if sector is not None and not 0 <= sector < self.controller.flash_sectors:
                raise InvalidScenario(f"attacker targets missing flash sector {sector}")
        ctrl = _build_controller(self)
        ctrl.slowdown = self.diversification.slowdown
        try:
            ctrl.check_deadline()
        except DeadlineViolation as exc:
            raise InvalidScenario(str(exc)) from None
        return self


def _is_multiple(x: float, dt: float) -> bool:
    q = x / dt
    return abs(q - round(q)) < 1e-6 and round(q) >= 1


def _build_controller(sc: Scenario):
    cfg = sc.controller
    flash = FlashModel.blank(cfg.flash_sectors, cfg.sector_size, whitelist=frozenset(cfg.whitelist))
    return new_controller(sc.plant, sc.plant_params, sc.dt, control_period=cfg.control_period,
                          nominal_latency=cfg.nominal_latency, ram_size=cfg.ram_size,
                          flash=flash, setpoint=cfg.setpoint,
                          persisted={"sensor_calibration": 1.0, "waypoints": ()})


class TraceLog:
    """Column store with one row per simulation step."""

    def __init__(self, columns: dict, dt: float, plant: str, reset_times=(), attack_outcome=None):
        self.columns = columns
        self.dt = dt
        self.plant = plant
        self.reset_times = list(reset_times)
        self.attack_outcome = attack_outcome

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    def __len__(self) -> int:
        return len(self.columns["t"])

    @property
    def names(self) -> list:
        return list(self.columns)

    @property
    def horizon(self) -> float:
        return len(self) * self.dt

    def window(self, start: float, stop: float = math.inf) -> TraceLog:
        t = self.columns["t"]
        mask = (t >= start - 1e-12) & (t < stop - 1e-12)
        return TraceLog({k: v[mask] for k, v in self.columns.items()}, self.dt, self.plant,
                        [r for r in self.reset_times if start - 1e-12 <= r < stop - 1e-12],
                        self.attack_outcome)

    def write_csv(self, fh):
        names = self.names
        fh.write(",".join(names) + "\n")
        cols = []
        for n in names:
            arr = self.columns[n]
            if n in INT_COLUMNS:
                cols.append([str(int(v)) for v in arr])
            else:
                cols.append([format(float(v), ".17g") for v in arr])
        for row in zip(*cols):
            fh.write(",".join(row) + "\n")

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    def equals(self, other: TraceLog) -> bool:
        if self.names != other.names or len(self) != len(other):
            return False
        return all(np.array_equal(self[n], other[n], equal_nan=True) for n in self.names)


class World:
    """Mutable state of one running scenario."""

    def __init__(self, scenario: Scenario):
        sc = scenario.validate()
        self.scenario = sc
        self.clock = SimClock(sc.dt)
        root = rngmod.RngStream(sc.seed)
        self.rng = root
        self.rng_sched = root.split(rngmod.SCHEDULER)
        self.rng_div = root.split(rngmod.DIVERSIFIER)
        self.rng_attack = root.split(rngmod.ATTACKER)
        self.wind = WindState(sc.wind, sc.dt, root.split(rngmod.WIND)) if sc.plant == "quad" else None

        self.controller = _build_controller(sc)
        strategy = sc.controller.strategy
        if isinstance(strategy, SnapshotRestore) and strategy.snapshot is None:
            # Captured once, before any attacker exists.
            strategy = SnapshotRestore(strategy.d_R, snapshot_capture(self.controller, attacker_enabled=False))
        self.strategy = strategy

        p = sc.plant_params
        if sc.plant == "engine":
            self.plant = engine_initial(p)
            self.actuation = True
        elif sc.plant == "quad":
            self.plant = quad_initial(p)
            self.actuation = self.plant.motors
        else:
            self.plant = brake_initial(p)
            self.actuation = True

        self.attacker = AttackerState() if sc.attacker is not None else None
        self.next_reset = 0 if sc.scheduler is not None else -1
        self.reset_times = []
        window = sc.scheduler.window if isinstance(sc.scheduler, Adaptive) else 0.0
        self.metric_buf = deque(maxlen=max(2, int(round(window / sc.dt)))) if window else None

    def _diversify(self, state, rng):
        return diversify(self.scenario.diversification, state, rng)

    def _metric(self) -> float:
        buf = self.metric_buf
        if buf is None or len(buf) < 2:
            return 0.0
        cols = list(zip(*buf))
        if len(cols) == 3:
            return pooled_rate_std(*cols)
        return float(np.std(cols[0]))

    def _metric_sample(self):
        kind = self.scenario.plant
        if kind == "quad":
            return self.plant.rates
        if kind == "engine":
            return (self.plant.omega / self.scenario.plant_params.nominal_omega,)
        return (self.plant.speed,)


def step_world(world: World) -> tuple:
    """Advance ``world`` by one step in place; return the trace row."""
    sc = world.scenario
    dt = sc.dt
    k = world.clock.step
    t = k * dt
    ctrl = world.controller

    # 1. scheduler
    reset = 0
    metric = math.nan
    interval = math.nan
    if k == world.next_reset:
        metric = world._metric()
        apply_reset(ctrl, world.strategy, world._diversify, world.rng_div)
        if world.attacker is not None:
            attacker_on_reset(sc.attacker, world.attacker, sc.diversification.invalidates, at_start=(k == 0))
        ticks = next_interval_ticks(sc.scheduler, k, dt, world.rng_sched, metric)
        world.next_reset = k + ticks
        interval = ticks * dt
        world.reset_times.append(t)
        reset = 1
    phase = ctrl.phase
    down = isinstance(phase, Down)

    # 2. controller
    obs = world.plant
    _, cmd = tick_controller(ctrl, obs, t)
    if cmd is not None:
        act = cmd.motors if sc.plant == "quad" else cmd
    elif isinstance(phase, Stable):
        act = world.actuation
    elif sc.plant == "quad":
        act = world.actuation  # ESCs latch the last command
    else:
        act = False            # missed ignition / brake released
    world.actuation = act

    # 3. attacker, then flash hardware
    att = world.attacker
    if att is not None:
        attacker_step(sc.attacker, att, ctrl, down, t, dt, world.rng_attack)
    flash_advance(ctrl, dt)
    if att is not None:
        attacker_observe_flash(sc.attacker, att, ctrl, t, dt)
        progress = att.progress(sc.attacker, dt)
        success = 1 if att.succeeded else 0
    else:
        progress = 0.0
        success = 0

    # 4. plant
    p = sc.plant_params
    if sc.plant == "engine":
        world.plant = engine_step(obs, act, dt, p)
        plant_row = (obs.omega, obs.rpm, obs.angle, int(obs.stalled), int(act))
        finite = math.isfinite(world.plant.omega)
    elif sc.plant == "quad":
        wind = world.wind.sample(t)
        world.plant = quad_step(obs, act, wind, dt, p)
        plant_row = obs.angles + obs.rates + obs.motors + wind
        finite = all(math.isfinite(v) for v in world.plant.rates + world.plant.angles)
    else:
        world.plant = brake_step(obs, act, dt, p)
        plant_row = (obs.speed, obs.distance, int(act))
        finite = math.isfinite(world.plant.speed)
    if not finite:
        raise NumericalDivergence(f"{sc.plant} state became non-finite at t={t + dt:.6f}s")
    if world.metric_buf is not None:
        world.metric_buf.append(world._metric_sample())

    world.clock.advance()
    return (t, PHASE_CODE[type(phase)], reset, ctrl.epoch, int(cmd is not None), progress,
            success, metric, interval) + tuple(plant_row)


def run_scenario(scenario: Scenario) -> TraceLog:
    """Simulate ``[0, horizon)``; the result depends only on the scenario."""
    world = World(scenario)
    n = scenario.n_steps
    names = COMMON_COLUMNS + PLANT_COLUMNS[scenario.plant]
    rows = [step_world(world) for _ in range(n)]
    data = np.array(rows, dtype=np.float64).reshape(n, len(names))
    columns = {}
    for i, name in enumerate(names):
        col = data[:, i]
        columns[name] = col.astype(np.int64) if name in INT_COLUMNS else col.copy()
    outcome = None
    if world.attacker is not None:
        a = world.attacker
        outcome = AttackOutcome(a.succeeded, a.success_time, a.epochs_survived)
    trace = TraceLog(columns, scenario.dt, scenario.plant, world.reset_times, outcome)
    trace.controller = world.controller
    return trace


def scenario_d_S(scenario: Scenario) -> float:
    return stabilization_time(scenario.plant, scenario.plant_params)
