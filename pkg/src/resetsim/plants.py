"""Plant dynamics for the engine, quadcopter and braking vehicle.

All three use explicit Euler on a fixed step.  Step functions are pure:
they return a new state tuple and never mutate their input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidWindow, Stalled

RPM = 2.0 * math.pi / 60.0  # rad/s per RPM


# --------------------------------------------------------------------- engine

@dataclass(frozen=True)
class EngineParams:
    """Single-inertia crankshaft with viscous and Coulomb friction.

    Defaults give a 2 s spin-down time constant (``J/b``) and an ignition
    torque with a 4x speed reserve over nominal: the open-loop equilibrium
    is ~18,000 RPM and the ECU's speed governor holds 4,500 RPM by skipping
    ignition.  The reserve is what lets the engine make up for missed
    ignition events after a reset.
    """

    J: float = 0.05              # kg m^2
    tau_ign: float = 48.12389    # N m
    b: float = 0.025             # N m s
    tau_c: float = 1.0           # N m
    nominal_rpm: float = 4500.0
    stall_rpm: float = 600.0

    def __post_init__(self):
        if self.J <= 0 or self.b < 0 or self.tau_c < 0 or self.tau_ign < 0:
            raise ValueError("engine parameters must be positive")
        if not 0 <= self.stall_rpm < self.nominal_rpm:
            raise ValueError("stall_rpm must lie below nominal_rpm")

    @property
    def nominal_omega(self) -> float:
        return self.nominal_rpm * RPM

    @property
    def stall_omega(self) -> float:
        return self.stall_rpm * RPM

    @property
    def equilibrium_omega(self) -> float:
        """Steady speed with ignition permanently on."""
        return max(0.0, (self.tau_ign - self.tau_c) / self.b)

    @property
    def cycle_period(self) -> float:
        """Seconds per engine cycle at nominal speed (one revolution)."""
        return 60.0 / self.nominal_rpm

    @classmethod
    def calibrated(cls, *, equilibrium_rpm: float, spin_down: float = 2.0, J: float = 0.05,
                   tau_c: float = 1.0, nominal_rpm: float = 4500.0, stall_rpm: float = 600.0) -> EngineParams:
        """Solve for ``b`` and ``tau_ign`` from a time constant and an equilibrium speed."""
        b = J / spin_down
        tau_ign = b * equilibrium_rpm * RPM + tau_c
        return cls(J=J, tau_ign=tau_ign, b=b, tau_c=tau_c, nominal_rpm=nominal_rpm, stall_rpm=stall_rpm)


class EngineState(NamedTuple):
    omega: float            # rad/s
    angle: float = 0.0      # unwrapped crank angle, rad
    stalled: bool = False

    @property
    def rpm(self) -> float:
        return self.omega / RPM

    @property
    def cycles(self) -> int:
        return int(self.angle // (2.0 * math.pi))


def engine_initial(params: EngineParams) -> EngineState:
    return EngineState(omega=params.nominal_omega)


def engine_step(state: EngineState, ignition_active: bool, dt: float, params: EngineParams) -> EngineState:
    omega = state.omega
    drive = params.tau_ign if (ignition_active and not state.stalled) else 0.0
    friction = params.b * omega + (params.tau_c if omega > 0.0 else 0.0)
    new_omega = omega + (drive - friction) / params.J * dt
    if new_omega < 0.0:
        new_omega = 0.0
    stalled = state.stalled or new_omega < params.stall_omega
    return EngineState(new_omega, state.angle + omega * dt, stalled)


def engine_speed_ratio(trace, nominal_rpm: float, warmup: float = 2.0) -> float:
    """Mean engine speed after ``warmup`` as a percentage of nominal.

    Raises :class:`Stalled` instead of reporting 0%.
    """
    stalled = trace["stalled"]
    if stalled.any():
        raise Stalled(float(trace["t"][int(np.argmax(stalled))]))
    mask = trace["t"] >= warmup - 1e-12
    if not mask.any():
        raise ValueError("trace shorter than the warm-up window")
    return 100.0 * float(np.mean(trace["rpm"][mask])) / nominal_rpm


# ------------------------------------------------------------------ quadcopter

AXES = ("roll", "pitch", "yaw")

# Motor sign matrix for an X-frame: rows are motors, columns roll/pitch/yaw.
# Columns are orthogonal and sum to zero, so hover thrust is torque free.
MIX = ((-1.0, 1.0, 1.0),
       (1.0, -1.0, 1.0),
       (1.0, 1.0, -1.0),
       (-1.0, -1.0, -1.0))


@dataclass(frozen=True)
class QuadParams:
    """Three decoupled rotational axes driven by a four-motor mixer."""

    inertia: tuple = (0.0082, 0.0082, 0.0149)     # kg m^2
    kp: tuple = (0.8, 0.8, 0.4)                   # N m / rad
    kd: tuple = (0.04, 0.04, 0.04)                # N m s / rad
    motor_gain: tuple = (0.5, 0.5, 0.06)          # N m per unit command per motor
    hover: float = 0.5
    estimator_rate: float = 250.0                 # Hz
    n_est: int = 50

    def __post_init__(self):
        for name in ("inertia", "kp", "kd", "motor_gain"):
            if len(getattr(self, name)) != 3:
                raise ValueError(f"{name} needs three entries")
        if min(self.inertia) <= 0:
            raise ValueError("inertia must be positive")
        if not 0.0 <= self.hover <= 1.0:
            raise ValueError("hover command must be within [0, 1]")

    @property
    def max_torque(self) -> tuple:
        # With hover h each axis can use the full mixer span min(h, 1-h).
        span = min(self.hover, 1.0 - self.hover)
        return tuple(4.0 * g * span for g in self.motor_gain)


class QuadState(NamedTuple):
    angles: tuple = (0.0, 0.0, 0.0)
    rates: tuple = (0.0, 0.0, 0.0)
    motors: tuple = (0.5, 0.5, 0.5, 0.5)


def quad_initial(params: QuadParams) -> QuadState:
    return QuadState(motors=(params.hover,) * 4)


def mix_motors(torque, params: QuadParams) -> tuple:
    """Map axis torque demands to saturated motor commands."""
    u = [torque[a] / (4.0 * params.motor_gain[a]) for a in range(3)]
    out = []
    for signs in MIX:
        m = params.hover + signs[0] * u[0] + signs[1] * u[1] + signs[2] * u[2]
        out.append(0.0 if m < 0.0 else 1.0 if m > 1.0 else m)
    return tuple(out)


def motor_torque(motors, params: QuadParams) -> tuple:
    return tuple(
        params.motor_gain[a] * sum(MIX[i][a] * motors[i] for i in range(4))
        for a in range(3)
    )


def quad_step(state: QuadState, motors, wind, dt: float, params: QuadParams) -> QuadState:
    """Advance attitude one step under latched motor commands and wind torque."""
    motors = tuple(0.0 if m < 0.0 else 1.0 if m > 1.0 else m for m in motors)
    tq = motor_torque(motors, params)
    angles = []
    rates = []
    for a in range(3):
        w = state.rates[a]
        angles.append(state.angles[a] + w * dt)
        rates.append(w + (tq[a] + wind[a]) / params.inertia[a] * dt)
    return QuadState(tuple(angles), tuple(rates), motors)


@dataclass(frozen=True)
class WindProfile:
    """Piecewise-constant mean torque plus seeded Ornstein-Uhlenbeck gusts.

    ``segments`` holds ``(t_start, (roll, pitch, yaw))`` pairs sorted by
    time; the mean before the first segment is zero.  ``turbulence_*``
    describe a second, fast OU term for background airframe buffeting.
    """

    segments: tuple = ()
    gust_sigma: float = 0.0
    gust_tau: float = 0.5
    gust_start: float = 0.0
    turbulence_sigma: float = 0.0
    turbulence_tau: float = 0.02

    def mean_at(self, t: float) -> tuple:
        mean = (0.0, 0.0, 0.0)
        for start, torque in self.segments:
            if t + 1e-12 >= start:
                mean = tuple(torque)
            else:
                break
        return mean

    @property
    def calm(self) -> bool:
        return not self.segments and self.gust_sigma == 0.0 and self.turbulence_sigma == 0.0


class WindState:
    """OU disturbance generator; normals are drawn from ``rng`` in blocks."""

    BLOCK = 2048

    def __init__(self, profile: WindProfile, dt: float, rng):
        self.profile = profile
        self.dt = dt
        self.rng = rng
        self.gust = [0.0, 0.0, 0.0]
        self.turb = [0.0, 0.0, 0.0]
        self._a_g = math.exp(-dt / profile.gust_tau) if profile.gust_tau > 0 else 0.0
        self._s_g = profile.gust_sigma * math.sqrt(1.0 - self._a_g ** 2)
        self._a_t = math.exp(-dt / profile.turbulence_tau) if profile.turbulence_tau > 0 else 0.0
        self._s_t = profile.turbulence_sigma * math.sqrt(1.0 - self._a_t ** 2)
        self._buf = None
        self._i = 0

    def _normals(self):
        if self._buf is None or self._i >= len(self._buf):
            self._buf = self.rng.normal((self.BLOCK, 6)).tolist()
            self._i = 0
        row = self._buf[self._i]
        self._i += 1
        return row

    def sample(self, t: float) -> tuple:
        p = self.profile
        if p.calm:
            return (0.0, 0.0, 0.0)
        z = self._normals()
        gusting = t + 1e-12 >= p.gust_start
        for a in range(3):
            if gusting:
                self.gust[a] = self._a_g * self.gust[a] + self._s_g * z[a]
            self.turb[a] = self._a_t * self.turb[a] + self._s_t * z[3 + a]
        mean = p.mean_at(t)
        return tuple(mean[a] + self.gust[a] + self.turb[a] for a in range(3))


def pooled_rate_std(p, q, r) -> float:
    """Pooled standard deviation of the three body rates."""
    if len(p) < 2:
        return 0.0
    return math.sqrt((float(np.var(p)) + float(np.var(q)) + float(np.var(r))) / 3.0)


def attitude_rate_stddev(trace, warmup: float = 2.0) -> float:
    mask = trace["t"] >= warmup - 1e-12
    return pooled_rate_std(trace["p"][mask], trace["q"][mask], trace["r"][mask])


# ---------------------------------------------------------------------- brake

@dataclass(frozen=True)
class BrakeParams:
    a_brake: float = 8.0   # m/s^2
    a_coast: float = 0.0   # m/s^2
    v0: float = 30.0       # m/s

    def __post_init__(self):
        if self.a_brake <= 0 or self.a_coast < 0 or self.v0 < 0:
            raise ValueError("brake parameters must be non-negative, a_brake > 0")


class BrakeState(NamedTuple):
    speed: float
    distance: float = 0.0


def brake_initial(params: BrakeParams) -> BrakeState:
    return BrakeState(params.v0)


def brake_step(state: BrakeState, braking_active: bool, dt: float, params: BrakeParams) -> BrakeState:
    decel = params.a_brake if braking_active else params.a_coast
    v0 = state.speed
    if decel > 0.0 and v0 <= decel * dt + 1e-9:
        # Comes to rest inside this step.
        return BrakeState(0.0, state.distance + v0 * v0 / (2.0 * decel))
    v = v0 - decel * dt
    return BrakeState(v, state.distance + 0.5 * (v0 + v) * dt)


def effective_deceleration(a_brake: float, a_coast: float, T_R: float, d_R: float) -> float:
    """Duty-cycle average deceleration with the brake released during downtime."""
    if not 0 <= d_R < T_R:
        raise InvalidWindow(f"need 0 <= d_R < T_R, got d_R={d_R}, T_R={T_R}")
    return a_brake * (T_R - d_R) / T_R + a_coast * d_R / T_R


def stopping_metrics(trace) -> tuple[float, float]:
    """(stop time, stop distance); stop time is NaN if the car never stops."""
    speed = trace["speed"]
    stopped = np.flatnonzero(speed <= 0.0)
    if stopped.size == 0:
        return math.nan, float(trace["distance"][-1])
    k = int(stopped[0])
    return float(trace["t"][k]), float(trace["distance"][k])
