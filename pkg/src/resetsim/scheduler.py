"""Reset scheduling: periodic, random and adaptive modes plus the safety calculus."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .errors import DegenerateInput, InvalidScenario

# Sums of decimal durations rarely land exactly on the interval they should
# equal; anything within a picosecond counts as equality.
_TIME_EPS = 1e-12


@dataclass(frozen=True)
class SafetyParams:
    T_R: float
    d_R: float
    d_S: float
    d_SS: float

    def __post_init__(self):
        for name in ("T_R", "d_R", "d_S", "d_SS"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def recovery_time(self) -> float:
        return self.d_R + self.d_S

    @property
    def ratio(self) -> float:
        return recovery_ratio(self)

    @property
    def satisfied(self) -> bool:
        return safety_condition(self.T_R, self.d_R, self.d_S, self.d_SS)

    @classmethod
    def from_interval(cls, T_R: float, d_R: float, d_S: float) -> SafetyParams:
        """Budget the whole remainder of the interval as stable time."""
        return cls(T_R, d_R, d_S, max(0.0, T_R - d_R - d_S))


def recovery_ratio(p: SafetyParams) -> float:
    """Stable time over recovery time, ``d_SS / (d_R + d_S)``."""
    denom = p.d_R + p.d_S
    if denom <= 0:
        raise DegenerateInput("recovery ratio undefined when d_R + d_S = 0")
    return p.d_SS / denom


def safety_condition(T_R: float, d_R: float, d_S: float, d_SS: float) -> bool:
    """True iff consecutive resets are at least ``d_R + d_S + d_SS`` apart."""
    if min(T_R, d_R, d_S, d_SS) < 0:
        raise ValueError("durations must be >= 0")
    return T_R + _TIME_EPS >= d_R + d_S + d_SS


@dataclass(frozen=True)
class Periodic:
    T_R: float

    def __post_init__(self):
        if not self.T_R > 0:
            raise InvalidScenario(f"periodic T_R must be > 0, got {self.T_R}")

    @property
    def min_interval(self) -> float:
        return self.T_R

    @property
    def max_interval(self) -> float:
        return self.T_R


@dataclass(frozen=True)
class Random:
    T_lo: float
    T_hi: float

    def __post_init__(self):
        if not (0 < self.T_lo <= self.T_hi):
            raise InvalidScenario(
                f"random mode needs 0 < T_lo <= T_hi, got T_lo={self.T_lo}, T_hi={self.T_hi}"
            )

    @property
    def min_interval(self) -> float:
        return self.T_lo

    @property
    def max_interval(self) -> float:
        return self.T_hi


@dataclass(frozen=True)
class Adaptive:
    T_min: float
    T_max: float
    window: float = 0.5
    threshold: float = 0.1

    def __post_init__(self):
        if not (0 < self.T_min <= self.T_max):
            raise InvalidScenario(
                f"adaptive mode needs 0 < T_min <= T_max, got T_min={self.T_min}, T_max={self.T_max}"
            )
        if not self.window > 0:
            raise InvalidScenario("adaptive metric window must be > 0")

    @property
    def min_interval(self) -> float:
        return self.T_min

    @property
    def max_interval(self) -> float:
        return self.T_max


ResetMode = Union[Periodic, Random, Adaptive]


def adaptive_update(recent_metric: float, threshold: float, T_min: float, T_max: float) -> float:
    """Bang-bang interval choice: disturbed plants are reset less often.

    A metric equal to the threshold counts as calm.
    """
    if T_min > T_max:
        raise ValueError("T_min must be <= T_max")
    return T_max if recent_metric > threshold else T_min


def next_reset_time(mode: ResetMode, now: float, last_reset: float, rng=None, metric: float = 0.0) -> float:
    if now < last_reset:
        raise ValueError("now must be >= last_reset")
    if isinstance(mode, Periodic):
        return last_reset + mode.T_R
    if isinstance(mode, Random):
        if mode.T_lo == mode.T_hi:
            return last_reset + mode.T_lo
        return last_reset + float(rng.uniform(mode.T_lo, mode.T_hi))
    if isinstance(mode, Adaptive):
        return last_reset + adaptive_update(metric, mode.threshold, mode.T_min, mode.T_max)
    raise TypeError(f"unknown reset mode {mode!r}")


def interval_ticks(interval: float, dt: float) -> int:
    """Whole steps covering ``interval``; never shorter than the interval."""
    return max(1, math.ceil(interval / dt - 1e-6))


def reset_ticks(mode: ResetMode | None, n_steps: int, dt: float, rng=None) -> list[int]:
    """Reset step indices in ``[0, n_steps)`` for plant-independent modes.

    Uses the same draw order and quantisation as the simulator, so a stream
    in the same state yields the same schedule.  Adaptive mode needs a live
    metric and is refused.
    """
    if mode is None:
        return []
    if isinstance(mode, Adaptive):
        raise ValueError("adaptive schedules depend on the plant; simulate them instead")
    ticks = []
    k = 0
    while k < n_steps:
        ticks.append(k)
        k += next_interval_ticks(mode, k, dt, rng)
    return ticks


def next_interval_ticks(mode: ResetMode, reset_tick: int, dt: float, rng=None, metric: float = 0.0) -> int:
    """Steps until the reset after the one at ``reset_tick``."""
    t = reset_tick * dt
    return interval_ticks(next_reset_time(mode, t, t, rng, metric) - t, dt)
