"""Diversification strategies, attacker models and Monte-Carlo campaigns."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from . import rng as rngmod
from .controller import (
    ERASE_LATENCY,
    PROGRAM_LATENCY,
    FlashOp,
    SectorState,
    flash_begin,
    flash_holds,
)

_EPS = 1e-9


# ------------------------------------------------------------ diversification

@dataclass(frozen=True)
class PathRandomization:
    """Execution-path randomisation keyed by a per-epoch secret."""

    secret_bits: int = 32
    slowdown: float = 2.13
    invalidates = True

    def __post_init__(self):
        if self.slowdown < 1:
            raise ValueError("slowdown must be >= 1")
        if not 1 <= self.secret_bits <= 32:
            raise ValueError("secret_bits must be within 1..32")


@dataclass(frozen=True)
class CanaryRekey:
    """Fresh stack canary on every reset."""

    secret_bits: int = 32
    slowdown: float = 1.0
    invalidates = True

    def __post_init__(self):
        if self.slowdown < 1:
            raise ValueError("slowdown must be >= 1")
        if not 1 <= self.secret_bits <= 32:
            raise ValueError("secret_bits must be within 1..32")


@dataclass(frozen=True)
class NoDiversification:
    slowdown: float = 1.0
    invalidates = False


DiversificationStrategy = Union[PathRandomization, CanaryRekey, NoDiversification]


def diversify(strategy: DiversificationStrategy, state, rng):
    """Start a new epoch: new secret (unless strategy is None) and slowdown."""
    if strategy.invalidates:
        secret = rng.bits32()
        if strategy.secret_bits < 32:
            secret &= (1 << strategy.secret_bits) - 1
        state.secret = secret
    state.epoch += 1
    state.slowdown = strategy.slowdown
    return state


# ------------------------------------------------------------ attacker models

@dataclass(frozen=True)
class Disclosure:
    """Needs ``T_collect`` seconds of harvesting before it can succeed."""

    T_collect: float

    def __post_init__(self):
        if not self.T_collect > 0:
            raise ValueError("T_collect must be > 0")


@dataclass(frozen=True)
class Guessing:
    """Exhaustive search over ``N`` candidates at ``rate`` guesses/s."""

    rate: float
    N: int

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be > 0")
        if self.N < 1:
            raise ValueError("N must be >= 1")


@dataclass(frozen=True)
class FlashPersist:
    """Rootkit that erases then programs one flash sector."""

    sector: int = 0
    payload: bytes = b"\x00\x00\x04\x00persist"

    @property
    def persist_time(self) -> float:
        return ERASE_LATENCY + PROGRAM_LATENCY


@dataclass(frozen=True)
class DefeatDevice:
    """Accumulates ``T_accum`` seconds of observations in RAM before acting."""

    T_accum: float

    def __post_init__(self):
        if not self.T_accum > 0:
            raise ValueError("T_accum must be > 0")


AttackerModel = Union[Disclosure, Guessing, FlashPersist, DefeatDevice]

MODEL_CODE = {Disclosure: 0, Guessing: 1, FlashPersist: 2, DefeatDevice: 3}


@dataclass
class AttackerState:
    up_ticks: int = 0              # controller uptime this epoch (or overall, undiversified)
    target: Optional[float] = None # guessing: position of the secret in the search order
    stage: str = "idle"            # flash: idle | erasing | programming
    accumulator_ticks: int = 0
    draws: int = 0
    resets_seen: int = 0
    succeeded: bool = False
    success_time: Optional[float] = None
    epochs_survived: int = 0

    def progress(self, model, dt: float) -> float:
        if isinstance(model, DefeatDevice):
            return self.accumulator_ticks * dt
        return self.up_ticks * dt

    def guesses(self, model, dt: float) -> int:
        if isinstance(model, Guessing):
            return math.floor(self.up_ticks * dt * model.rate + _EPS)
        return 0


@dataclass(frozen=True)
class AttackOutcome:
    succeeded: bool
    success_time: Optional[float]
    epochs_survived: int


def attacker_on_reset(model: AttackerModel, st: AttackerState, invalidated: bool, at_start: bool = False):
    """Reset bookkeeping; epoch-scoped progress is dropped when diversified.

    Flash operations and the defeat-device accumulator never survive a reset.
    """
    if not at_start and not st.succeeded:
        st.epochs_survived += 1
    st.resets_seen += 1
    if invalidated:
        st.up_ticks = 0
        st.target = None
    st.stage = "idle"
    st.accumulator_ticks = 0
    return st


def _succeed(st: AttackerState, when: float):
    st.succeeded = True
    st.success_time = when


def attacker_step(model: AttackerModel, st: AttackerState, controller, down: bool,
                  now: float, dt: float, rng) -> AttackerState:
    """One step of attacker activity; nothing happens while the controller is Down."""
    if st.succeeded or down:
        return st
    st.up_ticks += 1
    st.accumulator_ticks += 1
    end = now + dt
    if isinstance(model, Disclosure):
        if st.up_ticks * dt >= model.T_collect - _EPS:
            _succeed(st, end)
    elif isinstance(model, Guessing):
        if st.target is None:
            st.target = float(rng.random()) * model.N
            st.draws += 1
        if st.up_ticks * dt * model.rate >= st.target:
            _succeed(st, end)
    elif isinstance(model, DefeatDevice):
        if st.accumulator_ticks * dt >= model.T_accum - _EPS:
            _succeed(st, end)
    elif isinstance(model, FlashPersist):
        sec = controller.flash.sectors[model.sector]
        if st.stage == "idle" and not sec.busy:
            flash_begin(controller, model.sector, FlashOp.ERASE)
            st.stage = "erasing"
        elif (st.stage == "erasing" and sec.state is SectorState.VALID
              and sec.erased_epoch == controller.epoch):
            flash_begin(controller, model.sector, FlashOp.PROGRAM, model.payload)
            st.stage = "programming"
    return st


def attacker_observe_flash(model: AttackerModel, st: AttackerState, controller, now: float, dt: float):
    """Check for completed persistence after the flash hardware advanced."""
    if (isinstance(model, FlashPersist) and not st.succeeded and st.stage == "programming"
            and flash_holds(controller, model.sector, model.payload)):
        _succeed(st, now + dt)
    return st


# -------------------------------------------------------------- closed forms

def success_prob_deterministic(t_epoch: float, T_collect: float) -> float:
    if t_epoch < 0 or T_collect < 0:
        raise ValueError("inputs must be >= 0")
    return 1.0 if t_epoch >= T_collect else 0.0


def success_prob_probabilistic(t_epoch: float, rate: float, N: int) -> float:
    if t_epoch < 0 or rate < 0:
        raise ValueError("inputs must be >= 0")
    if N < 1:
        raise ValueError("N must be >= 1")
    return min(1.0, rate * t_epoch / N)


def epoch_success_prob(model: AttackerModel, uptime: float) -> float:
    if isinstance(model, Disclosure):
        return success_prob_deterministic(uptime, model.T_collect)
    if isinstance(model, Guessing):
        return success_prob_probabilistic(uptime, model.rate, model.N)
    if isinstance(model, FlashPersist):
        return success_prob_deterministic(uptime, model.persist_time)
    if isinstance(model, DefeatDevice):
        return success_prob_deterministic(uptime, model.T_accum)
    raise TypeError(f"unknown attacker model {model!r}")


def campaign_success_prob(u: float, k: int, model: AttackerModel, diversified: bool) -> float:
    """Probability of success within ``k`` epochs of ``u`` seconds uptime each.

    Diversified epochs are independent trials.  Without diversification,
    disclosure and guessing progress carries over, so the attacker
    effectively has ``k*u`` seconds; flash writes and the defeat-device
    accumulator are cleared by every reset either way.
    """
    if u < 0:
        raise ValueError("u must be >= 0")
    if k < 1:
        raise ValueError("k must be >= 1")
    carries = isinstance(model, (Disclosure, Guessing))
    if diversified or not carries:
        p = epoch_success_prob(model, u)
        return 1.0 - (1.0 - p) ** k
    return epoch_success_prob(model, k * u)


def uptime_windows(reset_times, d_R: float, horizon: float) -> list[float]:
    """Uninterrupted controller uptime between consecutive resets."""
    times = [t for t in sorted(reset_times) if t < horizon]
    if not times:
        return [horizon]
    windows = []
    if times[0] > 0:
        windows.append(times[0])
    for a, b in zip(times, times[1:] + [horizon]):
        windows.append(max(0.0, b - a - d_R))
    return windows


def defeat_device_triggered(reset_times, d_R: float, T_accum: float, horizon: float) -> bool:
    """Does some inter-reset window give the accumulator ``T_accum`` seconds?"""
    if not T_accum > 0:
        raise ValueError("T_accum must be > 0")
    return max(uptime_windows(reset_times, d_R, horizon)) >= T_accum - _EPS


def flash_persistence_possible(reset_times, d_R: float, horizon: float,
                               persist_time: float = ERASE_LATENCY + PROGRAM_LATENCY) -> bool:
    return max(uptime_windows(reset_times, d_R, horizon)) >= persist_time - _EPS


# ---------------------------------------------------------------- campaigns

def binomial_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval."""
    if trials <= 0:
        raise ValueError("trials must be >= 1")
    z = statistics.NormalDist().inv_cdf(0.5 + confidence / 2.0)
    p = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class CampaignResult:
    trials: int
    successes: int
    rate: float
    ci_low: float
    ci_high: float
    mean_success_time: float
    mean_epochs_survived: float
    method: str
    outcomes: tuple = ()

    def as_row(self) -> dict:
        return {
            "trials": self.trials,
            "successes": self.successes,
            "rate": self.rate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "mean_success_time": self.mean_success_time,
            "mean_epochs_survived": self.mean_epochs_survived,
            "method": self.method,
        }


def _summarise(outcomes, method: str) -> CampaignResult:
    n = len(outcomes)
    wins = [o for o in outcomes if o.succeeded]
    lo, hi = binomial_interval(len(wins), n)
    mean_t = float(np.mean([o.success_time for o in wins])) if wins else math.nan
    return CampaignResult(
        trials=n,
        successes=len(wins),
        rate=len(wins) / n,
        ci_low=lo,
        ci_high=hi,
        mean_success_time=mean_t,
        mean_epochs_survived=float(np.mean([o.epochs_survived for o in outcomes])),
        method=method,
        outcomes=tuple(outcomes),
    )


def trial_seeds(rng: rngmod.RngStream, trials: int) -> list[int]:
    return [rngmod.derive_seed(rng.seed, *rng.path, rngmod.TRIALS, i) for i in range(trials)]


def kernel_supported(scenario) -> bool:
    from .scheduler import Adaptive

    if isinstance(scenario.scheduler, Adaptive) or scenario.attacker is None:
        return False
    if isinstance(scenario.attacker, FlashPersist):
        return scenario.attacker.sector not in scenario.controller.whitelist
    return True


def simulate_attack_campaign(scenario, trials: int, rng=None, method: str = "auto") -> CampaignResult:
    """Run ``trials`` independently seeded copies of ``scenario``.

    ``method="full"`` runs the complete co-simulation per trial.
    ``method="kernel"`` runs only scheduler, controller lifecycle and
    attacker in the compiled campaign kernel; it consumes the same random
    streams in the same order, so both methods agree trial by trial.
    ``"auto"`` picks the kernel whenever the schedule does not depend on
    the plant.
    """
    from . import kernels
    from .sim import run_scenario

    if trials < 1:
        raise ValueError("trials must be >= 1")
    if scenario.attacker is None:
        raise ValueError("campaign scenario needs an attacker")
    if rng is None:
        rng = rngmod.RngStream(scenario.seed)
    seeds = trial_seeds(rng, trials)
    if method == "auto":
        method = "kernel" if kernel_supported(scenario) else "full"
    if method == "full":
        outcomes = [run_scenario(replace(scenario, seed=s)).attack_outcome for s in seeds]
    elif method == "kernel":
        if not kernel_supported(scenario):
            raise ValueError("campaign kernel needs a periodic or random schedule")
        outcomes = kernels.run_campaign(scenario, seeds)
    else:
        raise ValueError(f"unknown campaign method {method!r}")
    return _summarise(outcomes, method)


__all__ = [
    "PathRandomization", "CanaryRekey", "NoDiversification", "diversify",
    "Disclosure", "Guessing", "FlashPersist", "DefeatDevice",
    "AttackerState", "AttackOutcome", "attacker_step", "attacker_on_reset",
    "attacker_observe_flash", "success_prob_deterministic", "success_prob_probabilistic",
    "campaign_success_prob", "defeat_device_triggered", "uptime_windows",
    "simulate_attack_campaign", "CampaignResult", "binomial_interval",
    "trial_seeds", "kernel_supported", "epoch_success_prob", "flash_persistence_possible",
    "MODEL_CODE", "AttackerModel", "DiversificationStrategy",
]
