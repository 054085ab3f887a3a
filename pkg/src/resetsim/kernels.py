"""Compiled attack-campaign kernel.

A campaign only needs the reset schedule, the controller's Down windows and
the attacker state machine; the plant never influences them unless the
schedule is adaptive.  This module replays exactly that slice of the
co-simulation for many trials at once.

Two interchangeable implementations exist:

* ``campaign_numba``  - per-trial, per-step loop compiled with numba
* ``campaign_numpy``  - the same recurrence vectorised across trials

``run_campaign`` picks one according to :data:`resetsim._accel.USE_NUMBA`.
Both read pre-drawn random numbers taken from the per-trial streams in the
order the full simulator would draw them, so every trial reproduces the
corresponding :func:`resetsim.sim.run_scenario` outcome.
"""

from __future__ import annotations

import numpy as np

from . import _accel
from . import rng as rngmod
from .scheduler import reset_ticks
from .security import (
    AttackOutcome,
    DefeatDevice,
    Disclosure,
    FlashPersist,
    Guessing,
    MODEL_CODE,
)

_EPS = 1e-9


def countdown_ticks(duration: float, dt: float) -> int:
    """Steps a float countdown started at ``duration`` stays alive.

    Mirrors the controller and flash timers, which subtract ``dt`` each step
    and expire once the remainder drops to within 1e-9 of zero.
    """
    if duration <= 0:
        return 0
    remaining = duration
    n = 0
    while True:
        n += 1
        remaining -= dt
        if remaining <= _EPS:
            return n


class CampaignInputs:
    """Flattened per-trial schedules and uniforms, ready for a kernel."""

    def __init__(self, scenario, seeds):
        self.n_trials = len(seeds)
        self.n_steps = scenario.n_steps
        self.dt = scenario.dt
        model = scenario.attacker
        self.model = MODEL_CODE[type(model)]
        self.invalidates = bool(scenario.diversification.invalidates)
        self.down_ticks = countdown_ticks(scenario.d_R, scenario.dt)
        # param_a: threshold seconds or guess rate; param_b: search space size
        self.param_a = 0.0
        self.param_b = 0.0
        self.erase_ticks = 0
        self.program_ticks = 0
        if isinstance(model, Disclosure):
            self.param_a = model.T_collect
        elif isinstance(model, Guessing):
            self.param_a = float(model.rate)
            self.param_b = float(model.N)
        elif isinstance(model, DefeatDevice):
            self.param_a = model.T_accum
        elif isinstance(model, FlashPersist):
            from .controller import ERASE_LATENCY, PROGRAM_LATENCY

            self.erase_ticks = countdown_ticks(ERASE_LATENCY, scenario.dt)
            self.program_ticks = countdown_ticks(PROGRAM_LATENCY, scenario.dt)

        shared = None
        if scenario.scheduler is None or _deterministic(scenario.scheduler):
            shared = reset_ticks(scenario.scheduler, self.n_steps, self.dt)
        r_ptr = [0]
        r_all = []
        u_ptr = [0]
        u_all = []
        for s in seeds:
            root = rngmod.RngStream(s)
            ticks = shared if shared is not None else reset_ticks(
                scenario.scheduler, self.n_steps, self.dt, root.split(rngmod.SCHEDULER))
            r_all.extend(ticks)
            r_ptr.append(len(r_all))
            if self.model == MODEL_CODE[Guessing]:
                # One target per epoch at most, plus the pre-reset epoch.
                n_draws = len(ticks) + 1 if self.invalidates else 1
                u_all.extend(root.split(rngmod.ATTACKER).random(n_draws).tolist())
            u_ptr.append(len(u_all))
        self.reset_ptr = np.asarray(r_ptr, dtype=np.int64)
        self.reset_ticks = np.asarray(r_all, dtype=np.int64)
        self.u_ptr = np.asarray(u_ptr, dtype=np.int64)
        self.u_vals = np.asarray(u_all, dtype=np.float64)

    def args(self):
        return (self.n_steps, self.dt, self.model, self.param_a, self.param_b, self.invalidates,
                self.down_ticks, self.erase_ticks, self.program_ticks,
                self.reset_ptr, self.reset_ticks, self.u_ptr, self.u_vals)


def _deterministic(mode) -> bool:
    from .scheduler import Periodic, Random

    return isinstance(mode, Periodic) or (isinstance(mode, Random) and mode.T_lo == mode.T_hi)


# Model codes, duplicated as literals so the compiled kernel can branch on them.
_DISCLOSURE, _GUESSING, _FLASH, _DEFEAT = 0, 1, 2, 3
assert MODEL_CODE == {Disclosure: 0, Guessing: 1, FlashPersist: 2, DefeatDevice: 3}


@_accel.njit(cache=True)
def campaign_numba(n_steps, dt, model, param_a, param_b, invalidates, down_ticks,
                   erase_ticks, program_ticks, reset_ptr, reset_ticks, u_ptr, u_vals):
    n_trials = reset_ptr.shape[0] - 1
    succeeded = np.zeros(n_trials, dtype=np.bool_)
    success_time = np.full(n_trials, np.nan)
    survived = np.zeros(n_trials, dtype=np.int64)
    for i in range(n_trials):
        r = reset_ptr[i]
        r_end = reset_ptr[i + 1]
        u = u_ptr[i]
        up = 0
        acc = 0
        target = -1.0
        stage = 0        # flash: 0 idle, 1 erasing, 2 erased, 3 programming
        timer = 0
        down_left = 0
        for k in range(n_steps):
            if r < r_end and reset_ticks[r] == k:
                r += 1
                if k != 0:
                    survived[i] += 1
                if invalidates:
                    up = 0
                    target = -1.0
                stage = 0
                timer = 0
                acc = 0
                down_left = down_ticks
            if down_left > 0:
                down_left -= 1
                continue
            up += 1
            acc += 1
            t_end = k * dt + dt
            if model == 0:
                if up * dt >= param_a - 1e-9:
                    succeeded[i] = True
            elif model == 1:
                if target < 0.0:
                    target = u_vals[u] * param_b
                    u += 1
                if up * dt * param_a >= target:
                    succeeded[i] = True
            elif model == 3:
                if acc * dt >= param_a - 1e-9:
                    succeeded[i] = True
            else:
                if stage == 0:
                    stage = 1
                    timer = erase_ticks
                elif stage == 2:
                    stage = 3
                    timer = program_ticks
                if stage == 1 or stage == 3:
                    timer -= 1
                    if timer == 0:
                        if stage == 1:
                            stage = 2
                        else:
                            succeeded[i] = True
            if succeeded[i]:
                success_time[i] = t_end
                break
    return succeeded, success_time, survived


def campaign_numpy(n_steps, dt, model, param_a, param_b, invalidates, down_ticks,
                   erase_ticks, program_ticks, reset_ptr, reset_ticks, u_ptr, u_vals):
    """Vectorised over trials; one loop iteration per simulation step."""
    n_trials = reset_ptr.shape[0] - 1
    succeeded = np.zeros(n_trials, dtype=bool)
    success_time = np.full(n_trials, np.nan)
    survived = np.zeros(n_trials, dtype=np.int64)
    r = reset_ptr[:-1].copy()
    r_end = reset_ptr[1:]
    u = u_ptr[:-1].copy()
    up = np.zeros(n_trials, dtype=np.int64)
    acc = np.zeros(n_trials, dtype=np.int64)
    target = np.full(n_trials, -1.0)
    stage = np.zeros(n_trials, dtype=np.int64)
    timer = np.zeros(n_trials, dtype=np.int64)
    down_left = np.zeros(n_trials, dtype=np.int64)
    pad = np.append(reset_ticks, -1)  # keeps fancy indexing in range

    for k in range(n_steps):
        live = ~succeeded
        if not live.any():
            break
        fire = live & (r < r_end) & (pad[np.minimum(r, len(pad) - 1)] == k)
        if fire.any():
            r[fire] += 1
            if k != 0:
                survived[fire] += 1
            if invalidates:
                up[fire] = 0
                target[fire] = -1.0
            stage[fire] = 0
            timer[fire] = 0
            acc[fire] = 0
            down_left[fire] = down_ticks
        # Finished trials still consume their schedule so survival counts
        # stop exactly where the per-trial loop stops.
        down = down_left > 0
        down_left[down & live] -= 1
        act = live & ~down
        if not act.any():
            continue
        up[act] += 1
        acc[act] += 1
        t_end = k * dt + dt
        if model == _DISCLOSURE:
            hit = act & (up * dt >= param_a - 1e-9)
        elif model == _GUESSING:
            need = act & (target < 0.0)
            if need.any():
                target[need] = u_vals[u[need]] * param_b
                u[need] += 1
            hit = act & (up * dt * param_a >= target)
        elif model == _DEFEAT:
            hit = act & (acc * dt >= param_a - 1e-9)
        else:
            start_erase = act & (stage == 0)
            start_prog = act & (stage == 2)
            stage[start_erase] = 1
            timer[start_erase] = erase_ticks
            stage[start_prog] = 3
            timer[start_prog] = program_ticks
            busy = act & ((stage == 1) | (stage == 3))
            timer[busy] -= 1
            done = busy & (timer == 0)
            hit = done & (stage == 3)
            stage[done & (stage == 1)] = 2
        if hit.any():
            succeeded[hit] = True
            success_time[hit] = t_end
    return succeeded, success_time, survived


def campaign_arrays(inputs: CampaignInputs, use_numba: bool | None = None):
    """Run the selected implementation; returns (succeeded, time, survived)."""
    if use_numba is None:
        use_numba = _accel.USE_NUMBA
    fn = campaign_numba if use_numba else campaign_numpy
    return fn(*inputs.args())


def run_campaign(scenario, seeds, use_numba: bool | None = None) -> list[AttackOutcome]:
    inputs = CampaignInputs(scenario, seeds)
    ok, when, survived = campaign_arrays(inputs, use_numba)
    return [
        AttackOutcome(bool(ok[i]), float(when[i]) if ok[i] else None, int(survived[i]))
        for i in range(inputs.n_trials)
    ]
