import math

import pytest
from hypothesis import assume, given, strategies as st

from resetsim.errors import DegenerateInput, InvalidScenario
from resetsim.rng import RngStream
from resetsim.scheduler import (
    Adaptive,
    Periodic,
    Random,
    SafetyParams,
    adaptive_update,
    interval_ticks,
    next_reset_time,
    recovery_ratio,
    reset_ticks,
    safety_condition,
)

dur = st.floats(0, 10, allow_nan=False)


@given(dur, dur, dur, dur)
def test_safety_condition_is_a_sum_check(T_R, d_R, d_S, d_SS):
    need = d_R + d_S + d_SS
    assume(abs(T_R - need) > 1e-9)
    assert safety_condition(T_R, d_R, d_S, d_SS) == (T_R > need)


def test_safety_equality_is_satisfied():
    assert safety_condition(0.125, 0.020, 0.039, 0.066)
    assert not safety_condition(0.125, 0.020, 0.039, 0.0661)


def test_recovery_ratio_value():
    assert recovery_ratio(SafetyParams(0.125, 0.020, 0.039, 0.066)) == pytest.approx(0.066 / 0.059)


def test_recovery_ratio_degenerate():
    with pytest.raises(DegenerateInput):
        recovery_ratio(SafetyParams(1.0, 0.0, 0.0, 1.0))


def test_negative_durations_rejected():
    with pytest.raises(ValueError):
        SafetyParams(1.0, -0.1, 0.0, 0.0)
    with pytest.raises(ValueError):
        safety_condition(1.0, 0.0, -1.0, 0.0)


def test_from_interval_uses_remainder():
    p = SafetyParams.from_interval(1.0, 0.1, 0.2)
    assert p.d_SS == pytest.approx(0.7)
    assert p.satisfied


@pytest.mark.parametrize("bad", [lambda: Periodic(0.0), lambda: Random(0.5, 0.2), lambda: Random(0.0, 1.0),
                                 lambda: Adaptive(2.0, 1.0), lambda: Adaptive(1.0, 2.0, window=0.0)])
def test_mode_validation(bad):
    with pytest.raises(InvalidScenario):
        bad()


@given(st.floats(0, 1), st.floats(0.01, 1), st.floats(0.1, 5), st.floats(0, 5))
def test_adaptive_is_bang_bang(metric, threshold, T_min, extra):
    T_max = T_min + extra
    got = adaptive_update(metric, threshold, T_min, T_max)
    assert got == (T_max if metric > threshold else T_min)


def test_adaptive_tie_is_calm():
    assert adaptive_update(0.2, 0.2, 1.0, 8.0) == 1.0


def test_next_reset_time_modes():
    assert next_reset_time(Periodic(0.5), 3.0, 2.75) == 3.25
    assert next_reset_time(Adaptive(1.0, 8.0, threshold=0.1), 5.0, 5.0, metric=0.5) == 13.0
    t = next_reset_time(Random(0.2, 0.4), 1.0, 1.0, RngStream(1))
    assert 1.2 <= t <= 1.4
    with pytest.raises(ValueError):
        next_reset_time(Periodic(1.0), 0.0, 1.0)


@given(st.integers(1, 4000))
def test_periodic_ticks_evenly_spaced(k):
    dt = 0.0005
    ticks = reset_ticks(Periodic(k * dt), 10_000, dt)
    assert ticks[0] == 0
    assert all(b - a == k for a, b in zip(ticks, ticks[1:]))
    assert len(ticks) == math.ceil(10_000 / k)


@given(st.integers(0, 2**32), st.floats(0.01, 0.5), st.floats(0, 0.5))
def test_random_ticks_within_bounds(seed, lo, width):
    dt = 0.0005
    mode = Random(lo, lo + width)
    ticks = reset_ticks(mode, 20_000, dt, RngStream(seed))
    for a, b in zip(ticks, ticks[1:]):
        assert interval_ticks(lo, dt) <= b - a <= interval_ticks(lo + width, dt)


def test_random_ticks_reproducible():
    a = reset_ticks(Random(0.1, 0.3), 10_000, 0.0005, RngStream(5))
    b = reset_ticks(Random(0.1, 0.3), 10_000, 0.0005, RngStream(5))
    assert a == b


def test_adaptive_refused_without_plant():
    with pytest.raises(ValueError):
        reset_ticks(Adaptive(1.0, 2.0), 100, 0.0005)


def test_no_scheduler_no_ticks():
    assert reset_ticks(None, 100, 0.0005) == []


@given(st.floats(1e-4, 10))
def test_interval_ticks_never_short(interval):
    dt = 0.0005
    n = interval_ticks(interval, dt)
    assert n * dt >= interval - 1e-9 * max(1, interval)
    assert (n - 1) * dt < interval or n == 1
