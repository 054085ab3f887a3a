import math
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from resetsim.controller import PowerCycle
from resetsim.rng import RngStream
from resetsim.scheduler import Periodic
from resetsim.security import (
    CanaryRekey,
    DefeatDevice,
    Disclosure,
    FlashPersist,
    Guessing,
    NoDiversification,
    PathRandomization,
    binomial_interval,
    campaign_success_prob,
    defeat_device_triggered,
    diversify,
    flash_persistence_possible,
    simulate_attack_campaign,
    success_prob_deterministic,
    success_prob_probabilistic,
    uptime_windows,
)
from resetsim.sim import ControllerConfig, Scenario


def test_deterministic_step():
    assert success_prob_deterministic(0.5, 0.5) == 1.0
    assert success_prob_deterministic(0.49, 0.5) == 0.0


@given(st.floats(0, 100), st.floats(0, 1e4), st.integers(1, 10**6))
def test_probabilistic_is_clamped_linear(t, rate, N):
    assert success_prob_probabilistic(t, rate, N) == pytest.approx(min(1.0, rate * t / N))


def test_campaign_closed_form_values():
    g = Guessing(1000, 65536)
    p = 0.98 * 1000 / 65536
    assert campaign_success_prob(0.98, 60, g, True) == pytest.approx(1 - (1 - p) ** 60)
    assert campaign_success_prob(0.98, 60, g, False) == pytest.approx(0.98 * 60 * 1000 / 65536)
    # disclosure that needs more than one epoch never lands when diversified
    assert campaign_success_prob(0.105, 80, Disclosure(0.5), True) == 0.0
    assert campaign_success_prob(0.105, 80, Disclosure(0.5), False) == 1.0
    # flash writes never carry over a reset
    assert campaign_success_prob(0.6, 100, FlashPersist(), False) == 0.0


@given(st.floats(0.001, 10), st.integers(1, 200), st.floats(1, 1e4), st.integers(1, 10**6))
def test_diversified_never_helps_guessing(u, k, rate, N):
    g = Guessing(rate, N)
    assert campaign_success_prob(u, k, g, True) <= campaign_success_prob(u, k, g, False) + 1e-12


@given(st.floats(0.001, 10), st.integers(1, 200), st.floats(0.001, 20))
def test_diversified_never_helps_disclosure(u, k, T):
    d = Disclosure(T)
    assert campaign_success_prob(u, k, d, True) <= campaign_success_prob(u, k, d, False)


def test_uptime_windows():
    assert uptime_windows([], 0.02, 5.0) == [5.0]
    assert uptime_windows([0.0, 1.0, 2.0], 0.1, 2.5) == pytest.approx([0.9, 0.9, 0.4])
    assert uptime_windows([0.5], 0.1, 1.0) == pytest.approx([0.5, 0.4])


def test_defeat_device_and_flash_windows():
    resets = [float(i) for i in range(1000)]
    assert not defeat_device_triggered(resets, 0.02, 300.0, 1000.0)
    assert defeat_device_triggered([], 0.0, 300.0, 1000.0)
    assert flash_persistence_possible([0.0, 0.7], 0.02, 1.4)
    assert flash_persistence_possible([0.0, 0.67], 0.0, 1.34)
    assert not flash_persistence_possible([0.0, 0.66, 1.32], 0.0, 1.98)


def test_wilson_interval_oracle():
    # z = 1.959964 for 95%
    lo, hi = binomial_interval(50, 100)
    assert lo == pytest.approx(0.4038, abs=1e-4)
    assert hi == pytest.approx(0.5962, abs=1e-4)
    assert binomial_interval(0, 10)[0] == 0.0
    assert binomial_interval(10, 10)[1] == 1.0


@given(st.integers(1, 5000), st.data())
def test_wilson_contains_estimate(n, data):
    k = data.draw(st.integers(0, n))
    lo, hi = binomial_interval(k, n)
    assert 0.0 <= lo <= k / n <= hi <= 1.0


def test_diversify_strategies():
    class S:
        secret = 0
        epoch = 0
        slowdown = 1.0

    s = S()
    diversify(PathRandomization(), s, RngStream(1))
    assert s.epoch == 1 and s.slowdown == 2.13 and s.secret != 0
    old = s.secret
    diversify(CanaryRekey(secret_bits=8), s, RngStream(2))
    assert s.secret < 256 and s.slowdown == 1.0
    diversify(NoDiversification(), s, RngStream(3))
    assert s.secret == old or s.secret < 256
    assert s.epoch == 3


@pytest.mark.parametrize("bad", [lambda: Guessing(0, 10), lambda: Guessing(1, 0), lambda: Disclosure(0),
                                 lambda: DefeatDevice(-1), lambda: PathRandomization(slowdown=0.5)])
def test_model_validation(bad):
    with pytest.raises(ValueError):
        bad()


def _campaign_scenario(**kw):
    base = dict(plant="brake", scheduler=Periodic(0.5), diversification=CanaryRekey(),
                attacker=Guessing(100, 1000), controller=ControllerConfig(PowerCycle(0.02)),
                horizon=5.0, seed=3)
    base.update(kw)
    return Scenario(**base)


def test_campaign_methods_agree_per_trial():
    sc = _campaign_scenario()
    a = simulate_attack_campaign(sc, 40, method="kernel")
    b = simulate_attack_campaign(sc, 40, method="full")
    assert a.outcomes == b.outcomes


def test_campaign_errors():
    with pytest.raises(ValueError):
        simulate_attack_campaign(_campaign_scenario(), 0)
    with pytest.raises(ValueError):
        simulate_attack_campaign(_campaign_scenario(attacker=None), 10)
    with pytest.raises(ValueError):
        simulate_attack_campaign(_campaign_scenario(), 10, method="bogus")


def test_campaign_matches_closed_form():
    sc = _campaign_scenario(horizon=5.0)
    res = simulate_attack_campaign(sc, 4000)
    p = campaign_success_prob(0.48, 10, sc.attacker, True)
    assert abs(res.rate - p) <= 4 * math.sqrt(p * (1 - p) / 4000)


def test_campaign_row_keys():
    res = simulate_attack_campaign(_campaign_scenario(), 10)
    row = res.as_row()
    assert row["trials"] == 10 and 0 <= row["rate"] <= 1
    assert replace(res, outcomes=()).method == res.method
