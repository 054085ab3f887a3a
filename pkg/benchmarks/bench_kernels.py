"""Campaign kernel timing: numba loop versus the numpy fallback.

    python3 benchmarks/bench_kernels.py [--trials N] [--horizon S]

Both paths get identical pre-drawn inputs; the script checks that they
agree before reporting times.
"""

import argparse
import time

import numpy as np

from resetsim import kernels
from resetsim._accel import NUMBA_AVAILABLE
from resetsim.controller import PowerCycle
from resetsim.rng import RngStream
from resetsim.scheduler import Periodic
from resetsim.security import CanaryRekey, Guessing, trial_seeds
from resetsim.sim import ControllerConfig, Scenario


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--horizon", type=float, default=20.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    sc = Scenario("engine", scheduler=Periodic(1.0), attacker=Guessing(1000, 65536),
                  diversification=CanaryRekey(), controller=ControllerConfig(PowerCycle(0.020)),
                  horizon=args.horizon, seed=2024)
    t0 = time.perf_counter()
    inputs = kernels.CampaignInputs(sc, trial_seeds(RngStream(sc.seed), args.trials))
    prep = time.perf_counter() - t0
    cells = args.trials * sc.n_steps
    print(f"{args.trials} trials x {sc.n_steps} steps ({cells:.2e} trial-steps); input prep {prep:.2f}s")

    t_np, ref = best_of(lambda: kernels.campaign_arrays(inputs, use_numba=False), args.repeat)
    print(f"numpy   {t_np:8.3f}s  {cells / t_np / 1e6:8.1f} M trial-steps/s")
    if not NUMBA_AVAILABLE:
        print("numba   not installed")
        return
    t0 = time.perf_counter()
    kernels.campaign_arrays(inputs, use_numba=True)
    print(f"numba   first call (includes compile or cache load) {time.perf_counter() - t0:.3f}s")
    t_nb, got = best_of(lambda: kernels.campaign_arrays(inputs, use_numba=True), args.repeat)
    for a, b in zip(ref, got):
        assert np.array_equal(a, b, equal_nan=True), "numba and numpy kernels disagree"
    print(f"numba   {t_nb:8.3f}s  {cells / t_nb / 1e6:8.1f} M trial-steps/s  ({t_np / t_nb:.1f}x)")


if __name__ == "__main__":
    main()
