"""Command-line interface.

Exit status: 0 on success, 1 on a usage or configuration error, 2 when the
simulation itself fails.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import __version__
from . import config as cfg
from .errors import ConfigError, ResetSimError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _read_config_bytes(name: str) -> bytes:
    p = Path(name)
    if p.is_file():
        return p.read_bytes()
    if not p.suffix and name in cfg.bundled_names():
        from importlib import resources

        return (resources.files("resetsim") / "configs" / f"{name}.json").read_bytes()
    raise ConfigError(f"--config: no such file or bundled config: {name}")


def _load(args):
    doc = cfg.loads(_read_config_bytes(args.config))
    if getattr(args, "seed", None) is not None:
        if isinstance(doc, dict):
            doc["seed"] = args.seed
    return doc


def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------- commands

def cmd_run(args) -> int:
    from .harness import metrics_table, run_single

    rc = cfg.build(_load(args))
    out = _outdir(args.out)
    trace, metrics = run_single(rc)
    with open(out / "trace.csv", "w", encoding="utf-8", newline="") as fh:
        trace.write_csv(fh)
    metrics_table(metrics).write(out / "metrics.csv")
    print(f"wrote {out / 'trace.csv'} ({len(trace)} rows) and {out / 'metrics.csv'}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .harness import run_sweep

    spec = cfg.build_sweep(_load(args), args.workers)
    out = _outdir(args.out)
    table = run_sweep(spec)
    table.write(out / "sweep.csv")
    failed = sum(1 for r in table.rows if r[-1])
    print(f"wrote {out / 'sweep.csv'} ({len(table.rows)} cells, {failed} with errors)")
    return EXIT_OK


def cmd_attack(args) -> int:
    from .harness import CsvTable, analytic_campaign_rate
    from .rng import RngStream
    from .security import simulate_attack_campaign

    rc = cfg.build(_load(args))
    sc = rc.scenario
    if sc.attacker is None:
        raise ConfigError("attacker: the attack command needs an attacker model in the config")
    trials = args.trials if args.trials is not None else rc.trials
    if trials < 1:
        raise UsageError("--trials: must be >= 1")
    out = _outdir(args.out)
    res = simulate_attack_campaign(sc, trials, RngStream(sc.seed), args.method or rc.method)
    row = res.as_row()
    row["analytic_rate"] = analytic_campaign_rate(sc)
    CsvTable(list(row), [tuple(row.values())]).write(out / "attack.csv")
    a = row["analytic_rate"]
    extra = "" if math.isnan(a) else f", analytic {a:.4f}"
    print(f"success rate {res.rate:.4f} [{res.ci_low:.4f}, {res.ci_high:.4f}] "
          f"over {res.trials} trials{extra}")
    return EXIT_OK


def cmd_plot(args) -> int:
    from .harness import CsvTable
    from .plot import PlotSpec, write_plot

    spec = PlotSpec.load(args.spec)
    try:
        table = CsvTable.read(args.input)
    except FileNotFoundError:
        raise ConfigError(f"--in: no such file: {args.input}") from None
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    write_plot(table, spec, out)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_calc(args) -> int:
    try:
        return _calc(args)
    except ValueError as exc:
        raise UsageError(f"calc: {exc}") from None


def _calc(args) -> int:
    from .plants import effective_deceleration
    from .scheduler import SafetyParams
    from .security import DefeatDevice, Disclosure, FlashPersist, Guessing, campaign_success_prob

    printed = False
    if args.ds is not None:
        if args.tr is None or args.dr is None:
            raise UsageError("--ds: needs --tr and --dr")
        p = (SafetyParams(args.tr, args.dr, args.ds, args.dss) if args.dss is not None
             else SafetyParams.from_interval(args.tr, args.dr, args.ds))
        state = "satisfied" if p.satisfied else "violated"
        print(f"safety: {state}, D={p.ratio:.3f}")
        printed = True
    if args.brake is not None:
        if args.tr is None or args.dr is None:
            raise UsageError("--brake: needs --tr and --dr")
        print(f"a_eff={effective_deceleration(args.brake, args.coast, args.tr, args.dr):.3f}")
        printed = True
    if args.model is not None:
        if args.uptime is None:
            raise UsageError("--model: needs --uptime")
        if args.model == "guessing":
            if args.rate is None or args.N is None:
                raise UsageError("--model guessing: needs --rate and --N")
            model = Guessing(args.rate, args.N)
        else:
            if args.threshold is None and args.model != "flash_persist":
                raise UsageError(f"--model {args.model}: needs --threshold")
            model = {"disclosure": lambda: Disclosure(args.threshold),
                     "defeat_device": lambda: DefeatDevice(args.threshold),
                     "flash_persist": FlashPersist}[args.model]()
        p = campaign_success_prob(args.uptime, args.epochs, model, args.diversified)
        print(f"p_campaign={p:.6f}")
        printed = True
    if not printed:
        raise UsageError("calc: give --ds (safety), --brake (deceleration) or --model (attack)")
    return EXIT_OK


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="resetsim", description="Simulate controller resets on inertial plants.")
    p.add_argument("--version", action="version", version=f"resetsim {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    r = sub.add_parser("run", help="simulate one scenario")
    r.add_argument("--config", required=True, help="JSON file or bundled config name")
    r.add_argument("--seed", type=int, help="override the config seed")
    r.add_argument("--out", required=True, help="output directory")
    r.set_defaults(fn=cmd_run)

    s = sub.add_parser("sweep", help="run a parameter sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int, help="worker processes (default from config)")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_sweep)

    a = sub.add_parser("attack", help="Monte-Carlo attack campaign")
    a.add_argument("--config", required=True)
    a.add_argument("--trials", type=int)
    a.add_argument("--seed", type=int)
    a.add_argument("--method", choices=("auto", "kernel", "full"))
    a.add_argument("--out", required=True)
    a.set_defaults(fn=cmd_attack)

    pl = sub.add_parser("plot", help="render a CSV table as SVG")
    pl.add_argument("--in", dest="input", required=True)
    pl.add_argument("--spec", required=True)
    pl.add_argument("--out", required=True)
    pl.set_defaults(fn=cmd_plot)

    c = sub.add_parser("calc", help="closed-form calculations")
    c.add_argument("--tr", type=float, help="reset interval T_R, s")
    c.add_argument("--dr", type=float, help="reset downtime d_R, s")
    c.add_argument("--ds", type=float, help="stabilisation time d_S, s")
    c.add_argument("--dss", type=float, help="stable-state time d_SS, s (default: rest of T_R)")
    c.add_argument("--brake", type=float, help="braking deceleration, m/s^2")
    c.add_argument("--coast", type=float, default=0.0, help="deceleration while released, m/s^2")
    c.add_argument("--model", choices=("disclosure", "guessing", "flash_persist", "defeat_device"))
    c.add_argument("--uptime", type=float, help="per-epoch uptime, s")
    c.add_argument("--epochs", type=int, default=1)
    c.add_argument("--rate", type=float, help="guesses per second")
    c.add_argument("--N", type=int, help="search space size")
    c.add_argument("--threshold", type=float, help="T_collect or T_accum, s")
    c.add_argument("--diversified", action=argparse.BooleanOptionalAction, default=True)
    c.set_defaults(fn=cmd_calc)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ResetSimError, ValueError, ArithmeticError, OSError) as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
