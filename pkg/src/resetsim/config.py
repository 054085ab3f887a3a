"""JSON run configuration: schema, defaults, validation and sweep expansion.

A run document looks like::

    {
      "schema_version": 1,
      "plant": {"type": "engine"},
      "controller": {"reset_strategy": {"type": "power_cycle", "d_R": 0.020}},
      "scheduler": {"mode": "periodic", "T_R": 0.125},
      "horizon": 10.0,
      "seed": 1
    }

Structural problems raise :class:`SchemaViolation`; values that are well
formed but inconsistent (``d_R >= T_R``, a horizon shorter than one reset
interval) raise :class:`RangeViolation`.  Defaults live in the schema
itself and are documented by :func:`reference_markdown`.
"""

from __future__ import annotations

import copy
import itertools
import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Any

import jsonschema

from .controller import PowerCycle, SnapshotRestore
from .errors import ConfigError, RangeViolation, SchemaViolation
from .plants import BrakeParams, EngineParams, QuadParams, WindProfile
from .scheduler import Adaptive, Periodic, Random
from .security import (
    CanaryRekey,
    DefeatDevice,
    Disclosure,
    FlashPersist,
    Guessing,
    NoDiversification,
    PathRandomization,
)
from .sim import ControllerConfig, Scenario

SCHEMA_VERSION = 1
MAX_CELLS = 10_000


def _num(default=None, minimum=None, exclusive_minimum=None, maximum=None, desc=""):
    s: dict[str, Any] = {"type": "number", "description": desc}
    if default is not None:
        s["default"] = default
    if minimum is not None:
        s["minimum"] = minimum
    if exclusive_minimum is not None:
        s["exclusiveMinimum"] = exclusive_minimum
    if maximum is not None:
        s["maximum"] = maximum
    return s


def _int(default=None, minimum=None, maximum=None, desc=""):
    s: dict[str, Any] = {"type": "integer", "description": desc}
    if default is not None:
        s["default"] = default
    if minimum is not None:
        s["minimum"] = minimum
    if maximum is not None:
        s["maximum"] = maximum
    return s


def _triple(default, desc):
    return {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3,
            "default": list(default), "description": desc}


def _variant(tag: str, value: str, props: dict, required=(), desc=""):
    return {
        "type": "object",
        "description": desc,
        "properties": {tag: {"const": value}, **props},
        "required": [tag, *required],
        "additionalProperties": False,
    }


_E, _Q, _B = EngineParams(), QuadParams(), BrakeParams()

ENGINE_SCHEMA = _variant("type", "engine", {
    "J": _num(_E.J, exclusive_minimum=0, desc="crankshaft inertia, kg m^2"),
    "tau_ign": _num(_E.tau_ign, minimum=0, desc="ignition torque, N m"),
    "b": _num(_E.b, minimum=0, desc="viscous friction, N m s"),
    "tau_c": _num(_E.tau_c, minimum=0, desc="Coulomb friction, N m"),
    "nominal_rpm": _num(_E.nominal_rpm, exclusive_minimum=0, desc="governor setpoint and speed-ratio reference"),
    "stall_rpm": _num(_E.stall_rpm, minimum=0, desc="speed below which the engine stalls"),
}, desc="crankshaft under a skip-fire speed governor")

QUAD_SCHEMA = _variant("type", "quad", {
    "inertia": _triple(_Q.inertia, "roll/pitch/yaw inertia, kg m^2"),
    "kp": _triple(_Q.kp, "attitude gains, N m/rad"),
    "kd": _triple(_Q.kd, "rate damping gains, N m s/rad"),
    "motor_gain": _triple(_Q.motor_gain, "axis torque per unit motor command, N m"),
    "hover": _num(_Q.hover, minimum=0, maximum=1, desc="hover motor command"),
    "estimator_rate": _num(_Q.estimator_rate, exclusive_minimum=0, desc="estimator and control rate, Hz"),
    "n_est": _int(_Q.n_est, minimum=0, desc="estimator samples needed after boot"),
}, desc="three-axis attitude plant with a PD controller")

BRAKE_SCHEMA = _variant("type", "brake", {
    "a_brake": _num(_B.a_brake, exclusive_minimum=0, desc="deceleration while braking, m/s^2"),
    "a_coast": _num(_B.a_coast, minimum=0, desc="deceleration while the brake is released, m/s^2"),
    "v0": _num(_B.v0, minimum=0, desc="initial speed, m/s"),
}, desc="straight-line stop under a brake controller")

SCHEDULER_SCHEMA = {
    "description": "reset schedule; null disables resets",
    "default": None,
    "oneOf": [
        {"type": "null"},
        _variant("mode", "periodic", {"T_R": _num(exclusive_minimum=0, desc="reset interval, s")},
                 required=("T_R",), desc="fixed interval"),
        _variant("mode", "random", {
            "T_lo": _num(exclusive_minimum=0, desc="shortest interval, s"),
            "T_hi": _num(exclusive_minimum=0, desc="longest interval, s"),
        }, required=("T_lo", "T_hi"), desc="interval drawn uniformly per epoch"),
        _variant("mode", "adaptive", {
            "T_min": _num(exclusive_minimum=0, desc="interval while calm, s"),
            "T_max": _num(exclusive_minimum=0, desc="interval while disturbed, s"),
            "window": _num(0.5, exclusive_minimum=0, desc="metric window, s"),
            "threshold": _num(0.1, minimum=0, desc="disturbance threshold, metric units"),
        }, required=("T_min", "T_max"), desc="T_max when the windowed disturbance metric exceeds threshold, else T_min"),
    ],
}

STRATEGY_SCHEMA = {
    "type": "object",
    "description": "how the controller is reset",
    "properties": {
        "type": {"enum": ["power_cycle", "snapshot_restore"], "default": "power_cycle"},
        "d_R": _num(0.020, minimum=0, desc="reset downtime, s"),
    },
    "additionalProperties": False,
    "default": {"type": "power_cycle", "d_R": 0.020},
}

CONTROLLER_SCHEMA = {
    "type": "object",
    "description": "controller hardware and reset strategy",
    "properties": {
        "reset_strategy": STRATEGY_SCHEMA,
        "nominal_latency": {"type": ["number", "null"], "minimum": 0, "default": None,
                            "description": "compute time per control sample, s; null = 40% of the period"},
        "control_period": {"type": ["number", "null"], "exclusiveMinimum": 0, "default": None,
                           "description": "seconds between control samples; null = plant default"},
        "ram_size": _int(4096, minimum=1, desc="RAM bytes"),
        "flash_sectors": _int(4, minimum=1, desc="number of flash sectors"),
        "sector_size": _int(16 * 1024, minimum=1, desc="bytes per flash sector"),
        "whitelist": {"type": "array", "items": {"type": "integer", "minimum": 0}, "default": [],
                      "description": "sectors whose in-flight writes survive a reset"},
    },
    "additionalProperties": False,
    "default": {},
}

DIVERSIFICATION_SCHEMA = {
    "type": "object",
    "description": "per-epoch diversification",
    "properties": {
        "strategy": {"enum": ["none", "path_randomization", "canary_rekey"], "default": "none"},
        "secret_bits": _int(None, minimum=1, maximum=32, desc="secret width; default 32"),
        "slowdown": _num(None, minimum=1, desc="execution slowdown factor; default 2.13 for path randomization, else 1"),
    },
    "additionalProperties": False,
    "default": {"strategy": "none"},
}

ATTACKER_SCHEMA = {
    "description": "attacker model; null disables the attacker",
    "default": None,
    "oneOf": [
        {"type": "null"},
        _variant("model", "disclosure", {"T_collect": _num(exclusive_minimum=0, desc="harvest time, s")},
                 required=("T_collect",), desc="succeeds after T_collect seconds of uptime"),
        _variant("model", "guessing", {
            "rate": _num(exclusive_minimum=0, desc="guesses per second"),
            "N": _int(minimum=1, desc="search space size"),
        }, required=("rate", "N"), desc="exhaustive search for a secret"),
        _variant("model", "flash_persist", {
            "sector": _int(0, minimum=0, desc="target sector"),
            "payload_hex": {"type": "string", "pattern": "^([0-9a-fA-F]{2})*$",
                            "description": "bytes written after the erase, hex"},
        }, desc="erase then program one flash sector"),
        _variant("model", "defeat_device", {"T_accum": _num(exclusive_minimum=0, desc="observation time needed, s")},
                 required=("T_accum",), desc="acts after T_accum seconds of uninterrupted observation"),
    ],
}

WIND_SCHEMA = {
    "type": "object",
    "description": "disturbance torque on the quad",
    "properties": {
        "segments": {
            "type": "array",
            "default": [],
            "description": "piecewise-constant mean torque, sorted by t",
            "items": {
                "type": "object",
                "properties": {"t": _num(minimum=0, desc="start time, s"),
                               "torque": _triple((0, 0, 0), "mean torque, N m")},
                "required": ["t", "torque"],
                "additionalProperties": False,
            },
        },
        "gust_sigma": _num(0.0, minimum=0, desc="gust standard deviation, N m"),
        "gust_tau": _num(0.5, exclusive_minimum=0, desc="gust correlation time, s"),
        "gust_start": _num(0.0, minimum=0, desc="time gusts switch on, s"),
        "turbulence_sigma": _num(0.0, minimum=0, desc="fast buffeting standard deviation, N m"),
        "turbulence_tau": _num(0.02, exclusive_minimum=0, desc="buffeting correlation time, s"),
    },
    "additionalProperties": False,
    "default": {},
}

CAMPAIGN_SCHEMA = {
    "type": "object",
    "description": "Monte-Carlo attack campaign settings",
    "properties": {
        "trials": _int(1000, minimum=1, desc="number of independent trials"),
        "method": {"enum": ["auto", "kernel", "full"], "default": "auto",
                   "description": "kernel replays only schedule and attacker; full runs the co-simulation"},
    },
    "additionalProperties": False,
    "default": {},
}

SWEEP_SCHEMA = {
    "type": "object",
    "description": "parameter sweep over the base document",
    "properties": {
        "axes": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "path": {"description": "dotted key path, e.g. scheduler.T_R, or a list of "
                                            "paths varied together (values are then lists)",
                             "oneOf": [{"type": "string"},
                                       {"type": "array", "items": {"type": "string"}, "minItems": 1}]},
                    "values": {"type": "array", "minItems": 1, "description": "values taken along this axis"},
                },
                "required": ["path", "values"],
                "additionalProperties": False,
            },
        },
        "max_cells": _int(MAX_CELLS, minimum=1, desc="refuse sweeps with more cells than this"),
        "seed_mode": {"enum": ["derived", "shared"], "default": "derived",
                      "description": "derived: seed from (seed, cell index); shared: every cell uses seed"},
        "workers": _int(1, minimum=1, desc="worker processes"),
        "trials": _int(None, minimum=1, desc="if set, run an attack campaign of this size per cell"),
    },
    "required": ["axes"],
    "additionalProperties": False,
}

RUN_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "resetsim run configuration",
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION, "description": "document format version"},
        "description": {"type": "string", "default": "", "description": "free text, ignored by the simulator"},
        "plant": {"description": "plant model and parameters", "oneOf": [ENGINE_SCHEMA, QUAD_SCHEMA, BRAKE_SCHEMA]},
        "controller": CONTROLLER_SCHEMA,
        "scheduler": SCHEDULER_SCHEMA,
        "diversification": DIVERSIFICATION_SCHEMA,
        "attacker": ATTACKER_SCHEMA,
        "wind": WIND_SCHEMA,
        "horizon": _num(exclusive_minimum=0, desc="simulated time, s"),
        "seed": _int(minimum=0, maximum=2**63 - 1, desc="root random seed"),
        "dt": _num(0.0005, exclusive_minimum=0, maximum=0.001, desc="step size, s"),
        "warmup": _num(2.0, minimum=0, desc="start-up time excluded from metrics, s"),
        "campaign": CAMPAIGN_SCHEMA,
        "sweep": SWEEP_SCHEMA,
    },
    "required": ["schema_version", "plant", "horizon", "seed"],
    "additionalProperties": False,
}

_VALIDATOR = jsonschema.Draft202012Validator(RUN_SCHEMA)


# --------------------------------------------------------------- validation

def _where(path) -> str:
    return ".".join(str(p) for p in path) or "<document>"


def _describe(err: jsonschema.ValidationError) -> str:
    where = _where(err.absolute_path)
    if err.validator != "oneOf" or not isinstance(err.instance, dict):
        return f"{where}: {err.message}"
    # Report only the branch selected by the discriminating key.
    for tag in ("type", "mode", "model"):
        if tag not in err.instance:
            continue
        for i, branch in enumerate(err.validator_value):
            if branch.get("properties", {}).get(tag, {}).get("const") == err.instance[tag]:
                subs = [e for e in err.context if e.schema_path and e.schema_path[0] == i]
                return "; ".join(_describe(e) for e in subs) or f"{where}: invalid"
        return f"{where}.{tag}: unknown value {err.instance[tag]!r}"
    return f"{where}: needs a 'type', 'mode' or 'model' key"


def validate_document(doc: Any) -> None:
    """Raise :class:`SchemaViolation` listing every structural problem."""
    if not isinstance(doc, dict):
        raise SchemaViolation("configuration must be a JSON object")
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if not errors:
        return
    missing = sorted({
        m for e in errors if e.validator == "required" and not e.absolute_path
        for m in e.validator_value if m not in doc
    })
    lines = []
    if missing:
        lines.append("missing required keys: " + ", ".join(missing))
    lines += [_describe(e) for e in errors if not (e.validator == "required" and not e.absolute_path)]
    raise SchemaViolation("; ".join(lines))


def loads(text: str | bytes) -> dict:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SchemaViolation(f"configuration is not UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return doc


# --------------------------------------------------------------- defaults

def _fill(schema: dict, value):
    if isinstance(value, dict) and schema.get("type") == "object":
        out = dict(value)
        for key, sub in schema.get("properties", {}).items():
            if key not in out and "default" in sub:
                out[key] = copy.deepcopy(sub["default"])
            if key in out:
                out[key] = _fill(sub, out[key])
        return out
    if isinstance(value, dict) and "oneOf" in schema:
        for branch in schema["oneOf"]:
            if branch.get("type") == "object" and _VALIDATOR.evolve(schema=branch).is_valid(value):
                return _fill(branch, value)
    return value


def with_defaults(doc: dict) -> dict:
    """Deep copy of a valid document with every documented default filled in."""
    return _fill(RUN_SCHEMA, doc)


# ----------------------------------------------------------- construction

@dataclass(frozen=True)
class RunConfig:
    document: dict
    scenario: Scenario
    description: str = ""
    trials: int = 1000
    method: str = "auto"


def _plant(doc):
    p = dict(doc["plant"])
    kind = p.pop("type")
    if kind == "quad":
        for key in ("inertia", "kp", "kd", "motor_gain"):
            p[key] = tuple(p[key])
        return kind, QuadParams(**p)
    return kind, (EngineParams if kind == "engine" else BrakeParams)(**p)


def _scheduler(s):
    if s is None:
        return None
    if s["mode"] == "periodic":
        return Periodic(s["T_R"])
    if s["mode"] == "random":
        return Random(s["T_lo"], s["T_hi"])
    return Adaptive(s["T_min"], s["T_max"], s["window"], s["threshold"])


def _diversification(d):
    kw = {k: d[k] for k in ("secret_bits", "slowdown") if k in d}
    if d["strategy"] == "path_randomization":
        return PathRandomization(**kw)
    if d["strategy"] == "canary_rekey":
        return CanaryRekey(**kw)
    kw.pop("secret_bits", None)
    return NoDiversification(**kw)


def _attacker(a):
    if a is None:
        return None
    m = a["model"]
    if m == "disclosure":
        return Disclosure(a["T_collect"])
    if m == "guessing":
        return Guessing(a["rate"], a["N"])
    if m == "defeat_device":
        return DefeatDevice(a["T_accum"])
    if "payload_hex" in a:
        return FlashPersist(a["sector"], bytes.fromhex(a["payload_hex"]))
    return FlashPersist(a["sector"])


def _wind(w):
    segments = tuple((s["t"], tuple(s["torque"])) for s in w["segments"])
    if any(b[0] < a[0] for a, b in zip(segments, segments[1:])):
        raise RangeViolation("wind.segments must be sorted by t")
    return WindProfile(segments, w["gust_sigma"], w["gust_tau"], w["gust_start"],
                       w["turbulence_sigma"], w["turbulence_tau"])


def _range_checks(doc):
    s = doc["scheduler"]
    d_R = doc["controller"]["reset_strategy"]["d_R"]
    if s is None:
        return
    if s["mode"] == "periodic" and d_R >= s["T_R"]:
        raise RangeViolation(f"controller.reset_strategy.d_R={d_R} must be < scheduler.T_R={s['T_R']}")
    if s["mode"] == "random" and s["T_lo"] > s["T_hi"]:
        raise RangeViolation(f"scheduler.T_lo={s['T_lo']} must be <= scheduler.T_hi={s['T_hi']}")
    if s["mode"] == "adaptive" and s["T_min"] > s["T_max"]:
        raise RangeViolation(f"scheduler.T_min={s['T_min']} must be <= scheduler.T_max={s['T_max']}")


def build(doc: dict) -> RunConfig:
    """Validate ``doc`` and turn it into a :class:`RunConfig`."""
    validate_document(doc)
    full = with_defaults(doc)
    _range_checks(full)
    if doc.get("wind") and full["plant"]["type"] != "quad":
        raise RangeViolation("wind: only the quad plant takes a wind profile")
    try:
        kind, params = _plant(full)
        c = full["controller"]
        rs = c["reset_strategy"]
        strategy = PowerCycle(rs["d_R"]) if rs["type"] == "power_cycle" else SnapshotRestore(rs["d_R"])
        ctrl = ControllerConfig(
            strategy=strategy,
            nominal_latency=c["nominal_latency"],
            control_period=c["control_period"],
            ram_size=c["ram_size"],
            flash_sectors=c["flash_sectors"],
            sector_size=c["sector_size"],
            whitelist=frozenset(c["whitelist"]),
        )
        scenario = Scenario(
            plant=kind,
            plant_params=params,
            controller=ctrl,
            scheduler=_scheduler(full["scheduler"]),
            diversification=_diversification(full["diversification"]),
            attacker=_attacker(full["attacker"]),
            wind=_wind(full["wind"]) if kind == "quad" else WindProfile(),
            horizon=full["horizon"],
            seed=full["seed"],
            dt=full["dt"],
            warmup=full["warmup"],
        ).validate()
    except ConfigError:
        raise
    except ValueError as exc:
        raise RangeViolation(str(exc)) from None
    camp = full["campaign"]
    return RunConfig(full, scenario, full["description"], camp["trials"], camp["method"])


def parse_config(text: str | bytes) -> RunConfig:
    """Parse a UTF-8 JSON run document."""
    return build(loads(text))


def load_config(path) -> RunConfig:
    with open(path, "rb") as fh:
        return parse_config(fh.read())


def bundled(name: str) -> dict:
    """Raw document of a bundled config, e.g. ``bundled("ecu_default")``."""
    ref = resources.files("resetsim") / "configs" / f"{name}.json"
    if not ref.is_file():
        raise ConfigError(f"no bundled config named {name!r}; have {', '.join(bundled_names())}")
    return loads(ref.read_bytes())


def bundled_names() -> list[str]:
    root = resources.files("resetsim") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


# ------------------------------------------------------------------ sweeps

def set_path(doc: dict, path: str, value) -> dict:
    """Copy of ``doc`` with the dotted ``path`` set to ``value``."""
    out = copy.deepcopy(doc)
    keys = path.split(".")
    node = out
    for key in keys[:-1]:
        nxt = node.get(key)
        if nxt is None:
            nxt = node[key] = {}
        if not isinstance(nxt, dict):
            raise SchemaViolation(f"sweep path {path!r}: {key!r} is not an object")
        node = nxt
    node[keys[-1]] = value
    return out


def _path_known(path: str) -> bool:
    schemas = [RUN_SCHEMA]
    for key in path.split("."):
        nxt = []
        for s in schemas:
            branches = s.get("oneOf", [s])
            for b in branches:
                if key in b.get("properties", {}):
                    nxt.append(b["properties"][key])
        if not nxt:
            return False
        schemas = nxt
    return True


@dataclass(frozen=True)
class SweepCell:
    index: int
    params: dict
    document: dict


@dataclass(frozen=True)
class SweepSpec:
    base: dict
    axes: tuple
    max_cells: int = MAX_CELLS
    seed_mode: str = "derived"
    workers: int = 1
    trials: int | None = None
    description: str = ""

    @property
    def size(self) -> int:
        return math.prod(len(v) for _, v in self.axes)

    @property
    def param_names(self) -> list[str]:
        return [p for paths, _ in self.axes for p in paths]

    def cells(self):
        """Cross product in row-major order (last axis varies fastest)."""
        from .rng import derive_seed

        names = self.param_names
        for i, combo in enumerate(itertools.product(*(v for _, v in self.axes))):
            flat = [x for group in combo for x in group]
            doc = self.base
            for path, value in zip(names, flat):
                doc = set_path(doc, path, value)
            if self.seed_mode == "derived":
                doc = set_path(doc, "seed", derive_seed(self.base["seed"], i))
            yield SweepCell(i, dict(zip(names, flat)), doc)


def build_sweep(doc: dict, workers: int | None = None) -> SweepSpec:
    validate_document(doc)
    if "sweep" not in doc:
        raise SchemaViolation("sweep: a sweep configuration needs a 'sweep' section")
    full = with_defaults(doc)
    sw = full["sweep"]
    axes = []
    for a in sw["axes"]:
        if isinstance(a["path"], str):
            axes.append(((a["path"],), tuple((v,) for v in a["values"])))
            continue
        paths = tuple(a["path"])
        for v in a["values"]:
            if not isinstance(v, list) or len(v) != len(paths):
                raise SchemaViolation(f"sweep.axes: values for {list(paths)} must be lists of {len(paths)}")
        axes.append((paths, tuple(tuple(v) for v in a["values"])))
    axes = tuple(axes)
    names = [p for paths, _ in axes for p in paths]
    for path in names:
        if path in ("sweep", "schema_version") or path.startswith("sweep.") or not _path_known(path):
            raise SchemaViolation(f"sweep.axes: unknown parameter path {path!r}")
    if len(set(names)) != len(names):
        raise SchemaViolation("sweep.axes: duplicate parameter path")
    base = copy.deepcopy(doc)
    del base["sweep"]
    spec = SweepSpec(base, axes, sw["max_cells"], sw["seed_mode"], workers or sw["workers"],
                     sw.get("trials"), full["description"])
    if spec.size > spec.max_cells:
        raise RangeViolation(f"sweep has {spec.size} cells, above the cap of {spec.max_cells}")
    return spec


def parse_sweep(text: str | bytes, workers: int | None = None) -> SweepSpec:
    return build_sweep(loads(text), workers)


# -------------------------------------------------------------- reference

def _type_of(s: dict) -> str:
    if "const" in s:
        return json.dumps(s["const"])
    if "enum" in s:
        return " | ".join(json.dumps(v) for v in s["enum"])
    t = s.get("type", "")
    if isinstance(t, list):
        return " | ".join(t)
    if t == "array" and "items" in s and s["items"].get("type") == "number":
        n = s.get("minItems")
        return f"number[{n}]" if n == s.get("maxItems") and n else "number[]"
    return t or "object"


def _rows(schema: dict, prefix: str, out: list):
    for key, sub in schema.get("properties", {}).items():
        name = f"{prefix}{key}"
        if "oneOf" in sub:
            out.append((name, "object | null" if any(b.get("type") == "null" for b in sub["oneOf"]) else "object",
                        _default(sub), sub.get("description", ""), name in _required(schema, key, prefix)))
            for b in sub["oneOf"]:
                if b.get("type") == "object":
                    tag = next(k for k, v in b["properties"].items() if "const" in v)
                    out.append((f"{name} ({tag}={b['properties'][tag]['const']})", "", "", b.get("description", ""), False))
                    _rows(b, f"{name}.", out)
            continue
        out.append((name, _type_of(sub), _default(sub), sub.get("description", ""),
                    key in schema.get("required", [])))
        if sub.get("type") == "object":
            _rows(sub, f"{name}.", out)
        if sub.get("type") == "array" and sub.get("items", {}).get("type") == "object":
            _rows(sub["items"], f"{name}[].", out)


def _required(schema, key, prefix):
    return {f"{prefix}{k}" for k in schema.get("required", [])}


def _default(s: dict) -> str:
    if "default" not in s:
        return ""
    return "`" + json.dumps(s["default"]) + "`"


def reference_markdown() -> str:
    """Markdown table of every key, its type, default and meaning."""
    rows: list = []
    _rows(RUN_SCHEMA, "", rows)
    lines = [
        "# Run configuration reference",
        "",
        "Generated from the schema in `resetsim.config`; regenerate with",
        "`python3 -m resetsim.config > docs/config_reference.md`.",
        "",
        f"Documents are UTF-8 JSON objects with `schema_version` = {SCHEMA_VERSION}.",
        "Unknown keys are rejected.  Required keys are marked with *.",
        "",
        "| key | type | default | meaning |",
        "|---|---|---|---|",
    ]
    for name, typ, default, desc, req in rows:
        typ = typ.replace("|", "\\|")
        lines.append(f"| `{name}`{' *' if req else ''} | {typ} | {default} | {desc} |")
    lines.append("")
    return "\n".join(lines)


def schema_json() -> str:
    return json.dumps(RUN_SCHEMA, indent=2, sort_keys=True) + "\n"


if __name__ == "__main__":  # pragma: no cover
    import sys

    if sys.argv[1:] == ["--schema"]:
        sys.stdout.write(schema_json())
    else:
        sys.stdout.write(reference_markdown())
