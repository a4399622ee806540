"""Run configuration: strict YAML parsing, serialisation and the key reference."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import types
import typing
from dataclasses import dataclass, field

import yaml

from .experiments import DynamicsEvent, ExperimentPlan

SEEDS_ENV = "COEXBANDIT_SEEDS"


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
        self.message = message


@dataclass
class OutputConfig:
    dir: str = "out"
    prefix: str = "run"
    events: bool = False


@dataclass
class SweepConfig:
    omega: list[float] | None = None
    exponent: list[float] | None = None
    n: list[int] | None = None


@dataclass
class RunConfig:
    plan: ExperimentPlan = field(default_factory=ExperimentPlan)
    output: OutputConfig = field(default_factory=OutputConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)


HELP = {
    "scenario": "study label: " + ", ".join(
        ("omega_sweep", "schedule_sweep", "slow_dynamics", "fast_dynamics", "noisy_sim", "bound_check")),
    "iterations": "outer iterations per replication (two cost evaluations each)",
    "replications": "number of seeded runs when `seeds` is not given",
    "seed": "first seed; runs use seed, seed+1, ...",
    "seeds": f"explicit distinct seeds (env {SEEDS_ENV}=1,2,3 overrides)",
    "switch": "when n changes: 'mid' between the two queries, 'update' after the step",
    "track_regret": "compute cumulative regret per iteration (golden-section per row)",
    "dynamics": "list of {iteration, n}; the switch happens in the iteration after `iteration` updates",
    "dynamics[].iteration": "completed updates before the switching iteration (0 sets the initial n)",
    "dynamics[].n": "new number of WiFi stations",
    "learner.omega": "exploration scale (delta_k = omega / (k+1)^exponent); constant delta if constant",
    "learner.exponent": "exploration decay exponent p",
    "learner.eta": "step-size scale (eta_k = eta / (k+1)^eta_exponent); constant eta if constant",
    "learner.eta_exponent": "step-size decay exponent",
    "learner.constant": "freeze eta and delta at their scales",
    "learner.lower": "lower end of the decision interval (log seconds)",
    "learner.upper": "upper end of the decision interval (log seconds)",
    "learner.y0": "initial center; null = midpoint",
    "learner.lipschitz": "gradient bound G for truncation; null = derived from the environment",
    "learner.truncate": "replace outlying gradient estimates by the last applied one",
    "learner.truncation_factor": "threshold multiplier on G (or on the last gradient when G is unknown)",
    "learner.truncation_threshold": "absolute truncation threshold, overrides the factor",
    "environment.kind": "'analytic' (exact cost) or 'sim' (packet-simulator batches)",
    "environment.n": "number of WiFi stations",
    "environment.t_on": "LTE on-period [s]",
    "environment.tau": "per-slot WiFi transmit probability",
    "environment.sigma": "idle slot [s]",
    "environment.phy_rate": "WiFi payload rate [bit/s]",
    "environment.overhead": "per-frame overhead [s]",
    "environment.packets": "packets per aggregated frame",
    "environment.packet_bytes": "bytes per packet",
    "environment.gamma": "LTE subframe [s]",
    "environment.lte_rate": "LTE rate r [bit/s]",
    "environment.p_txa": "LTE/WiFi collision probability; null = 1-(1-tau)^n",
    "environment.batch": "simulated seconds per cost evaluation (sim only)",
    "environment.toff_width": "off-periods ~ U[1-w, 1+w] * mean (sim only)",
    "output.dir": "output directory",
    "output.prefix": "output file prefix",
    "output.events": "also write per-round NDJSON event logs",
    "sweep.omega": "omega values for `sweep`",
    "sweep.exponent": "exploration exponents for `sweep`",
    "sweep.n": "station counts for `sweep`",
}

def _coerce(tp, value, path):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union or origin is types.UnionType:
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _coerce(inner[0], value, path)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list, got {type(value).__name__}")
        return [_coerce(args[0], v, f"{path}[{i}]") for i, v in enumerate(value)]
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, path)
    if value is None:
        raise ConfigError(path, "must not be null")
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool):
            raise ConfigError(path, f"expected a number, got {value!r}")
        try:
            return float(value)  # accepts YAML-1.1 strings such as 9e-6
        except (TypeError, ValueError):
            raise ConfigError(path, f"expected a number, got {value!r}") from None
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    raise ConfigError(path, f"unsupported type {tp}")


def _build(cls, data, path=""):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"{path}.{key}" if path else str(key), "unknown key")
    kwargs = {key: _coerce(hints[key], value, f"{path}.{key}" if path else key) for key, value in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None


def parse(doc: dict, environ=None) -> RunConfig:
    """Validate a config mapping; plan keys live at the top level next to `output` and `sweep`."""
    if not isinstance(doc, dict):
        raise ConfigError("", "config root must be a mapping")
    environ = os.environ if environ is None else environ
    plan_doc = {k: v for k, v in doc.items() if k not in ("output", "sweep")}
    if environ.get(SEEDS_ENV):
        try:
            plan_doc["seeds"] = [int(s) for s in environ[SEEDS_ENV].split(",") if s.strip()]
        except ValueError:
            raise ConfigError("seeds", f"{SEEDS_ENV} must be a comma-separated list of integers") from None
    plan = _build(ExperimentPlan, plan_doc)
    _validate_plan(plan)
    return RunConfig(plan, _build(OutputConfig, doc.get("output"), "output"),
                     _build(SweepConfig, doc.get("sweep"), "sweep"))


def _validate_plan(plan: ExperimentPlan):
    checks = [
        ("iterations", plan.iterations >= 0, "must be >= 0"),
        ("replications", plan.replications >= 1 or plan.seeds, "must be >= 1"),
        ("learner.omega", plan.learner.omega > 0, "must be positive"),
        ("learner.eta", plan.learner.eta > 0, "must be positive"),
        ("learner.upper", plan.learner.upper > plan.learner.lower, "must exceed learner.lower"),
        ("learner.omega", plan.learner.omega <= (plan.learner.upper - plan.learner.lower) / 2,
         "initial exploration radius exceeds half the interval"),
        ("environment.kind", plan.environment.kind in ("analytic", "sim"), "must be 'analytic' or 'sim'"),
        ("environment.n", plan.environment.n >= 1, "must be >= 1"),
        ("environment.tau", 0 < plan.environment.tau <= 1, "must lie in (0, 1]"),
        ("environment.batch", plan.environment.batch > 0, "must be positive"),
    ]
    for i, ev in enumerate(plan.dynamics):
        checks.append((f"dynamics[{i}].n", ev.n >= 1, "must be >= 1"))
        checks.append((f"dynamics[{i}].iteration", ev.iteration >= 0, "must be >= 0"))
    for path, ok, msg in checks:
        if not ok:
            raise ConfigError(path, msg)


def to_dict(cfg: RunConfig) -> dict:
    doc = dataclasses.asdict(cfg.plan)
    doc["output"] = dataclasses.asdict(cfg.output)
    doc["sweep"] = dataclasses.asdict(cfg.sweep)
    return doc


def dumps(cfg: RunConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def loads(text: str, environ=None) -> RunConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"not valid YAML: {exc}") from None
    return parse(doc if doc is not None else {}, environ)


def load(path, environ=None) -> RunConfig:
    with open(path) as fh:
        return loads(fh.read(), environ)


def plan_hash(plan: ExperimentPlan) -> str:
    blob = json.dumps(dataclasses.asdict(plan), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _type_name(tp) -> str:
    if isinstance(tp, type) and not typing.get_args(tp):
        return tp.__name__
    return str(tp).replace("typing.", "").replace("coexbandit.experiments.", "")


def _reference_rows(cls, prefix=""):
    hints = typing.get_type_hints(cls)
    for f in dataclasses.fields(cls):
        path = f"{prefix}{f.name}"
        tp = hints[f.name]
        if dataclasses.is_dataclass(tp):
            yield from _reference_rows(tp, path + ".")
            continue
        if f.default is not dataclasses.MISSING:
            default = f.default
        elif f.default_factory is not dataclasses.MISSING:
            default = f.default_factory()
        else:
            default = None
        tname = _type_name(tp)
        yield path, tname, default, HELP.get(path, "")
        if path == "dynamics":
            for sub in dataclasses.fields(DynamicsEvent):
                p = f"dynamics[].{sub.name}"
                yield p, "int", "-", HELP.get(p, "")


def reference() -> str:
    """Human-readable list of every config key, its type, default and meaning."""
    lines = ["# Run configuration reference (YAML).", "# key | type | default | meaning", ""]
    for path, tname, default, text in _reference_rows(ExperimentPlan):
        lines.append(f"{path} | {tname} | {json.dumps(default) if default != '-' else '-'} | {text}")
    for name, cls in (("output", OutputConfig), ("sweep", SweepConfig)):
        for path, tname, default, text in _reference_rows(cls, name + "."):
            lines.append(f"{path} | {tname} | {json.dumps(default)} | {text}")
    return "\n".join(lines) + "\n"


def default_config(scenario: str | None = None) -> RunConfig:
    from .experiments import preset

    plan = preset(scenario) if scenario else ExperimentPlan()
    return RunConfig(plan, OutputConfig(), SweepConfig())


__all__ = [
    "ConfigError", "RunConfig", "OutputConfig", "SweepConfig", "parse", "load", "loads", "dumps",
    "to_dict", "plan_hash", "reference", "default_config",
]
