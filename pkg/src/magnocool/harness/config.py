"""Run configuration: YAML text validated against a nested schema with defaults."""
from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from ..dynamics import PERIOD, bipartite_system, tripartite_system
from ..env import (
    COMPLEX_COUPLING,
    INVERSE_QUOTIENT,
    INVERSE_QUOTIENT_MINUS_MAGNON,
    NONNEGATIVE,
    OBS_TRANSFORMS,
    EnvConfig,
    RewardSpec,
)
from ..sac.agent import Hyperparams
from ..sac.train import TrainSchedule


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Field:
    kind: str  # float, int, bool, str, float_list, optional_float, optional_int
    default: Any
    choices: tuple = ()
    doc: str = ""


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats without a dot (``1e-5``)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
    |\.[0-9_]+(?:[eE][-+][0-9]+)?
    |[-+]?\.(?:inf|Inf|INF)
    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


def parse_yaml(text: str):
    return yaml.load(text, Loader=_Loader)


F = Field
SCHEMA: dict = {
    "kind": F("str", "bipartite", ("bipartite", "tripartite"), "which system family"),
    "seed": F("int", 0, doc="seed of the run's single random generator"),
    "system": {
        "n_thermal": F("float", 100.0, doc="phonon bath occupancy n_T"),
        "delta_m": F("float", 1.0, doc="bipartite magnon detuning"),
        "kappa_m": F("float", 0.1, doc="bipartite magnon damping"),
        "kappa_b": F("float", 1e-5, doc="phonon damping (both systems)"),
        "n_magnon": F("float", 0.0, doc="magnon bath occupancy"),
        "rwa": F("bool", False, doc="bipartite: keep only the beam-splitter part"),
        "omega_m": F("float", 1e3, doc="tripartite magnon frequency"),
        "delta_a": F("float", 1.0, doc="tripartite photon detuning"),
        "kappa_a": F("float", 0.1, doc="tripartite photon damping"),
        "kappa_m_tri": F("float", 1e-3, doc="tripartite magnon damping"),
        "n_photon": F("float", 0.0, doc="photon bath occupancy"),
        "damped": F("bool", True, doc="tripartite: False drops all damping"),
    },
    "env": {
        "steps_per_episode": F("optional_int", None, doc="default 50 (bipartite) / 150 (tripartite)"),
        "dt_periods": F("float", 0.1, doc="control hold time in phonon periods"),
        "control_max": F("optional_float", None, doc="G_max/sqrt2 (bipartite, default 5) or Omega_max (tripartite, default 10)"),
        "magnon_weight": F("float", 10.0, doc="lambda in r = 1/n_b - lambda <m^dag m> (tripartite)"),
        "obs_transform": F("str", "signed_log", OBS_TRANSFORMS),
    },
    "agent": {
        "hidden": F("int_list", [512, 256, 256, 128]),
        "lr": F("float", 1e-4),
        "buffer_size": F("int", 1_000_000),
        "batch_size": F("int", 512),
        "gamma": F("float", 0.99),
        "tau": F("float", 0.005),
        "alpha0": F("float", 0.1),
        "adaptive_alpha": F("bool", True),
        "target_entropy": F("optional_float", None, doc="default -action_dim"),
        "warmup_steps": F("int", 1000),
        "updates_per_step": F("int", 1),
        "grad_clip": F("optional_float", 10.0),
        "noise_std_start": F("optional_float", None, doc="default 0.1 tripartite, 0 bipartite"),
        "noise_std_end": F("optional_float", None, doc="default 0.01 tripartite, 0 bipartite"),
        "bootstrap_on_timeout": F("bool", True),
    },
    "train": {
        "episodes": F("int", 10_000),
        "eval_every": F("int", 50),
        "eval_episodes": F("int", 3),
    },
    "evaluate": {
        "episodes": F("int", 1),
        "target_quotient": F("float", 1e-2, doc="threshold for the first-crossing time tau_DRL"),
    },
    "simulate": {
        "schedule": F("str", "zero", ("zero", "constant", "stirap"), "builtin schedule if no --schedule file"),
        "steps": F("optional_int", None, doc="default: env.steps_per_episode"),
        "constant": F("float_list", [0.0], doc="constant control values (bipartite: [Re G, Im G])"),
        "pulse_peak": F("float", 6.0),
        "pulse_center_s": F("float", 0.3, doc="fraction of horizon"),
        "pulse_delay": F("float", 0.15, doc="fraction of horizon"),
        "pulse_width": F("float", 0.12, doc="fraction of horizon"),
    },
    "baseline": {
        "g_lo": F("float", 0.02),
        "g_hi": F("float", 0.3),
        "per_decade": F("int", 15),
        "horizon_periods": F("float", 200.0),
        "target_quotient": F("float", 2e-4, doc="'reaches 1e-4' read as within a factor of 2"),
        "criterion": F("str", "settle", ("settle", "first")),
        "omega_max": F("float_list", [6.0, 8.0, 15.0]),
        "restarts": F("int", 20),
        "horizon_steps": F("optional_int", None, doc="default: 2 x Raman time limit"),
        "optimize_peaks": F("bool", False),
        "limits_omega_m": F("float_list", [1e3, 1e5]),
        "limits_omega": F("float_list", [6.0, 8.0, 10.0, 15.0, 100.0]),
    },
}


def defaults() -> dict:
    def walk(node):
        return {k: walk(v) if isinstance(v, dict) else copy.deepcopy(v.default) for k, v in node.items()}
    return walk(SCHEMA)


def _line_map(text: str) -> dict[tuple, int]:
    """Dotted key path -> 1-based line number in the YAML source."""
    out = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = path + (k.value,)
                out[p] = k.start_mark.line + 1
                walk(v, p)

    try:
        walk(yaml.compose(text, Loader=_Loader), ())
    except yaml.YAMLError:
        pass
    return out


def _coerce(field: Field, value, where: str):
    def bad(expect):
        return ConfigError(f"{where}: expected {expect}, got {value!r}")

    k = field.kind
    if value is None and k.startswith("optional"):
        return None
    if k in ("float", "optional_float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad("a number")
        return float(value)
    if k in ("int", "optional_int"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad("an integer")
        return int(value)
    if k == "bool":
        if not isinstance(value, bool):
            raise bad("true/false")
        return value
    if k == "str":
        if not isinstance(value, str):
            raise bad("a string")
        if field.choices and value not in field.choices:
            raise bad(f"one of {list(field.choices)}")
        return value
    if k in ("float_list", "int_list"):
        seq = value if isinstance(value, list) else [value]
        cast = float if k == "float_list" else int
        out = []
        for v in seq:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or (cast is int and not isinstance(v, int)):
                raise bad("a list of numbers")
            out.append(cast(v))
        return out
    raise AssertionError(k)


def validate(raw: dict | None, source_text: str | None = None, source_name: str = "<config>") -> dict:
    """Merge ``raw`` over the defaults, rejecting unknown keys and bad types."""
    lines = _line_map(source_text) if source_text else {}
    cfg = defaults()

    def where(path):
        ln = lines.get(tuple(path))
        return f"{source_name}:{ln}: {'.'.join(path)}" if ln else f"{source_name}: {'.'.join(path)}"

    def merge(schema, target, node, path):
        if not isinstance(node, dict):
            raise ConfigError(f"{where(path)}: expected a mapping")
        for key, value in node.items():
            p = path + [str(key)]
            if key not in schema:
                raise ConfigError(f"{where(p)}: unknown key (allowed: {', '.join(schema)})")
            if isinstance(schema[key], dict):
                merge(schema[key], target[key], value if value is not None else {}, p)
            else:
                target[key] = _coerce(schema[key], value, where(p))

    merge(SCHEMA, cfg, raw or {}, [])
    return cfg


def load_config(path) -> tuple[dict, dict | None]:
    """Read a YAML config or a run manifest; returns ``(config, manifest_or_None)``."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: JSON parse error: {exc.msg}") from None
        if isinstance(raw, dict) and "manifest_version" in raw:
            return validate(raw["config"], None, f"{path} (manifest)"), raw
        return validate(raw, None, str(path)), None
    try:
        raw = parse_yaml(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        at = f":{mark.line + 1}:{mark.column + 1}" if mark else ""
        raise ConfigError(f"{path}{at}: YAML parse error: {getattr(exc, 'problem', exc)}") from None
    if isinstance(raw, dict) and "manifest_version" in raw:
        return validate(raw["config"], None, f"{path} (manifest)"), raw
    return validate(raw, text, str(path)), None


def merge_overrides(cfg: dict, overrides: dict) -> dict:
    """Apply a nested partial dict (e.g. from a recipe) and revalidate."""
    out = copy.deepcopy(cfg)

    def rec(t, o):
        for k, v in o.items():
            if isinstance(v, dict):
                rec(t.setdefault(k, {}), v)
            else:
                t[k] = v

    rec(out, overrides)
    return validate(out)


def dump_yaml(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=False, default_flow_style=None)


def describe_defaults() -> str:
    """Commented YAML of every key with its default."""
    lines = []

    def walk(node, indent):
        for k, v in node.items():
            pad = "  " * indent
            if isinstance(v, dict):
                lines.append(f"{pad}{k}:")
                walk(v, indent + 1)
            else:
                val = json.dumps(v.default)
                note = v.doc + (f" (choices: {', '.join(v.choices)})" if v.choices else "")
                lines.append(f"{pad}{k}: {val}" + (f"  # {note}" if note else ""))

    walk(SCHEMA, 0)
    return "\n".join(lines) + "\n"


# -- builders ----------------------------------------------------------------

def build_system(cfg: dict, for_baseline: bool = False):
    s = cfg["system"]
    if cfg["kind"] == "bipartite":
        return bipartite_system(delta_m=s["delta_m"], kappa_m=s["kappa_m"], kappa_b=s["kappa_b"],
                                n_thermal=s["n_thermal"], n_magnon=s["n_magnon"], rwa=s["rwa"])
    damp = (s["kappa_a"], s["kappa_m_tri"], s["kappa_b"]) if s["damped"] else None
    return tripartite_system(omega_m=s["omega_m"], delta_a=s["delta_a"], dampings=damp,
                             n_thermal=s["n_thermal"], n_magnon=s["n_magnon"], n_photon=s["n_photon"])


def build_env_config(cfg: dict) -> EnvConfig:
    e, s = cfg["env"], cfg["system"]
    system = build_system(cfg)
    n_t = s["n_thermal"]
    if cfg["kind"] == "bipartite":
        steps = e["steps_per_episode"] or 50
        cmax = 5.0 if e["control_max"] is None else e["control_max"]
        return EnvConfig(system, steps, e["dt_periods"] * PERIOD, (cmax * np.sqrt(2),), COMPLEX_COUPLING,
                         RewardSpec(INVERSE_QUOTIENT, n_t), n_t, e["obs_transform"], cfg["seed"],
                         f"bipartite-G{cmax:g}")
    steps = e["steps_per_episode"] or 150
    cmax = 10.0 if e["control_max"] is None else e["control_max"]
    return EnvConfig(system, steps, e["dt_periods"] * PERIOD, (cmax, cmax), NONNEGATIVE,
                     RewardSpec(INVERSE_QUOTIENT_MINUS_MAGNON, n_t, e["magnon_weight"]), n_t,
                     e["obs_transform"], cfg["seed"], f"tripartite-wm{s['omega_m']:g}-O{cmax:g}")


def build_hyperparams(cfg: dict) -> Hyperparams:
    a = dict(cfg["agent"])
    tri = cfg["kind"] == "tripartite"
    if a["noise_std_start"] is None:
        a["noise_std_start"] = 0.1 if tri else 0.0
    if a["noise_std_end"] is None:
        a["noise_std_end"] = 0.01 if tri else 0.0
    a["hidden"] = tuple(a["hidden"])
    return Hyperparams(seed=cfg["seed"], **a)


def build_schedule(cfg: dict) -> TrainSchedule:
    return TrainSchedule(**cfg["train"])
