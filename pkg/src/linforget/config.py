"""Run configuration files: one strict JSON document per run.

Every field is validated before any computation starts and unknown keys are
rejected outright, so a config file is a complete, canonical record of what
a run did.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .experiments import SweepSpec
from .model import ModelConfig, W_MODES


class ConfigError(ValueError):
    """The configuration document is malformed or violates a model premise."""


DEFAULT_CHECKS = {
    "mc_consistency_min_rate": 0.99,
    "bound_min_rate": 0.99,
    "trend_min_spearman": 0.9,
    "ratio_halving": True,
    "gd_oracle": {"enabled": True, "d": 3, "n": 20, "p": 60, "gamma": 1.0,
                  "instances": 50, "rel_tol": 1e-6},
    "equivalence": {"enabled": True, "d": 5, "n": 50, "p": 1000, "gamma": 1.0,
                    "trials": 500, "max_se": 3.0},
    "sv_concentration": {"enabled": True, "d": 20, "n": 400, "trials": 500,
                         "min_rate": 0.99},
    "determinism_probe": True,
}

_SWEEP_KEYS = {"d", "n", "p", "p_over_n", "gamma", "points", "theta_norm", "w_mode",
               "trials_per_point", "n_test", "root_seed", "model_variant"}
_TOP_KEYS = {"sweep", "checks", "output", "verbosity"}
_OUTPUT_KEYS = {"figure"}


@dataclass
class RunConfig:
    spec: SweepSpec
    checks: dict
    figure: bool = True
    verbosity: int = 1
    source: dict = field(default_factory=dict)


def _reject_unknown(mapping: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {', '.join(unknown)}")


def _positive_int_list(raw, name: str) -> list[int]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"sweep.{name} must be a non-empty list")
    out = []
    for v in raw:
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ConfigError(f"sweep.{name} entries must be positive integers, got {v!r}")
        out.append(v)
    return out


def _positive_float_list(raw, name: str) -> list[float]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"sweep.{name} must be a non-empty list")
    out = []
    for v in raw:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            raise ConfigError(f"sweep.{name} entries must be positive numbers, got {v!r}")
        out.append(float(v))
    return out


def _build_spec(sweep: dict) -> SweepSpec:
    _reject_unknown(sweep, _SWEEP_KEYS, "sweep")
    for key in ("trials_per_point", "n_test", "root_seed"):
        if key not in sweep:
            raise ConfigError(f"sweep.{key} is required")
        v = sweep[key]
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"sweep.{key} must be an integer, got {v!r}")
    theta_norm = sweep.get("theta_norm", 1.0)
    if isinstance(theta_norm, bool) or not isinstance(theta_norm, (int, float)):
        raise ConfigError(f"sweep.theta_norm must be a number, got {theta_norm!r}")
    w_mode = sweep.get("w_mode", "axis-aligned")
    if w_mode not in W_MODES:
        raise ConfigError(f"sweep.w_mode must be one of {W_MODES}, got {w_mode!r}")
    variant = sweep.get("model_variant", "latent")

    try:
        if "points" in sweep:
            for k in ("d", "n", "p", "p_over_n", "gamma"):
                if k in sweep:
                    raise ConfigError("sweep.points excludes the per-axis lists")
            grid = []
            for i, pt in enumerate(sweep["points"]):
                if not isinstance(pt, dict):
                    raise ConfigError(f"sweep.points[{i}] must be an object")
                _reject_unknown(pt, {"d", "n", "p", "gamma"}, f"sweep.points[{i}]")
                grid.append(ModelConfig.standard(
                    int(pt["d"]), int(pt["n"]), int(pt["p"]), float(pt["gamma"]),
                    theta_norm=float(theta_norm), w_mode=w_mode))
            return SweepSpec(grid=tuple(grid),
                             trials_per_point=sweep["trials_per_point"],
                             n_test=sweep["n_test"], root_seed=sweep["root_seed"],
                             model_variant=variant)
        kwargs = {}
        if "p" in sweep:
            kwargs["p"] = _positive_int_list(sweep["p"], "p")
        if "p_over_n" in sweep:
            kwargs["p_over_n"] = _positive_float_list(sweep["p_over_n"], "p_over_n")
        return SweepSpec.from_axes(
            d=_positive_int_list(sweep.get("d"), "d"),
            n=_positive_int_list(sweep.get("n"), "n"),
            gamma=_positive_float_list(sweep.get("gamma"), "gamma"),
            theta_norm=float(theta_norm), w_mode=w_mode,
            trials_per_point=sweep["trials_per_point"], n_test=sweep["n_test"],
            root_seed=sweep["root_seed"], model_variant=variant, **kwargs)
    except ConfigError:
        raise
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"sweep section is incomplete: {exc}") from exc
    except ValueError as exc:
        # model premises (d >= 1, n >= d, p >= n, gamma > 0) surface here
        raise ConfigError(str(exc)) from exc


def _merge_checks(raw: dict) -> dict:
    _reject_unknown(raw, set(DEFAULT_CHECKS), "checks")
    merged = {}
    for key, default in DEFAULT_CHECKS.items():
        value = raw.get(key, default)
        if isinstance(default, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"checks.{key} must be an object")
            _reject_unknown(value, set(default), f"checks.{key}")
            merged[key] = {**default, **value}
        else:
            if not isinstance(value, type(default)) and not (
                    isinstance(default, float) and isinstance(value, (int, float))
                    and not isinstance(value, bool)):
                raise ConfigError(f"checks.{key} has the wrong type: {value!r}")
            merged[key] = value
    return merged


def load_run_config(path) -> RunConfig:
    """Parse and fully validate a run configuration file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_run_config(raw)


def parse_run_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "top-level")
    if "sweep" not in raw or not isinstance(raw["sweep"], dict):
        raise ConfigError("config needs a 'sweep' object")
    spec = _build_spec(raw["sweep"])
    checks = _merge_checks(raw.get("checks", {}))
    output = raw.get("output", {})
    if not isinstance(output, dict):
        raise ConfigError("output must be an object")
    _reject_unknown(output, _OUTPUT_KEYS, "output")
    figure = output.get("figure", True)
    if not isinstance(figure, bool):
        raise ConfigError("output.figure must be a boolean")
    verbosity = raw.get("verbosity", 1)
    if isinstance(verbosity, bool) or not isinstance(verbosity, int):
        raise ConfigError("verbosity must be an integer")
    return RunConfig(spec=spec, checks=checks, figure=figure,
                     verbosity=verbosity, source=raw)
