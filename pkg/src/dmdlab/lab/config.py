"""JSON run configurations with key-aware validation.

Schema violations raise ConfigError naming the offending key; the CLI turns
that into exit code 2. The LAB_SEED environment variable overrides the seed
at load time and is baked into snapshots so that a snapshot re-runs
identically regardless of the environment.
"""

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..distill import DistillConfig, Mode, Regularizer, ScheduleConfig, SchedulePolicy


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key


RUN_REQUIRED = ["mode", "schedule_policy", "alpha", "lambda", "n_steps",
                "ttur_ratio", "regularizer", "w_gan", "normalizer_on", "seed",
                "iterations", "batch"]

RUN_OPTIONAL = {
    "tau_ca_range": None,
    "tau_dm_range": None,
    "w_meanvar": 1.0,
    "eval_every": 100,
    "eval_n": 1024,
    "eval_ref_n": 10_000,
    "data": "gmm8",
    "teacher": None,
    "out_dir": None,
    "lr_gen": 1e-4,
    "lr_fake": 1e-4,
    "precision": "fp64",
    "backward_sim_fresh_noise": True,
    "meanvar_mu_target": None,
    "meanvar_var_target": None,
    "radius_mult": 3.0,
    "step_grid": None,
    "observer_mode": False,
}

TEACHER_REQUIRED = ["iterations", "batch", "lr", "p_uncond", "seed"]
TEACHER_OPTIONAL = {
    "data": "gmm8",
    "out": "teacher.ckpt",
    "log": None,
    "lr_final": 1e-5,
    "ema_decay": None,
    "tau_law": "uniform",
    "precision": "fp64",
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def to_snapshot(self) -> dict:
        return dict(self.values)

    def distill_config(self) -> DistillConfig:
        v = self.values
        return DistillConfig(
            alpha=v["alpha"], lam=v["lambda"], n_steps=v["n_steps"],
            step_grid=tuple(v["step_grid"]) if v["step_grid"] else None,
            ttur_ratio=v["ttur_ratio"], mode=Mode(v["mode"]),
            regularizer=Regularizer(v["regularizer"]),
            normalizer_on=v["normalizer_on"], w_gan=v["w_gan"],
            w_meanvar=v["w_meanvar"], batch=v["batch"], lr_gen=v["lr_gen"],
            lr_fake=v["lr_fake"],
            backward_sim_fresh_noise=v["backward_sim_fresh_noise"],
            meanvar_mu_target=v["meanvar_mu_target"],
            meanvar_var_target=v["meanvar_var_target"],
        )

    def schedule_config(self) -> ScheduleConfig:
        v = self.values
        return ScheduleConfig(
            policy=SchedulePolicy(v["schedule_policy"]),
            tau_ca_range=tuple(v["tau_ca_range"]) if v["tau_ca_range"] else None,
            tau_dm_range=tuple(v["tau_dm_range"]) if v["tau_dm_range"] else None,
        )


@dataclass
class TeacherRunConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def to_snapshot(self) -> dict:
        return dict(self.values)


def _check_number(key, value, kind=float, lo=None, hi=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if kind is int and int(value) != value:
        raise ConfigError(key, f"expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(key, f"must be >= {lo}, got {value}")
    if hi is not None and value > hi:
        raise ConfigError(key, f"must be <= {hi}, got {value}")


def _check_range(key, value):
    if value is None:
        return None
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(x, (int, float)) for x in value)):
        raise ConfigError(key, "expected [lo, hi]")
    lo, hi = float(value[0]), float(value[1])
    if not (0.0 <= lo < hi <= 1.0):
        raise ConfigError(key, "needs 0 <= lo < hi <= 1")
    return [lo, hi]


def _merge(raw: dict, required, optional, path):
    if not isinstance(raw, dict):
        raise ConfigError("<root>", f"{path}: top level must be a JSON object")
    values = {}
    for key in required:
        if key not in raw:
            raise ConfigError(key, "missing required key")
        values[key] = raw[key]
    for key, default in optional.items():
        values[key] = raw.get(key, default)
    unknown = set(raw) - set(required) - set(optional)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    return values


def validate_run_values(values: dict) -> dict:
    if values["mode"] not in {m.value for m in Mode}:
        raise ConfigError("mode", f"must be one of {[m.value for m in Mode]}")
    if values["schedule_policy"] not in {p.value for p in SchedulePolicy}:
        raise ConfigError("schedule_policy",
                          f"must be one of {[p.value for p in SchedulePolicy]}")
    if values["regularizer"] not in {r.value for r in Regularizer}:
        raise ConfigError("regularizer",
                          f"must be one of {[r.value for r in Regularizer]}")
    _check_number("alpha", values["alpha"], lo=0.0)
    _check_number("lambda", values["lambda"])
    if values["lambda"] <= 0:
        raise ConfigError("lambda", "must be > 0")
    _check_number("n_steps", values["n_steps"], kind=int, lo=1)
    _check_number("ttur_ratio", values["ttur_ratio"], kind=int, lo=0)
    _check_number("w_gan", values["w_gan"], lo=0.0)
    _check_number("w_meanvar", values["w_meanvar"], lo=0.0)
    if not isinstance(values["normalizer_on"], bool):
        raise ConfigError("normalizer_on", "expected true/false")
    if not isinstance(values["backward_sim_fresh_noise"], bool):
        raise ConfigError("backward_sim_fresh_noise", "expected true/false")
    if not isinstance(values["observer_mode"], bool):
        raise ConfigError("observer_mode", "expected true/false")
    _check_number("seed", values["seed"], kind=int, lo=0)
    _check_number("iterations", values["iterations"], kind=int, lo=1)
    _check_number("batch", values["batch"], kind=int, lo=1)
    _check_number("eval_every", values["eval_every"], kind=int, lo=1)
    _check_number("eval_n", values["eval_n"], kind=int, lo=4)
    _check_number("eval_ref_n", values["eval_ref_n"], kind=int, lo=4)
    _check_number("lr_gen", values["lr_gen"], lo=1e-12)
    _check_number("lr_fake", values["lr_fake"], lo=1e-12)
    _check_number("radius_mult", values["radius_mult"], lo=1e-9)
    if values["precision"] not in ("fp64", "fp32"):
        raise ConfigError("precision", "must be 'fp64' or 'fp32'")
    values["tau_ca_range"] = _check_range("tau_ca_range", values["tau_ca_range"])
    values["tau_dm_range"] = _check_range("tau_dm_range", values["tau_dm_range"])
    if values["step_grid"] is not None:
        grid = values["step_grid"]
        if (not isinstance(grid, (list, tuple)) or not grid
                or any(not isinstance(x, (int, float)) for x in grid)):
            raise ConfigError("step_grid", "expected a list of levels")
    if values["meanvar_var_target"] is not None:
        _check_number("meanvar_var_target", values["meanvar_var_target"], lo=1e-12)
    # integers arrive as floats from JSON tools occasionally; normalize
    for key in ("n_steps", "ttur_ratio", "seed", "iterations", "batch",
                "eval_every", "eval_n", "eval_ref_n"):
        values[key] = int(values[key])
    return values


def _apply_env_seed(values: dict) -> dict:
    env = os.environ.get("LAB_SEED")
    if env is not None:
        try:
            values["seed"] = int(env)
        except ValueError:
            raise ConfigError("seed", f"LAB_SEED must be an integer, got {env!r}")
    return values


def run_config_from_dict(raw: dict) -> RunConfig:
    values = _merge(raw, RUN_REQUIRED, RUN_OPTIONAL, "run config")
    values = validate_run_values(_apply_env_seed(values))
    # construct once so invalid combinations surface as ConfigError here
    cfg = RunConfig(values)
    try:
        cfg.distill_config().validate()
        cfg.schedule_config()
    except ValueError as e:
        raise ConfigError("<combination>", str(e))
    return cfg


def load_run_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError("<json>", f"{path}: {e}")
    return run_config_from_dict(raw)


def teacher_config_from_dict(raw: dict) -> TeacherRunConfig:
    values = _merge(raw, TEACHER_REQUIRED, TEACHER_OPTIONAL, "teacher config")
    values = _apply_env_seed(values)
    _check_number("iterations", values["iterations"], kind=int, lo=1)
    _check_number("batch", values["batch"], kind=int, lo=1)
    _check_number("lr", values["lr"], lo=1e-12)
    _check_number("seed", values["seed"], kind=int, lo=0)
    if not isinstance(values["p_uncond"], (int, float)) or not 0 < values["p_uncond"] < 1:
        raise ConfigError("p_uncond", "must lie in (0, 1)")
    if values["precision"] not in ("fp64", "fp32"):
        raise ConfigError("precision", "must be 'fp64' or 'fp32'")
    for key in ("iterations", "batch", "seed"):
        values[key] = int(values[key])
    return TeacherRunConfig(values)


def load_teacher_config(path) -> TeacherRunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError("<json>", f"{path}: {e}")
    return teacher_config_from_dict(raw)
