"""JSON experiment configuration: schema, defaults, validation.

Unknown keys are rejected and errors carry the dotted path of the offending
field.  All defaults reproduce the canonical simulation setup: a 20-slot
buffer, 21 load levels, 2 cores at rate 3, holding cost 0.12, discount 0.95,
24 users at per-user rate 0.25, the banded running-cost and penalty tables,
and the {1: 0.6, 2: 0.4} resource distribution.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .evaluate import EvalConfig
from .learners import BaselinePolicy, QLearningConfig
from .model import CostModel, ModelParams, ResourceDist
from .salmut import SalmutConfig
from .scenarios import Scenario


class ConfigError(Exception):
    def __init__(self, path: str, message: str):
        super().__init__(f"config error at {path}: {message}")
        self.path = path


def default_running_table(levels: int = 20) -> list[float]:
    """Zero when idle, a small reward band at moderate load, high when overloaded."""
    table = []
    for ell in range(levels + 1):
        if ell <= 5:
            table.append(0.0)
        elif ell <= 17:
            table.append(-0.2)
        else:
            table.append(10.0)
    return table


def default_penalty_table(levels: int = 20) -> list[float]:
    """Offloading is cheap once moderately loaded, expensive when nearly idle."""
    return [10.0 if ell < 3 else 1.0 for ell in range(levels + 1)]


def default_config() -> dict[str, Any]:
    return {
        "model": {
            "buffer_capacity": 20,
            "cpu_levels": 20,
            "cores": 2,
            "service_rate": 3.0,
            "discount_beta": 0.95,
            "discount_rate": None,
            "uniformization_rate": None,
        },
        "costs": {
            "holding": 0.12,
            "running": default_running_table(),
            "penalty": default_penalty_table(),
            "strict_monotone": False,
        },
        "resources": {"pmf": [0.6, 0.4]},
        "scenario": {
            "kind": 1,
            "n_users": 24,
            "lambda_low": 0.25,
            "lambda_high": 0.375,
            "phase_fractions": [1.0 / 3.0, 2.0 / 3.0],
            "toggle_period_fraction": 0.01,
            "toggle_prob": 0.1,
            "population_period_fraction": 0.1,
            "leave_prob": 0.05,
            "stay_prob": 0.9,
            "add_prob": 0.05,
        },
        "learner": {
            "kind": "salmut",
            "horizon": 1_000_000,
            "eval_every": 1000,
            "start_state": [0, 0],
            "salmut": {
                "temperature": 5.0,
                "mode": "adam",
                "critic_rate": None,
                "actor_rate": None,
                "adam_beta1": 0.9,
                "adam_beta2": 0.999,
                "critic_epsilon": 1e-8,
                "actor_epsilon": 1e-2,
                "decay_n0": 3000.0,
                "decay_kappa_critic": 0.6,
                "decay_kappa_actor": 1.0,
                "initial_tau": None,
                "paper_literal_sign": False,
            },
            "qlearning": {
                "rate": 0.2,
                "rate_mode": "decay",
                "decay_n0": 50_000.0,
                "decay_kappa": 0.7,
                "epsilon_start": 0.2,
                "epsilon_end": 0.2,
                "epsilon_decay_fraction": 0.5,
            },
            "baseline": {"accept_below": 18},
        },
        "solver": {"tol": 1e-9, "max_iter": 100_000, "self_loop": False},
        "eval": {
            "rollout_length": 1000,
            "n_rollouts": 100,
            "n_sample_paths": 10,
            "eval_every": 1000,
            "initial_state": [0, 0],
            "window": 1000,
            "overload_level": 18,
        },
        "seeds": [0, 1, 2, 3, 4, 5, 6, 7, 8, 9],
        "output_dir": "runs",
    }


def _merge(base: dict, override: dict, path: str) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(here, "unknown key")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, here)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> dict:
    """Defaults, overlaid by a JSON file, overlaid by CLI-style overrides."""
    cfg = default_config()
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(str(path), "file not found")
        except json.JSONDecodeError as exc:
            raise ConfigError(str(path), f"invalid JSON: {exc}")
        if not isinstance(raw, dict):
            raise ConfigError(str(path), "top level must be an object")
        cfg = _merge(cfg, raw, "")
    if overrides:
        cfg = _merge(cfg, overrides, "")
    validate_config(cfg)
    return cfg


def _expect(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(path, message)


def validate_config(cfg: dict) -> None:
    levels = cfg["model"]["cpu_levels"]
    _expect(isinstance(levels, int) and levels >= 1, "model.cpu_levels", "must be an integer >= 1")
    for name in ("running", "penalty"):
        table = cfg["costs"][name]
        _expect(isinstance(table, list), f"costs.{name}", "must be a list")
        _expect(
            len(table) == levels + 1,
            f"costs.{name}",
            f"must have length cpu_levels + 1 = {levels + 1}, got {len(table)}",
        )
    pmf = cfg["resources"]["pmf"]
    _expect(isinstance(pmf, list) and len(pmf) >= 1, "resources.pmf", "must be a non-empty list")
    _expect(abs(sum(pmf) - 1.0) <= 1e-12, "resources.pmf", "must sum to 1")
    _expect(all(p >= 0 for p in pmf), "resources.pmf", "entries must be >= 0")
    kind = cfg["scenario"]["kind"]
    _expect(kind in range(1, 7), "scenario.kind", "must be 1..6")
    lk = cfg["learner"]["kind"]
    _expect(
        lk in ("salmut", "qlearning", "baseline", "dp"),
        "learner.kind",
        "must be one of salmut|qlearning|baseline|dp",
    )
    seeds = cfg["seeds"]
    _expect(
        isinstance(seeds, list) and seeds and all(isinstance(s, int) for s in seeds),
        "seeds",
        "must be a non-empty list of integers",
    )
    horizon = cfg["learner"]["horizon"]
    _expect(isinstance(horizon, int) and horizon >= 1, "learner.horizon", "must be an integer >= 1")


def _wrap(path: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ValueError as exc:
        raise ConfigError(path, str(exc))


def build_model_params(cfg: dict) -> ModelParams:
    return _wrap("model", ModelParams, **cfg["model"])


def build_cost_model(cfg: dict) -> CostModel:
    c = cfg["costs"]
    return _wrap(
        "costs",
        CostModel,
        holding=c["holding"],
        running=c["running"],
        penalty=c["penalty"],
        strict=c["strict_monotone"],
    )


def build_resource_dist(cfg: dict) -> ResourceDist:
    return _wrap("resources", ResourceDist, pmf=cfg["resources"]["pmf"])


def build_scenario(cfg: dict) -> Scenario:
    s = dict(cfg["scenario"])
    s["phase_fractions"] = tuple(s["phase_fractions"])
    return _wrap("scenario", Scenario, **s)


def build_salmut_config(cfg: dict) -> SalmutConfig:
    lrn = cfg["learner"]
    return _wrap(
        "learner.salmut",
        SalmutConfig,
        horizon=lrn["horizon"],
        eval_every=lrn["eval_every"],
        start_state=tuple(lrn["start_state"]),
        **lrn["salmut"],
    )


def build_qlearning_config(cfg: dict) -> QLearningConfig:
    lrn = cfg["learner"]
    return _wrap(
        "learner.qlearning",
        QLearningConfig,
        horizon=lrn["horizon"],
        eval_every=lrn["eval_every"],
        start_state=tuple(lrn["start_state"]),
        **lrn["qlearning"],
    )


def build_baseline(cfg: dict) -> BaselinePolicy:
    return _wrap("learner.baseline", BaselinePolicy, **cfg["learner"]["baseline"])


def build_eval_config(cfg: dict) -> EvalConfig:
    e = dict(cfg["eval"])
    e["initial_state"] = tuple(e["initial_state"])
    return _wrap("eval", EvalConfig, **e)


@dataclass(frozen=True)
class Experiment:
    """Everything a subcommand needs, assembled from one validated config."""

    raw: dict
    params: ModelParams
    costs: CostModel
    resources: ResourceDist
    scenario: Scenario
    eval_config: EvalConfig
    seeds: tuple[int, ...]
    output_dir: Path

    @classmethod
    def from_config(cls, cfg: dict) -> "Experiment":
        return cls(
            raw=cfg,
            params=build_model_params(cfg),
            costs=build_cost_model(cfg),
            resources=build_resource_dist(cfg),
            scenario=build_scenario(cfg),
            eval_config=build_eval_config(cfg),
            seeds=tuple(cfg["seeds"]),
            output_dir=Path(cfg["output_dir"]),
        )

    def planning_rate(self) -> float:
        """Arrival rate for the time-homogeneous planning problem."""
        return self.scenario.initial_aggregate_rate()
