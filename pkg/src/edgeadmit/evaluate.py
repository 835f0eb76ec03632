"""Policy evaluation: discounted-cost rollouts and behavioral metrics.

Rollouts freeze the arrival rate at its value when evaluation starts, so a
policy is always measured against the traffic it currently faces.  The
behavioral comparison instead replays a shared event trace against an
evolving scenario: every policy consumes the same uniform draws, so
differences in overload entries and offload counts are attributable to the
policies alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .learners import BaselinePolicy, baseline_decide
from .model import Action, CostModel, ModelParams, ResourceDist, State
from .scenarios import Scenario, ScenarioState


@dataclass(frozen=True)
class EvalConfig:
    rollout_length: int = 1000
    n_rollouts: int = 100
    n_sample_paths: int = 10
    eval_every: int = 1000
    initial_state: tuple[int, int] = (0, 0)
    window: int = 1000
    overload_level: int = 18

    def __post_init__(self) -> None:
        for name in ("rollout_length", "n_rollouts", "n_sample_paths", "eval_every", "window"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.overload_level < 0:
            raise ValueError("overload_level must be >= 0")


@dataclass(frozen=True)
class MetricsWindow:
    index: int
    cost_discounted: float
    cost_undiscounted: float
    c_ov: int   # steps ending at or above the overload level
    c_off: int  # offload actions taken, forced ones included


@dataclass(frozen=True)
class RolloutResult:
    discounted_cost: float
    windows: tuple[MetricsWindow, ...]

    @property
    def c_ov(self) -> int:
        return sum(w.c_ov for w in self.windows)

    @property
    def c_off(self) -> int:
        return sum(w.c_off for w in self.windows)


@dataclass(frozen=True)
class EvalReport:
    mean: float
    q1: float
    median: float
    q3: float
    n_rollouts: int


# ---------------------------------------------------------------------------
# policies


class TablePolicy:
    """Deterministic action table (planner output or greedy Q extraction)."""

    def __init__(self, table: np.ndarray):
        self.table = np.asarray(table)
        self._full = self.table.shape[0] - 1

    def decide(self, state: State) -> Action:
        if state.x >= self._full:
            return Action.OFFLOAD
        return Action(int(self.table[state.x, state.ell]))


class ThresholdPolicy:
    """Greedy rounding of a real threshold vector: accept iff ell <= floor(tau[x])."""

    def __init__(self, tau: np.ndarray):
        self.tau = np.asarray(tau, dtype=float)
        self._cut = np.floor(self.tau).astype(int)
        self._full = len(self.tau) - 1

    def decide(self, state: State) -> Action:
        if state.x >= self._full:
            return Action.OFFLOAD
        return Action.ACCEPT if state.ell <= self._cut[state.x] else Action.OFFLOAD


class StaticPolicy:
    """The fixed-threshold baseline."""

    def __init__(self, bp: BaselinePolicy, buffer_capacity: int):
        self.bp = bp
        self.buffer_capacity = buffer_capacity

    def decide(self, state: State) -> Action:
        return baseline_decide(state, self.bp, self.buffer_capacity)


class AllOffloadPolicy:
    def decide(self, state: State) -> Action:
        return Action.OFFLOAD


# ---------------------------------------------------------------------------
# rollouts


def rollout(
    policy,
    lam: float,
    params: ModelParams,
    cm: CostModel,
    rd: ResourceDist,
    horizon: int,
    beta: float,
    rng: np.random.Generator,
    initial_state: tuple[int, int] = (0, 0),
    window: int = 1000,
    overload_level: int = 18,
) -> RolloutResult:
    """Simulate ``horizon`` uniformized steps under a frozen arrival rate."""
    X, L = params.buffer_capacity, params.cpu_levels
    k, mu = params.cores, params.service_rate
    run_arr, pen_arr, hold = cm.running, cm.penalty, cm.holding
    cdf = np.cumsum(rd.pmf)
    x, ell = initial_state

    total = 0.0
    disc = 1.0
    windows: list[MetricsWindow] = []
    w_disc = w_undisc = 0.0
    w_ov = w_off = 0
    w_index = 0
    w_fill = 0

    for _ in range(horizon):
        busy = min(x, k) * mu
        if lam == 0.0 and busy == 0.0:
            raise ValueError("no event possible: lam == 0 and empty queue")
        d = lam / (lam + busy)
        if lam > 0.0 and rng.random() <= d:
            a = Action.OFFLOAD if x == X else policy.decide(State(x, ell))
            incurred = hold * max(x - k, 0) + run_arr[ell] + (
                pen_arr[ell] if a == Action.OFFLOAD else 0.0
            )
            if a == Action.ACCEPT:
                r = int(np.searchsorted(cdf, rng.random(), side="right")) + 1
                x, ell = min(x + 1, X), min(ell + r, L)
            else:
                w_off += 1
        else:
            incurred = hold * max(x - k, 0) + run_arr[ell]
            r = int(np.searchsorted(cdf, rng.random(), side="right")) + 1
            x, ell = max(x - 1, 0), max(ell - r, 0)

        total += disc * incurred
        w_disc += disc * incurred
        w_undisc += incurred
        if ell >= overload_level:
            w_ov += 1
        disc *= beta
        w_fill += 1
        if w_fill == window:
            windows.append(MetricsWindow(w_index, w_disc, w_undisc, w_ov, w_off))
            w_index += 1
            w_disc = w_undisc = 0.0
            w_ov = w_off = 0
            w_fill = 0

    if w_fill:
        windows.append(MetricsWindow(w_index, w_disc, w_undisc, w_ov, w_off))
    return RolloutResult(discounted_cost=total, windows=tuple(windows))


def evaluate(
    policy,
    cfg: EvalConfig,
    lam: float,
    params: ModelParams,
    cm: CostModel,
    rd: ResourceDist,
    seed: int,
) -> EvalReport:
    """Mean and quartiles of the discounted cost over independent rollouts."""
    costs = np.empty(cfg.n_rollouts)
    for i in range(cfg.n_rollouts):
        rr = rollout(
            policy,
            lam,
            params,
            cm,
            rd,
            cfg.rollout_length,
            params.discount_beta,
            rngmod.substream(seed, f"rollout-{i}"),
            initial_state=cfg.initial_state,
            window=cfg.window,
            overload_level=cfg.overload_level,
        )
        costs[i] = rr.discounted_cost
    costs.sort()
    q1, med, q3 = np.quantile(costs, (0.25, 0.5, 0.75))
    return EvalReport(
        mean=float(costs.mean()),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        n_rollouts=cfg.n_rollouts,
    )


# ---------------------------------------------------------------------------
# shared-trace behavioral comparison


@dataclass(frozen=True)
class EventTrace:
    """Reproducible uniform draws shared by every compared policy."""

    seed: int
    z: np.ndarray           # event draws
    resource_u: np.ndarray  # resource-size draws

    @classmethod
    def generate(cls, seed: int, horizon: int) -> "EventTrace":
        z = rngmod.substream(seed, "trace-events").random(horizon)
        u = rngmod.substream(seed, "trace-resources").random(horizon)
        z.setflags(write=False)
        u.setflags(write=False)
        return cls(seed=seed, z=z, resource_u=u)


def behavioral_compare(
    policies: dict[str, object],
    scenario: Scenario,
    params: ModelParams,
    cm: CostModel,
    rd: ResourceDist,
    trace: EventTrace,
    window: int = 1000,
    overload_level: int = 18,
    initial_state: tuple[int, int] = (0, 0),
) -> dict[str, tuple[MetricsWindow, ...]]:
    """Replay one event trace under each policy and collect per-window metrics.

    The event at step t is an arrival iff ``z_t <= lam_t / (lam_t + busy)``;
    the threshold is state-dependent, so trajectories diverge across
    policies while consuming identical randomness.
    """
    horizon = len(trace.z)
    lam_t = np.empty(horizon)
    ss = ScenarioState.create(scenario, horizon, trace.seed)
    lam_t[0] = ss.lam
    for t in range(1, horizon):
        ss.advance()
        lam_t[t] = ss.lam

    X, L = params.buffer_capacity, params.cpu_levels
    k, mu = params.cores, params.service_rate
    run_arr, pen_arr, hold = cm.running, cm.penalty, cm.holding
    beta = params.discount_beta
    cdf = np.cumsum(rd.pmf)
    resources = np.searchsorted(cdf, trace.resource_u, side="right") + 1

    out: dict[str, tuple[MetricsWindow, ...]] = {}
    for name, policy in policies.items():
        x, ell = initial_state
        windows: list[MetricsWindow] = []
        w_disc = w_undisc = 0.0
        w_ov = w_off = 0
        w_index = w_fill = 0
        disc = 1.0
        for t in range(horizon):
            lam = lam_t[t]
            busy = min(x, k) * mu
            if lam == 0.0 and busy == 0.0:
                raise ValueError("no event possible: lam == 0 and empty queue")
            if lam > 0.0 and trace.z[t] <= lam / (lam + busy):
                a = Action.OFFLOAD if x == X else policy.decide(State(x, ell))
                incurred = hold * max(x - k, 0) + run_arr[ell] + (
                    pen_arr[ell] if a == Action.OFFLOAD else 0.0
                )
                if a == Action.ACCEPT:
                    r = int(resources[t])
                    x, ell = min(x + 1, X), min(ell + r, L)
                else:
                    w_off += 1
            else:
                incurred = hold * max(x - k, 0) + run_arr[ell]
                r = int(resources[t])
                x, ell = max(x - 1, 0), max(ell - r, 0)
            w_disc += disc * incurred
            w_undisc += incurred
            if ell >= overload_level:
                w_ov += 1
            disc *= beta
            w_fill += 1
            if w_fill == window:
                windows.append(MetricsWindow(w_index, w_disc, w_undisc, w_ov, w_off))
                w_index += 1
                w_disc = w_undisc = 0.0
                w_ov = w_off = 0
                w_fill = 0
        if w_fill:
            windows.append(MetricsWindow(w_index, w_disc, w_undisc, w_ov, w_off))
        out[name] = tuple(windows)
    return out


def aggregate_training_curves(
    logs: list[list],
) -> list[tuple[int, float, float, float]]:
    """Across-seed (step, median, q1, q3) of the per-seed evaluated means."""
    if not logs:
        return []
    by_step: dict[int, list[float]] = {}
    for log in logs:
        for row in log:
            if row.eval_mean is not None:
                by_step.setdefault(row.step, []).append(row.eval_mean)
    rows = []
    for step in sorted(by_step):
        vals = np.array(by_step[step])
        q1, med, q3 = np.quantile(vals, (0.25, 0.5, 0.75))
        rows.append((step, float(med), float(q1), float(q3)))
    return rows


def relative_gap(value: float, reference: float) -> float:
    """|value - reference| / |reference|, guarding the degenerate reference."""
    denom = abs(reference)
    if denom < 1e-12:
        return math.inf if abs(value - reference) > 1e-12 else 0.0
    return abs(value - reference) / denom
