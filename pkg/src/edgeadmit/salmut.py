"""Two-timescale threshold actor-critic.

The policy is a real threshold vector ``tau`` over queue lengths, relaxed
through a sigmoid in the load level so the acceptance probability is
differentiable in ``tau``.  A TD(0) critic tracks Q on the fast timescale;
the actor follows the per-visit gradient estimate ``grad_f * (Q0 - Q1)``
projected back into ``[0, L]``.

Two step-size regimes are first-class:

- ``adam``: constant base rates with per-coordinate adaptive moments (the
  experimental configuration),
- ``decay``: plain Robbins-Monro schedules ``b0 / (1 + n / n0) ** kappa``
  with the two-timescale exponent ordering checked at construction (the
  regime the convergence analysis covers).

Updates happen only at arrival events; departures advance the state without
learning.  At a full buffer the offload is forced and the actor does not
update (the gradient of a forced action is undefined).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng as rngmod
from .model import Action, CostModel, ModelParams, ResourceDist, State
from .scenarios import Scenario, ScenarioState

EvalHook = Callable[[int, float, np.ndarray], dict[str, float] | None]


def accept_probability(tau: np.ndarray, state: State, temperature: float) -> float:
    """Sigmoid acceptance probability; zero at a full buffer (forced offload)."""
    x, ell = state
    if x >= len(tau) - 1:
        return 0.0
    return _sigmoid((tau[x] - ell) / temperature)


def f_gradient(tau: np.ndarray, state: State, temperature: float) -> float:
    """d(accept probability)/d(tau[x]); zero where the action is forced."""
    x, ell = state
    if x >= len(tau) - 1:
        return 0.0
    f = _sigmoid((tau[x] - ell) / temperature)
    return f * (1.0 - f) / temperature


def _sigmoid(z: float) -> float:
    # sign-split form: no overflow however large |z| gets
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def critic_update(
    q: np.ndarray,
    s: State,
    a: Action,
    incurred: float,
    s_next: State,
    rate: float,
    beta: float,
) -> float:
    """Plain TD(0) backup on the visited cell; returns the applied delta."""
    td = incurred + beta * q[s_next.x, s_next.ell].min() - q[s.x, s.ell, a]
    change = rate * td
    q[s.x, s.ell, a] += change
    return change


def gradient_estimate(
    q: np.ndarray, s: State, tau: np.ndarray, temperature: float
) -> float:
    """Per-visit contribution to the performance gradient at coordinate s.x."""
    dq = q[s.x, s.ell, Action.ACCEPT] - q[s.x, s.ell, Action.OFFLOAD]
    return f_gradient(tau, s, temperature) * dq


def actor_update(
    tau: np.ndarray,
    s: State,
    q: np.ndarray,
    rate: float,
    temperature: float,
    level_cap: float,
    paper_literal_sign: bool = False,
) -> float:
    """Projected gradient step on tau[s.x]; returns the realized change.

    The default steps against the cost gradient.  ``paper_literal_sign``
    applies the update with the opposite (ascent) sign for side-by-side comparison.
    """
    g = gradient_estimate(q, s, tau, temperature)
    step = rate * g
    before = tau[s.x]
    proposed = before + step if paper_literal_sign else before - step
    tau[s.x] = min(max(proposed, 0.0), level_cap)
    return tau[s.x] - before


@dataclass
class AdaptiveMoments:
    """Per-coordinate first/second moment steps with an epsilon guard.

    The guard sits inside the square root, so the effective step is bounded
    by ``rate * |m| / sqrt(eps)`` and vanishing gradients produce vanishing
    steps instead of being renormalized to full size.
    """

    shape: tuple[int, ...]
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)
    counts: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.m = np.zeros(self.shape)
        self.v = np.zeros(self.shape)
        self.counts = np.zeros(self.shape, dtype=np.int64)

    def step(self, idx, g: float, rate: float) -> float:
        """Descent step for gradient g at coordinate idx."""
        self.counts[idx] += 1
        t = self.counts[idx]
        m = self.beta1 * self.m[idx] + (1.0 - self.beta1) * g
        v = self.beta2 * self.v[idx] + (1.0 - self.beta2) * g * g
        self.m[idx] = m
        self.v[idx] = v
        m_hat = m / (1.0 - self.beta1**t)
        v_hat = v / (1.0 - self.beta2**t)
        return rate * m_hat / math.sqrt(v_hat + self.eps)


@dataclass(frozen=True)
class SalmutConfig:
    temperature: float = 5.0
    mode: str = "adam"                  # "adam" | "decay"
    critic_rate: float | None = None    # default depends on mode
    actor_rate: float | None = None
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    critic_epsilon: float = 1e-8
    actor_epsilon: float = 1e-2
    decay_n0: float = 3000.0
    decay_kappa_critic: float = 0.6
    decay_kappa_actor: float = 1.0
    initial_tau: float | None = None    # None: uniform random per coordinate
    horizon: int = 1_000_000
    eval_every: int = 1000
    start_state: tuple[int, int] = (0, 0)
    paper_literal_sign: bool = False

    # mode-specific base rates: the experimental setup uses small constant
    # rates under adaptive moments; the decaying regime needs large early
    # rates to finish its burn-in before the schedule dies off
    _ADAM_RATES = (0.03, 0.002)
    _DECAY_RATES = (1.0, 0.1)

    def __post_init__(self) -> None:
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")
        if self.mode not in ("adam", "decay"):
            raise ValueError("mode must be 'adam' or 'decay'")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        b1, b2 = self.rates()
        if b1 <= 0 or b2 <= 0:
            raise ValueError("learning rates must be > 0")
        if self.mode == "decay":
            k1, k2 = self.decay_kappa_critic, self.decay_kappa_actor
            # square-summable but not summable, and actor/critic -> 0
            if not (0.5 < k1 < k2 <= 1.0):
                raise ValueError(
                    "decay exponents must satisfy 0.5 < kappa_critic < kappa_actor <= 1"
                )
            if self.decay_n0 <= 0:
                raise ValueError("decay_n0 must be > 0")

    def rates(self) -> tuple[float, float]:
        defaults = self._ADAM_RATES if self.mode == "adam" else self._DECAY_RATES
        return (
            defaults[0] if self.critic_rate is None else self.critic_rate,
            defaults[1] if self.actor_rate is None else self.actor_rate,
        )


@dataclass(frozen=True)
class LogRow:
    step: int
    policy_hash: str
    eval_mean: float | None
    eval_q1: float | None
    eval_median: float | None
    eval_q3: float | None
    grad_abs_window: float
    grad_step_window: float


@dataclass
class TrainResult:
    tau: np.ndarray
    q: np.ndarray
    log: list[LogRow]
    # per-tenth-of-horizon aggregates of the actor diagnostics
    tenth_grad_abs: np.ndarray    # mean |gradient estimate|
    tenth_step_abs: np.ndarray    # mean |realized tau change|
    arrivals: int


def policy_hash(arr: np.ndarray) -> str:
    return hashlib.sha1(np.ascontiguousarray(arr).tobytes()).hexdigest()[:16]


class WindowStats:
    __slots__ = ("abs_g", "abs_step", "n")

    def __init__(self) -> None:
        self.abs_g = 0.0
        self.abs_step = 0.0
        self.n = 0

    def add(self, g: float, step: float) -> None:
        self.abs_g += abs(g)
        self.abs_step += abs(step)
        self.n += 1

    def drain(self) -> tuple[float, float]:
        if self.n == 0:
            out = (0.0, 0.0)
        else:
            out = (float(self.abs_g) / self.n, float(self.abs_step) / self.n)
        self.abs_g = self.abs_step = 0.0
        self.n = 0
        return out


def train(
    scenario: Scenario,
    params: ModelParams,
    cm: CostModel,
    rd: ResourceDist,
    config: SalmutConfig,
    seed: int,
    eval_hook: EvalHook | None = None,
) -> TrainResult:
    """Run the arrival-gated actor-critic loop for ``config.horizon`` steps.

    Fully deterministic given ``seed``: events, resource draws, exploration,
    the initial threshold vector and the scenario evolution each consume an
    independent named substream.
    """
    X, L = params.buffer_capacity, params.cpu_levels
    beta = params.discount_beta
    k, mu = params.cores, params.service_rate
    temp = config.temperature
    b1, b2 = config.rates()
    literal = config.paper_literal_sign

    ev_rng = rngmod.substream(seed, "events")
    res_rng = rngmod.substream(seed, "resources")
    act_rng = rngmod.substream(seed, "exploration")
    init_rng = rngmod.substream(seed, "init")

    q = np.zeros((X + 1, L + 1, 2))
    if config.initial_tau is None:
        tau = init_rng.uniform(0.0, float(L), size=X + 1)
    else:
        if not 0.0 <= config.initial_tau <= L:
            raise ValueError("initial_tau must lie in [0, L]")
        tau = np.full(X + 1, float(config.initial_tau))

    adam = config.mode == "adam"
    if adam:
        critic_mom = AdaptiveMoments(
            q.shape, config.adam_beta1, config.adam_beta2, config.critic_epsilon
        )
        actor_mom = AdaptiveMoments(
            tau.shape, config.adam_beta1, config.adam_beta2, config.actor_epsilon
        )
    n0 = config.decay_n0
    k_c, k_a = config.decay_kappa_critic, config.decay_kappa_actor

    ss = ScenarioState.create(scenario, config.horizon, seed)
    x, ell = config.start_state
    if not (0 <= x <= X and 0 <= ell <= L):
        raise ValueError("start_state out of bounds")

    horizon = config.horizon
    window = WindowStats()
    tenth_g = np.zeros(10)
    tenth_s = np.zeros(10)
    tenth_n = np.zeros(10, dtype=np.int64)
    log: list[LogRow] = []
    arrivals = 0
    cdf = np.cumsum(rd.pmf)
    run_arr = cm.running
    pen_arr = cm.penalty
    hold = cm.holding

    for n in range(horizon):
        if n > 0:
            ss.advance()
        lam = ss.lam
        busy = min(x, k) * mu
        if lam == 0.0 and busy == 0.0:
            raise ValueError("no event possible: lam == 0 and empty queue")
        d = lam / (lam + busy)
        if lam > 0.0 and ev_rng.random() <= d:
            arrivals += 1
            forced = x == X
            if forced:
                a = 1
            else:
                f = _sigmoid((tau[x] - ell) / temp)
                a = 0 if act_rng.random() < f else 1
            incurred = hold * max(x - k, 0) + run_arr[ell] + (pen_arr[ell] if a else 0.0)
            if a == 0:
                r = int(np.searchsorted(cdf, res_rng.random(), side="right")) + 1
                nx, nl = min(x + 1, X), min(ell + r, L)
            else:
                nx, nl = x, ell
            td = incurred + beta * min(q[nx, nl, 0], q[nx, nl, 1]) - q[x, ell, a]
            if adam:
                q[x, ell, a] -= critic_mom.step((x, ell, a), -td, b1)
            else:
                q[x, ell, a] += b1 / (1.0 + n / n0) ** k_c * td
            if not forced:
                f = _sigmoid((tau[x] - ell) / temp)
                g = f * (1.0 - f) / temp * (q[x, ell, 0] - q[x, ell, 1])
                before = tau[x]
                if adam:
                    move = actor_mom.step(x, g, b2)
                else:
                    move = b2 / (1.0 + n / n0) ** k_a * g
                proposed = before + move if literal else before - move
                tau[x] = min(max(proposed, 0.0), float(L))
                realized = tau[x] - before
                window.add(g, realized)
                tenth = min(10 * n // horizon, 9)
                tenth_g[tenth] += abs(g)
                tenth_s[tenth] += abs(realized)
                tenth_n[tenth] += 1
            x, ell = nx, nl
        else:
            r = int(np.searchsorted(cdf, res_rng.random(), side="right")) + 1
            x, ell = max(x - 1, 0), max(ell - r, 0)

        if (n + 1) % config.eval_every == 0:
            grad_abs, grad_step = window.drain()
            stats = eval_hook(n + 1, lam, tau.copy()) if eval_hook else None
            stats = stats or {}
            log.append(
                LogRow(
                    step=n + 1,
                    policy_hash=policy_hash(tau),
                    eval_mean=stats.get("mean"),
                    eval_q1=stats.get("q1"),
                    eval_median=stats.get("median"),
                    eval_q3=stats.get("q3"),
                    grad_abs_window=grad_abs,
                    grad_step_window=grad_step,
                )
            )

    counts = np.maximum(tenth_n, 1)
    return TrainResult(
        tau=tau,
        q=q,
        log=log,
        tenth_grad_abs=tenth_g / counts,
        tenth_step_abs=tenth_s / counts,
        arrivals=arrivals,
    )
