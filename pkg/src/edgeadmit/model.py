"""Model layer: states, costs, transition kernels and the one-step simulator.

The system is a finite queue (length ``x``, capacity ``X``) feeding ``k``
cores whose joint load is discretized to ``ell`` in ``0..L``.  Uniformizing
the continuous-time chain gives a discrete chain in which, from state
``(x, ell)``, the next event is an arrival with probability
``delta(x) = lam / (lam + min(x, k) * mu)`` and a departure otherwise.
Costs are per uniformized step; the continuous-time scale factor is assumed
absorbed into the cost tables.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class Action(enum.IntEnum):
    ACCEPT = 0
    OFFLOAD = 1


class Event(enum.IntEnum):
    ARRIVAL = 0
    DEPARTURE = 1


class State(NamedTuple):
    x: int
    ell: int


class CostTableWarning(UserWarning):
    """Cost tables break the monotonicity assumptions of the structural results."""


@dataclass(frozen=True)
class ModelParams:
    """Static system parameters.

    ``discount_beta`` is the discrete discount factor and is always taken
    from configuration.  ``discount_rate`` (continuous-time) and
    ``uniformization_rate`` are optional; when both are present they must be
    consistent with ``beta = nu / (alpha + nu)``.
    """

    buffer_capacity: int = 20
    cpu_levels: int = 20
    cores: int = 2
    service_rate: float = 3.0
    discount_beta: float = 0.95
    discount_rate: float | None = None
    uniformization_rate: float | None = None

    def __post_init__(self) -> None:
        if self.buffer_capacity < 1:
            raise ValueError("buffer_capacity must be >= 1")
        if self.cpu_levels < 1:
            raise ValueError("cpu_levels must be >= 1")
        if self.cores < 1:
            raise ValueError("cores must be >= 1")
        if self.service_rate <= 0:
            raise ValueError("service_rate must be > 0")
        if not 0.0 < self.discount_beta < 1.0:
            raise ValueError("discount_beta must lie in (0, 1)")
        if self.discount_rate is not None and self.uniformization_rate is not None:
            alpha, nu = self.discount_rate, self.uniformization_rate
            if alpha <= 0 or nu <= 0:
                raise ValueError("discount_rate and uniformization_rate must be > 0")
            implied = nu / (alpha + nu)
            if abs(implied - self.discount_beta) > 1e-12:
                raise ValueError(
                    f"discount_beta={self.discount_beta} inconsistent with "
                    f"nu/(alpha+nu)={implied!r}"
                )


@dataclass(frozen=True)
class CostModel:
    """Per-step cost ingredients: holding rate, running table, offload penalty table.

    The structural results assume ``running`` and ``running + penalty`` are
    weakly increasing in the load level.  The canonical experiment tables
    violate both (a negative running-cost band rewards mid-range load, and
    the penalty drops once the system is moderately loaded), so violations
    warn by default instead of raising; pass ``strict=True`` to enforce.
    """

    holding: float
    running: np.ndarray
    penalty: np.ndarray
    strict: bool = False

    def __post_init__(self) -> None:
        run = np.asarray(self.running, dtype=float)
        pen = np.asarray(self.penalty, dtype=float)
        if run.ndim != 1 or pen.ndim != 1 or run.shape != pen.shape:
            raise ValueError("running and penalty must be 1-D tables of equal length")
        run.setflags(write=False)
        pen.setflags(write=False)
        object.__setattr__(self, "running", run)
        object.__setattr__(self, "penalty", pen)
        problems = []
        if np.any(np.diff(run) < 0):
            problems.append("running cost is not weakly increasing in load")
        if np.any(np.diff(run + pen) < 0):
            problems.append("running + penalty is not weakly increasing in load")
        if problems:
            msg = "; ".join(problems)
            if self.strict:
                raise ValueError(msg)
            warnings.warn(msg, CostTableWarning, stacklevel=2)

    @property
    def levels(self) -> int:
        return len(self.running) - 1


@dataclass(frozen=True)
class ResourceDist:
    """PMF of the CPU resource amount ``r`` in ``1..r_max`` claimed per request."""

    pmf: np.ndarray
    _cdf: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        pmf = np.asarray(self.pmf, dtype=float)
        if pmf.ndim != 1 or len(pmf) == 0:
            raise ValueError("pmf must be a non-empty 1-D table")
        if np.any(pmf < 0):
            raise ValueError("pmf entries must be >= 0")
        if abs(pmf.sum() - 1.0) > 1e-12:
            raise ValueError(f"pmf must sum to 1 (got {pmf.sum()!r})")
        pmf.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)
        cdf = np.cumsum(pmf)
        cdf.setflags(write=False)
        object.__setattr__(self, "_cdf", cdf)

    @property
    def r_max(self) -> int:
        return len(self.pmf)

    def support(self):
        """Pairs (r, probability) with probability > 0."""
        return [(r + 1, float(p)) for r, p in enumerate(self.pmf) if p > 0.0]

    def sample(self, rng: np.random.Generator) -> int:
        return self.sample_from_uniform(rng.random())

    def sample_from_uniform(self, u: float) -> int:
        return int(np.searchsorted(self._cdf, u, side="right")) + 1


def cost(state: State, action: Action, cm: CostModel, cores: int) -> float:
    """Per-step cost: holding for waiting requests, running cost, offload penalty."""
    x, ell = state
    value = cm.holding * max(x - cores, 0) + float(cm.running[ell])
    if action == Action.OFFLOAD:
        value += float(cm.penalty[ell])
    return value


def delta(x: int, lam: float, params: ModelParams) -> float:
    """Probability that the next uniformized event is an arrival."""
    if lam < 0:
        raise ValueError("arrival rate must be >= 0")
    busy = min(x, params.cores) * params.service_rate
    if lam == 0 and busy == 0:
        raise ValueError("no event possible: lam == 0 and empty queue")
    return lam / (lam + busy)


def transition_pmf(
    state: State,
    action: Action,
    lam: float,
    params: ModelParams,
    rd: ResourceDist,
) -> dict[State, float]:
    """One-step distribution: mixture of the arrival and departure kernels.

    Probability mass of outcomes clamped at a boundary is merged, never
    renormalized.
    """
    x, ell = state
    X, L = params.buffer_capacity, params.cpu_levels
    d = delta(x, lam, params)
    out: dict[State, float] = {}

    def add(s: State, prob: float) -> None:
        if prob > 0.0:
            out[s] = out.get(s, 0.0) + prob

    if action == Action.ACCEPT:
        for r, p in rd.support():
            add(State(min(x + 1, X), min(ell + r, L)), d * p)
    else:
        add(State(x, ell), d)
    for r, p in rd.support():
        add(State(max(x - 1, 0), max(ell - r, 0)), (1.0 - d) * p)
    return out


def step(
    state: State,
    action_at_arrival: Action,
    lam: float,
    params: ModelParams,
    cm: CostModel,
    rd: ResourceDist,
    rng: np.random.Generator,
) -> tuple[State, Event, float]:
    """Sample one uniformized transition.

    The action applies only if the event is an arrival.  A departure incurs
    the accept-cost of the current state: no decision is taken at a
    completion, so no penalty can apply.
    """
    x, ell = state
    X, L = params.buffer_capacity, params.cpu_levels
    d = delta(x, lam, params)
    u = rng.random()
    if lam > 0 and u <= d:
        incurred = cost(state, action_at_arrival, cm, params.cores)
        if action_at_arrival == Action.ACCEPT:
            r = rd.sample(rng)
            nxt = State(min(x + 1, X), min(ell + r, L))
        else:
            nxt = State(x, ell)
        return nxt, Event.ARRIVAL, incurred
    incurred = cost(state, Action.ACCEPT, cm, params.cores)
    r = rd.sample(rng)
    return State(max(x - 1, 0), max(ell - r, 0)), Event.DEPARTURE, incurred
