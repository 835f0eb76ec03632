import numpy as np
import pytest

from edgeadmit.dp import value_iteration
from edgeadmit.evaluate import (
    AllOffloadPolicy,
    EvalConfig,
    EventTrace,
    StaticPolicy,
    TablePolicy,
    ThresholdPolicy,
    aggregate_training_curves,
    behavioral_compare,
    evaluate,
    relative_gap,
    rollout,
)
from edgeadmit.learners import BaselinePolicy
from edgeadmit.model import Action, CostModel, State
from edgeadmit.rng import substream
from edgeadmit.salmut import LogRow
from edgeadmit.scenarios import Scenario

from oracles import simulated_policy_value


def test_rollout_single_departure_step(canonical_params, canonical_costs, canonical_resources):
    # lam = 0 with a busy server: the only possible event is a departure, so
    # the policy is irrelevant and the cost is the one-step accept cost
    rr = rollout(
        AllOffloadPolicy(),
        0.0,
        canonical_params,
        canonical_costs,
        canonical_resources,
        horizon=1,
        beta=0.95,
        rng=substream(0, "r"),
        initial_state=(5, 10),
    )
    assert rr.discounted_cost == pytest.approx(0.12 * 3 - 0.2)
    assert rr.c_off == 0


def test_rollout_deterministic_given_stream(canonical_params, canonical_costs, canonical_resources):
    policy = ThresholdPolicy(np.full(21, 9.0))
    kwargs = dict(
        lam=6.0,
        params=canonical_params,
        cm=canonical_costs,
        rd=canonical_resources,
        horizon=500,
        beta=0.95,
        initial_state=(0, 0),
    )
    a = rollout(policy, rng=substream(5, "roll"), **kwargs)
    b = rollout(policy, rng=substream(5, "roll"), **kwargs)
    assert a == b


def test_rollout_all_offload_counts_every_arrival(
    canonical_params, canonical_costs, canonical_resources
):
    # from the empty state an all-offload policy pins the chain at (0,0)
    # where every event is an arrival, so c_off equals the horizon
    rr = rollout(
        AllOffloadPolicy(),
        6.0,
        canonical_params,
        canonical_costs,
        canonical_resources,
        horizon=400,
        beta=0.95,
        rng=substream(8, "roll"),
    )
    assert rr.c_off == 400
    assert rr.windows[0].c_ov == 0


def test_rollout_windows_partition_costs(canonical_params, canonical_costs, canonical_resources):
    policy = ThresholdPolicy(np.full(21, 12.0))
    rr = rollout(
        policy,
        6.0,
        canonical_params,
        canonical_costs,
        canonical_resources,
        horizon=2500,
        beta=0.95,
        rng=substream(2, "roll"),
        window=1000,
    )
    assert [w.index for w in rr.windows] == [0, 1, 2]
    assert sum(w.cost_discounted for w in rr.windows) == pytest.approx(rr.discounted_cost)
    # undiscounted window sums add up to the undiscounted trace total
    total_undisc = sum(w.cost_undiscounted for w in rr.windows)
    rr_again = rollout(
        policy,
        6.0,
        canonical_params,
        canonical_costs,
        canonical_resources,
        horizon=2500,
        beta=1.0 - 1e-12,
        rng=substream(2, "roll"),
        window=2500,
    )
    assert total_undisc == pytest.approx(rr_again.windows[0].cost_undiscounted, rel=1e-6)


def test_evaluate_constant_cost_geometric_sum(canonical_params, canonical_resources):
    # constant cost everywhere: any policy accumulates c * (1 - b^H) / (1 - b)
    c = 1.7
    cm = CostModel(holding=0.0, running=np.full(21, c), penalty=np.zeros(21))
    cfg = EvalConfig(rollout_length=200, n_rollouts=3, window=200)
    report = evaluate(
        ThresholdPolicy(np.full(21, 10.0)), cfg, 6.0, canonical_params, cm, canonical_resources, seed=0
    )
    expected = c * (1 - 0.95**200) / (1 - 0.95)
    assert report.mean == pytest.approx(expected, rel=1e-12)
    assert report.q1 == pytest.approx(expected) == report.q3


def test_evaluate_quartiles_order(canonical_params, canonical_costs, canonical_resources):
    cfg = EvalConfig(rollout_length=300, n_rollouts=40, window=300)
    report = evaluate(
        ThresholdPolicy(np.full(21, 9.0)),
        cfg,
        6.0,
        canonical_params,
        canonical_costs,
        canonical_resources,
        seed=3,
    )
    assert report.q1 <= report.median <= report.q3
    assert report.n_rollouts == 40


def test_dp_policy_beats_baseline_on_average(canonical_params, canonical_costs, canonical_resources):
    sol = value_iteration(6.0, canonical_params, canonical_costs, canonical_resources, tol=1e-9)
    cfg = EvalConfig(rollout_length=1000, n_rollouts=60, window=1000)
    dp_report = evaluate(
        TablePolicy(sol.policy), cfg, 6.0, canonical_params, canonical_costs, canonical_resources, seed=4
    )
    base_report = evaluate(
        StaticPolicy(BaselinePolicy(18), 20),
        cfg,
        6.0,
        canonical_params,
        canonical_costs,
        canonical_resources,
        seed=4,
    )
    assert dp_report.mean < base_report.mean


def test_any_policy_statistically_dominates_dp_value(
    canonical_params, canonical_costs, canonical_resources
):
    # the planner's fixed-point value at the start state lower-bounds every
    # simulated policy cost up to statistical allowance
    sol = value_iteration(6.0, canonical_params, canonical_costs, canonical_resources, tol=1e-9)
    cfg = EvalConfig(rollout_length=1000, n_rollouts=50, window=1000)
    for policy in (
        ThresholdPolicy(np.full(21, 8.0)),
        StaticPolicy(BaselinePolicy(18), 20),
        TablePolicy(sol.policy),
    ):
        report = evaluate(
            policy, cfg, 6.0, canonical_params, canonical_costs, canonical_resources, seed=6
        )
        # allowance: 3 standard errors estimated from the quartile spread
        spread = max(report.q3 - report.q1, 0.1)
        assert report.mean >= sol.v[0, 0] - 3 * spread


def test_baseline_offloads_only_reactively(canonical_params, canonical_costs, canonical_resources):
    # trace the baseline for a while: it must never offload below its
    # threshold with a non-full buffer
    policy = StaticPolicy(BaselinePolicy(18), 20)
    x, ell = 0, 0
    rng = substream(12, "react")
    cdf = np.cumsum(canonical_resources.pmf)
    for _ in range(5000):
        d = 6.0 / (6.0 + min(x, 2) * 3.0)
        if rng.random() <= d:
            a = Action.OFFLOAD if x == 20 else policy.decide(State(x, ell))
            if a == Action.OFFLOAD:
                assert ell >= 18 or x == 20
            else:
                r = int(np.searchsorted(cdf, rng.random(), side="right")) + 1
                x, ell = min(x + 1, 20), min(ell + r, 20)
        else:
            r = int(np.searchsorted(cdf, rng.random(), side="right")) + 1
            x, ell = max(x - 1, 0), max(ell - r, 0)


def test_event_trace_reproducible():
    a = EventTrace.generate(7, 1000)
    b = EventTrace.generate(7, 1000)
    assert np.array_equal(a.z, b.z)
    assert np.array_equal(a.resource_u, b.resource_u)


def test_behavioral_compare_shared_randomness(canonical_params, canonical_costs, canonical_resources):
    trace = EventTrace.generate(3, 20_000)
    scenario = Scenario(kind=2)
    policies = {
        "baseline": StaticPolicy(BaselinePolicy(18), 20),
        "tight": ThresholdPolicy(np.full(21, 8.0)),
    }
    series = behavioral_compare(
        policies, scenario, canonical_params, canonical_costs, canonical_resources, trace, window=1000
    )
    assert set(series) == {"baseline", "tight"}
    assert len(series["baseline"]) == 20
    # scatter export shape: one row per (policy, window)
    rows = [(n, w.index, w.c_off, w.c_ov) for n in series for w in series[n]]
    assert len(rows) == 40
    # the high-rate middle phase must overload the baseline
    base_total_ov = sum(w.c_ov for w in series["baseline"])
    tight_total_ov = sum(w.c_ov for w in series["tight"])
    assert base_total_ov > 0
    assert tight_total_ov < base_total_ov
    # proactive thresholds offload at least as often as the reactive baseline
    assert sum(w.c_off for w in series["tight"]) >= sum(
        w.c_off for w in series["baseline"]
    )


def test_behavioral_compare_identical_policy_identical_series(
    canonical_params, canonical_costs, canonical_resources
):
    trace = EventTrace.generate(5, 5000)
    scenario = Scenario(kind=1)
    series = behavioral_compare(
        {"a": ThresholdPolicy(np.full(21, 9.0)), "b": ThresholdPolicy(np.full(21, 9.0))},
        scenario,
        canonical_params,
        canonical_costs,
        canonical_resources,
        trace,
    )
    assert series["a"] == series["b"]


def test_threshold_policy_greedy_rounding():
    policy = ThresholdPolicy(np.array([3.7] * 21))
    assert policy.decide(State(0, 3)) is Action.ACCEPT
    assert policy.decide(State(0, 4)) is Action.OFFLOAD
    assert policy.decide(State(20, 0)) is Action.OFFLOAD


def test_rollout_mean_matches_exact_policy_value(
    canonical_params, canonical_costs, canonical_resources
):
    # Monte-Carlo rollouts agree with the linear-solve value of the same
    # policy on the simulated chain within 3 standard errors
    tau = np.full(21, 8.0)
    policy_eval = np.zeros((21, 21), dtype=int)
    for x in range(21):
        policy_eval[x, 9:] = 1
    policy_eval[20, :] = 1
    exact = simulated_policy_value(policy_eval, 6.0, canonical_params, canonical_costs, canonical_resources)
    costs = [
        rollout(
            ThresholdPolicy(tau),
            6.0,
            canonical_params,
            canonical_costs,
            canonical_resources,
            horizon=1000,
            beta=0.95,
            rng=substream(100 + i, "mc"),
        ).discounted_cost
        for i in range(200)
    ]
    mean = np.mean(costs)
    se = np.std(costs, ddof=1) / np.sqrt(len(costs))
    assert abs(mean - exact[0, 0]) <= 3 * se


def test_aggregate_training_curves():
    logs = [
        [LogRow(100, "h", 1.0, None, None, None, 0.0, 0.0),
         LogRow(200, "h", 3.0, None, None, None, 0.0, 0.0)],
        [LogRow(100, "h", 2.0, None, None, None, 0.0, 0.0),
         LogRow(200, "h", 5.0, None, None, None, 0.0, 0.0)],
        [LogRow(100, "h", 3.0, None, None, None, 0.0, 0.0)],
    ]
    rows = aggregate_training_curves(logs)
    assert rows[0][0] == 100
    assert rows[0][1] == pytest.approx(2.0)  # median of 1, 2, 3
    assert rows[1][0] == 200
    assert rows[1][1] == pytest.approx(4.0)  # median of 3, 5


def test_relative_gap():
    assert relative_gap(1.1, 1.0) == pytest.approx(0.1)
    assert relative_gap(-1.1, -1.0) == pytest.approx(0.1)
    assert relative_gap(0.0, 0.0) == 0.0
