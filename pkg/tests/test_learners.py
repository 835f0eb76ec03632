import numpy as np
import pytest

from edgeadmit.dp import greedy_policy, value_iteration
from edgeadmit.learners import (
    BaselinePolicy,
    QLearningConfig,
    baseline_decide,
    qlearning_train,
)
from edgeadmit.model import Action, State
from edgeadmit.rng import substream
from edgeadmit.scenarios import Scenario


def test_baseline_accepts_below_threshold():
    bp = BaselinePolicy(accept_below=18)
    assert baseline_decide(State(3, 17), bp, 20) is Action.ACCEPT
    assert baseline_decide(State(3, 18), bp, 20) is Action.OFFLOAD
    assert baseline_decide(State(20, 0), bp, 20) is Action.OFFLOAD


def test_baseline_never_accepts_at_or_above_threshold():
    bp = BaselinePolicy(accept_below=18)
    for x in range(21):
        for ell in range(21):
            a = baseline_decide(State(x, ell), bp, 20)
            if ell >= 18 or x == 20:
                assert a is Action.OFFLOAD
            else:
                assert a is Action.ACCEPT


def test_qlearning_config_validation():
    with pytest.raises(ValueError):
        QLearningConfig(rate=0.0)
    with pytest.raises(ValueError):
        QLearningConfig(rate=1.5)
    with pytest.raises(ValueError):
        QLearningConfig(epsilon_start=1.2)
    with pytest.raises(ValueError):
        QLearningConfig(rate_mode="nope")


def test_epsilon_schedule_endpoints():
    cfg = QLearningConfig(
        horizon=1000, epsilon_start=1.0, epsilon_end=0.05, epsilon_decay_fraction=0.5
    )
    assert cfg.epsilon_at(0) == pytest.approx(1.0)
    assert cfg.epsilon_at(250) == pytest.approx(0.525)
    assert cfg.epsilon_at(500) == pytest.approx(0.05)
    assert cfg.epsilon_at(999) == pytest.approx(0.05)


def test_pure_exploration_action_marginals():
    # epsilon = 1: the behavior at any interior arrival state is a fair coin,
    # regardless of the q-values
    from edgeadmit.learners import epsilon_greedy_action

    q = np.zeros((21, 21, 2))
    q[3, 7, 0] = 100.0  # a greedy policy would always offload here
    rng = substream(4, "marginal-check")
    n = 20_000
    offloads = sum(epsilon_greedy_action(q, 3, 7, 1.0, rng) for _ in range(n))
    sigma = (n * 0.25) ** 0.5
    assert abs(offloads - n / 2) <= 3 * sigma


def test_zero_exploration_is_greedy():
    from edgeadmit.learners import epsilon_greedy_action

    q = np.zeros((21, 21, 2))
    q[3, 7, 0] = 1.0
    q[4, 2, 1] = 1.0
    rng = substream(4, "greedy-check")
    assert epsilon_greedy_action(q, 3, 7, 0.0, rng) == 1
    assert epsilon_greedy_action(q, 4, 2, 0.0, rng) == 0
    assert epsilon_greedy_action(q, 0, 0, 0.0, rng) == 0  # tie accepts


def test_greedy_matches_dp_policy_when_preloaded(
    canonical_params, canonical_costs, canonical_resources
):
    # epsilon = 0 with the planner's q preloaded: greedy extraction equals the
    # planner's policy exactly (same argmin and tie rule)
    sol = value_iteration(6.0, canonical_params, canonical_costs, canonical_resources, tol=1e-9)
    extracted = greedy_policy(sol.q, canonical_params.buffer_capacity)
    assert np.array_equal(extracted, sol.policy)


def test_qlearning_deterministic(canonical_params, canonical_costs, canonical_resources):
    cfg = QLearningConfig(horizon=3000, eval_every=1000)
    a = qlearning_train(
        Scenario(kind=1), canonical_params, canonical_costs, canonical_resources, cfg, seed=7
    )
    b = qlearning_train(
        Scenario(kind=1), canonical_params, canonical_costs, canonical_resources, cfg, seed=7
    )
    assert np.array_equal(a.q, b.q)
    assert np.array_equal(a.policy, b.policy)
    assert a.log == b.log


def test_qlearning_log_schema_matches_salmut(canonical_params, canonical_costs, canonical_resources):
    from edgeadmit.salmut import SalmutConfig, train

    qcfg = QLearningConfig(horizon=2000, eval_every=1000)
    scfg = SalmutConfig(horizon=2000, eval_every=1000)
    q_res = qlearning_train(
        Scenario(kind=1), canonical_params, canonical_costs, canonical_resources, qcfg, seed=2
    )
    s_res = train(
        Scenario(kind=1), canonical_params, canonical_costs, canonical_resources, scfg, seed=2
    )
    assert [r.step for r in q_res.log] == [r.step for r in s_res.log]
    assert set(q_res.log[0].__dataclass_fields__) == set(
        s_res.log[0].__dataclass_fields__
    )


def test_qlearning_policy_has_forced_offload_row(
    canonical_params, canonical_costs, canonical_resources
):
    cfg = QLearningConfig(horizon=2000, eval_every=2000)
    result = qlearning_train(
        Scenario(kind=1), canonical_params, canonical_costs, canonical_resources, cfg, seed=1
    )
    assert np.all(result.policy[20, :] == Action.OFFLOAD)
