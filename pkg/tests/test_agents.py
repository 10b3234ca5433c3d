import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcb_arena.agents import (
    ArmStats,
    ContextualEpsilonGreedyAgent,
    EpsilonGreedyAgent,
    HeuristicAgent,
    Hyperparameters,
    QTable,
    StaticAgent,
    context_binary,
    context_combined,
    egreedy_select,
    egreedy_update,
    epsilon,
    heuristic_select,
    make_agent,
    qlearning_select,
    qlearning_update,
    reward,
    static_select,
)
from dcb_arena.errors import UnsupportedOperationError, ValidationError
from dcb_arena.seeding import rng_stream
from dcb_arena.spectrum import Action, action_index


# ------------------------------------------------------------- reward

def test_reward_examples():
    assert reward(50.0, 50.0) == 1.0
    assert reward(25.0, 50.0) == 0.5
    assert reward(50.3, 50.0) == 1.0  # clipped
    assert reward(-1.0, 50.0) == 0.0


def test_reward_rejects_nonpositive_load():
    with pytest.raises(ValidationError):
        reward(10.0, 0.0)
    with pytest.raises(ValidationError):
        reward(10.0, -5.0)


# ------------------------------------------------------------- epsilon

def test_epsilon_schedule_examples():
    assert epsilon(1) == 1.0
    assert epsilon(4) == 0.5
    assert epsilon(25) == 0.2


def test_epsilon_rejects_zero():
    with pytest.raises(ValidationError):
        epsilon(0)


def test_epsilon_strictly_decreasing_to_zero():
    values = [epsilon(t, 0.7) for t in range(1, 2000)]
    assert values[0] == 0.7
    assert all(a > b for a, b in zip(values, values[1:]))
    assert values[-1] < 0.02


# ------------------------------------------------------------- selection

def test_select_is_uniform_at_t1():
    stats = ArmStats(12)
    stats.means[:] = np.linspace(0, 1, 12)  # means must not matter at eps=1
    rng = rng_stream("uniform-t1")
    counts = np.zeros(12, dtype=int)
    for _ in range(12000):
        counts[egreedy_select(stats, 1, rng)] += 1
    # expected 1000 per arm, sd ~30; allow 5 sigma
    assert counts.min() > 850 and counts.max() < 1150


def test_select_greedy_when_epsilon_zero():
    stats = ArmStats(5)
    stats.means[:] = [0.1, 0.1, 0.9, 0.1, 0.1]
    rng = rng_stream("greedy")
    for _ in range(100):
        assert egreedy_select(stats, 1, rng, epsilon0=0.0) == 2


def test_select_breaks_ties_uniformly():
    stats = ArmStats(4)
    stats.means[:] = [0.9, 0.2, 0.9, 0.1]
    rng = rng_stream("ties")
    counts = {0: 0, 2: 0}
    for _ in range(10000):
        counts[egreedy_select(stats, 1, rng, epsilon0=0.0)] += 1
    assert abs(counts[0] - 5000) < 300


def test_select_first_index_tie_break():
    stats = ArmStats(4)
    rng = rng_stream("first")
    assert egreedy_select(stats, 1, rng, epsilon0=0.0, tie_break="first") == 0


def test_unpulled_arms_treated_as_zero_mean():
    stats = ArmStats(3)
    egreedy_update(stats, 1, -0.0)
    egreedy_update(stats, 0, 0.2)
    rng = rng_stream("unpulled")
    # arm 0 has mean 0.2 and strictly dominates unpulled arms (mean 0)
    assert all(egreedy_select(stats, 1, rng, epsilon0=0.0) == 0 for _ in range(50))


def test_greedy_set_invariant_under_positive_scaling():
    rng = rng_stream("scale")
    means = rng.random(12)
    stats_a, stats_b = ArmStats(12), ArmStats(12)
    stats_a.means[:] = means
    stats_b.means[:] = means * 7.5
    best_a = set(np.flatnonzero(stats_a.means == stats_a.means.max()))
    best_b = set(np.flatnonzero(stats_b.means == stats_b.means.max()))
    assert best_a == best_b


# ------------------------------------------------------------- updates

def test_update_running_mean_examples():
    stats = ArmStats(2)
    egreedy_update(stats, 0, 0.5)
    egreedy_update(stats, 0, 1.0)
    assert stats.means[0] == pytest.approx(0.75)

    stats2 = ArmStats(2)
    egreedy_update(stats2, 1, 0.3)
    assert stats2.means[1] == pytest.approx(0.3)
    assert stats2.counts[1] == 1


def test_update_constant_rewards_exact():
    stats = ArmStats(1)
    for _ in range(1000):
        egreedy_update(stats, 0, 1.0)
    assert stats.means[0] == 1.0
    assert stats.counts[0] == 1000


def test_update_rejects_bad_arm():
    with pytest.raises(ValidationError):
        egreedy_update(ArmStats(2), 2, 0.5)


@settings(max_examples=100)
@given(st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=300))
def test_incremental_mean_matches_brute_force(rewards):
    stats = ArmStats(1)
    for r in rewards:
        egreedy_update(stats, 0, r)
    assert stats.means[0] == pytest.approx(sum(rewards) / len(rewards), abs=1e-12)


# ------------------------------------------------------------- contexts

def test_context_binary_examples():
    assert context_binary(1.0, 0.99) == 1
    assert context_binary(0.5, 0.99) == 0
    assert context_binary(0.99, 0.99) == 1  # boundary inclusive


def test_context_binary_threshold_validation():
    with pytest.raises(ValidationError):
        context_binary(0.5, 0.0)
    with pytest.raises(ValidationError):
        context_binary(0.5, 1.5)


def test_context_combined_examples():
    action6 = Action(3, 2)
    assert action_index(action6, 4) == 6
    assert context_combined(1.0, 0.99, action6, 4) == 18
    assert context_combined(0.0, 0.99, Action(1, 1), 4) == 0


def test_context_combined_is_bijective_over_24_states():
    seen = set()
    for sat_sigma in (0.0, 1.0):
        for idx in range(12):
            from dcb_arena.spectrum import action_from_index

            ctx = context_combined(sat_sigma, 0.99, action_from_index(idx, 4), 4)
            seen.add(ctx)
    assert seen == set(range(24))


# ------------------------------------------------------------- q-learning

def test_qlearning_update_arithmetic():
    q = QTable(2, 12, alpha=0.8, gamma=0.2)
    qlearning_update(q, 0, 3, 0.5, 1)
    assert q.values[0, 3] == pytest.approx(0.4)

    q.values[1, :] = 0.0
    q.values[1, 5] = 0.4
    qlearning_update(q, 0, 3, 1.0, 1)
    assert q.values[0, 3] == pytest.approx(0.944)


def test_qlearning_alpha_zero_learns_nothing():
    q = QTable(2, 4, alpha=0.0, gamma=0.2)
    before = q.values.copy()
    qlearning_update(q, 0, 1, 1.0, 1)
    assert np.array_equal(q.values, before)


def test_qlearning_thousand_step_oracle():
    # Independent straight-line re-implementation of the update rule,
    # replayed over the same random transition sequence.
    rng = rng_stream("q-oracle")
    n_states, n_arms, alpha, gamma = 24, 12, 0.8, 0.2
    q = QTable(n_states, n_arms, alpha, gamma)
    shadow = [[0.0] * n_arms for _ in range(n_states)]
    for _ in range(1000):
        s = int(rng.integers(n_states))
        a = int(rng.integers(n_arms))
        s_next = int(rng.integers(n_states))
        r = float(rng.random())
        qlearning_update(q, s, a, r, s_next)
        shadow[s][a] = shadow[s][a] + alpha * (
            r + gamma * max(shadow[s_next]) - shadow[s][a]
        )
    for s in range(n_states):
        for a in range(n_arms):
            assert abs(q.values[s, a] - shadow[s][a]) <= 1e-12


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 11), st.floats(0, 1, allow_nan=False), st.integers(0, 1)), max_size=400))
def test_qtable_bounded_with_gamma_point_two(steps):
    q = QTable(2, 12, alpha=0.8, gamma=0.2)
    for s, a, r, s_next in steps:
        qlearning_update(q, s, a, r, s_next)
    assert q.values.min() >= 0.0
    assert q.values.max() <= 1.25 + 1e-12  # 1 / (1 - gamma)


def test_qlearning_select_cases():
    q = QTable(2, 12)
    q.values[0, 7] = 0.5
    rng = rng_stream("q-select")
    assert all(qlearning_select(q, 0, 1, rng, epsilon0=0.0) == 7 for _ in range(20))

    counts = np.zeros(12, dtype=int)
    for _ in range(12000):
        counts[qlearning_select(q, 0, 1, rng)] += 1  # t=1: uniform
    assert counts.min() > 850

    counts = np.zeros(12, dtype=int)
    for _ in range(12000):
        counts[qlearning_select(q, 1, 1, rng, epsilon0=0.0)] += 1  # all-zero row ties
    assert counts.min() > 850


def test_qlearning_select_state_out_of_range():
    with pytest.raises(ValidationError):
        qlearning_select(QTable(2, 4), 2, 1, rng_stream("x"))


def test_qlearning_single_state_gamma_zero_equals_ema_argmax():
    # With one state and gamma 0, the table row is an exponential moving
    # average per arm; greedy sets must match an independent EMA tracker
    # after every step.
    rng = rng_stream("ema")
    agent_rng = rng_stream("ema-agent")
    q = QTable(1, 12, alpha=0.8, gamma=0.0)
    ema = [0.0] * 12
    for t in range(1, 300):
        arm = qlearning_select(q, 0, t, agent_rng)
        r = float(rng.random())
        qlearning_update(q, 0, arm, r, 0)
        ema[arm] = ema[arm] + 0.8 * (r - ema[arm])
        q_best = set(np.flatnonzero(q.values[0] == q.values[0].max()))
        e_best = {i for i, v in enumerate(ema) if v == max(ema)}
        assert q_best == e_best


# ------------------------------------------------------------- contextual

def test_contextual_single_context_equals_plain_bandit():
    # Same rng stream on both sides: the action sequences must be identical.
    for seed in range(20):
        plain = EpsilonGreedyAgent(4, rng_stream("eq", seed))
        ctx = ContextualEpsilonGreedyAgent(4, "single", rng_stream("eq", seed))
        reward_rng = rng_stream("eq-rewards", seed)
        for _ in range(200):
            a1, a2 = plain.select(), ctx.select()
            assert a1 == a2
            r = float(reward_rng.random())
            plain.observe(r)
            ctx.observe(r)


def test_contextual_partitions_learning_by_context():
    # Per-context stats must equal brute-force means over that context's
    # own observations only.
    agent = ContextualEpsilonGreedyAgent(4, "binary", rng_stream("part"))
    reward_rng = rng_stream("part-rewards")
    history = {0: [], 1: []}
    for _ in range(400):
        agent.select()
        ctx = agent.last_context
        arm = agent._pending[1]
        r = float(reward_rng.random())
        agent.observe(r)
        history[ctx].append((arm, r))
    for ctx in (0, 1):
        assert history[ctx], "both contexts should occur"
        for arm in range(12):
            rewards = [r for a, r in history[ctx] if a == arm]
            got = agent._stats[ctx].means[arm]
            if rewards:
                assert got == pytest.approx(np.mean(rewards), abs=1e-12)
            else:
                assert got == 0.0


def test_contextual_fresh_context_forces_exploration():
    agent = ContextualEpsilonGreedyAgent(4, "binary", rng_stream("fresh"))
    agent.select()
    assert agent.last_epsilon == 1.0  # first visit of the initial context
    agent.observe(1.0)  # flips to the satisfied context
    agent.select()
    assert agent.last_context == 1
    assert agent.last_epsilon == 1.0  # new context starts its own clock


def test_contextual_global_clock_option():
    hyper = Hyperparameters(context_clock="global")
    agent = ContextualEpsilonGreedyAgent(4, "binary", rng_stream("glob"), hyper)
    agent.select()
    agent.observe(1.0)
    agent.select()
    assert agent.last_epsilon == epsilon(2)  # global t, not per-context


def test_contextual_rejects_unknown_space():
    with pytest.raises(ValidationError):
        ContextualEpsilonGreedyAgent(4, "ternary", rng_stream("x"))


# ------------------------------------------------------------- heuristic

def test_heuristic_keeps_action_when_satisfied():
    current = Action(2, 2)
    assert heuristic_select([0.5] * 4, current, True, rng_stream("h1"), 4) == current


def test_heuristic_moves_to_least_busy_channel():
    rng = rng_stream("h2")
    seen = set()
    for _ in range(200):
        chosen = heuristic_select([0.9, 0.0, 0.0, 0.9], Action(1, 2), False, rng, 4)
        assert chosen.max_bandwidth == 2
        seen.add(chosen.primary)
    assert seen == {2, 3}


def test_heuristic_uniform_over_other_primaries_when_tied():
    rng = rng_stream("h3")
    counts = {2: 0, 3: 0, 4: 0}
    for _ in range(3000):
        chosen = heuristic_select([0.5] * 4, Action(1, 1), False, rng, 4)
        counts[chosen.primary] += 1
    assert min(counts.values()) > 800


def test_heuristic_stays_if_current_is_sole_minimum():
    chosen = heuristic_select([0.0, 0.9, 0.9, 0.9], Action(1, 2), False, rng_stream("h4"), 4)
    assert chosen.primary == 1


def test_heuristic_occupancy_length_validation():
    with pytest.raises(ValidationError):
        heuristic_select([0.5, 0.5], Action(1, 1), False, rng_stream("h5"), 4)


def test_heuristic_agent_needs_occupancy_when_unsatisfied():
    agent = HeuristicAgent(4, rng_stream("h6"))
    agent.select()
    agent.observe(0.2, occupancy=None)
    with pytest.raises(UnsupportedOperationError):
        agent.select()


def test_heuristic_agent_switches_with_occupancy():
    agent = HeuristicAgent(4, rng_stream("h7"))
    first = agent.select()
    agent.observe(0.2, occupancy=(0.9, 0.0, 0.9, 0.9))
    assert agent.select().primary == 2
    assert first.primary == 1


# ------------------------------------------------------------- static

def test_static_select_echoes_fixed_action():
    for action in (Action(1, 1), Action(3, 2), Action(4, 4)):
        assert static_select(action) == action
        agent = StaticAgent(action)
        assert agent.select() == action
        agent.observe(0.0)
        assert agent.select() == action


# ------------------------------------------------------------- factory

@pytest.mark.parametrize(
    "name,cls_name",
    [
        ("egreedy", "EpsilonGreedyAgent"),
        ("ctx-egreedy-2", "ContextualEpsilonGreedyAgent"),
        ("ctx-egreedy-24", "ContextualEpsilonGreedyAgent"),
        ("qlearning-2", "QLearningAgent"),
        ("qlearning-24", "QLearningAgent"),
        ("heuristic", "HeuristicAgent"),
        ("static", "StaticAgent"),
    ],
)
def test_make_agent_selector_strings(name, cls_name):
    agent = make_agent(name, 4, rng_stream("factory", name))
    assert type(agent).__name__ == cls_name
    if name.endswith("-2"):
        assert getattr(agent, "n_contexts", getattr(agent, "n_states", None)) == 2
    if name.endswith("-24"):
        assert getattr(agent, "n_contexts", getattr(agent, "n_states", None)) == 24


def test_make_agent_unknown_name():
    with pytest.raises(ValidationError):
        make_agent("ucb", 4, rng_stream("x"))
