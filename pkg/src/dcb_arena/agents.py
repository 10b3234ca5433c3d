"""Learning policies for per-BSS spectrum selection.

The reward is the throughput satisfaction: delivered over offered traffic,
clipped to [0, 1]. Policies provided:

- decaying epsilon-greedy bandit over the action space,
- contextual epsilon-greedy (independent bandit per context),
- tabular Q-learning over the same context definitions,
- an occupancy heuristic and a static baseline.

Exploration decays as ``epsilon0 / sqrt(t)`` everywhere so comparisons
isolate the state/context structure rather than the schedule. Each policy
instance owns its Generator and is confined to one agent loop; instances
never share state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedOperationError, ValidationError
from .spectrum import Action, action_index, enumerate_actions, n_actions

ALGORITHMS = (
    "egreedy",
    "ctx-egreedy-2",
    "ctx-egreedy-24",
    "qlearning-2",
    "qlearning-24",
    "heuristic",
    "static",
)


def reward(throughput_mbps: float, load_mbps: float) -> float:
    """Throughput satisfaction sigma = delivered/offered, clipped to [0, 1]."""
    if load_mbps <= 0:
        raise ValidationError(f"load must be positive, got {load_mbps!r}")
    return min(max(throughput_mbps / load_mbps, 0.0), 1.0)


def epsilon(t: int, epsilon0: float = 1.0) -> float:
    """Exploration rate at iteration t (1-based): epsilon0 / sqrt(t)."""
    if t < 1:
        raise ValidationError(f"iteration counter must be >= 1, got {t!r}")
    return epsilon0 / math.sqrt(t)


class ArmStats:
    """Pull counts and running mean reward per arm.

    Means are exact arithmetic averages of the observed rewards; unpulled
    arms report a (pessimistic) mean of zero.
    """

    __slots__ = ("counts", "means")

    def __init__(self, n_arms: int):
        if n_arms < 1:
            raise ValidationError("need at least one arm")
        self.counts = np.zeros(n_arms, dtype=np.int64)
        self.means = np.zeros(n_arms)

    @property
    def n_arms(self) -> int:
        return len(self.counts)


def egreedy_update(stats: ArmStats, arm: int, observed: float) -> ArmStats:
    """Fold one reward into the arm's incremental mean."""
    if not 0 <= arm < stats.n_arms:
        raise ValidationError(f"arm {arm} out of range")
    stats.counts[arm] += 1
    stats.means[arm] += (observed - stats.means[arm]) / stats.counts[arm]
    return stats


def _argmax_arms(values: np.ndarray) -> np.ndarray:
    return np.flatnonzero(values == values.max())


def _pick(values: np.ndarray, t: int, rng, epsilon0: float, tie_break: str) -> int:
    eps = epsilon(t, epsilon0)
    if rng.random() < eps:
        return int(rng.integers(0, len(values)))
    best = _argmax_arms(values)
    if len(best) == 1 or tie_break == "first":
        return int(best[0])
    return int(best[rng.integers(0, len(best))])


def egreedy_select(
    stats: ArmStats,
    t: int,
    rng: np.random.Generator,
    epsilon0: float = 1.0,
    tie_break: str = "random",
) -> int:
    """Explore uniformly with probability epsilon(t), otherwise exploit the
    best mean, breaking ties uniformly at random (or first-index for tests).
    """
    return _pick(stats.means, t, rng, epsilon0, tie_break)


def context_binary(sigma: float, threshold: float) -> int:
    """1 when satisfied (sigma >= threshold, boundary inclusive) else 0."""
    if not 0 < threshold <= 1:
        raise ValidationError(f"threshold must be in (0, 1], got {threshold!r}")
    return 1 if sigma >= threshold else 0


def context_combined(
    sigma: float, threshold: float, last_action: Action, n_channels: int
) -> int:
    """Combined context: satisfaction bit times |A| plus the last arm index.

    Distinct (satisfied, action) pairs map to distinct indices
    0 .. 2*|A|-1 (24 states in a 4-channel system).
    """
    return context_binary(sigma, threshold) * n_actions(n_channels) + action_index(
        last_action, n_channels
    )


class QTable:
    """Tabular action values with learning rate alpha and discount gamma.

    With rewards in [0, 1] every entry stays within [0, 1/(1-gamma)].
    """

    __slots__ = ("values", "alpha", "gamma")

    def __init__(self, n_states: int, n_arms: int, alpha: float = 0.8, gamma: float = 0.2):
        if n_states < 1 or n_arms < 1:
            raise ValidationError("QTable needs at least one state and one arm")
        if not 0 <= alpha <= 1:
            raise ValidationError(f"alpha must be in [0, 1], got {alpha!r}")
        if not 0 <= gamma < 1:
            raise ValidationError(f"gamma must be in [0, 1), got {gamma!r}")
        self.values = np.zeros((n_states, n_arms))
        self.alpha = alpha
        self.gamma = gamma


def qlearning_update(q: QTable, s: int, arm: int, observed: float, s_next: int) -> QTable:
    """One off-policy temporal-difference step:

    Q(s, a) += alpha * (r + gamma * max_a' Q(s', a') - Q(s, a))
    """
    n_states, n_arms = q.values.shape
    if not (0 <= s < n_states and 0 <= s_next < n_states and 0 <= arm < n_arms):
        raise ValidationError("state or arm index out of range")
    target = observed + q.gamma * q.values[s_next].max()
    q.values[s, arm] += q.alpha * (target - q.values[s, arm])
    return q


def qlearning_select(
    q: QTable,
    s: int,
    t: int,
    rng: np.random.Generator,
    epsilon0: float = 1.0,
    tie_break: str = "random",
) -> int:
    """Epsilon-greedy over the state's row, same schedule as the bandit."""
    n_states = q.values.shape[0]
    if not 0 <= s < n_states:
        raise ValidationError(f"state {s} out of range")
    return _pick(q.values[s], t, rng, epsilon0, tie_break)


def heuristic_select(
    occupancy,
    current: Action,
    satisfied: bool,
    rng: np.random.Generator,
    n_channels: int,
) -> Action:
    """Keep the current action when satisfied; otherwise move the primary to
    a least-busy channel (uniform among minima, skipping the current primary
    when any other minimum exists). Bandwidth is kept."""
    occupancy = np.asarray(occupancy, dtype=float)
    if len(occupancy) != n_channels:
        raise ValidationError(
            f"occupancy has {len(occupancy)} entries for {n_channels} channels"
        )
    if satisfied:
        return current
    candidates = [int(c) + 1 for c in np.flatnonzero(occupancy == occupancy.min())]
    others = [c for c in candidates if c != current.primary]
    pool = others if others else candidates
    choice = pool[int(rng.integers(0, len(pool)))]
    return Action(choice, current.max_bandwidth)


def static_select(fixed: Action) -> Action:
    """The no-learning baseline: echo the fixed action."""
    return fixed


@dataclass
class Hyperparameters:
    """Knobs shared by the agent factory; defaults follow the evaluation
    setup (alpha 0.8, gamma 0.2, epsilon0 1, satisfaction threshold 0.99)."""

    epsilon0: float = 1.0
    alpha: float = 0.8
    gamma: float = 0.2
    sat_threshold: float = 0.99
    tie_break: str = "random"
    context_clock: str = "per-context"  # or "global"
    static_action: Action | None = None


class Agent:
    """Protocol for one BSS's policy: select(), then observe() the reward.

    ``last_epsilon`` and ``last_context`` describe the most recent selection
    for logging. Instances are single-owner; no cross-agent state exists.
    """

    name = "agent"
    needs_occupancy = False

    def __init__(self):
        self.last_epsilon = 0.0
        self.last_context = 0

    def select(self) -> Action:
        raise NotImplementedError

    def observe(self, sigma: float, occupancy=None) -> None:
        raise NotImplementedError


class StaticAgent(Agent):
    name = "static"

    def __init__(self, fixed: Action):
        super().__init__()
        self._fixed = fixed

    def select(self) -> Action:
        return static_select(self._fixed)

    def observe(self, sigma: float, occupancy=None) -> None:
        pass


class EpsilonGreedyAgent(Agent):
    """Plain decaying epsilon-greedy bandit over the whole action space."""

    name = "egreedy"

    def __init__(self, n_channels: int, rng, hyper: Hyperparameters | None = None):
        super().__init__()
        self._hyper = hyper or Hyperparameters()
        self._actions = enumerate_actions(n_channels)
        self._stats = ArmStats(len(self._actions))
        self._rng = rng
        self._t = 0
        self._pending: int | None = None

    def select(self) -> Action:
        self._t += 1
        arm = egreedy_select(
            self._stats, self._t, self._rng, self._hyper.epsilon0, self._hyper.tie_break
        )
        self.last_epsilon = epsilon(self._t, self._hyper.epsilon0)
        self.last_context = 0
        self._pending = arm
        return self._actions[arm]

    def observe(self, sigma: float, occupancy=None) -> None:
        if self._pending is None:
            raise ValidationError("observe() before select()")
        egreedy_update(self._stats, self._pending, sigma)
        self._pending = None


class ContextualEpsilonGreedyAgent(Agent):
    """Independent bandit per context; no information crosses contexts.

    The context for iteration t is derived from the reward observed at t-1
    and the action taken at t-1. Before any observation the agent is in the
    (unsatisfied, arm 0) context. Spaces: "binary" (2), "combined" (2|A|),
    "single" (1, degenerate - equivalent to the plain bandit).
    """

    def __init__(
        self, n_channels: int, space: str, rng, hyper: Hyperparameters | None = None
    ):
        super().__init__()
        if space not in ("binary", "combined", "single"):
            raise ValidationError(f"unknown context space {space!r}")
        self._hyper = hyper or Hyperparameters()
        self._space = space
        self._n_channels = n_channels
        self._actions = enumerate_actions(n_channels)
        self.n_contexts = {"single": 1, "binary": 2, "combined": 2 * len(self._actions)}[space]
        self.name = f"ctx-egreedy-{self.n_contexts}" if space != "single" else "ctx-egreedy-1"
        self._stats = [ArmStats(len(self._actions)) for _ in range(self.n_contexts)]
        self._visits = [0] * self.n_contexts
        self._rng = rng
        self._t = 0
        self._last_sigma = 0.0
        self._last_arm = 0
        self._pending: tuple[int, int] | None = None

    def _context(self) -> int:
        if self._space == "single":
            return 0
        if self._space == "binary":
            return context_binary(self._last_sigma, self._hyper.sat_threshold)
        return context_combined(
            self._last_sigma,
            self._hyper.sat_threshold,
            self._actions[self._last_arm],
            self._n_channels,
        )

    def select(self) -> Action:
        self._t += 1
        ctx = self._context()
        self._visits[ctx] += 1
        t_used = self._visits[ctx] if self._hyper.context_clock == "per-context" else self._t
        arm = egreedy_select(
            self._stats[ctx], t_used, self._rng, self._hyper.epsilon0, self._hyper.tie_break
        )
        self.last_epsilon = epsilon(t_used, self._hyper.epsilon0)
        self.last_context = ctx
        self._pending = (ctx, arm)
        return self._actions[arm]

    def observe(self, sigma: float, occupancy=None) -> None:
        if self._pending is None:
            raise ValidationError("observe() before select()")
        ctx, arm = self._pending
        egreedy_update(self._stats[ctx], arm, sigma)
        self._last_sigma = sigma
        self._last_arm = arm
        self._pending = None


class QLearningAgent(Agent):
    """Tabular Q-learning over the binary or combined state space."""

    def __init__(
        self, n_channels: int, space: str, rng, hyper: Hyperparameters | None = None
    ):
        super().__init__()
        if space not in ("binary", "combined"):
            raise ValidationError(f"unknown state space {space!r}")
        self._hyper = hyper or Hyperparameters()
        self._space = space
        self._n_channels = n_channels
        self._actions = enumerate_actions(n_channels)
        self.n_states = 2 if space == "binary" else 2 * len(self._actions)
        self.name = f"qlearning-{self.n_states}"
        self.table = QTable(
            self.n_states, len(self._actions), self._hyper.alpha, self._hyper.gamma
        )
        self._rng = rng
        self._t = 0
        self._state = 0  # (unsatisfied, arm 0) until the first observation
        self._pending: tuple[int, int] | None = None

    def _state_of(self, sigma: float, arm: int) -> int:
        if self._space == "binary":
            return context_binary(sigma, self._hyper.sat_threshold)
        return context_combined(
            sigma, self._hyper.sat_threshold, self._actions[arm], self._n_channels
        )

    def select(self) -> Action:
        self._t += 1
        arm = qlearning_select(
            self.table,
            self._state,
            self._t,
            self._rng,
            self._hyper.epsilon0,
            self._hyper.tie_break,
        )
        self.last_epsilon = epsilon(self._t, self._hyper.epsilon0)
        self.last_context = self._state
        self._pending = (self._state, arm)
        return self._actions[arm]

    def observe(self, sigma: float, occupancy=None) -> None:
        if self._pending is None:
            raise ValidationError("observe() before select()")
        s, arm = self._pending
        s_next = self._state_of(sigma, arm)
        qlearning_update(self.table, s, arm, sigma, s_next)
        self._state = s_next
        self._pending = None


class HeuristicAgent(Agent):
    """Occupancy-driven primary hopping; needs a live environment."""

    name = "heuristic"
    needs_occupancy = True

    def __init__(
        self,
        n_channels: int,
        rng,
        hyper: Hyperparameters | None = None,
        initial: Action | None = None,
    ):
        super().__init__()
        self._hyper = hyper or Hyperparameters()
        self._n_channels = n_channels
        self._rng = rng
        self._current = initial or Action(1, n_channels)
        self._last_sigma: float | None = None
        self._last_occupancy = None

    def select(self) -> Action:
        if self._last_sigma is not None:
            satisfied = self._last_sigma >= self._hyper.sat_threshold
            if not satisfied and self._last_occupancy is None:
                raise UnsupportedOperationError(
                    "heuristic agent needs occupancy observations; run against "
                    "a live environment"
                )
            if not satisfied:
                self._current = heuristic_select(
                    self._last_occupancy,
                    self._current,
                    satisfied,
                    self._rng,
                    self._n_channels,
                )
        self.last_epsilon = 0.0
        self.last_context = 0
        return self._current

    def observe(self, sigma: float, occupancy=None) -> None:
        self._last_sigma = sigma
        self._last_occupancy = occupancy


def make_agent(
    name: str,
    n_channels: int,
    rng: np.random.Generator,
    hyper: Hyperparameters | None = None,
) -> Agent:
    """Instantiate a policy from its selector string."""
    hyper = hyper or Hyperparameters()
    if name == "egreedy":
        return EpsilonGreedyAgent(n_channels, rng, hyper)
    if name == "ctx-egreedy-2":
        return ContextualEpsilonGreedyAgent(n_channels, "binary", rng, hyper)
    if name == "ctx-egreedy-24":
        return ContextualEpsilonGreedyAgent(n_channels, "combined", rng, hyper)
    if name == "qlearning-2":
        return QLearningAgent(n_channels, "binary", rng, hyper)
    if name == "qlearning-24":
        return QLearningAgent(n_channels, "combined", rng, hyper)
    if name == "heuristic":
        return HeuristicAgent(n_channels, rng, hyper, initial=hyper.static_action)
    if name == "static":
        return StaticAgent(hyper.static_action or Action(1, 1))
    raise ValidationError(f"unknown algorithm {name!r}; choose from {ALGORITHMS}")
