"""Tabular learners: Q-learning and the context-oblivious baselines.

All of them key their tables on the same canonical state encoding
(time step, continuous features rounded to the closest integer, recent
action history). URS and GR are the two extremes of epsilon-greedy
Q-learning (epsilon = 1 and 0); PURS selects proportionally to the
expected number of remaining episode steps recorded per state-action.
Every agent evaluates by greedy selection over what it recorded during
training.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import ActionId, ContractError, Observation

StateKey = tuple

def state_key(obs: Observation) -> StateKey:
    """Canonical hashable encoding of an observation for table lookup."""
    return (
        obs.time_step,
        tuple(int(round(f)) for f in obs.continuous_features),
        obs.action_history,
    )


class QTable:
    """Action-value table with default 0 for unseen (state, action) pairs."""

    def __init__(self, action_count: int) -> None:
        if action_count < 1:
            raise ContractError("action_count must be >= 1")
        self.action_count = action_count
        self.values: dict[tuple[StateKey, ActionId], float] = {}

    def get(self, s: StateKey, a: ActionId) -> float:
        return self.values.get((s, a), 0.0)

    def set(self, s: StateKey, a: ActionId, value: float) -> None:
        self.values[(s, a)] = value

    def row(self, s: StateKey) -> list[float]:
        return [self.values.get((s, a), 0.0) for a in range(self.action_count)]

    def max(self, s: StateKey) -> float:
        return max(self.row(s))

    def argmax(self, s: StateKey) -> ActionId:
        row = self.row(s)
        best = row[0]
        best_a = 0
        for a in range(1, self.action_count):
            if row[a] > best:
                best = row[a]
                best_a = a
        return best_a

    def copy(self) -> "QTable":
        clone = QTable(self.action_count)
        clone.values = dict(self.values)
        return clone

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class TransitionRecord:
    visit_count: int = 0
    mean_reward: float = 0.0
    mean_remaining_steps: float = 0.0
    successor_counts: dict[StateKey, int] = field(default_factory=dict)


class TransitionStats:
    """Per (state, action) ledger: visits, running mean reward, running
    mean of remaining episode steps, and successor-state counts."""

    def __init__(self, action_count: int) -> None:
        self.action_count = action_count
        self.records: dict[tuple[StateKey, ActionId], TransitionRecord] = {}

    def record(self, s: StateKey, a: ActionId) -> TransitionRecord:
        return self.records.setdefault((s, a), TransitionRecord())

    def get(self, s: StateKey, a: ActionId) -> TransitionRecord | None:
        return self.records.get((s, a))

    def visit_count(self, s: StateKey, a: ActionId) -> int:
        rec = self.records.get((s, a))
        return rec.visit_count if rec is not None else 0


def record_transition(
    stats: TransitionStats,
    s: StateKey,
    a: ActionId,
    reward: float,
    s_next: StateKey,
    steps_remaining: int,
) -> TransitionStats:
    """Update the ledger with one observed transition (running means)."""
    rec = stats.record(s, a)
    rec.visit_count += 1
    n = rec.visit_count
    rec.mean_reward += (reward - rec.mean_reward) / n
    rec.mean_remaining_steps += (steps_remaining - rec.mean_remaining_steps) / n
    rec.successor_counts[s_next] = rec.successor_counts.get(s_next, 0) + 1
    return stats


def urs_select(rng: np.random.Generator, action_count: int) -> ActionId:
    """Uniform random selection."""
    if action_count < 1:
        raise ContractError("action_count must be >= 1")
    return int(rng.integers(action_count))


def gr_select(stats: TransitionStats, q: QTable, s: StateKey) -> ActionId:
    """Greedy selection on expected future reward; ties go to the lowest
    action index."""
    return q.argmax(s)


def purs_select(
    rng: np.random.Generator,
    stats: TransitionStats,
    s: StateKey,
    action_count: int,
) -> ActionId:
    """Unvisited actions first (uniformly); otherwise sample an action
    with probability proportional to its mean remaining episode steps.

    Falls back to uniform when every estimate is zero (e.g. the final
    step of any episode).
    """
    unvisited = [a for a in range(action_count) if stats.visit_count(s, a) == 0]
    if unvisited:
        return unvisited[int(rng.integers(len(unvisited)))]
    weights = [stats.record(s, a).mean_remaining_steps for a in range(action_count)]
    total = sum(weights)
    if total <= 0.0:
        return int(rng.integers(action_count))
    u = rng.random() * total
    acc = 0.0
    for a, w in enumerate(weights):
        acc += w
        if u < acc:
            return a
    return action_count - 1


def eps_greedy_select(
    rng: np.random.Generator,
    q: QTable,
    s: StateKey,
    epsilon: float,
    action_count: int,
) -> ActionId:
    """Uniform with probability epsilon, greedy otherwise."""
    if not 0.0 <= epsilon <= 1.0:
        raise ContractError("epsilon must be in [0, 1]")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(action_count))
    return q.argmax(s)


def argmax_with_random_ties(
    rng: np.random.Generator, q: QTable, s: StateKey, action_count: int
) -> ActionId:
    """Greedy selection breaking exact ties uniformly at random.

    Used during training only: with zero-initialized tables, always
    taking the lowest tied index starves states reached off the greedy
    path, which visibly fattens the time-to-optimum tail.
    """
    row = q.row(s)
    best = max(row)
    tied = [a for a in range(action_count) if row[a] == best]
    if len(tied) == 1:
        return tied[0]
    return tied[int(rng.integers(len(tied)))]


@dataclass
class AgentHyperparams:
    """Shared learner settings; defaults follow the experimental setup."""

    gamma: float = 0.99
    epsilon: float = 0.1
    alpha: float = 1.0
    dqn_lr: float = 5e-4
    target_sync_every: int = 5
    batch_size: int = 0  # 0 = episode length
    buffer_capacity: int = 50_000
    eps_decay_fraction: float = 0.1

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ContractError("gamma must be in [0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ContractError("epsilon must be in [0, 1]")
        if not 0.0 < self.alpha <= 1.0:
            raise ContractError("alpha must be in (0, 1]")


def q_update(
    q: QTable,
    s: StateKey,
    a: ActionId,
    reward: float,
    s_next: StateKey,
    done: bool,
    hp: AgentHyperparams,
) -> QTable:
    """One-step Q-learning update (in place; the table is returned)."""
    bootstrap = 0.0 if done else q.max(s_next)
    q.set(
        s,
        a,
        (1.0 - hp.alpha) * q.get(s, a) + hp.alpha * (reward + hp.gamma * bootstrap),
    )
    return q


class GreedyTablePolicy:
    """Frozen greedy policy: a snapshot decoupled from further training."""

    def __init__(self, q: QTable) -> None:
        self._q = q.copy()

    def __call__(self, obs: Observation) -> ActionId:
        return self._q.argmax(state_key(obs))

    @property
    def q(self) -> QTable:
        return self._q


class TabularAgent:
    """Q-table learner covering qlearn, urs, gr and purs behaviours.

    ``kind`` selects the training-time action rule; evaluation is always
    greedy on the learned table. URS and GR are realized as epsilon = 1
    and epsilon = 0.
    """

    KINDS = ("qlearn", "urs", "gr", "purs")

    def __init__(
        self,
        kind: str,
        action_count: int,
        hp: AgentHyperparams | None = None,
    ) -> None:
        if kind not in self.KINDS:
            raise ContractError(f"unknown tabular agent kind {kind!r}")
        self.kind = kind
        self.action_count = action_count
        self.hp = hp or AgentHyperparams()
        if kind == "urs":
            self.epsilon = 1.0
        elif kind == "gr":
            self.epsilon = 0.0
        else:
            self.epsilon = self.hp.epsilon
        self.q = QTable(action_count)
        self.stats = TransitionStats(action_count)
        self.episodes_trained = 0
        self._episode: list[tuple[StateKey, ActionId, float, StateKey, bool]] = []

    def begin_episode(self) -> None:
        self._episode = []

    def select_action(self, obs: Observation, rng: np.random.Generator) -> ActionId:
        s = state_key(obs)
        if self.kind == "purs":
            return purs_select(rng, self.stats, s, self.action_count)
        if self.epsilon > 0.0 and rng.random() < self.epsilon:
            return int(rng.integers(self.action_count))
        return argmax_with_random_ties(rng, self.q, s, self.action_count)

    def observe(
        self,
        obs: Observation,
        action: ActionId,
        reward: float,
        next_obs: Observation,
        done: bool,
    ) -> None:
        s, s_next = state_key(obs), state_key(next_obs)
        q_update(self.q, s, action, reward, s_next, done, self.hp)
        self._episode.append((s, action, reward, s_next, done))

    def end_episode(self, rng: np.random.Generator | None = None) -> None:
        # Remaining steps are only known once the episode length is.
        length = len(self._episode)
        for i, (s, a, r, s_next, _) in enumerate(self._episode):
            record_transition(self.stats, s, a, r, s_next, length - 1 - i)
        self._episode = []
        self.episodes_trained += 1

    def greedy_action(self, obs: Observation) -> ActionId:
        return self.q.argmax(state_key(obs))

    def extract_greedy_policy(self) -> GreedyTablePolicy:
        return GreedyTablePolicy(self.q)
