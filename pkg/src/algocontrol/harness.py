"""Experiment protocol: train, evaluate after every episode, repeat
over seeds, aggregate.

Each seed repetition is fully self-contained: all of its randomness is
derived from (master_seed, seed_index) through fixed stream ids, so
seed runs can execute in any order (or in parallel) without changing
any curve, and evaluation draws from streams disjoint from training.
Three instance regimes are supported: none (context-free benchmarks),
distribution (fresh instance per training episode), and fixed train/
test sets with held-out evaluation every ``test_eval_every`` episodes.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .agents import AgentHyperparams, DQNAgent, TabularAgent, AGENT_KINDS
from .benchmarks import (
    BenchmarkConfig,
    make_env,
    make_instance_set,
    sample_sigmoid_instance,
)
from .blackbox import blackbox_optimize
from .core import (
    CONTEXT_FREE,
    ContractError,
    Environment,
    InstanceContext,
    SeedSpec,
    derive_seed,
    derive_stream,
)

INSTANCE_MODES = ("none", "distribution", "fixed")

# Stream ids, fixed for reproducibility. Per-run streams hang off
# derive_seed(master_seed, RUN_BASE + seed_index); instance sets are
# shared by all runs and hang off the master seed directly.
TRAIN_SET_STREAM = 1 << 40
TEST_SET_STREAM = (1 << 40) + 1
RUN_BASE = 0

AGENT_INIT_STREAM = 1
EXPLORE_STREAM = 2
TRAIN_INSTANCE_STREAM = 3
EVAL_INSTANCE_STREAM = 4
BLACKBOX_STREAM = 5
TRAIN_NOISE_BASE = 1 << 32
EVAL_NOISE_BASE = 1 << 33
TEST_NOISE_BASE = 1 << 34


class ConfigError(ContractError):
    """Invalid experiment configuration; raised before any episode runs."""


@dataclass(frozen=True)
class ExperimentConfig:
    benchmark: BenchmarkConfig
    agent_kind: str
    hp: AgentHyperparams = field(default_factory=AgentHyperparams)
    n_seeds: int = 25
    n_episodes: int = 1000
    master_seed: int = 0
    instance_mode: str = ""  # "" = infer from the benchmark
    n_train_instances: int = 100
    n_test_instances: int = 100
    eval_runs: int = 0  # 0 = regime default (1 deterministic / 10 stochastic)
    test_eval_every: int = 500
    train_eval_every: int = 1
    smoothing_window: int = 10
    neighbor_fraction: float = 0.5
    record_wall_time: bool = False
    workers: int = 1
    output_path: str = ""

    def validated(self) -> "ExperimentConfig":
        cfg = self
        if cfg.agent_kind not in AGENT_KINDS:
            raise ConfigError(
                f"unknown agent kind {cfg.agent_kind!r}; expected one of {AGENT_KINDS}"
            )
        if cfg.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1")
        if cfg.n_episodes < 1:
            raise ConfigError("n_episodes must be >= 1")
        if cfg.smoothing_window < 1:
            raise ConfigError("smoothing_window must be >= 1")
        if cfg.test_eval_every < 1 or cfg.train_eval_every < 1:
            raise ConfigError("evaluation intervals must be >= 1")
        if not 0.0 <= cfg.neighbor_fraction <= 1.0:
            raise ConfigError("neighbor_fraction must be in [0, 1]")
        if cfg.instance_mode == "":
            mode = "distribution" if cfg.benchmark.has_instances else "none"
            cfg = replace(cfg, instance_mode=mode)
        if cfg.instance_mode not in INSTANCE_MODES:
            raise ConfigError(
                f"unknown instance mode {cfg.instance_mode!r}; expected one of {INSTANCE_MODES}"
            )
        if cfg.instance_mode == "none" and cfg.benchmark.has_instances:
            raise ConfigError(
                f"benchmark {cfg.benchmark.kind!r} requires instances; "
                "use instance_mode distribution or fixed"
            )
        if cfg.instance_mode != "none" and not cfg.benchmark.has_instances:
            raise ConfigError(
                f"benchmark {cfg.benchmark.kind!r} is context-free; use instance_mode none"
            )
        if cfg.instance_mode == "fixed" and (
            cfg.n_train_instances < 1 or cfg.n_test_instances < 1
        ):
            raise ConfigError("fixed mode needs n_train_instances and n_test_instances >= 1")
        if cfg.agent_kind == "dqn" and not cfg.benchmark.has_instances:
            # DQN encodes [t/T, context]; context-free benchmarks would
            # leave it blind to histories, so keep it on the sigmoid family.
            raise ConfigError("dqn supports only the sigmoid-family benchmarks")
        if cfg.eval_runs < 0:
            raise ConfigError("eval_runs must be >= 0")
        if cfg.eval_runs == 0:
            cfg = replace(cfg, eval_runs=self._default_eval_runs(cfg))
        return cfg

    @staticmethod
    def _default_eval_runs(cfg: "ExperimentConfig") -> int:
        if cfg.instance_mode == "none":
            return 10 if cfg.benchmark.stochastic_reward else 1
        if cfg.instance_mode == "distribution":
            return 10
        return cfg.n_train_instances


@dataclass
class SeedCurve:
    """Per-seed learning curve: rewards indexed by training episode."""

    seed: int
    episodes: list[int]
    train_rewards: list[float]
    test_points: list[tuple[int, float]] = field(default_factory=list)
    wall_time_ms: int = 0


@dataclass
class AggregateCurve:
    episodes: list[int]
    mean: list[float]
    stderr: list[float]


def smooth(values: list[float], window: int = 10) -> list[float]:
    """Trailing moving average; the first window-1 points average over
    the available prefix so curves start at the first episode."""
    if window < 1:
        raise ContractError("window must be >= 1")
    out: list[float] = []
    acc = 0.0
    for i, v in enumerate(values):
        acc += v
        if i >= window:
            acc -= values[i - window]
            out.append(acc / window)
        else:
            out.append(acc / (i + 1))
    return out


def aggregate(curves: list[SeedCurve]) -> AggregateCurve:
    """Pointwise mean and standard error over per-seed curves."""
    if not curves:
        raise ContractError("need at least one curve to aggregate")
    lengths = {len(c.train_rewards) for c in curves}
    if len(lengths) != 1:
        raise ContractError(f"curves have ragged lengths: {sorted(lengths)}")
    if any(c.episodes != curves[0].episodes for c in curves):
        raise ContractError("curves disagree on their episode grids")
    data = np.array([c.train_rewards for c in curves])
    mean = data.mean(axis=0)
    if data.shape[0] > 1:
        stderr = data.std(axis=0, ddof=1) / math.sqrt(data.shape[0])
    else:
        stderr = np.zeros(data.shape[1])
    return AggregateCurve(
        episodes=list(curves[0].episodes),
        mean=[float(v) for v in mean],
        stderr=[float(v) for v in stderr],
    )


def greedy_rollout(
    policy,
    env: Environment,
    instance: InstanceContext,
    seed: SeedSpec,
) -> float:
    """One greedy episode; returns the total reward."""
    obs = env.reset(instance, seed)
    total = 0.0
    while not env.done:
        outcome = env.step(policy(obs))
        total += outcome.reward
        obs = outcome.observation
    return total


def run_training_episode(
    agent,
    env: Environment,
    instance: InstanceContext,
    seed: SeedSpec,
    explore_rng: np.random.Generator,
    train_rng: np.random.Generator,
) -> float:
    """One training episode: act, observe, update; returns total reward."""
    agent.begin_episode()
    obs = env.reset(instance, seed)
    total = 0.0
    while not env.done:
        action = agent.select_action(obs, explore_rng)
        outcome = env.step(action)
        agent.observe(obs, action, outcome.reward, outcome.observation, outcome.done)
        total += outcome.reward
        obs = outcome.observation
    agent.end_episode(train_rng)
    return total


def _make_agent(cfg: ExperimentConfig, run_seed: int):
    spec = make_env(cfg.benchmark).spec
    if cfg.agent_kind == "dqn":
        # sigmoid-family context is (scale in +-100, inflection near T/2)
        scales = (0.01, 1.0 / spec.horizon)
        return DQNAgent(
            action_count=spec.action_count,
            horizon=spec.horizon,
            context_dim=spec.context_dim,
            total_episodes=cfg.n_episodes,
            hp=cfg.hp,
            rng=derive_stream(run_seed, AGENT_INIT_STREAM),
            context_scales=scales,
        )
    return TabularAgent(cfg.agent_kind, spec.action_count, hp=cfg.hp)


class _EvalSetup:
    """Evaluation instances and paired noise seeds for one seed run."""

    def __init__(self, cfg: ExperimentConfig, run_seed: int,
                 train_set: list[InstanceContext] | None) -> None:
        self.cfg = cfg
        self.run_seed = run_seed
        horizon = cfg.benchmark.resolved_horizon
        if cfg.instance_mode == "distribution":
            rng = derive_stream(run_seed, EVAL_INSTANCE_STREAM)
            self.instances = make_instance_set(rng, horizon, cfg.eval_runs)
        elif cfg.instance_mode == "fixed":
            assert train_set is not None
            self.instances = train_set
        else:
            self.instances = [CONTEXT_FREE] * cfg.eval_runs

    def evaluate(self, agent, env: Environment, episode: int) -> float:
        # Instances stay fixed across checkpoints (variance reduction);
        # reward noise is fresh per checkpoint so smoothing averages it.
        policy = agent.greedy_action
        base = EVAL_NOISE_BASE + episode * len(self.instances)
        total = 0.0
        for r, instance in enumerate(self.instances):
            total += greedy_rollout(
                policy, env, instance, SeedSpec(self.run_seed, base + r)
            )
        return total / len(self.instances)


def evaluate_on_test_set(
    agent,
    env: Environment,
    test_instances: list[InstanceContext],
    run_seed: int,
) -> float:
    """Greedy episode on each held-out instance; mean total reward."""
    if not test_instances:
        raise ContractError("test instance set is empty")
    policy = agent.greedy_action
    total = 0.0
    for r, instance in enumerate(test_instances):
        total += greedy_rollout(
            policy, env, instance, SeedSpec(run_seed, TEST_NOISE_BASE + r)
        )
    return total / len(test_instances)


def _instance_sets(
    cfg: ExperimentConfig,
) -> tuple[list[InstanceContext] | None, list[InstanceContext] | None]:
    """Fixed train/test sets, shared by every seed run (disjoint streams)."""
    if cfg.instance_mode != "fixed":
        return None, None
    horizon = cfg.benchmark.resolved_horizon
    train = make_instance_set(
        derive_stream(cfg.master_seed, TRAIN_SET_STREAM), horizon, cfg.n_train_instances
    )
    test = make_instance_set(
        derive_stream(cfg.master_seed, TEST_SET_STREAM), horizon, cfg.n_test_instances
    )
    return train, test


def _blackbox_curve(cfg: ExperimentConfig, seed_index: int, run_seed: int,
                    train_set: list[InstanceContext] | None) -> SeedCurve:
    env = make_env(cfg.benchmark)
    instances: list[InstanceContext] | None = None
    if cfg.instance_mode == "distribution":
        rng = derive_stream(run_seed, EVAL_INSTANCE_STREAM)
        instances = make_instance_set(rng, cfg.benchmark.resolved_horizon, cfg.eval_runs)
    elif cfg.instance_mode == "fixed":
        instances = train_set
    result = blackbox_optimize(
        env,
        instances,
        episode_budget=cfg.n_episodes,
        rng=derive_stream(run_seed, BLACKBOX_STREAM),
        neighbor_fraction=cfg.neighbor_fraction,
    )
    curve = result.best_so_far
    episodes = list(range(1, cfg.n_episodes + 1))
    thinned = [
        (e, curve[e - 1]) for e in episodes if e % cfg.train_eval_every == 0
    ]
    return SeedCurve(
        seed=seed_index,
        episodes=[e for e, _ in thinned],
        train_rewards=[v for _, v in thinned],
    )


def train_and_evaluate(
    cfg: ExperimentConfig,
    seed_index: int,
    train_set: list[InstanceContext] | None = None,
    test_set: list[InstanceContext] | None = None,
) -> SeedCurve:
    """One seed repetition of the full protocol.

    Trains for ``n_episodes`` episodes; after every ``train_eval_every``-th
    episode the greedy policy is evaluated per the instance regime
    (1 run deterministic, mean of 10 runs stochastic, once per training
    instance for fixed sets). Fixed mode additionally evaluates the
    held-out test set every ``test_eval_every`` episodes.
    """
    cfg = cfg.validated()
    if train_set is None and cfg.instance_mode == "fixed":
        train_set, test_set = _instance_sets(cfg)
    run_seed = derive_seed(cfg.master_seed, RUN_BASE + seed_index)
    started = time.perf_counter()

    if cfg.agent_kind == "blackbox":
        curve = _blackbox_curve(cfg, seed_index, run_seed, train_set)
        if cfg.record_wall_time:
            curve.wall_time_ms = int((time.perf_counter() - started) * 1000)
        return curve

    env = make_env(cfg.benchmark)
    eval_env = make_env(cfg.benchmark)
    agent = _make_agent(cfg, run_seed)
    explore_rng = derive_stream(run_seed, EXPLORE_STREAM)
    train_rng = derive_stream(run_seed, TRAIN_NOISE_BASE)
    instance_rng = derive_stream(run_seed, TRAIN_INSTANCE_STREAM)
    eval_setup = _EvalSetup(cfg, run_seed, train_set)

    episodes: list[int] = []
    train_rewards: list[float] = []
    test_points: list[tuple[int, float]] = []
    for episode in range(1, cfg.n_episodes + 1):
        run_training_episode(
            agent,
            env,
            _draw_instance(cfg, instance_rng, train_set),
            SeedSpec(run_seed, TRAIN_NOISE_BASE + episode),
            explore_rng,
            train_rng,
        )
        if episode % cfg.train_eval_every == 0:
            episodes.append(episode)
            train_rewards.append(eval_setup.evaluate(agent, eval_env, episode))
        if cfg.instance_mode == "fixed" and episode % cfg.test_eval_every == 0:
            assert test_set is not None
            test_points.append(
                (episode, evaluate_on_test_set(agent, eval_env, test_set, run_seed))
            )
    curve = SeedCurve(
        seed=seed_index,
        episodes=episodes,
        train_rewards=train_rewards,
        test_points=test_points,
    )
    if cfg.record_wall_time:
        curve.wall_time_ms = int((time.perf_counter() - started) * 1000)
    return curve


def _draw_instance(
    cfg: ExperimentConfig,
    instance_rng: np.random.Generator,
    train_set: list[InstanceContext] | None,
) -> InstanceContext:
    if cfg.instance_mode == "distribution":
        horizon = cfg.benchmark.resolved_horizon
        return sample_sigmoid_instance(instance_rng, horizon).as_context()
    if cfg.instance_mode == "fixed":
        assert train_set is not None
        return train_set[int(instance_rng.integers(len(train_set)))]
    return CONTEXT_FREE


def train_agent(cfg: ExperimentConfig, seed_index: int):
    """Train one seed's agent without evaluation and return it.

    Training consumes no evaluation streams, so the returned agent is
    bit-identical to the one inside ``train_and_evaluate`` for the same
    seed.
    """
    cfg = cfg.validated()
    if cfg.agent_kind == "blackbox":
        raise ContractError("blackbox runs produce schedules, not agent snapshots")
    train_set, _ = _instance_sets(cfg)
    run_seed = derive_seed(cfg.master_seed, RUN_BASE + seed_index)
    env = make_env(cfg.benchmark)
    agent = _make_agent(cfg, run_seed)
    explore_rng = derive_stream(run_seed, EXPLORE_STREAM)
    train_rng = derive_stream(run_seed, TRAIN_NOISE_BASE)
    instance_rng = derive_stream(run_seed, TRAIN_INSTANCE_STREAM)
    for episode in range(1, cfg.n_episodes + 1):
        run_training_episode(
            agent,
            env,
            _draw_instance(cfg, instance_rng, train_set),
            SeedSpec(run_seed, TRAIN_NOISE_BASE + episode),
            explore_rng,
            train_rng,
        )
    return agent


def _run_one_seed(args: tuple) -> SeedCurve:
    cfg, seed_index, train_set, test_set = args
    return train_and_evaluate(cfg, seed_index, train_set, test_set)


def run_experiment(cfg: ExperimentConfig) -> list[SeedCurve]:
    """All seed repetitions; deterministic regardless of worker count."""
    cfg = cfg.validated()
    train_set, test_set = _instance_sets(cfg)
    jobs = [(cfg, k, train_set, test_set) for k in range(cfg.n_seeds)]
    if cfg.workers > 1:
        import multiprocessing

        with multiprocessing.Pool(cfg.workers) as pool:
            curves = pool.map(_run_one_seed, jobs)
    else:
        curves = [_run_one_seed(job) for job in jobs]
    return sorted(curves, key=lambda c: c.seed)


def curves_to_csv_rows(
    cfg: ExperimentConfig, curves: list[SeedCurve]
) -> list[tuple]:
    """Rows for the result CSV, sorted by (agent, seed, episode, phase)."""
    rows: list[tuple] = []
    for curve in curves:
        for episode, reward in zip(curve.episodes, curve.train_rewards):
            rows.append(
                (
                    cfg.benchmark.kind,
                    cfg.agent_kind,
                    curve.seed,
                    episode,
                    "train",
                    reward,
                    curve.wall_time_ms,
                )
            )
        for episode, reward in curve.test_points:
            rows.append(
                (
                    cfg.benchmark.kind,
                    cfg.agent_kind,
                    curve.seed,
                    episode,
                    "test",
                    reward,
                    curve.wall_time_ms,
                )
            )
    rows.sort(key=lambda r: (r[1], r[2], r[3], r[4]))
    return rows


CSV_HEADER = "benchmark,agent,seed,episode,phase,eval_reward,wall_time_ms"


def format_csv(rows: list[tuple]) -> str:
    """CSV text with floats printed to 6 significant digits."""
    lines = [CSV_HEADER]
    for benchmark, agent, seed, episode, phase, reward, wall_ms in rows:
        lines.append(
            f"{benchmark},{agent},{seed},{episode},{phase},{reward:.6g},{wall_ms}"
        )
    return "\n".join(lines) + "\n"


def write_csv(path: str, cfg: ExperimentConfig, curves: list[SeedCurve]) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(format_csv(curves_to_csv_rows(cfg, curves)))
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
