"""Experiment configuration files: a flat INI-like format.

Three sections — [benchmark], [agent], [harness] — of ``key = value``
lines. ``#`` and ``;`` start comments. Unknown sections or keys are
rejected with the offending line number, as are type and range errors.
"""

from __future__ import annotations

from dataclasses import replace

from .agents import AGENT_KINDS, AgentHyperparams
from .benchmarks import BENCHMARK_KINDS, BenchmarkConfig
from .core import ContractError
from .harness import INSTANCE_MODES, ConfigError, ExperimentConfig

_BENCH_KEYS = ("kind", "horizon", "levels", "fuzzy_mean", "fuzzy_spread")
_AGENT_KEYS = (
    "kind",
    "gamma",
    "epsilon",
    "alpha",
    "dqn_lr",
    "target_sync_every",
    "batch_size",
    "buffer_capacity",
    "eps_decay_fraction",
)
_HARNESS_KEYS = (
    "episodes",
    "n_seeds",
    "seed",
    "instance_mode",
    "train_instances",
    "test_instances",
    "eval_runs",
    "test_eval_every",
    "train_eval_every",
    "smoothing_window",
    "neighbor_fraction",
    "record_wall_time",
    "workers",
    "output",
)
_SECTIONS = {"benchmark": _BENCH_KEYS, "agent": _AGENT_KEYS, "harness": _HARNESS_KEYS}


def _parse_lines(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{current}]")
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if key not in _SECTIONS[current]:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{current}]")
        sections[current][key] = (value.strip(), lineno)
    return sections


def _get(sections, section: str, key: str, default=None):
    entry = sections.get(section, {}).get(key)
    return entry[0] if entry is not None else default


def _convert(sections, section: str, key: str, kind, default):
    entry = sections.get(section, {}).get(key)
    if entry is None:
        return default
    value, lineno = entry
    try:
        if kind is bool:
            lowered = value.lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
            raise ValueError(value)
        return kind(value)
    except ValueError:
        raise ConfigError(
            f"line {lineno}: key {section}.{key} expects {kind.__name__}, got {value!r}"
        ) from None


def _require(sections, section: str, key: str) -> str:
    entry = sections.get(section, {}).get(key)
    if entry is None:
        raise ConfigError(f"missing required key {section}.{key}")
    return entry[0]


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully validate a config file; defaults are filled in
    (25 seeds, discount 0.99, epsilon 0.1, smoothing window 10)."""
    sections = _parse_lines(text)
    try:
        return _build_config(sections)
    except ConfigError:
        raise
    except ContractError as exc:  # range violations from the dataclasses
        raise ConfigError(str(exc)) from None


def _build_config(sections) -> ExperimentConfig:
    bench_kind = _require(sections, "benchmark", "kind").lower()
    if bench_kind not in BENCHMARK_KINDS:
        raise ConfigError(
            f"benchmark.kind must be one of {BENCHMARK_KINDS}, got {bench_kind!r}"
        )
    benchmark = BenchmarkConfig(
        kind=bench_kind,
        horizon=_convert(sections, "benchmark", "horizon", int, 0),
        levels=_convert(sections, "benchmark", "levels", int, 4),
        fuzzy_mean=_convert(sections, "benchmark", "fuzzy_mean", float, 1.0),
        fuzzy_spread=_convert(sections, "benchmark", "fuzzy_spread", float, 2.0),
    )
    # canonicalize so render/parse round-trips exactly
    benchmark = replace(benchmark, horizon=benchmark.resolved_horizon)

    agent_kind = _require(sections, "agent", "kind").lower()
    if agent_kind not in AGENT_KINDS:
        raise ConfigError(f"agent.kind must be one of {AGENT_KINDS}, got {agent_kind!r}")

    instance_mode = _get(sections, "harness", "instance_mode", "").lower()
    if instance_mode and instance_mode not in INSTANCE_MODES:
        raise ConfigError(
            f"harness.instance_mode must be one of {INSTANCE_MODES}, got {instance_mode!r}"
        )
    # Learning rate convention: 0.1 when the reward signal is noisy from
    # the agent's point of view (stochastic rewards or sampled instances),
    # 1.0 on deterministic benchmarks.
    mode = instance_mode or ("distribution" if benchmark.has_instances else "none")
    default_alpha = 0.1 if (benchmark.stochastic_reward or mode != "none") else 1.0

    hp = AgentHyperparams(
        gamma=_convert(sections, "agent", "gamma", float, 0.99),
        epsilon=_convert(sections, "agent", "epsilon", float, 0.1),
        alpha=_convert(sections, "agent", "alpha", float, default_alpha),
        dqn_lr=_convert(sections, "agent", "dqn_lr", float, 5e-4),
        target_sync_every=_convert(sections, "agent", "target_sync_every", int, 5),
        batch_size=_convert(sections, "agent", "batch_size", int, 0),
        buffer_capacity=_convert(sections, "agent", "buffer_capacity", int, 50_000),
        eps_decay_fraction=_convert(sections, "agent", "eps_decay_fraction", float, 0.1),
    )

    cfg = ExperimentConfig(
        benchmark=benchmark,
        agent_kind=agent_kind,
        hp=hp,
        n_seeds=_convert(sections, "harness", "n_seeds", int, 25),
        n_episodes=_convert(sections, "harness", "episodes", int, 0),
        master_seed=_convert(sections, "harness", "seed", int, 0),
        instance_mode=instance_mode,
        n_train_instances=_convert(sections, "harness", "train_instances", int, 100),
        n_test_instances=_convert(sections, "harness", "test_instances", int, 100),
        eval_runs=_convert(sections, "harness", "eval_runs", int, 0),
        test_eval_every=_convert(sections, "harness", "test_eval_every", int, 500),
        train_eval_every=_convert(sections, "harness", "train_eval_every", int, 1),
        smoothing_window=_convert(sections, "harness", "smoothing_window", int, 10),
        neighbor_fraction=_convert(sections, "harness", "neighbor_fraction", float, 0.5),
        record_wall_time=_convert(sections, "harness", "record_wall_time", bool, False),
        workers=_convert(sections, "harness", "workers", int, 1),
        output_path=_get(sections, "harness", "output", ""),
    )
    if cfg.n_episodes < 1:
        raise ConfigError("missing required key harness.episodes (must be >= 1)")
    return cfg.validated()


def apply_overrides(text: str, overrides: list[str]) -> str:
    """Apply ``section.key=value`` overrides on top of config text."""
    lines = text.splitlines()
    for item in overrides:
        target, sep, value = item.partition("=")
        if not sep or "." not in target:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        section, _, key = target.partition(".")
        section = section.strip().lower()
        key = key.strip().lower()
        if section not in _SECTIONS:
            raise ConfigError(f"override names unknown section {section!r}")
        if key not in _SECTIONS[section]:
            raise ConfigError(f"override names unknown key {key!r} in [{section}]")
        lines = _set_key(lines, section, key, value.strip())
    return "\n".join(lines) + "\n"


def _set_key(lines: list[str], section: str, key: str, value: str) -> list[str]:
    out: list[str] = []
    in_section = False
    placed = False
    for line in lines:
        stripped = line.split("#", 1)[0].split(";", 1)[0].strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            if in_section and not placed:
                out.append(f"{key} = {value}")
                placed = True
            in_section = stripped[1:-1].strip().lower() == section
            out.append(line)
            continue
        if in_section and stripped and "=" in stripped:
            existing = stripped.partition("=")[0].strip().lower()
            if existing == key:
                out.append(f"{key} = {value}")
                placed = True
                continue
        out.append(line)
    if not placed:
        if not in_section:
            out.append(f"[{section}]")
        out.append(f"{key} = {value}")
    return out


def render_config(cfg: ExperimentConfig) -> str:
    """Canonical text for a config; parse_config round-trips it."""
    cfg = cfg.validated()
    b = cfg.benchmark
    lines = [
        "[benchmark]",
        f"kind = {b.kind}",
        f"horizon = {b.resolved_horizon}",
    ]
    if b.kind == "sigmoidmva":
        lines.append(f"levels = {b.levels}")
    if b.kind == "fuzzy":
        lines.append(f"fuzzy_mean = {b.fuzzy_mean!r}")
        lines.append(f"fuzzy_spread = {b.fuzzy_spread!r}")
    hp = cfg.hp
    lines += [
        "",
        "[agent]",
        f"kind = {cfg.agent_kind}",
        f"gamma = {hp.gamma!r}",
        f"epsilon = {hp.epsilon!r}",
        f"alpha = {hp.alpha!r}",
        f"dqn_lr = {hp.dqn_lr!r}",
        f"target_sync_every = {hp.target_sync_every}",
        f"batch_size = {hp.batch_size}",
        f"buffer_capacity = {hp.buffer_capacity}",
        f"eps_decay_fraction = {hp.eps_decay_fraction!r}",
        "",
        "[harness]",
        f"episodes = {cfg.n_episodes}",
        f"n_seeds = {cfg.n_seeds}",
        f"seed = {cfg.master_seed}",
        f"instance_mode = {cfg.instance_mode}",
        f"train_instances = {cfg.n_train_instances}",
        f"test_instances = {cfg.n_test_instances}",
        f"eval_runs = {cfg.eval_runs}",
        f"test_eval_every = {cfg.test_eval_every}",
        f"train_eval_every = {cfg.train_eval_every}",
        f"smoothing_window = {cfg.smoothing_window}",
        f"neighbor_fraction = {cfg.neighbor_fraction!r}",
        f"record_wall_time = {str(cfg.record_wall_time).lower()}",
        f"workers = {cfg.workers}",
    ]
    if cfg.output_path:
        lines.append(f"output = {cfg.output_path}")
    return "\n".join(lines) + "\n"
