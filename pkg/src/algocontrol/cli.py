"""Command-line front end.

Subcommands: ``run`` (execute an experiment from a config file),
``bench-info`` (print a benchmark's static shape), ``report``
(summarize result CSVs as a table, plot-ready series, or an SVG chart),
``replay`` (greedy rollout of a saved agent snapshot).

Exit codes: 0 success, 2 config error, 3 runtime error, 4 I/O error.
Errors print a single line with a greppable prefix (E-CONFIG, E-RUNTIME,
E-IO). The environment variable ``DACBENCH_SEED`` overrides the master
seed of any run.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys

import numpy as np

from .agents import load_snapshot, save_agent
from .benchmarks import BENCHMARK_KINDS, BenchmarkConfig, make_env
from .config import apply_overrides, parse_config, render_config
from .core import ContractError, InstanceContext, SeedSpec
from .harness import (
    CSV_HEADER,
    ConfigError,
    SeedCurve,
    aggregate,
    run_experiment,
    smooth,
    train_agent,
    write_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_IO = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="algocontrol",
        description="Benchmarks and agents for per-timestep algorithm control.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment from a config file")
    run_p.add_argument("config", help="path to the experiment config")
    run_p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override a config value (repeatable)",
    )
    run_p.add_argument("--output", default="", help="result CSV path")
    run_p.add_argument(
        "--save-agent",
        default="",
        metavar="PATH",
        help="after the run, retrain one seed's agent and snapshot it",
    )
    run_p.add_argument(
        "--agent-seed",
        type=int,
        default=0,
        help="seed index for --save-agent (default 0)",
    )
    run_p.add_argument("-v", "--verbose", action="store_true")

    info_p = sub.add_parser("bench-info", help="print a benchmark's static shape")
    info_p.add_argument("benchmark", choices=BENCHMARK_KINDS)
    info_p.add_argument("--horizon", type=int, default=0)
    info_p.add_argument("--levels", type=int, default=4)

    report_p = sub.add_parser("report", help="summarize result CSVs")
    report_p.add_argument("csvs", nargs="+", help="result CSV paths")
    report_p.add_argument("--mode", choices=("table", "plotdata"), default="table")
    report_p.add_argument("--window", type=int, default=10)
    report_p.add_argument("--svg", default="", help="also write an SVG line chart")

    replay_p = sub.add_parser("replay", help="greedy rollout of a saved snapshot")
    replay_p.add_argument("snapshot", help="agent snapshot path")
    replay_p.add_argument("--benchmark", required=True, choices=BENCHMARK_KINDS)
    replay_p.add_argument("--horizon", type=int, default=0)
    replay_p.add_argument("--levels", type=int, default=4)
    replay_p.add_argument(
        "--instance",
        default="",
        metavar="s=S,p=P",
        help="sigmoid-family instance parameters",
    )
    replay_p.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_run(args) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        return _fail_io(f"cannot read config {args.config}: {exc}")
    overrides = list(args.overrides)
    if args.output:
        overrides.append(f"harness.output={args.output}")
    env_seed = os.environ.get("DACBENCH_SEED")
    if env_seed is not None:
        try:
            int(env_seed)
        except ValueError:
            raise ConfigError(f"DACBENCH_SEED must be an integer, got {env_seed!r}")
        overrides.append(f"harness.seed={env_seed}")
    cfg = parse_config(apply_overrides(text, overrides))
    if args.verbose:
        print(render_config(cfg), end="")
    curves = run_experiment(cfg)
    agg = aggregate(curves)
    smoothed = smooth(agg.mean, cfg.smoothing_window)
    print(
        f"{cfg.benchmark.kind}/{cfg.agent_kind}: episodes={cfg.n_episodes} "
        f"seeds={cfg.n_seeds} final_smoothed_mean={smoothed[-1]:.6g} "
        f"se={agg.stderr[-1]:.6g}"
    )
    if cfg.output_path:
        write_csv(cfg.output_path, cfg, curves)
        print(f"wrote {cfg.output_path}")
    if args.save_agent:
        agent = train_agent(cfg, args.agent_seed)
        save_agent(agent, args.save_agent)
        print(f"wrote {args.save_agent}")
    return EXIT_OK


def _cmd_bench_info(args) -> int:
    bench = BenchmarkConfig(kind=args.benchmark, horizon=args.horizon, levels=args.levels)
    env = make_env(bench)
    spec = env.spec
    print(f"benchmark: {bench.kind}")
    print(f"action_count: {spec.action_count}")
    print(f"horizon: {spec.horizon}")
    print(f"context_dim: {spec.context_dim}")
    print(f"obs_continuous_dim: {spec.obs_continuous_dim}")
    print(f"history_len: {spec.history_len}")
    print(f"stochastic_reward: {str(bench.stochastic_reward).lower()}")
    print(f"fixed_episode_length: {str(bench.fixed_episode_length).lower()}")
    return EXIT_OK


def _read_result_csv(path: str) -> list[dict]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != CSV_HEADER.split(","):
                raise ContractError(
                    f"{path}: unexpected CSV columns {header}; expected {CSV_HEADER}"
                )
            return [
                {
                    "benchmark": row[0],
                    "agent": row[1],
                    "seed": int(row[2]),
                    "episode": int(row[3]),
                    "phase": row[4],
                    "eval_reward": float(row[5]),
                }
                for row in reader
            ]
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc


def _series_by_agent(rows: list[dict], window: int):
    """Per-agent aggregated train curves: smooth per seed, then mean/SE."""
    agents: dict[str, dict[int, list[tuple[int, float]]]] = {}
    for row in rows:
        if row["phase"] != "train":
            continue
        agents.setdefault(row["agent"], {}).setdefault(row["seed"], []).append(
            (row["episode"], row["eval_reward"])
        )
    result = {}
    for agent, by_seed in sorted(agents.items()):
        curves = []
        for seed, points in sorted(by_seed.items()):
            points.sort()
            curves.append(
                SeedCurve(
                    seed=seed,
                    episodes=[e for e, _ in points],
                    train_rewards=smooth([v for _, v in points], window),
                )
            )
        result[agent] = aggregate(curves)
    return result


def _cmd_report(args) -> int:
    rows: list[dict] = []
    for path in args.csvs:
        rows.extend(_read_result_csv(path))
    if not rows:
        raise ContractError("no data rows in the given CSVs")
    series = _series_by_agent(rows, args.window)
    if args.mode == "table":
        for agent, agg in series.items():
            print(f"{agent}: {agg.mean[-1]:.3f} ± {agg.stderr[-1]:.3f}")
    else:
        for agent, agg in series.items():
            print(f"# agent {agent}")
            print("episode\tsmoothed_mean\tstderr")
            for episode, mean, se in zip(agg.episodes, agg.mean, agg.stderr):
                print(f"{episode}\t{mean:.6g}\t{se:.6g}")
    if args.svg:
        try:
            with open(args.svg, "w", encoding="utf-8") as fh:
                fh.write(_render_svg(series))
        except OSError as exc:
            return _fail_io(f"cannot write SVG {args.svg}: {exc}")
        print(f"wrote {args.svg}")
    return EXIT_OK


_SVG_COLORS = ("#1b6ca8", "#d1495b", "#3a7d44", "#8d5a97", "#c87d2f", "#4f6d7a")


def _render_svg(series) -> str:
    width, height, margin = 640, 400, 50
    xs = [e for agg in series.values() for e in agg.episodes]
    ys = [v for agg in series.values() for v in agg.mean]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1
    if y_hi == y_lo:
        y_hi = y_lo + 1

    def sx(x):
        return margin + (x - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def sy(y):
        return height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    out = io.StringIO()
    out.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
    )
    out.write(f'<rect width="{width}" height="{height}" fill="white"/>\n')
    out.write(
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>\n'
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
        f'y2="{height - margin}" stroke="black"/>\n'
    )
    out.write(
        f'<text x="{width // 2}" y="{height - 10}" font-size="12" '
        f'text-anchor="middle">episodes</text>\n'
        f'<text x="14" y="{height // 2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {height // 2})">eval reward</text>\n'
        f'<text x="{margin}" y="{height - margin + 16}" font-size="10">{x_lo:g}</text>\n'
        f'<text x="{width - margin}" y="{height - margin + 16}" font-size="10" '
        f'text-anchor="end">{x_hi:g}</text>\n'
        f'<text x="{margin - 4}" y="{height - margin}" font-size="10" '
        f'text-anchor="end">{y_lo:.4g}</text>\n'
        f'<text x="{margin - 4}" y="{margin + 4}" font-size="10" '
        f'text-anchor="end">{y_hi:.4g}</text>\n'
    )
    for i, (agent, agg) in enumerate(series.items()):
        color = _SVG_COLORS[i % len(_SVG_COLORS)]
        points = " ".join(
            f"{sx(e):.1f},{sy(v):.1f}" for e, v in zip(agg.episodes, agg.mean)
        )
        out.write(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'points="{points}"/>\n'
        )
        out.write(
            f'<text x="{width - margin + 4}" y="{margin + 14 * i + 10}" '
            f'font-size="11" fill="{color}">{agent}</text>\n'
        )
    out.write("</svg>\n")
    return out.getvalue()


def _parse_instance(text: str, bench: BenchmarkConfig) -> InstanceContext:
    if not bench.has_instances:
        if text:
            raise ConfigError(f"benchmark {bench.kind!r} takes no instance parameters")
        return InstanceContext()
    if not text:
        raise ConfigError(f"benchmark {bench.kind!r} needs --instance s=S,p=P")
    values: dict[str, float] = {}
    for part in text.split(","):
        key, sep, val = part.partition("=")
        key = key.strip().lower()
        if not sep or key not in ("s", "p"):
            raise ConfigError(f"bad instance spec {text!r}; expected s=S,p=P")
        try:
            values[key] = float(val)
        except ValueError:
            raise ConfigError(f"instance parameter {key}={val!r} is not a number")
    if set(values) != {"s", "p"}:
        raise ConfigError(f"instance spec {text!r} must set both s and p")
    return InstanceContext(instance_id=0, params=(values["s"], values["p"]))


def _cmd_replay(args) -> int:
    snapshot = load_snapshot(args.snapshot)
    bench = BenchmarkConfig(kind=args.benchmark, horizon=args.horizon, levels=args.levels)
    env = make_env(bench)
    spec = env.spec
    snap_actions = int(snapshot["meta"]["action_count"])
    if snap_actions != spec.action_count:
        raise ContractError(
            f"snapshot has {snap_actions} actions but {bench.kind} expects "
            f"{spec.action_count}"
        )
    if snapshot["kind"] == "dqn":
        net = snapshot["net"]
        expected = 1 + spec.context_dim
        if net.input_dim != expected:
            raise ContractError(
                f"snapshot input dim {net.input_dim} != benchmark obs dim {expected}"
            )
        horizon = spec.horizon
        scales = np.array(snapshot["context_scales"])

        def policy(obs):
            features = np.empty(net.input_dim)
            features[0] = obs.time_step / horizon
            if net.input_dim > 1:
                features[1:] = np.asarray(obs.continuous_features) * scales
            return int(np.argmax(net.forward(features)))

    else:
        q = snapshot["q"]
        from .agents import state_key

        def policy(obs):
            return q.argmax(state_key(obs))

    instance = _parse_instance(args.instance, bench)
    obs = env.reset(instance, SeedSpec(args.seed, 0))
    total = 0.0
    print(f"replay {snapshot['kind']} on {bench.kind} (T={spec.horizon})")
    while not env.done:
        action = policy(obs)
        outcome = env.step(action)
        features = ",".join(f"{v:g}" for v in obs.continuous_features)
        print(
            f"t={obs.time_step:3d} obs=[{features}] action={action} "
            f"reward={outcome.reward:.6g}"
        )
        total += outcome.reward
        obs = outcome.observation
    print(f"total reward: {total:.6g}")
    return EXIT_OK


def _fail_io(message: str) -> int:
    print(f"E-IO: {message}", file=sys.stderr)
    return EXIT_IO


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "bench-info": _cmd_bench_info,
        "report": _cmd_report,
        "replay": _cmd_replay,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"E-CONFIG: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"E-IO: {exc}", file=sys.stderr)
        return EXIT_IO
    except ContractError as exc:
        print(f"E-RUNTIME: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
