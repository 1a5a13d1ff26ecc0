"""Save/load of learned agent state.

Snapshots are plain text: a versioned header of ``key value`` metadata
lines, a ``records N`` line, then N tab-separated key/value records in
sorted key order. Q-tables store one record per (state, action) pair;
networks store one record per parameter element. Floats round-trip
exactly via repr.
"""

from __future__ import annotations

import io
from typing import TextIO

import numpy as np

from ..core import ContractError
from .dqn import HIDDEN_UNITS, DQNAgent, MLPQNet
from .tabular import QTable, TabularAgent

FORMAT_TAG = "algocontrol-snapshot"
FORMAT_VERSION = 1


def _encode_state_key(key: tuple) -> str:
    t, continuous, history = key
    cont = ",".join(str(int(v)) for v in continuous)
    hist = ",".join(str(int(v)) for v in history)
    return f"{t}|{cont}|{hist}"

def _decode_state_key(text: str) -> tuple:
    t_part, cont_part, hist_part = text.split("|")
    cont = tuple(int(v) for v in cont_part.split(",")) if cont_part else ()
    hist = tuple(int(v) for v in hist_part.split(",")) if hist_part else ()
    return (int(t_part), cont, hist)


def _write_header(out: TextIO, agent_kind: str, meta: dict[str, str]) -> None:
    out.write(f"{FORMAT_TAG} v{FORMAT_VERSION}\n")
    out.write(f"agent {agent_kind}\n")
    for key in sorted(meta):
        out.write(f"{key} {meta[key]}\n")


def _read_header(lines: list[str]) -> tuple[str, dict[str, str], int]:
    if not lines or not lines[0].startswith(FORMAT_TAG):
        raise ContractError("not an algocontrol snapshot")
    version = lines[0].split("v")[-1].strip()
    if version != str(FORMAT_VERSION):
        raise ContractError(f"unsupported snapshot version {version!r}")
    meta: dict[str, str] = {}
    i = 1
    while i < len(lines) and not lines[i].startswith("records "):
        key, _, value = lines[i].partition(" ")
        meta[key] = value.strip()
        i += 1
    if i == len(lines):
        raise ContractError("snapshot has no records section")
    agent_kind = meta.pop("agent", "")
    return agent_kind, meta, i


def save_tabular(agent: TabularAgent, out: TextIO) -> None:
    _write_header(
        out,
        agent.kind,
        {
            "action_count": str(agent.action_count),
            "episodes_trained": str(agent.episodes_trained),
        },
    )
    records = sorted(
        (f"{_encode_state_key(s)}|{a}", repr(v))
        for (s, a), v in agent.q.values.items()
    )
    out.write(f"records {len(records)}\n")
    for key, value in records:
        out.write(f"{key}\t{value}\n")


def save_dqn(agent: DQNAgent, out: TextIO) -> None:
    _write_header(
        out,
        agent.kind,
        {
            "action_count": str(agent.action_count),
            "horizon": str(agent.horizon),
            "input_dim": str(agent.input_dim),
            "hidden": str(agent.net.hidden),
            "context_scales": ",".join(repr(float(s)) for s in agent.context_scales),
            "episodes_trained": str(agent.episodes_trained),
        },
    )
    records: list[tuple[str, str]] = []
    for name, array in zip(("w1", "b1", "w2", "b2"), agent.net.parameters()):
        flat = array.ravel()
        for i, v in enumerate(flat):
            records.append((f"{name}/{i:06d}", repr(float(v))))
    records.sort()
    out.write(f"records {len(records)}\n")
    for key, value in records:
        out.write(f"{key}\t{value}\n")


def save_agent(agent, path: str) -> None:
    buf = io.StringIO()
    if isinstance(agent, TabularAgent):
        save_tabular(agent, buf)
    elif isinstance(agent, DQNAgent):
        save_dqn(agent, buf)
    else:
        raise ContractError(f"cannot snapshot agent of type {type(agent).__name__}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())


def load_snapshot(path: str) -> dict:
    """Parse a snapshot into {'kind', 'meta', 'q' or 'net'}."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    kind, meta, start = _read_header(lines)
    n_records = int(lines[start].split()[1])
    body = lines[start + 1 : start + 1 + n_records]
    if len(body) != n_records:
        raise ContractError(
            f"snapshot truncated: expected {n_records} records, found {len(body)}"
        )
    if kind in TabularAgent.KINDS:
        q = QTable(int(meta["action_count"]))
        for line in body:
            key_text, _, value_text = line.partition("\t")
            state_text, _, action_text = key_text.rpartition("|")
            q.set(_decode_state_key(state_text), int(action_text), float(value_text))
        return {"kind": kind, "meta": meta, "q": q}
    if kind == "dqn":
        input_dim = int(meta["input_dim"])
        action_count = int(meta["action_count"])
        hidden = int(meta.get("hidden", HIDDEN_UNITS))
        net = MLPQNet(input_dim, action_count, np.random.default_rng(0), hidden=hidden)
        arrays = {
            "w1": np.zeros(input_dim * hidden),
            "b1": np.zeros(hidden),
            "w2": np.zeros(hidden * action_count),
            "b2": np.zeros(action_count),
        }
        for line in body:
            key_text, _, value_text = line.partition("\t")
            name, _, index_text = key_text.partition("/")
            arrays[name][int(index_text)] = float(value_text)
        net.w1 = arrays["w1"].reshape(input_dim, hidden)
        net.b1 = arrays["b1"]
        net.w2 = arrays["w2"].reshape(hidden, action_count)
        net.b2 = arrays["b2"]
        scales_text = meta.get("context_scales", "")
        scales = (
            tuple(float(s) for s in scales_text.split(","))
            if scales_text
            else (1.0,) * (input_dim - 1)
        )
        return {"kind": kind, "meta": meta, "net": net, "context_scales": scales}
    raise ContractError(f"snapshot for unknown agent kind {kind!r}")
