"""Synthetic frame streams, batch plans, and per-task input extraction."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .topology import MonitoringTerminal, Topology


@dataclass(frozen=True)
class Frame:
    source_mt: int
    seq: int
    tensor: np.ndarray

    @property
    def key(self) -> tuple[int, int]:
        return (self.source_mt, self.seq)


@dataclass(frozen=True)
class FrameBatchPlan:
    node_id: int
    n_terminals: int
    alpha: int
    b: int
    k_j: float
    k_bar: float


def frame_tensor(seed: int, mt_id: int, seq: int, shape) -> np.ndarray:
    """Values in [0, 1) from a counter-based generator keyed by (seed, mt, seq)."""
    key = np.random.SeedSequence([seed, mt_id, seq])
    gen = np.random.Generator(np.random.Philox(key))
    return gen.random(tuple(shape))


def window_stream(mt: MonitoringTerminal, units: int, frame_shape, seed: int = 0) -> list[Frame]:
    if units < 1:
        raise ValueError(f"units must be >= 1, got {units}")
    if any(int(d) < 1 for d in frame_shape) or len(frame_shape) != 3:
        raise ValueError(f"frame shape must be three positive dims, got {tuple(frame_shape)}")
    n = units * mt.frames_per_unit_time
    return [Frame(mt.id, s, frame_tensor(seed, mt.id, s, frame_shape)) for s in range(n)]


def make_batch_plan(t: Topology, alpha: int, b: int) -> list[FrameBatchPlan]:
    if b < 1:
        raise ValueError(f"batch count must be >= 1, got {b}")
    level1 = t.training_nodes
    if not level1:
        raise ValueError("topology has no level-1 nodes")
    n_total = len(t.terminals)
    k_bar = n_total * alpha / (len(level1) * b)
    return [
        FrameBatchPlan(
            node_id=n.id,
            n_terminals=len(n.connected_terminals),
            alpha=alpha,
            b=b,
            k_j=len(n.connected_terminals) * alpha / b,
            k_bar=k_bar,
        )
        for n in level1
    ]


def split_counts(total: int, parts: int) -> list[int]:
    """Largest-remainder split of ``total`` into ``parts`` near-equal integers.

    Ties on the remainder go to the earlier part, so the result is
    deterministic and sums to ``total`` exactly.
    """
    if parts < 1:
        raise ValueError("parts must be >= 1")
    quota = [total / parts] * parts
    base = [int(np.floor(q)) for q in quota]
    short = total - sum(base)
    order = sorted(range(parts), key=lambda i: (-(quota[i] - base[i]), i))
    for i in order[:short]:
        base[i] += 1
    return base


def batch_slices(n_frames: int, b: int) -> list[slice]:
    out, start = [], 0
    for c in split_counts(n_frames, b):
        out.append(slice(start, start + c))
        start += c
    return out


def frame_features(tensor: np.ndarray) -> np.ndarray:
    """Per-frame feature vector for sequence models: row means over depth and width."""
    return tensor.mean(axis=(0, 2))


TASK_KINDS = ("cnn", "lstm")


def extract_task_inputs(frames, task_kind: str, steps: int | None = None) -> list:
    """CNN tasks get one input per frame; LSTM tasks get non-overlapping sequences.

    Frames that do not fill a whole sequence are dropped with a warning.
    """
    if task_kind == "cnn":
        return list(frames)
    if task_kind == "lstm":
        if steps is None or steps < 1:
            raise ValueError("LSTM tasks need steps >= 1")
        frames = list(frames)
        n_seq, rem = divmod(len(frames), steps)
        if rem:
            warnings.warn(
                f"{rem} trailing frame(s) do not fill a sequence of length {steps}",
                RuntimeWarning,
                stacklevel=2,
            )
        return [
            np.stack([frame_features(f.tensor) for f in frames[i * steps:(i + 1) * steps]])
            for i in range(n_seq)
        ]
    raise KeyError(f"unknown task kind {task_kind!r}")
