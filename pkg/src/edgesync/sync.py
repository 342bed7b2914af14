"""Local/global weight sets and contribution-weighted synchronization.

Each training node starts a batch round from the current global weights,
trains through its batch one sample at a time, and uploads the result. The
parent combines the uploads with weights ``Q_j = exp(k_j - k_bar)`` where
``k_j`` is the node's batch size and ``k_bar`` the mean batch size.

``mode="raw"`` returns the plain weighted sum. With equal contributions it
scales the weights by the node count every round and diverges, so the
default ``"normalized"`` divides by the sum of contributions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .topology import CLOUD, Topology

DEFAULT_EXPONENT_CAP = 700.0
BYTES_PER_PARAM = 8
MODES = ("raw", "normalized")


class SyncError(ValueError):
    pass


class ContributionOverflowError(ArithmeticError):
    pass


@dataclass(frozen=True)
class WeightSet:
    model_id: str
    version: int
    layout: tuple[tuple[str, tuple[int, ...]], ...]
    values: np.ndarray
    origin: int | str = "global"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        size = sum(int(np.prod(s)) for _, s in self.layout)
        if v.shape[0] != size:
            raise SyncError(f"{self.model_id}: {v.shape[0]} values for a layout of {size}")
        if not np.all(np.isfinite(v)):
            raise SyncError(f"{self.model_id} v{self.version}: non-finite weight values")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_arrays(cls, model_id: str, version: int, arrays: Mapping[str, np.ndarray],
                    origin: int | str = "global") -> "WeightSet":
        layout = tuple((k, tuple(np.shape(a))) for k, a in arrays.items())
        flat = np.concatenate([np.asarray(a, dtype=np.float64).reshape(-1) for a in arrays.values()]) \
            if arrays else np.zeros(0)
        return cls(model_id, version, layout, flat, origin)

    def arrays(self) -> dict[str, np.ndarray]:
        out, pos = {}, 0
        for name, shape in self.layout:
            n = int(np.prod(shape))
            out[name] = self.values[pos:pos + n].reshape(shape)
            pos += n
        return out

    @property
    def keys(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.layout)

    @property
    def nbytes(self) -> int:
        return self.values.shape[0] * BYTES_PER_PARAM

    def evolve(self, values, version=None, origin=None) -> "WeightSet":
        return WeightSet(self.model_id, self.version if version is None else version,
                         self.layout, values, self.origin if origin is None else origin)


@dataclass(frozen=True)
class Contribution:
    node_id: int
    k_j: float
    k_bar: float
    Q: float


def contribution(k_j: float, k_bar: float, cap: float = DEFAULT_EXPONENT_CAP) -> float:
    if not (math.isfinite(k_j) and math.isfinite(k_bar)):
        raise SyncError(f"batch sizes must be finite, got k_j={k_j}, k_bar={k_bar}")
    gap = k_j - k_bar
    if gap > cap:
        raise ContributionOverflowError(
            f"batch skew {gap:g} exceeds exponent cap {cap:g}"
        )
    return math.exp(gap)


def contributions(k: Mapping[int, float], cap: float = DEFAULT_EXPONENT_CAP) -> dict[int, Contribution]:
    """Contributions of a sibling group; ``k_bar`` is the group mean."""
    if not k:
        return {}
    ids = sorted(k)
    k_bar = math.fsum(k[j] for j in ids) / len(ids)
    return {j: Contribution(j, k[j], k_bar, contribution(k[j], k_bar, cap)) for j in ids}


def aggregate(locals_: Sequence[WeightSet], contribs: Sequence[Contribution],
              mode: str = "normalized") -> WeightSet:
    if mode not in MODES:
        raise SyncError(f"unknown aggregation mode {mode!r}")
    if not locals_:
        raise SyncError("nothing to aggregate")
    if len(contribs) != len(locals_):
        raise SyncError(f"{len(locals_)} local sets but {len(contribs)} contributions")
    ref = locals_[0]
    for w in locals_[1:]:
        if w.model_id != ref.model_id:
            raise SyncError(f"model mismatch: {w.model_id} vs {ref.model_id}")
        if w.version != ref.version:
            raise SyncError(f"version mismatch: {w.version} vs {ref.version}")
        if w.layout != ref.layout:
            raise SyncError(f"{ref.model_id}: key order mismatch")
    q = {c.node_id: c.Q for c in contribs}
    by_node = {}
    for w in locals_:
        if w.origin not in q:
            raise SyncError(f"no contribution for node {w.origin}")
        by_node[w.origin] = w
    if len(by_node) != len(locals_):
        raise SyncError("duplicate node in local weight sets")

    acc = np.zeros_like(ref.values)
    total = 0.0
    for j in sorted(by_node):
        acc += by_node[j].values * q[j]
        total += q[j]
    if mode == "normalized":
        acc = acc / total
    return ref.evolve(acc, origin="global")


@dataclass(frozen=True)
class CommEvent:
    kind: str  # "upload" | "broadcast"
    src: int
    dst: int
    nbytes: int


@dataclass
class RoundResult:
    locals: dict[int, WeightSet]
    global_out: WeightSet
    events: list[CommEvent] = field(default_factory=list)
    contributions: dict[int, Contribution] = field(default_factory=dict)


def train_locals(global_in: WeightSet, batches: Mapping[int, Sequence],
                 train_step: Callable[[np.ndarray, object], np.ndarray]) -> dict[int, WeightSet]:
    """Every node trains sequentially through its batch starting from ``global_in``."""
    out = {}
    version = global_in.version + 1
    for j in sorted(batches):
        w = global_in.values.copy()
        if not len(batches[j]):
            warnings.warn(f"node {j} has an empty batch; uploading its input weights",
                          RuntimeWarning, stacklevel=2)
        for sample in batches[j]:
            w = train_step(w, sample)
        out[j] = global_in.evolve(w, version=version, origin=j)
    return out


def aggregate_hierarchy(topo: Topology, locals_: Mapping[int, WeightSet],
                        k: Mapping[int, float], mode: str = "normalized",
                        cap: float = DEFAULT_EXPONENT_CAP) -> RoundResult:
    """Aggregate level-1 locals upward through the node tree to the cloud.

    At each level the contribution of a child uses its subtree batch total
    against the mean over all nodes of that level.
    """
    events: list[CommEvent] = []
    current = dict(locals_)
    size = dict(k)
    first_level = {}
    level = 1
    while True:
        q_level = contributions(size, cap)
        if level == 1:
            first_level = q_level
        groups: dict[int, list[int]] = {}
        for j in sorted(current):
            groups.setdefault(topo.node(j).parent, []).append(j)
        nxt, nxt_size = {}, {}
        for parent in sorted(groups):
            kids = groups[parent]
            for j in kids:
                events.append(CommEvent("upload", j, parent, current[j].nbytes))
            part = aggregate([current[j] for j in kids], [q_level[j] for j in kids], mode)
            nxt[parent] = part.evolve(part.values, origin=parent)
            nxt_size[parent] = math.fsum(size[j] for j in kids)
        if list(nxt) == [CLOUD]:
            glob = nxt[CLOUD].evolve(nxt[CLOUD].values, origin="global")
            break
        if CLOUD in nxt:
            raise SyncError("training nodes reach the cloud at different depths")
        current, size = nxt, nxt_size
        level += 1

    # broadcast back down the same tree
    def down(parent):
        for child in topo.children(parent):
            events.append(CommEvent("broadcast", parent, child.id, glob.nbytes))
            down(child.id)

    down(CLOUD)
    return RoundResult(dict(locals_), glob, events, first_level)


def batch_round(topo: Topology, global_in: WeightSet, batches: Mapping[int, Sequence],
                train_step: Callable[[np.ndarray, object], np.ndarray],
                k: Mapping[int, float] | None = None, mode: str = "normalized",
                cap: float = DEFAULT_EXPONENT_CAP) -> RoundResult:
    """One bulk-synchronous round: local training, aggregation, broadcast.

    ``k`` defaults to the realized batch length of every node.
    """
    locals_ = train_locals(global_in, batches, train_step)
    if k is None:
        k = {j: float(len(batches[j])) for j in batches}
    return aggregate_hierarchy(topo, locals_, k, mode, cap)


def converged(history: Sequence[WeightSet], tolerance: float) -> bool:
    """True iff the last two global versions differ by less than ``tolerance`` everywhere."""
    if len(history) < 2:
        return False
    a, b = history[-2].values, history[-1].values
    if a.shape != b.shape:
        return False
    delta = float(np.max(np.abs(b - a))) if a.size else 0.0
    return delta < tolerance
