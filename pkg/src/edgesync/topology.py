"""Multi-layer edge structure: monitoring terminals, leveled edge nodes, one cloud root."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

CLOUD = -1


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class MonitoringTerminal:
    id: int
    frames_per_unit_time: int
    parent_en: int | None


@dataclass(frozen=True)
class EdgeNode:
    id: int
    level: int
    parent: int  # edge-node id or CLOUD
    capacity: float  # seconds per frame per unit task weight
    connected_terminals: tuple[int, ...] = ()


@dataclass(frozen=True)
class Topology:
    terminals: tuple[MonitoringTerminal, ...]
    nodes: tuple[EdgeNode, ...]
    cloud: int = CLOUD
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {n.id: n for n in self.nodes})

    def node(self, node_id: int) -> EdgeNode:
        return self._index[node_id]

    def level(self, k: int) -> list[EdgeNode]:
        return [n for n in self.nodes if n.level == k]

    @property
    def training_nodes(self) -> list[EdgeNode]:
        return self.level(1)

    @property
    def max_level(self) -> int:
        return max((n.level for n in self.nodes), default=0)

    def children(self, parent_id: int) -> list[EdgeNode]:
        return [n for n in self.nodes if n.parent == parent_id]

    def terminal_counts(self) -> dict[int, int]:
        return {n.id: len(n.connected_terminals) for n in self.training_nodes}


@dataclass(frozen=True)
class TopologySpec:
    """Counts and capacities from which a :class:`Topology` is built.

    ``level_sizes[k]`` is the number of nodes at level ``k + 1``.
    ``capacities`` is cycled over level-1 nodes, so ``[a, b]`` alternates
    two hardware classes. ``assignment`` is ``"round-robin"`` or an explicit
    list of terminal counts per level-1 node.
    """

    terminals: int
    level_sizes: Sequence[int]
    capacities: Sequence[float] = (1.0,)
    assignment: str | Sequence[int] = "round-robin"
    alpha: int = 1
    upper_capacity: float = 1.0


def build_topology(spec: TopologySpec) -> Topology:
    if spec.terminals < 1:
        raise TopologyError("terminals must be >= 1")
    if not spec.level_sizes:
        raise TopologyError("at least one edge level is required")
    for k, size in enumerate(spec.level_sizes, start=1):
        if size < 1:
            raise TopologyError(f"level {k} is empty")
    if not spec.capacities:
        raise TopologyError("capacities must be non-empty")
    for c in spec.capacities:
        if not c > 0:
            raise TopologyError(f"capacity must be > 0, got {c}")
    if spec.upper_capacity <= 0:
        raise TopologyError(f"capacity must be > 0, got {spec.upper_capacity}")
    if spec.alpha < 1:
        raise TopologyError("alpha must be >= 1")

    m = spec.level_sizes[0]
    if isinstance(spec.assignment, str):
        if spec.assignment != "round-robin":
            raise TopologyError(f"unknown assignment rule {spec.assignment!r}")
        owner = [t % m for t in range(spec.terminals)]
    else:
        counts = list(spec.assignment)
        if len(counts) != m:
            raise TopologyError(
                f"explicit assignment lists {len(counts)} nodes but level 1 has {m}"
            )
        if any(c < 0 for c in counts) or sum(counts) != spec.terminals:
            raise TopologyError(
                f"explicit assignment {counts} does not partition {spec.terminals} terminals"
            )
        owner = [j for j, c in enumerate(counts) for _ in range(c)]

    # dense ids in declaration order, level by level
    offsets = [0]
    for size in spec.level_sizes:
        offsets.append(offsets[-1] + size)

    nodes = []
    for k, size in enumerate(spec.level_sizes):
        top = k == len(spec.level_sizes) - 1
        for i in range(size):
            nid = offsets[k] + i
            if top:
                parent = CLOUD
            else:
                # contiguous blocks, e.g. 30 -> 5 gives six children per parent
                parent = offsets[k + 1] + i * spec.level_sizes[k + 1] // size
            if k == 0:
                cap = float(spec.capacities[i % len(spec.capacities)])
                conn = tuple(t for t in range(spec.terminals) if owner[t] == i)
            else:
                cap, conn = float(spec.upper_capacity), ()
            nodes.append(EdgeNode(nid, k + 1, parent, cap, conn))

    terminals = tuple(
        MonitoringTerminal(t, spec.alpha, owner[t]) for t in range(spec.terminals)
    )
    topo = Topology(terminals, tuple(nodes))
    problems = validate(topo)
    if problems:
        raise TopologyError("; ".join(problems))
    return topo


def validate(t: Topology) -> list[str]:
    """Return every invariant violation; an empty list means the topology is valid."""
    out = []
    ids = {}
    for n in t.nodes:
        if n.id in ids:
            out.append(f"node {n.id}: duplicate id")
        ids[n.id] = n
    for n in t.nodes:
        if n.level < 1:
            out.append(f"node {n.id}: level must be >= 1")
        if not n.capacity > 0:
            out.append(f"node {n.id}: capacity must be > 0")
        if n.parent != CLOUD:
            p = ids.get(n.parent)
            if p is None:
                out.append(f"node {n.id}: unknown parent {n.parent}")
            elif p.level != n.level + 1:
                out.append(
                    f"node {n.id}: level-{n.level} node has level-{p.level} parent {p.id}"
                )
        if n.level != 1 and n.connected_terminals:
            out.append(f"node {n.id}: only level-1 nodes may connect terminals")

    seen = {}
    for n in t.nodes:
        for mt in n.connected_terminals:
            seen.setdefault(mt, []).append(n.id)
    for mt in t.terminals:
        if mt.frames_per_unit_time < 1:
            out.append(f"terminal {mt.id}: frames_per_unit_time must be >= 1")
        if mt.parent_en is None or mt.parent_en not in ids:
            out.append(f"terminal {mt.id}: missing parent edge node")
            continue
        if ids[mt.parent_en].level != 1:
            out.append(f"terminal {mt.id}: parent {mt.parent_en} is not a level-1 node")
        holders = seen.get(mt.id, [])
        if holders != [mt.parent_en]:
            out.append(f"terminal {mt.id}: connected to nodes {holders}, expected [{mt.parent_en}]")
    return out
