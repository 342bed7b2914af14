"""Dynamic data migration between training nodes.

Planning runs in three steps: per-node migration amounts from epoch
times, filtering of negligible amounts, and matching of emigrating nodes
to absorbing nodes (exact pairs first, then largest-first greedy).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence


class MigrationError(ValueError):
    pass


@dataclass(frozen=True)
class NodeTiming:
    node_id: int
    n_frames: int
    t_frame: float  # mean seconds per frame in the assessment period

    def __post_init__(self):
        if not self.t_frame > 0:
            raise MigrationError(f"node {self.node_id}: t_frame must be > 0")
        if self.n_frames < 0:
            raise MigrationError(f"node {self.node_id}: negative frame count")

    @property
    def epoch_time(self) -> float:
        return self.t_frame * self.n_frames


@dataclass(frozen=True)
class Move:
    src: int
    dst: int
    frames: int


@dataclass
class MigrationPlan:
    moves: list[Move] = field(default_factory=list)
    residuals: dict[int, int] = field(default_factory=dict)
    iterations: int = 0  # greedy-loop iterations, for the termination bound


def migration_amount(T_bar: float, T_j: float, t_bar_j: float) -> int:
    """floor((T_bar - T_j) / t_bar_j); negative means the node must emigrate frames."""
    if not t_bar_j > 0:
        raise MigrationError(f"t_bar_j must be > 0, got {t_bar_j}")
    return math.floor((T_bar - T_j) / t_bar_j)


def balance_metric(T_prime: Sequence[float], T_bar: float | None = None) -> float:
    """Root-mean-square deviation of epoch times from ``T_bar`` (their mean if omitted)."""
    if not len(T_prime):
        raise MigrationError("balance metric of an empty list")
    if T_bar is None:
        T_bar = math.fsum(T_prime) / len(T_prime)
    return math.sqrt(math.fsum((t - T_bar) ** 2 for t in T_prime) / len(T_prime))


def should_migrate(B: float, theta_B: float) -> bool:
    if theta_B < 0:
        raise MigrationError(f"threshold must be >= 0, got {theta_B}")
    return B >= theta_B


def migration_amounts(timings: Sequence[NodeTiming]) -> tuple[dict[int, int], float]:
    """Per-node amounts and the mean epoch time they were measured against."""
    T = [t.epoch_time for t in timings]
    T_bar = math.fsum(T) / len(T)
    return {t.node_id: migration_amount(T_bar, t.epoch_time, t.t_frame) for t in timings}, T_bar


def build_lists(deltas: Mapping[int, int], xi: float) -> tuple[dict[int, int], dict[int, int]]:
    """(L_out, L_in): nodes whose |amount| exceeds ``xi``, keyed by node id in ascending order."""
    if xi < 0:
        raise MigrationError(f"xi must be >= 0, got {xi}")
    out = {j: d for j, d in sorted(deltas.items()) if d < 0 and abs(d) > xi}
    inn = {j: d for j, d in sorted(deltas.items()) if d > 0 and abs(d) > xi}
    return out, inn


def _argmax(d: Mapping[int, int], key) -> int:
    # lowest node id wins ties
    return min(d, key=lambda j: (-key(d[j]), j))


def match_migrations(L_out: Mapping[int, int], L_in: Mapping[int, int], xi: float) -> MigrationPlan:
    out = dict(sorted(L_out.items()))
    inn = dict(sorted(L_in.items()))
    plan = MigrationPlan()

    # exact matches first, out-major
    for o in list(out):
        for i in list(inn):
            if o not in out:
                break
            if i in inn and abs(out[o] + inn[i]) <= xi:
                amount = min(inn[i], abs(out[o]))
                plan.moves.append(Move(o, i, amount))
                plan.residuals[o] = out.pop(o) + amount
                plan.residuals[i] = inn.pop(i) - amount

    while out and inn:
        plan.iterations += 1
        o = _argmax(out, abs)
        i = _argmax(inn, abs)
        if inn[i] > abs(out[o]):
            amount = abs(out[o])
            plan.moves.append(Move(o, i, amount))
            plan.residuals[o] = 0
            del out[o]
            inn[i] -= amount
        else:
            amount = inn[i]
            plan.moves.append(Move(o, i, amount))
            plan.residuals[i] = 0
            del inn[i]
            out[o] += amount

    plan.moves = [m for m in plan.moves if m.frames > 0]
    for j, v in list(out.items()) + list(inn.items()):
        plan.residuals[j] = v
    plan.residuals = dict(sorted(plan.residuals.items()))
    return plan


def plan_migration(timings: Sequence[NodeTiming], xi: float, theta_B: float):
    """Full assessment. Returns (B, plan) where plan is None when no migration is needed."""
    deltas, T_bar = migration_amounts(timings)
    B = balance_metric([t.epoch_time for t in timings], T_bar)
    if not should_migrate(B, theta_B):
        return B, None
    L_out, L_in = build_lists(deltas, xi)
    return B, match_migrations(L_out, L_in, xi)


def apply_plan(state: Mapping[int, Sequence], plan: MigrationPlan | None,
               order_key=None) -> dict[int, list]:
    """Move frames between holders; the highest-ordered frames leave first.

    ``state`` maps node id to its frames kept sorted by ``order_key``. The
    default key orders frames by (seq, source) so that the newest frames
    move; each holder's list stays sorted afterwards.
    """
    if order_key is None:
        order_key = _frame_order
    new = {j: list(v) for j, v in state.items()}
    if plan is None:
        return new
    for m in plan.moves:
        if m.src not in new or m.dst not in new:
            raise MigrationError(f"move {m} references an unknown node")
        if m.frames > len(new[m.src]):
            raise MigrationError(
                f"move of {m.frames} frames exceeds the {len(new[m.src])} held by node {m.src}"
            )
        held = sorted(new[m.src], key=order_key)
        keep, moved = held[:len(held) - m.frames], held[len(held) - m.frames:]
        new[m.src] = sorted(keep, key=_holder_order)
        new[m.dst] = sorted(new[m.dst] + moved, key=_holder_order)
    return new


def _frame_order(f):
    if hasattr(f, "seq"):
        return (f.seq, f.source_mt)
    if isinstance(f, tuple):
        return (f[1], f[0])
    return f


def _holder_order(f):
    if hasattr(f, "seq"):
        return (f.source_mt, f.seq)
    return f
