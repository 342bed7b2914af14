"""Bulk-synchronous simulation of distributed training on edge nodes.

One round is one batch: every level-1 node trains every configured task on
its current batch, weight sets are aggregated up the node tree and
broadcast back, and at assessment boundaries frames are migrated between
nodes to rebalance epoch times. Time is simulated from the cost model, so
a run is a deterministic function of its config.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import ScenarioConfig, with_overrides
from .migration import (
    MigrationPlan,
    NodeTiming,
    apply_plan,
    balance_metric,
    build_lists,
    match_migrations,
    migration_amounts,
    should_migrate,
)
from .nnkernels import (
    FCLayer,
    LstmModel,
    LstmParams,
    build_cnn,
    cnn_features,
    fc_backprop_step,
    fc_forward,
    lstm_hidden,
)
from .report import MigrationRecord, RoundRecord, ScenarioReport
from .stream import batch_slices, frame_features, frame_tensor
from .sync import WeightSet, batch_round, converged
from .topology import Topology, TopologySpec, build_topology

SEED_STREAM_MODELS = 1


def topology_from_config(cfg: ScenarioConfig) -> Topology:
    t = cfg.topology
    return build_topology(TopologySpec(
        terminals=t.terminals,
        level_sizes=t.levels,
        capacities=t.capacities,
        assignment=t.assignment,
        alpha=cfg.stream.alpha,
    ))


class FrameStore:
    """Lazily generated synthetic frames keyed by (terminal, seq)."""

    def __init__(self, seed: int, shape):
        self.seed = seed
        self.shape = tuple(shape)
        self._cache: dict[tuple[int, int], np.ndarray] = {}

    def __getitem__(self, key: tuple[int, int]) -> np.ndarray:
        arr = self._cache.get(key)
        if arr is None:
            arr = frame_tensor(self.seed, key[0], key[1], self.shape)
            self._cache[key] = arr
        return arr


def _layers_to_arrays(layers) -> dict[str, np.ndarray]:
    out = {}
    for k, l in enumerate(layers):
        out[f"fc{k}.weight"] = l.weights
        out[f"fc{k}.bias"] = l.bias
    return out


def _unflatten_layers(template, values: np.ndarray) -> list[FCLayer]:
    layers, pos = [], 0
    for l in template:
        nw, nb = l.weights.size, l.bias.size
        w = values[pos:pos + nw].reshape(l.weights.shape)
        pos += nw
        b = values[pos:pos + nb]
        pos += nb
        layers.append(FCLayer(w, b, l.activation))
    return layers


def _flatten_layers(layers) -> np.ndarray:
    return np.concatenate([np.concatenate([l.weights.reshape(-1), l.bias]) for l in layers])


class CnnTask:
    """Frozen conv/pool feature extractor with a trainable fully-connected head.

    Targets come from a fixed teacher head of the same shape, so the local
    training problem is realizable.
    """

    kind = "cnn"

    def __init__(self, tc, frame_shape, frames: FrameStore, rng: np.random.Generator, workers=1):
        self.name = tc.name
        self.lr = tc.learning_rate
        self.weight = tc.weight
        self.frames = frames
        self.workers = workers
        self.model = build_cnn(rng, frame_shape, tc.conv, tc.fc, tc.hidden_activation)
        self.teacher = build_cnn(rng, frame_shape, tc.conv, tc.fc, tc.hidden_activation).fc
        self._features: dict = {}
        self._targets: dict = {}

    def initial_weights(self) -> WeightSet:
        return WeightSet.from_arrays(self.name, 0, _layers_to_arrays(self.model.fc))

    def features(self, key):
        f = self._features.get(key)
        if f is None:
            f = cnn_features(self.model, self.frames[key], self.workers)
            self._features[key] = f
            self._targets[key] = fc_forward(self.teacher, f)[-1]
        return f

    def samples(self, batch_keys):
        return list(batch_keys)

    def train_step(self, w: np.ndarray, key) -> np.ndarray:
        x = self.features(key)
        layers = _unflatten_layers(self.model.fc, w)
        return _flatten_layers(fc_backprop_step(layers, x, self._targets[key], self.lr))


class LstmTask:
    """Frozen LSTM cell with a trainable identity output layer on the last hidden state.

    A sample is a run of ``steps`` consecutive frames; the target is the
    mean intensity of the run.
    """

    kind = "lstm"

    def __init__(self, tc, frame_shape, frames: FrameStore, rng: np.random.Generator, workers=1):
        self.name = tc.name
        self.lr = tc.learning_rate
        self.weight = tc.weight
        self.steps = tc.steps
        self.outputs = tc.outputs
        self.frames = frames
        n_in = int(frame_shape[1])
        cell = LstmParams.random(rng, n_in, tc.hidden, output_bias=tc.output_bias)
        head = FCLayer(rng.normal(0.0, 0.3, size=(tc.outputs, tc.hidden)), np.zeros(tc.outputs))
        self.model = LstmModel(cell, head)
        self._hidden: dict = {}

    def initial_weights(self) -> WeightSet:
        return WeightSet.from_arrays(self.name, 0, _layers_to_arrays([self.model.head]))

    def samples(self, batch_keys):
        n = len(batch_keys) // self.steps
        return [tuple(batch_keys[i * self.steps:(i + 1) * self.steps]) for i in range(n)]

    def _encode(self, seq):
        h = self._hidden.get(seq)
        if h is None:
            feats = np.stack([frame_features(self.frames[k]) for k in seq])
            target = np.full(self.outputs, float(np.mean([self.frames[k].mean() for k in seq])))
            h = (lstm_hidden(self.model.cell, feats), target)
            self._hidden[seq] = h
        return h

    def train_step(self, w: np.ndarray, seq) -> np.ndarray:
        h, target = self._encode(seq)
        layers = _unflatten_layers([self.model.head], w)
        return _flatten_layers(fc_backprop_step(layers, h, target, self.lr))


TASK_TYPES = {"cnn": CnnTask, "lstm": LstmTask}


@dataclass
class SimState:
    round: int
    frames: dict[int, list[tuple[int, int]]]
    weights: dict[str, WeightSet]
    history: dict[str, list[WeightSet]]
    converged_at: dict[str, int | None]
    measured_t: dict[int, float] = field(default_factory=dict)


class Simulation:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.topo = topology_from_config(cfg)
        self.node_ids = [n.id for n in self.topo.training_nodes]
        self.frames = FrameStore(cfg.seed, cfg.stream.frame_shape)
        seeds = np.random.SeedSequence([cfg.seed, SEED_STREAM_MODELS]).spawn(len(cfg.tasks))
        self.tasks = [
            TASK_TYPES[tc.kind](tc, cfg.stream.frame_shape, self.frames,
                                np.random.default_rng(s), cfg.workers)
            for tc, s in zip(cfg.tasks, seeds)
        ]
        self.task_weight = math.fsum(t.weight for t in self.tasks)
        self.params_total = sum(t.initial_weights().values.size for t in self.tasks)
        self.agg_levels = self.topo.max_level  # aggregation hops from level 1 up to the cloud

    # -- cost model -----------------------------------------------------

    def transfer_time(self, nbytes: float) -> float:
        bw = self.cfg.cost.bandwidth
        return 0.0 if math.isinf(bw) or nbytes == 0 else nbytes / bw

    def t_frame(self, node_id: int, state: SimState | None = None) -> float:
        """Seconds to train one frame through every task on a node."""
        if self.cfg.cost.timing == "measured" and state is not None and node_id in state.measured_t:
            return state.measured_t[node_id]
        return self.topo.node(node_id).capacity * self.task_weight

    # -- lifecycle ------------------------------------------------------

    def initial_state(self) -> SimState:
        weights = {t.name: t.initial_weights() for t in self.tasks}
        return SimState(
            round=0,
            frames={j: [] for j in self.node_ids},
            weights=weights,
            history={k: [w] for k, w in weights.items()},
            converged_at={k: None for k in weights},
        )

    def ingest(self, state: SimState) -> dict[int, int]:
        """Deliver every terminal's frames to its level-1 node; returns frames per node."""
        units = self.cfg.stream.units
        arrived = {}
        for n in self.topo.training_nodes:
            keys = [(mt, s) for mt in n.connected_terminals
                    for s in range(units * self.topo.terminals[mt].frames_per_unit_time)]
            state.frames[n.id] = sorted(state.frames[n.id] + keys)
            arrived[n.id] = len(keys)
        return arrived

    def step_round(self, state: SimState) -> tuple[SimState, RoundRecord]:
        cfg = self.cfg
        b = cfg.stream.batches
        r = state.round
        beta = r % b
        fb = cfg.frame_bytes

        ingest_time = {j: 0.0 for j in self.node_ids}
        ingest_bytes = 0
        if r == 0:
            arrived = self.ingest(state)
            for j, n in arrived.items():
                ingest_time[j] = n * cfg.cost.ingest_per_frame + self.transfer_time(n * fb)
                ingest_bytes += n * fb

        batches = {}
        for j in self.node_ids:
            held = state.frames[j]
            batches[j] = held[batch_slices(len(held), b)[beta]]
        k = {j: len(state.frames[j]) / b for j in self.node_ids}

        compute = {j: len(batches[j]) * self.t_frame(j, state) for j in self.node_ids}
        upload = self.transfer_time(self.params_total * 8)

        weight_bytes = 0
        deltas = {}
        empty = 0
        wall = {j: 0.0 for j in self.node_ids}
        for task in self.tasks:
            samples = {j: task.samples(batches[j]) for j in self.node_ids}
            empty += sum(1 for j in self.node_ids if not samples[j])
            step = task.train_step
            if cfg.cost.timing == "measured":
                step = _timed(task.train_step, wall, samples)
            with warnings.catch_warnings():
                # counted in the round record instead
                warnings.filterwarnings("ignore", message="node .* has an empty batch")
                res = batch_round(self.topo, state.weights[task.name], samples, step, k,
                                  cfg.sync.mode, cfg.sync.exponent_cap)
            weight_bytes += sum(e.nbytes for e in res.events)
            prev = state.weights[task.name]
            new = res.global_out
            deltas[task.name] = float(np.max(np.abs(new.values - prev.values))) if new.values.size else 0.0
            state.weights[task.name] = new
            hist = state.history[task.name]
            hist.append(new)
            del hist[:-2]
            if state.converged_at[task.name] is None and converged(hist, cfg.sync.tolerance):
                state.converged_at[task.name] = r
        if cfg.cost.timing == "measured":
            # all nodes share one host, so capacity ratios carry the heterogeneity
            base = min(n.capacity for n in self.topo.training_nodes)
            for j in self.node_ids:
                if batches[j]:
                    state.measured_t[j] = wall[j] / len(batches[j]) * self.topo.node(j).capacity / base

        node_time = {j: ingest_time[j] + compute[j] + upload for j in self.node_ids}
        L = self.agg_levels
        sync_time = (L * self.params_total * cfg.cost.aggregate_per_param
                     + (L - 1) * upload
                     + L * self.transfer_time(self.params_total * 8))
        epoch_times = [self.t_frame(j, state) * len(state.frames[j]) for j in self.node_ids]
        balance = balance_metric(epoch_times)
        frames_held = [len(state.frames[j]) for j in self.node_ids]

        moves, migration_time, frame_bytes_moved = [], 0.0, 0
        if cfg.migration.enabled and (r + 1) % cfg.assessment_period == 0:
            plan = self.assess(state)
            if plan is not None and plan.moves:
                state.frames = apply_plan(state.frames, plan)
                per_node = {j: 0 for j in self.node_ids}
                for m in plan.moves:
                    moves.append(MigrationRecord(r, m.src, m.dst, m.frames))
                    frame_bytes_moved += m.frames * fb
                    per_node[m.src] += m.frames * fb
                    per_node[m.dst] += m.frames * fb
                migration_time = max(self.transfer_time(v) for v in per_node.values())

        makespan = max(node_time.values()) + sync_time + migration_time
        rec = RoundRecord(
            round=r,
            epoch=r // b,
            batch=beta,
            makespan=makespan,
            node_compute=[compute[j] for j in self.node_ids],
            node_epoch_time=epoch_times,
            node_frames=frames_held,
            balance=balance,
            sync_time=sync_time,
            migration_time=migration_time,
            bytes_weights=weight_bytes,
            bytes_frames=frame_bytes_moved,
            bytes_ingest=ingest_bytes,
            migrations=moves,
            empty_batches=empty,
            global_delta=deltas,
        )
        state.round = r + 1
        return state, rec

    def assess(self, state: SimState) -> MigrationPlan | None:
        timings = [NodeTiming(j, len(state.frames[j]), self.t_frame(j, state)) for j in self.node_ids]
        deltas, T_bar = migration_amounts(timings)
        T = [t.epoch_time for t in timings]
        ref = T_bar if self.cfg.migration.balance_reference == "pre-migration" else None
        if not should_migrate(balance_metric(T, ref), self.cfg.migration.theta):
            return None
        L_out, L_in = build_lists(deltas, self.cfg.migration.xi)
        return match_migrations(L_out, L_in, self.cfg.migration.xi)

    def run(self) -> ScenarioReport:
        state = self.initial_state()
        records = []
        for _ in range(self.cfg.rounds):
            state, rec = self.step_round(state)
            records.append(rec)
        return ScenarioReport.build(self.cfg, self.node_ids, records, state.weights,
                                    state.converged_at, _notes(self.cfg))


def _timed(fn: Callable, wall: dict, samples: dict) -> Callable:
    owner = {}
    for j, ss in samples.items():
        for s in ss:
            owner.setdefault(id(s), j)

    def wrapped(w, s):
        t0 = time.perf_counter()
        out = fn(w, s)
        wall[owner[id(s)]] += time.perf_counter() - t0
        return out

    return wrapped


def _notes(cfg: ScenarioConfig) -> list[str]:
    notes = []
    if cfg.sync.mode == "raw":
        notes.append("aggregation=raw: global weights are the unnormalized contribution-weighted sum "
                     "and grow with the node count each round")
    else:
        notes.append("aggregation=normalized: contribution-weighted sum divided by the sum of contributions")
    if cfg.migration.enabled:
        notes.append("migration amounts use floor toward -inf, which slightly over-emigrates")
    if cfg.cost.timing == "measured":
        notes.append("timing=measured: per-frame times come from wall-clock and the run is not reproducible")
    return notes


def run_scenario(cfg: ScenarioConfig) -> ScenarioReport:
    return Simulation(cfg).run()


def step_round(sim: Simulation, state: SimState) -> tuple[SimState, RoundRecord]:
    return sim.step_round(state)


def sweep_configs(base: ScenarioConfig, axis: str, values) -> list[ScenarioConfig]:
    values = list(values)
    if not values or any(v < 1 for v in values):
        raise ValueError("sweep values must be positive")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError("sweep values must be strictly ascending")
    out = []
    for v in values:
        if axis == "nodes":
            levels = list(base.topology.levels)
            levels[0] = v
            levels[1:] = [min(n, v) for n in levels[1:]]
            out.append(with_overrides(base, **{"topology.levels": levels, "sweep": None}))
        elif axis == "terminals":
            out.append(with_overrides(base, **{"topology.terminals": v, "sweep": None}))
        elif axis == "tasks":
            if v > len(base.tasks):
                raise ValueError(f"only {len(base.tasks)} tasks are configured")
            tasks = [t for t in _task_dicts(base)[:v]]
            out.append(with_overrides(base, **{"tasks": tasks, "sweep": None}))
        else:
            raise ValueError(f"unknown sweep axis {axis!r}")
    return out


def _task_dicts(cfg: ScenarioConfig):
    from .config import config_to_dict

    return config_to_dict(cfg)["tasks"]


def scaling_sweep(base: ScenarioConfig, axis: str, values) -> list[ScenarioReport]:
    return [run_scenario(c) for c in sweep_configs(base, axis, values)]
