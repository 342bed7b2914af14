"""Scenario configuration: YAML schema, validation with field paths, presets."""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Any

import yaml


class ConfigError(ValueError):
    """Raised with every field-level problem found, each prefixed by its path."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid scenario config:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class TopologyConfig:
    terminals: int = 8
    levels: tuple[int, ...] = (2,)
    capacities: tuple[float, ...] = (0.01,)
    assignment: str | tuple[int, ...] = "round-robin"


@dataclass(frozen=True)
class StreamConfig:
    alpha: int = 6
    batches: int = 3
    units: int = 1
    frame_shape: tuple[int, int, int] = (1, 16, 16)


@dataclass(frozen=True)
class TaskConfig:
    name: str
    kind: str  # "cnn" | "lstm"
    weight: float = 1.0
    learning_rate: float = 0.05
    # cnn
    conv: tuple[tuple[int, int, int, int], ...] = ((3, 3, 1, 1), (3, 3, 1, 1))
    fc: tuple[int, ...] = (8, 8, 4)
    hidden_activation: str = "relu"
    # lstm
    steps: int = 3
    hidden: int = 4
    outputs: int = 1
    output_bias: bool = False


CNN_KEYS = ("name", "kind", "weight", "learning_rate", "conv", "fc", "hidden_activation")
LSTM_KEYS = ("name", "kind", "weight", "learning_rate", "steps", "hidden", "outputs", "output_bias")


@dataclass(frozen=True)
class CostConfig:
    ingest_per_frame: float = 0.0  # seconds, charged once per frame
    bandwidth: float = math.inf  # bytes per second
    frame_bytes: int | None = None  # defaults to frame elements * 8
    aggregate_per_param: float = 0.0  # seconds per parameter per aggregation
    timing: str = "simulated"  # or "measured" (wall-clock, non-deterministic)


@dataclass(frozen=True)
class SyncConfig:
    mode: str = "normalized"
    exponent_cap: float = 700.0
    tolerance: float = 1e-6


@dataclass(frozen=True)
class MigrationConfig:
    enabled: bool = True
    xi: float = 1.0
    theta: float = 0.0
    period: int | None = None  # rounds between assessments; None = once per epoch
    balance_reference: str = "pre-migration"  # or "supplied-mean"


@dataclass(frozen=True)
class SweepConfig:
    axis: str
    values: tuple[int, ...]


SWEEP_AXES = ("nodes", "terminals", "tasks")


def _default_tasks() -> tuple[TaskConfig, ...]:
    return (TaskConfig("vehicle-cnn", "cnn"), TaskConfig("flow-lstm", "lstm"))


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    rounds: int = 6
    workers: int = 1
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    stream: StreamConfig = field(default_factory=StreamConfig)
    tasks: tuple[TaskConfig, ...] = field(default_factory=_default_tasks)
    cost: CostConfig = field(default_factory=CostConfig)
    sync: SyncConfig = field(default_factory=SyncConfig)
    migration: MigrationConfig = field(default_factory=MigrationConfig)
    sweep: SweepConfig | None = None

    @property
    def assessment_period(self) -> int:
        return self.migration.period or self.stream.batches

    @property
    def frame_bytes(self) -> int:
        if self.cost.frame_bytes is not None:
            return self.cost.frame_bytes
        d, h, w = self.stream.frame_shape
        return d * h * w * 8


# ---------------------------------------------------------------- validation

class _Checker:
    def __init__(self):
        self.errors: list[str] = []

    def fail(self, path: str, msg: str):
        self.errors.append(f"{path}: {msg}")

    def mapping(self, data, path: str, allowed) -> dict:
        if data is None:
            return {}
        if not isinstance(data, dict):
            self.fail(path or "<root>", f"expected a mapping, got {type(data).__name__}")
            return {}
        for k in data:
            if k not in allowed:
                self.fail(_join(path, str(k)), "unknown key")
        return data

    def integer(self, data, key, path, default, lo=None):
        if key not in data:
            return default
        v = data[key]
        p = _join(path, key)
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(p, f"expected an integer, got {_show(v)}")
            return default
        if lo is not None and v < lo:
            self.fail(p, f"must be >= {lo}, got {v}")
        return v

    def number(self, data, key, path, default, lo=None, strict=False, allow_inf=False):
        if key not in data:
            return default
        v = data[key]
        p = _join(path, key)
        if isinstance(v, str) and allow_inf and v.strip().lower() in ("inf", "infinity"):
            v = math.inf
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(p, f"expected a number, got {_show(v)}")
            return default
        v = float(v)
        if math.isnan(v) or (math.isinf(v) and not allow_inf):
            self.fail(p, f"must be finite, got {v}")
            return default
        if lo is not None and (v <= lo if strict else v < lo):
            self.fail(p, f"must be {'>' if strict else '>='} {lo}, got {v:g}")
        return v

    def boolean(self, data, key, path, default):
        if key not in data:
            return default
        v = data[key]
        if not isinstance(v, bool):
            self.fail(_join(path, key), f"expected true/false, got {_show(v)}")
            return default
        return v

    def choice(self, data, key, path, default, options):
        if key not in data:
            return default
        v = data[key]
        if v not in options:
            self.fail(_join(path, key), f"must be one of {list(options)}, got {_show(v)}")
            return default
        return v

    def int_list(self, data, key, path, default, lo=1, length=None):
        if key not in data:
            return default
        v = data[key]
        p = _join(path, key)
        if not isinstance(v, (list, tuple)) or not v:
            self.fail(p, f"expected a non-empty list of integers, got {_show(v)}")
            return default
        if length is not None and len(v) != length:
            self.fail(p, f"expected {length} entries, got {len(v)}")
            return default
        out = []
        for i, x in enumerate(v):
            if isinstance(x, bool) or not isinstance(x, int):
                self.fail(f"{p}[{i}]", f"expected an integer, got {_show(x)}")
            elif x < lo:
                self.fail(f"{p}[{i}]", f"must be >= {lo}, got {x}")
            else:
                out.append(x)
        return tuple(out) if len(out) == len(v) else default


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _show(v) -> str:
    return repr(v) if not isinstance(v, (dict, list)) else type(v).__name__


TOP_KEYS = ("seed", "rounds", "workers", "topology", "stream", "tasks", "cost", "sync", "migration", "sweep")


def config_from_dict(data: Any) -> ScenarioConfig:
    c = _Checker()
    root = c.mapping(data, "", TOP_KEYS)
    d = ScenarioConfig()

    seed = c.integer(root, "seed", "", d.seed, lo=0)
    rounds = c.integer(root, "rounds", "", d.rounds, lo=1)
    workers = c.integer(root, "workers", "", d.workers, lo=1)

    t = c.mapping(root.get("topology"), "topology", ("terminals", "levels", "capacities", "assignment"))
    td = TopologyConfig()
    terminals = c.integer(t, "terminals", "topology", td.terminals, lo=1)
    levels = c.int_list(t, "levels", "topology", td.levels, lo=1)
    capacities = td.capacities
    if "capacities" in t:
        raw = t["capacities"]
        if isinstance(raw, (int, float)) and not isinstance(raw, bool):
            raw = [raw]
        if not isinstance(raw, (list, tuple)) or not raw:
            c.fail("topology.capacities", f"expected a number or non-empty list, got {_show(raw)}")
        else:
            caps = []
            for i, x in enumerate(raw):
                if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                    c.fail(f"topology.capacities[{i}]", f"expected a finite number, got {_show(x)}")
                elif x <= 0:
                    c.fail(f"topology.capacities[{i}]", f"must be > 0, got {x}")
                else:
                    caps.append(float(x))
            if len(caps) == len(raw):
                capacities = tuple(caps)
    assignment = td.assignment
    if "assignment" in t:
        a = t["assignment"]
        if a == "round-robin":
            assignment = a
        elif isinstance(a, (list, tuple)):
            counts = c.int_list(t, "assignment", "topology", None, lo=0)
            if counts is not None:
                if len(counts) != levels[0]:
                    c.fail("topology.assignment", f"lists {len(counts)} nodes but topology.levels[0] is {levels[0]}")
                elif sum(counts) != terminals:
                    c.fail("topology.assignment", f"counts sum to {sum(counts)}, expected {terminals} terminals")
                else:
                    assignment = counts
        else:
            c.fail("topology.assignment", f"expected 'round-robin' or a list of counts, got {_show(a)}")
    topology = TopologyConfig(terminals, levels, capacities, assignment)

    s = c.mapping(root.get("stream"), "stream", ("alpha", "batches", "units", "frame_shape"))
    sd = StreamConfig()
    stream = StreamConfig(
        alpha=c.integer(s, "alpha", "stream", sd.alpha, lo=1),
        batches=c.integer(s, "batches", "stream", sd.batches, lo=1),
        units=c.integer(s, "units", "stream", sd.units, lo=1),
        frame_shape=c.int_list(s, "frame_shape", "stream", sd.frame_shape, lo=1, length=3),
    )

    tasks = _default_tasks()
    if "tasks" in root:
        raw = root["tasks"]
        if not isinstance(raw, list) or not raw:
            c.fail("tasks", f"expected a non-empty list, got {_show(raw)}")
        else:
            parsed, names = [], set()
            for i, item in enumerate(raw):
                task = _task_from_dict(c, item, f"tasks[{i}]")
                if task is None:
                    continue
                if task.name in names:
                    c.fail(f"tasks[{i}].name", f"duplicate task name {task.name!r}")
                names.add(task.name)
                parsed.append(task)
            tasks = tuple(parsed)

    k = c.mapping(root.get("cost"), "cost", ("ingest_per_frame", "bandwidth", "frame_bytes", "aggregate_per_param", "timing"))
    kd = CostConfig()
    frame_bytes = kd.frame_bytes
    if k.get("frame_bytes") is not None:
        frame_bytes = c.integer(k, "frame_bytes", "cost", None, lo=1)
    cost = CostConfig(
        ingest_per_frame=c.number(k, "ingest_per_frame", "cost", kd.ingest_per_frame, lo=0),
        bandwidth=c.number(k, "bandwidth", "cost", kd.bandwidth, lo=0, strict=True, allow_inf=True),
        frame_bytes=frame_bytes,
        aggregate_per_param=c.number(k, "aggregate_per_param", "cost", kd.aggregate_per_param, lo=0),
        timing=c.choice(k, "timing", "cost", kd.timing, ("simulated", "measured")),
    )

    y = c.mapping(root.get("sync"), "sync", ("mode", "exponent_cap", "tolerance"))
    yd = SyncConfig()
    sync = SyncConfig(
        mode=c.choice(y, "mode", "sync", yd.mode, ("raw", "normalized")),
        exponent_cap=c.number(y, "exponent_cap", "sync", yd.exponent_cap, lo=0, strict=True),
        tolerance=c.number(y, "tolerance", "sync", yd.tolerance, lo=0, strict=True),
    )

    m = c.mapping(root.get("migration"), "migration", ("enabled", "xi", "theta", "period", "balance_reference"))
    md = MigrationConfig()
    period = md.period
    if m.get("period") is not None:
        period = c.integer(m, "period", "migration", None, lo=1)
    migration = MigrationConfig(
        enabled=c.boolean(m, "enabled", "migration", md.enabled),
        xi=c.number(m, "xi", "migration", md.xi, lo=0),
        theta=c.number(m, "theta", "migration", md.theta, lo=0),
        period=period,
        balance_reference=c.choice(m, "balance_reference", "migration", md.balance_reference,
                                   ("pre-migration", "supplied-mean")),
    )

    sweep = None
    if root.get("sweep") is not None:
        w = c.mapping(root["sweep"], "sweep", ("axis", "values"))
        axis = c.choice(w, "axis", "sweep", None, SWEEP_AXES)
        if "axis" not in w:
            c.fail("sweep.axis", "required")
        values = c.int_list(w, "values", "sweep", None, lo=1)
        if "values" not in w:
            c.fail("sweep.values", "required")
        if values is not None and any(b <= a for a, b in zip(values, values[1:])):
            c.fail("sweep.values", "must be strictly ascending")
        if axis is not None and values is not None:
            sweep = SweepConfig(axis, values)

    if c.errors:
        raise ConfigError(c.errors)
    cfg = ScenarioConfig(seed, rounds, workers, topology, stream, tasks, cost, sync, migration, sweep)
    _cross_check(cfg)
    return cfg


def _task_from_dict(c: _Checker, item, path) -> TaskConfig | None:
    if not isinstance(item, dict):
        c.fail(path, f"expected a mapping, got {_show(item)}")
        return None
    kind = item.get("kind")
    if kind not in ("cnn", "lstm"):
        c.fail(_join(path, "kind"), f"must be one of ['cnn', 'lstm'], got {_show(kind)}")
        return None
    c.mapping(item, path, CNN_KEYS if kind == "cnn" else LSTM_KEYS)
    name = item.get("name")
    if not isinstance(name, str) or not name:
        c.fail(_join(path, "name"), f"expected a non-empty string, got {_show(name)}")
        name = "?"
    d = TaskConfig(name, kind)
    kw = dict(
        weight=c.number(item, "weight", path, d.weight, lo=0, strict=True),
        learning_rate=c.number(item, "learning_rate", path, d.learning_rate, lo=0, strict=True),
    )
    if kind == "cnn":
        conv = d.conv
        if "conv" in item:
            raw = item["conv"]
            if not isinstance(raw, list):
                c.fail(_join(path, "conv"), f"expected a list of [filter_h, filter_w, padding, stride], got {_show(raw)}")
            else:
                layers = []
                for i, spec in enumerate(raw):
                    p = f"{path}.conv[{i}]"
                    if (not isinstance(spec, (list, tuple)) or len(spec) != 4
                            or any(isinstance(x, bool) or not isinstance(x, int) for x in spec)):
                        c.fail(p, f"expected [filter_h, filter_w, padding, stride], got {_show(spec)}")
                        continue
                    fh, fw, pad, st = spec
                    if fh < 1 or fw < 1 or pad < 0 or st < 1:
                        c.fail(p, "need filter dims >= 1, padding >= 0, stride >= 1")
                        continue
                    layers.append(tuple(spec))
                conv = tuple(layers)
        kw.update(
            conv=conv,
            fc=c.int_list(item, "fc", path, d.fc, lo=1),
            hidden_activation=c.choice(item, "hidden_activation", path, d.hidden_activation,
                                       ("identity", "sigmoid", "relu")),
        )
    else:
        kw.update(
            steps=c.integer(item, "steps", path, d.steps, lo=1),
            hidden=c.integer(item, "hidden", path, d.hidden, lo=1),
            outputs=c.integer(item, "outputs", path, d.outputs, lo=1),
            output_bias=c.boolean(item, "output_bias", path, d.output_bias),
        )
    return TaskConfig(name, kind, **kw)


def _cross_check(cfg: ScenarioConfig) -> None:
    from .nnkernels import ShapeError, conv_output_shape, pool_output_shape

    errors = []
    for i, t in enumerate(cfg.tasks):
        if t.kind != "cnn":
            continue
        shp = tuple(cfg.stream.frame_shape)
        for j, (fh, fw, p, s) in enumerate(t.conv):
            try:
                shp = conv_output_shape(shp, (shp[0], fh, fw), p, s)
                shp = pool_output_shape(shp)
            except ShapeError as e:
                errors.append(f"tasks[{i}].conv[{j}]: {e} (input {tuple(shp)})")
                break
    if len(cfg.topology.levels) > 1:
        for k in range(1, len(cfg.topology.levels)):
            if cfg.topology.levels[k] > cfg.topology.levels[k - 1]:
                errors.append(f"topology.levels[{k}]: more nodes than the level below")
    if cfg.sweep is not None and cfg.sweep.axis == "tasks" and max(cfg.sweep.values) > len(cfg.tasks):
        errors.append(f"sweep.values: task counts exceed the {len(cfg.tasks)} configured tasks")
    if cfg.sweep is not None and cfg.sweep.axis == "nodes" and not isinstance(cfg.topology.assignment, str):
        errors.append("sweep.axis: a node sweep needs round-robin assignment")
    if errors:
        raise ConfigError(errors)


def parse_config(text: str) -> ScenarioConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError([f"<document>: not valid YAML ({e})"]) from None
    return config_from_dict({} if data is None else data)


def config_to_dict(cfg: ScenarioConfig) -> dict:
    d = asdict(cfg)
    d["topology"]["levels"] = list(cfg.topology.levels)
    d["topology"]["capacities"] = list(cfg.topology.capacities)
    a = cfg.topology.assignment
    d["topology"]["assignment"] = a if isinstance(a, str) else list(a)
    d["stream"]["frame_shape"] = list(cfg.stream.frame_shape)
    tasks = []
    for t in cfg.tasks:
        td = asdict(t)
        keys = CNN_KEYS if t.kind == "cnn" else LSTM_KEYS
        td = {k: td[k] for k in keys}
        if t.kind == "cnn":
            td["conv"] = [list(c) for c in t.conv]
            td["fc"] = list(t.fc)
        tasks.append(td)
    d["tasks"] = tasks
    if cfg.sweep is None:
        del d["sweep"]
    else:
        d["sweep"] = {"axis": cfg.sweep.axis, "values": list(cfg.sweep.values)}
    return d


def emit_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


PRESETS = ("tiny", "paper-section5")


def load_preset(name: str) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError([f"<preset>: unknown preset {name!r}; choose from {list(PRESETS)}"])
    text = resources.files("edgesync.presets").joinpath(f"{name}.yaml").read_text()
    return parse_config(text)


def with_overrides(cfg: ScenarioConfig, **changes) -> ScenarioConfig:
    """Copy of ``cfg`` with dotted-path overrides, e.g. ``{"migration.enabled": False}``."""
    d = config_to_dict(cfg)
    for path, value in changes.items():
        node = d
        *parents, leaf = path.split(".")
        for p in parents:
            node = node[p]
        node[leaf] = copy.deepcopy(value)
    return config_from_dict(d)


__all__ = [
    "ConfigError", "CostConfig", "MigrationConfig", "PRESETS", "ScenarioConfig", "StreamConfig",
    "SweepConfig", "SyncConfig", "TaskConfig", "TopologyConfig", "config_from_dict",
    "config_to_dict", "emit_config", "load_preset", "parse_config", "with_overrides",
]
