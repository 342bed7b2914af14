"""Scenario reports: structured JSON with full precision plus a flat per-round CSV."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

REPORT_VERSION = 1
FORMATS = ("json", "csv")

CSV_COLUMNS = (
    "round", "epoch", "batch", "makespan", "balance", "sync_time", "migration_time",
    "bytes_weights", "bytes_frames", "bytes_ingest", "migrations", "migrated_frames",
)


@dataclass(frozen=True)
class MigrationRecord:
    round: int
    src: int
    dst: int
    frames: int


@dataclass
class RoundRecord:
    round: int
    epoch: int
    batch: int
    makespan: float
    node_compute: list[float]
    node_epoch_time: list[float]
    node_frames: list[int]
    balance: float
    sync_time: float
    migration_time: float
    bytes_weights: int
    bytes_frames: int
    bytes_ingest: int
    migrations: list[MigrationRecord] = field(default_factory=list)
    global_delta: dict[str, float] = field(default_factory=dict)
    empty_batches: int = 0

    @property
    def migrated_frames(self) -> int:
        return sum(m.frames for m in self.migrations)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["migrations"] = [asdict(m) for m in self.migrations]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RoundRecord":
        d = dict(d)
        d["migrations"] = [MigrationRecord(**m) for m in d.get("migrations", [])]
        return cls(**d)


@dataclass
class ScenarioReport:
    config: dict
    node_ids: list[int]
    rounds: list[RoundRecord]
    totals: dict
    convergence_round: dict[str, int | None]
    final_weights: dict[str, dict[str, list]]
    migration_log: list[MigrationRecord]
    notes: list[str]
    version: int = REPORT_VERSION

    @classmethod
    def build(cls, cfg, node_ids, records, weights, converged_at, notes) -> "ScenarioReport":
        from .config import config_to_dict

        log = [m for r in records for m in r.migrations]
        totals = {
            "rounds": len(records),
            "makespan": math.fsum(r.makespan for r in records),
            "bytes_weights": sum(r.bytes_weights for r in records),
            "bytes_frames": sum(r.bytes_frames for r in records),
            "bytes_ingest": sum(r.bytes_ingest for r in records),
            "bytes_total": sum(r.bytes_weights + r.bytes_frames + r.bytes_ingest for r in records),
            "migrated_frames": sum(r.migrated_frames for r in records),
            "mean_balance": math.fsum(r.balance for r in records) / len(records) if records else 0.0,
            "final_balance": records[-1].balance if records else 0.0,
        }
        final = {name: {k: v.tolist() for k, v in w.arrays().items()} for name, w in weights.items()}
        return cls(_finite(config_to_dict(cfg)), list(node_ids), list(records), totals,
                   dict(converged_at), final, log, list(notes))

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "config": self.config,
            "node_ids": self.node_ids,
            "totals": self.totals,
            "convergence_round": self.convergence_round,
            "migration_log": [asdict(m) for m in self.migration_log],
            "rounds": [r.to_dict() for r in self.rounds],
            "final_weights": self.final_weights,
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioReport":
        return cls(
            config=d["config"],
            node_ids=d["node_ids"],
            rounds=[RoundRecord.from_dict(r) for r in d["rounds"]],
            totals=d["totals"],
            convergence_round=d["convergence_round"],
            final_weights=d["final_weights"],
            migration_log=[MigrationRecord(**m) for m in d["migration_log"]],
            notes=d["notes"],
            version=d.get("version", REPORT_VERSION),
        )

    def summary(self) -> str:
        t = self.totals
        return (f"rounds={t['rounds']} final_balance={t['final_balance']:.6g} "
                f"bytes_total={t['bytes_total']} makespan_sum={t['makespan']:.6g}")


def _finite(obj):
    # keeps the JSON strict: infinite bandwidth is written as the string "inf"
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    return obj


def report_json(report: ScenarioReport) -> str:
    # json writes floats with repr, the shortest string that round-trips exactly
    return json.dumps(report.to_dict(), indent=2, allow_nan=False) + "\n"


def report_csv(report: ScenarioReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rounds:
        w.writerow([
            r.round, r.epoch, r.batch, repr(r.makespan), repr(r.balance), repr(r.sync_time),
            repr(r.migration_time), r.bytes_weights, r.bytes_frames, r.bytes_ingest,
            len(r.migrations), r.migrated_frames,
        ])
    return buf.getvalue()


def load_report(text: str) -> ScenarioReport:
    return ScenarioReport.from_dict(json.loads(text))


def emit_report(report: ScenarioReport, out_dir, formats=FORMATS, stem: str = "report") -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "json":
            p = out_dir / f"{stem}.json"
            p.write_text(report_json(report))
        elif fmt == "csv":
            p = out_dir / f"{stem}_rounds.csv"
            p.write_text(report_csv(report))
        else:
            raise ValueError(f"unknown report format {fmt!r}")
        written.append(p)
    return written
