"""Command-line scenario runner.

Exit codes: 0 success, 2 usage error, 3 config error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

from .config import PRESETS, ConfigError, emit_config, load_preset, parse_config, with_overrides
from .engine import run_scenario, sweep_configs
from .report import FORMATS, emit_report
from .sync import ContributionOverflowError

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3, 4

log = logging.getLogger("edgesync")


def load_config(source: str):
    """``source`` is a YAML path or ``preset:NAME``."""
    if source.startswith("preset:"):
        return load_preset(source.split(":", 1)[1])
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError([f"{source}: cannot read config ({e.strerror or e})"]) from None
    try:
        return parse_config(text)
    except ConfigError as e:
        raise ConfigError([f"{source}: {msg}" for msg in e.errors]) from None


def _parse_sweep(text: str):
    axis, _, values = text.partition("=")
    try:
        vals = [int(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError([f"--sweep: values must be integers, got {values!r}"]) from None
    if not axis or not vals:
        raise ConfigError(["--sweep: expected AXIS=V1,V2,..."])
    return axis.strip(), vals


def _apply_flags(cfg, args):
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.no_ddm:
        changes["migration.enabled"] = False
    if args.aggregation:
        changes["sync.mode"] = args.aggregation
    if args.sweep:
        axis, vals = _parse_sweep(args.sweep)
        changes["sweep"] = {"axis": axis, "values": vals}
    return with_overrides(cfg, **changes) if changes else cfg


def _sweep_table(axis, values, reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["axis", "value", "rounds", "makespan_total", "mean_balance", "final_balance",
                "bytes_weights", "bytes_frames", "bytes_ingest", "bytes_total", "migrated_frames"])
    for v, rep in zip(values, reports):
        t = rep.totals
        w.writerow([axis, v, t["rounds"], repr(t["makespan"]), repr(t["mean_balance"]),
                    repr(t["final_balance"]), t["bytes_weights"], t["bytes_frames"],
                    t["bytes_ingest"], t["bytes_total"], t["migrated_frames"]])
    return buf.getvalue()


def cmd_run(args) -> int:
    formats = [f.strip() for f in args.format.split(",") if f.strip()]
    bad = [f for f in formats if f not in FORMATS]
    if bad or not formats:
        print(f"error: --format: unknown format(s) {bad}; choose from {list(FORMATS)}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _apply_flags(load_config(args.config), args)
    except ConfigError as e:
        for msg in e.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.output)
    try:
        if cfg.sweep is None:
            report = run_scenario(cfg)
            emit_report(report, out, formats)
            print(report.summary())
            return EXIT_OK
        configs = sweep_configs(cfg, cfg.sweep.axis, cfg.sweep.values)
        reports = []
        for v, c in zip(cfg.sweep.values, configs):
            rep = run_scenario(c)
            emit_report(rep, out / f"{cfg.sweep.axis}={v}", formats)
            print(f"{cfg.sweep.axis}={v}: {rep.summary()}")
            reports.append(rep)
        (out / "sweep_summary.csv").write_text(_sweep_table(cfg.sweep.axis, cfg.sweep.values, reports))
        return EXIT_OK
    except ConfigError as e:
        for msg in e.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    except (ContributionOverflowError, OSError, ValueError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        for msg in e.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    if args.emit:
        sys.stdout.write(emit_config(cfg))
    else:
        print("ok")
    return EXIT_OK


def cmd_preset(args) -> int:
    sys.stdout.write(emit_config(load_preset(args.name)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgesync", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario or a sweep")
    r.add_argument("config", help="YAML config path or preset:NAME")
    r.add_argument("-o", "--output", default="out", help="report directory (default: out)")
    r.add_argument("--sweep", metavar="AXIS=V1,V2,...",
                   help="sweep nodes, terminals, or tasks over ascending values")
    r.add_argument("--seed", type=int)
    r.add_argument("--no-ddm", action="store_true", help="disable dynamic data migration")
    r.add_argument("--aggregation", choices=("raw", "normalized"))
    r.add_argument("--format", default=",".join(FORMATS), help="comma list of json,csv")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="check a config and optionally print it normalized")
    v.add_argument("config")
    v.add_argument("--emit", action="store_true")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("preset", help="print a bundled preset")
    s.add_argument("name", choices=PRESETS)
    s.set_defaults(func=cmd_preset)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
