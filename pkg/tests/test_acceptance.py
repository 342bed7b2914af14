"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are
printed even under output capture.
"""

import itertools
import math
import time

import numpy as np
import pytest

from edgesync import _accel
from edgesync.cli import main
from edgesync.config import ConfigError, config_from_dict, emit_config, load_preset, parse_config, with_overrides
from edgesync.engine import scaling_sweep, run_scenario
from edgesync.migration import (
    Move,
    NodeTiming,
    apply_plan,
    balance_metric,
    build_lists,
    match_migrations,
    migration_amounts,
    plan_migration,
)
from edgesync.nnkernels import (
    ConvSpec,
    FCLayer,
    ShapeError,
    conv_forward,
    conv_output_shape,
    fc_backprop_step,
    fc_layer_forward,
)
from edgesync.report import report_json
from edgesync.sync import Contribution, WeightSet, aggregate, contribution, contributions

from gradcheck import max_relative_error, numeric_gradients, random_two_layer
from test_config import BAD, expected_path

WORKERS = (1, 2, 4, 16)


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")
        assert ok, detail
    return emit


# -- 1 ---------------------------------------------------------------------

def _random_conv_case(rng):
    d = int(rng.integers(1, 4))
    fh, fw = (int(v) for v in rng.integers(1, 6, size=2))
    p, s = int(rng.integers(0, 3)), int(rng.integers(1, 4))
    # choose the output size first so the windows tile exactly
    oh, ow = (int(v) for v in rng.integers(1, 9, size=2))
    h, w = (oh - 1) * s + fh - 2 * p, (ow - 1) * s + fw - 2 * p
    if h < 1 or w < 1:
        return None
    return rng.normal(size=(d, h, w)), ConvSpec(rng.normal(size=(d, fh, fw)), p, s)


@pytest.mark.parametrize("backend_name", ["numba", "numpy"])
def test_c1_parallel_kernels_bitwise(verdict, backend_name):
    if backend_name == "numba" and not _accel.HAS_NUMBA:
        pytest.skip("numba not installed")
    prev = _accel.get_backend()
    _accel.set_backend(backend_name)
    try:
        t0 = time.perf_counter()
        rng = np.random.default_rng(101)
        conv_cases = fc_cases = mismatches = 0
        while conv_cases < 250:
            case = _random_conv_case(rng)
            if case is None:
                continue
            x, spec = case
            ref = conv_forward(x, spec, workers=1).tobytes()
            mismatches += sum(conv_forward(x, spec, workers=k).tobytes() != ref for k in WORKERS[1:])
            conv_cases += 1
        for _ in range(250):
            n_in, n_out = (int(v) for v in rng.integers(1, 40, size=2))
            layer = FCLayer(rng.normal(size=(n_out, n_in)), rng.normal(size=n_out),
                            str(rng.choice(["identity", "sigmoid", "relu"])))
            x = rng.normal(size=n_in)
            ref = fc_layer_forward(layer, x, workers=1).tobytes()
            mismatches += sum(fc_layer_forward(layer, x, workers=k).tobytes() != ref for k in WORKERS[1:])
            fc_cases += 1
        elapsed = time.perf_counter() - t0
    finally:
        _accel.set_backend(prev)
    ok = mismatches == 0 and elapsed < 30
    verdict(1, ok, f"[{backend_name}] {conv_cases} conv + {fc_cases} FC cases x workers {WORKERS}, "
                   f"{mismatches} mismatches, {elapsed:.2f}s (< 30s)")


# -- 2 ---------------------------------------------------------------------

def _starts(n, f, p, s):
    """Brute-force window starts on one axis; None when the windows do not tile exactly."""
    span = n + 2 * p
    starts = [r for r in range(0, span, s) if r + f <= span]
    if not starts or starts[-1] + f != span:
        return None
    return len(starts)


def test_c2_shape_grid(verdict):
    t0 = time.perf_counter()
    checked = rejected = wrong = 0
    for hx, wx, hf, wf, p, s in itertools.product(range(1, 17), range(1, 17), range(1, 6),
                                                  range(1, 6), range(3), range(1, 4)):
        eh, ew = _starts(hx, hf, p, s), _starts(wx, wf, p, s)
        try:
            got = conv_output_shape((1, hx, wx), (1, hf, wf), p, s)
        except ShapeError:
            got = None
        if eh is None or ew is None:
            rejected += 1
            wrong += got is not None
        else:
            wrong += got is None or tuple(got) != (1, eh, ew)
        checked += 1
    elapsed = time.perf_counter() - t0
    verdict(2, wrong == 0 and elapsed < 5,
            f"{checked} shape combinations ({rejected} invalid), {wrong} disagreements, {elapsed:.2f}s (< 5s)")


# -- 3 ---------------------------------------------------------------------

def test_c3_gradient_check(verdict):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        params, acts, x, t = random_two_layer(rng)
        layers = [FCLayer(w, b, a) for (w, b), a in zip(params, acts)]
        # with a unit learning rate the step is exactly the negative gradient
        stepped = fc_backprop_step(layers, x, t, lr=1.0)
        analytic = [(l.weights - n.weights, l.bias - n.bias) for l, n in zip(layers, stepped)]
        worst = max(worst, max_relative_error(analytic, numeric_gradients(params, acts, x, t)))
    verdict(3, worst < 1e-4, f"100 two-layer instances, worst relative error {worst:.2e} (< 1e-4)")


# -- 4 ---------------------------------------------------------------------

def test_c4_synchronization(verdict):
    rng = np.random.default_rng(4)
    worst_mean = 0.0
    raw_exact = True
    for _ in range(200):
        m, size = int(rng.integers(1, 9)), int(rng.integers(1, 20))
        vals = rng.normal(size=(m, size)) * 10
        sets = [WeightSet.from_arrays("m", 1, {"w": vals[j]}, origin=j) for j in range(m)]
        c = contributions({j: 7.0 for j in range(m)})
        out = aggregate(sets, [c[j] for j in range(m)])
        worst_mean = max(worst_mean, float(np.max(np.abs(out.values - vals.mean(axis=0)))))
        raw = aggregate(sets, [Contribution(j, 0, 0, 1.0) for j in range(m)], "raw")
        expected = np.zeros(size)
        for j in range(m):
            expected = expected + vals[j] * 1.0
        raw_exact &= raw.values.tobytes() == expected.tobytes()
    q = contribution(10, 4)
    six = f"{q:.6g}" == f"{403.4288:.6g}"
    ok = worst_mean <= 1e-12 and raw_exact and six
    verdict(4, ok, f"normalized vs mean max |diff| {worst_mean:.1e} (<= 1e-12); raw unit-Q sum exact: "
                   f"{raw_exact}; e^6 contribution {q:.7g} (6 s.f. match: {six})")


# -- 5 ---------------------------------------------------------------------

def _random_timings(rng):
    m = int(rng.integers(2, 21))
    return [NodeTiming(j, int(rng.integers(0, 101)), float(rng.integers(1, 11))) for j in range(m)]


def test_c5_migration(verdict):
    t0 = time.perf_counter()
    A, B, C = 0, 1, 2
    hand = match_migrations({A: -10}, {B: 7, C: 4}, xi=1).moves == [Move(A, B, 7), Move(A, C, 3)]
    rng = np.random.default_rng(5)
    conserved = bounded = terminated = True
    fired = improved = 0
    for _ in range(500):
        timings = _random_timings(rng)
        B_pre, plan = plan_migration(timings, xi=1, theta_B=0.0)
        if plan is None:
            continue
        fired += 1
        L_out, L_in = build_lists(migration_amounts(timings)[0], 1)
        terminated &= plan.iterations <= len(L_out) + len(L_in)
        state = {t.node_id: list(range(t.n_frames)) for t in timings}
        new = apply_plan(state, plan, order_key=lambda f: f)
        conserved &= sum(map(len, new.values())) == sum(t.n_frames for t in timings)
        rate = {t.node_id: t.t_frame for t in timings}
        B_post = balance_metric([len(new[j]) * rate[j] for j in sorted(new)])
        bounded &= B_post <= B_pre + max(rate.values())
        improved += B_post < B_pre
    elapsed = time.perf_counter() - t0
    share = improved / fired if fired else 0.0
    ok = hand and conserved and bounded and terminated and share >= 0.95 and elapsed < 60
    verdict(5, ok, f"hand trace {hand}; 500 instances: conservation {conserved}, termination {terminated}, "
                   f"bound {bounded}, strict improvement {improved}/{fired} = {share:.1%} (>= 95%), "
                   f"{elapsed:.2f}s (< 60s)")


# -- 6 ---------------------------------------------------------------------

TREND_BASE = {
    "seed": 6,
    "rounds": 3,
    "topology": {"terminals": 50, "levels": [5], "capacities": [0.01]},
    "stream": {"alpha": 6, "batches": 3, "frame_shape": [1, 16, 16]},
    "tasks": [
        {"name": "cnn-a", "kind": "cnn"},
        {"name": "lstm", "kind": "lstm"},
        {"name": "cnn-b", "kind": "cnn", "fc": [6, 2]},
    ],
    "cost": {"aggregate_per_param": 1.0e-7},
}


def test_c6_scaling_trends(verdict):
    t0 = time.perf_counter()
    base = config_from_dict({**TREND_BASE, "tasks": TREND_BASE["tasks"][:1],
                             "cost": {"aggregate_per_param": 1.0e-7}})
    nodes = [5, 10, 20, 30]
    spans = [r.totals["makespan"] for r in scaling_sweep(base, "nodes", nodes)]
    non_increasing = all(b <= a for a, b in zip(spans, spans[1:]))
    strict = all(b < a for a, b in zip(spans, spans[1:]))

    tasked = config_from_dict({**TREND_BASE, "cost": {"aggregate_per_param": 1.0e-7,
                                                       "ingest_per_frame": 0.005}})
    totals = [r.totals["makespan"] for r in scaling_sweep(tasked, "tasks", [1, 2, 3])]
    ratio = totals[2] / totals[0]
    elapsed = time.perf_counter() - t0
    ok = non_increasing and ratio < 3 and elapsed < 120
    verdict(6, ok, f"node sweep {nodes} makespans {[f'{s:.4g}' for s in spans]} "
                   f"(non-increasing {non_increasing}, strictly {strict}); "
                   f"task sweep totals {[f'{s:.4g}' for s in totals]}, 3-task/1-task = {ratio:.3f} (< 3); "
                   f"{elapsed:.1f}s (< 120s)")


# -- 7 ---------------------------------------------------------------------

def test_c7_balance_vs_communication(verdict):
    t0 = time.perf_counter()
    on_cfg = load_preset("tiny")
    on = run_scenario(on_cfg)
    off = run_scenario(with_overrides(on_cfg, **{"migration.enabled": False}))
    elapsed = time.perf_counter() - t0
    b_on, b_off = on.totals["mean_balance"], off.totals["mean_balance"]
    c_on, c_off = on.totals["bytes_total"], off.totals["bytes_total"]
    ok = b_on < b_off and c_on > c_off and elapsed < 60
    verdict(7, ok, f"tiny preset mean balance on {b_on:.4g} < off {b_off:.4g}; "
                   f"bytes on {c_on} > off {c_off}; {elapsed:.1f}s (< 60s)")


# -- 8 ---------------------------------------------------------------------

@pytest.mark.parametrize("preset", ["tiny", "paper-section5"])
def test_c8_determinism(verdict, preset):
    cfg = load_preset(preset)
    a, b = report_json(run_scenario(cfg)), report_json(run_scenario(cfg))
    verdict(8, a == b, f"preset {preset}: two runs byte-identical ({len(a)} bytes)")


# -- 9 ---------------------------------------------------------------------

def test_c9_config_validation(verdict, tmp_path, capsys):
    named = nonzero = 0
    for path in BAD:
        want = expected_path(path)
        try:
            parse_config(path.read_text())
        except ConfigError as e:
            named += any(m.startswith(want + ":") for m in e.errors)
        nonzero += main(["validate", str(path)]) != 0
    capsys.readouterr()
    trips = 0
    presets = ["tiny", "paper-section5"]
    for name in presets:
        cfg = load_preset(name)
        text = emit_config(cfg)
        trips += parse_config(text) == cfg and emit_config(parse_config(text)) == text
    ok = named == nonzero == len(BAD) and len(BAD) > 0 and trips == len(presets)
    verdict(9, ok, f"{len(BAD)} malformed fixtures: {named} name their field path, {nonzero} exit nonzero; "
                   f"round-trip idempotent for {trips}/{len(presets)} presets")
