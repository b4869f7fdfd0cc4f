"""End-to-end acceptance criteria. Each test records one PASS/FAIL line that is
printed in the terminal summary (see conftest)."""
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, random_case
from mafat.cli import layer_table_rows, main
from mafat.executor import (PREDICTOR_MASK, ScheduleMode, execute_task, peak_footprint,
                            random_input, random_weights, run_mafat, run_monolithic)
from mafat.geometry import build_tile_chain
from mafat.network import MB, NetworkSpec, builtin_yolo16
from mafat.predictor import PredictorParams, group_spans, predict_layer_group, predict_mem
from test_network import PUBLISHED_TABLE

TABLE_TOL_MB = 0.01
PLAN_LIMITS_MB = [256, 192, 128, 96, 80, 64, 48, 32, 16]
PLAN_EXPECTED = ["1x1/NoCut", "1x1/NoCut", "2x2/NoCut", "2x2/12/2x2", "3x3/8/2x2",
                 "5x5/8/2x2", "5x5/8/2x2", "5x5/8/2x2", "5x5/8/2x2"]
MIN_CONFIG_RANGE_MB = (64.0, 67.0)
FULL_FUSE_MB, FULL_FUSE_TOL_MB = 177.65, 0.01
N_CASES, N_RF_CASES = 100, 50
PERTURB = 1000.0


def record(n, ok, detail):
    ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")


@pytest.fixture(scope="module")
def runs():
    """Criterion-5 cases executed in both modes, shared by criteria 5, 7 and 8."""
    t0 = time.perf_counter()
    out = []
    for seed in range(N_CASES):
        case = random_case(seed)
        x, w = random_input(case.net, seed), random_weights(case.net, seed, bias=seed % 2 == 0,
                                                             leaky=seed % 3 == 0)
        ref = run_monolithic(case.net, x, w)
        modes = {m: run_mafat(case.net, x, w, case.config, m) for m in ScheduleMode}
        out.append((case, ref, modes))
    return out, time.perf_counter() - t0


def test_1_layer_table():
    t0 = time.perf_counter()
    net = builtin_yolo16()
    rows = layer_table_rows(net)
    worst = 0.0
    shape_ok = len(rows) == len(PUBLISHED_TABLE)
    for row, (kind, dims, _w, *mb) in zip(rows, PUBLISHED_TABLE):
        shape_ok &= row[1] == kind and row[2] == "x".join(map(str, dims))
        worst = max(worst, *(abs(float(got) - want) for got, want in zip(row[4:8], mb)))
    elapsed = time.perf_counter() - t0
    ok = shape_ok and worst <= TABLE_TOL_MB + 1e-9 and elapsed < 1.0
    record(1, ok, f"16-row layer table, max |diff| {worst:.4f} MB (tol {TABLE_TOL_MB}), {elapsed:.3f}s (<1s)")
    assert ok


def test_2_plan_column(capsys):
    t0 = time.perf_counter()
    got, codes = [], []
    for limit in PLAN_LIMITS_MB:
        codes.append(main(["plan", "--builtin", "yolo16", "--memory-limit", str(limit)]))
        out = capsys.readouterr().out
        got.append(out.splitlines()[0].split(": ", 1)[1])
    elapsed = time.perf_counter() - t0
    want_codes = [0 if limit > 64 else 2 for limit in PLAN_LIMITS_MB]
    matches = sum(g == e for g, e in zip(got, PLAN_EXPECTED))
    ok = got == PLAN_EXPECTED and codes == want_codes and elapsed < 5.0
    mism = ", ".join(f"{l}MB->{g} (want {e})" for l, g, e in zip(PLAN_LIMITS_MB, got, PLAN_EXPECTED)
                     if g != e)
    record(2, ok, f"plan column {matches}/9 rows match, exit codes {codes}, {elapsed:.2f}s (<5s)"
           + (f"; mismatches: {mism}" if mism else ""))
    assert got == PLAN_EXPECTED
    assert codes == want_codes
    assert elapsed < 5.0


def test_3_min_config_anchor():
    rep = predict_mem(builtin_yolo16(), 5, 5, 2, 2, 8)
    lo, hi = MIN_CONFIG_RANGE_MB
    mb = rep.network_max_bytes / MB
    ok = lo <= mb <= hi
    record(3, ok, f"5x5/8/2x2 predicts {mb:.2f} MB ({rep.network_max_bytes} B), required [{lo}, {hi}] MB")
    assert lo <= mb <= hi


def test_4_full_fuse_anchor():
    rep = predict_mem(builtin_yolo16(), 1, 1, 1, 1, None)
    mb = rep.network_max_bytes / MB
    ok = abs(mb - FULL_FUSE_MB) <= FULL_FUSE_TOL_MB
    record(4, ok, f"1x1/NoCut predicts {mb:.5f} MB, required {FULL_FUSE_MB} +/- {FULL_FUSE_TOL_MB}")
    assert ok


def test_5_equivalence(runs):
    cases, elapsed = runs
    bad = [(c.seed, str(c.config), m.value) for c, ref, modes in cases for m, r in modes.items()
           if not np.array_equal(r.output.view(np.uint32), ref.view(np.uint32))]
    ok = not bad and len(cases) == N_CASES and elapsed < 60.0
    record(5, ok, f"{len(cases)} cases x 2 modes bit-identical, {len(bad)} mismatches, "
                  f"{elapsed:.1f}s (<60s)")
    assert not bad
    assert elapsed < 60.0


def _sub_network(net, top, bottom):
    return NetworkSpec(net.widths[top], net.heights[top], net.channels[top],
                       net.layers[top:bottom + 1])


def test_6_receptive_field():
    t0 = time.perf_counter()
    failures, checked = [], 0
    for seed in range(N_RF_CASES):
        case = random_case(1000 + seed)
        net, rng = case.net, np.random.default_rng(seed)
        w = random_weights(net, seed)
        x = random_input(net, seed)
        group_in = x
        for (top, bottom), (n, m) in zip(group_spans(net, case.config.cut), case.config.groups()):
            sub = _sub_network(net, top, bottom)
            sw = w[top:bottom + 1]
            i, j = int(rng.integers(n)), int(rng.integers(m))
            chain = build_tile_chain(net, top, bottom, n, m, i, j)
            reg, out = chain.inputs[top], chain.outputs[bottom]
            sl = (slice(out.y1, out.y2 + 1), slice(out.x1, out.x2 + 1))
            base = run_monolithic(sub, group_in, sw)[sl]
            # everything outside the back-projected region, all at once
            outside = np.ones(group_in.shape[:2], dtype=bool)
            outside[reg.y1:reg.y2 + 1, reg.x1:reg.x2 + 1] = False
            pert = group_in.copy()
            pert[outside] += PERTURB
            if not np.array_equal(run_monolithic(sub, pert, sw)[sl], base):
                failures.append((case.seed, "outside changed oracle"))
            if not np.array_equal(execute_task(net, pert, w, top, bottom, n, m, i, j), base):
                failures.append((case.seed, "outside changed task"))
            # each corner of the region is genuinely read
            for cy, cx in {(reg.y1, reg.x1), (reg.y1, reg.x2), (reg.y2, reg.x1), (reg.y2, reg.x2)}:
                changed = False
                for sign in (1.0, -1.0):
                    pert = group_in.copy()
                    pert[cy, cx] += sign * PERTURB
                    changed |= not np.array_equal(run_monolithic(sub, pert, sw)[sl], base)
                if not changed:
                    failures.append((case.seed, f"corner ({cy},{cx}) had no effect"))
            checked += 1
            group_in = run_monolithic(sub, group_in, sw)
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 30.0
    record(6, ok, f"{N_RF_CASES} cases ({checked} tasks): outside perturbations inert, region corners "
                  f"live; {len(failures)} failures, {elapsed:.1f}s (<30s)")
    assert not failures, failures[:5]
    assert elapsed < 30.0


def test_7_trace_agreement(runs):
    cases, _ = runs
    bad, groups = [], 0
    for case, _ref, modes in cases:
        trace = modes[ScheduleMode.RECOMPUTE].trace
        spans = group_spans(case.net, case.config.cut)
        for g, ((top, bottom), (n, m)) in enumerate(zip(spans, case.config.groups())):
            want, _ = predict_layer_group(case.net, n, m, top, bottom, PredictorParams(bias_bytes=0))
            got = peak_footprint(trace, PREDICTOR_MASK, group=g, tasks_only=True)
            groups += 1
            if got != want:
                bad.append((case.seed, g, got, want))
    record(7, not bad, f"{groups} groups: trace peak == predicted group max, {len(bad)} mismatches")
    assert not bad


def test_8_reuse_macs(runs):
    cases, _ = runs
    tiled = [(c, modes) for c, _ref, modes in cases if any(n * m > 1 for n, m in c.config.groups())]
    bad = [(c.seed, str(c.config)) for c, modes in tiled
           if not modes[ScheduleMode.REUSE].macs < modes[ScheduleMode.RECOMPUTE].macs]
    saved = [1 - modes[ScheduleMode.REUSE].macs / modes[ScheduleMode.RECOMPUTE].macs
             for _c, modes in tiled]
    record(8, not bad and bool(tiled),
           f"{len(tiled)} tiled cases: reuse MACs < recompute MACs in {len(tiled) - len(bad)}, "
           f"median saving {np.median(saved):.1%}")
    assert tiled and not bad
