"""Acceptance criteria, each run at its stated tolerance and time limit.

Every test prints one ``[PASS]``/``[FAIL]`` line (visible even without ``-s``)
before asserting. The full default benchmark sweep runs here, so this module
takes several minutes on one core.
"""

import time

import numpy as np
import pytest

from polynl import bench, cli, gradcheck, verify

SEED = 42


@pytest.fixture
def report(capsys):
    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        assert ok, detail

    return emit


def timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start


@pytest.fixture(scope="module")
def default_sweep():
    grid = bench.make_grid(list(bench.Method), bench.DEFAULT_NS, bench.DEFAULT_CS, bench.DEFAULT_D)
    return timed(bench.run_bench, grid, bench.DEFAULT_TRIALS, bench.DEFAULT_WARMUP, seed=SEED)


@pytest.fixture(scope="module")
def reduced_sweep():
    preset = cli.GRIDS["reduced"]
    grid = bench.make_grid(list(bench.Method), preset["ns"], preset["cs"], bench.DEFAULT_D)
    return bench.run_bench(grid, trials=1, warmup=0, seed=SEED)


def test_1_oracle_triangle(report):
    res, secs = timed(verify.oracle_triangle, SEED, instances=100, tolerance=1e-10)
    report(
        "1 oracle triangle",
        res.passed and secs < 10,
        f"100 instances, max rel error {res.max_error:.2e} (tol 1e-10), {secs:.2f}s (limit 10s)",
    )


def test_2_reassociation(report):
    res, secs = timed(verify.reassociation, SEED, instances=50, tolerance=1e-10, max_n=256, max_c=32)
    report(
        "2 reassociation",
        res.passed and secs < 30,
        f"50 instances N<=256 C<=32, max rel error {res.max_error:.2e} (tol 1e-10), {secs:.2f}s (limit 30s)",
    )


def test_3_gradient_checks(report):
    rows, secs = timed(gradcheck.run_suite, [(5, 3), (8, 4)], SEED, 20, rtol=1e-6, atol=1e-8)
    worst = max(rows, key=lambda r: r.max_rel)
    failing = [f"{r.block}/{r.name}@{r.size}" for r in rows if not r.passed]
    names = {(r.block, r.name) for r in rows}
    covered = names == {("NL", "x"), ("NL", "wf"), ("NL", "wg")} | {
        ("PolyNL", n) for n in ("x", "w1", "w2", "w3", "alpha", "beta")
    }
    report(
        "3 gradient checks",
        not failing and covered and secs < 60,
        f"5x3 and 8x4, 20 seeds, worst max_rel {worst.max_rel:.2e} ({worst.block}/{worst.name}), "
        f"failing {failing or 'none'}, {secs:.2f}s (limit 60s)",
    )


def test_4_homogeneity_and_permutation(report):
    hom = verify.homogeneity(SEED, instances=50, tolerance=1e-12)
    perm = verify.permutation(SEED, instances=50, tolerance=1e-12)
    report(
        "4 homogeneity and permutation",
        hom.passed and perm.passed,
        f"50 instances per block, homogeneity max {hom.max_error:.2e}, "
        f"permutation max {perm.max_error:.2e} (tol 1e-12)",
    )


def test_5_complexity_separation(report, default_sweep):
    records, secs = default_sweep
    measured = [r for r in records if r.measured]
    skipped = [r for r in records if not r.measured]
    fits = {f.method: f for f in bench.fit_all([r for r in measured if r.c == 64])}
    bounds = {
        bench.Method.NL: (1.7, 2.3),
        bench.Method.POLYNL: (0.8, 1.3),
        bench.Method.ENL: (0.8, 1.3),
        bench.Method.LATENTGNN: (0.8, 1.3),
    }
    exponents_ok = all(m in fits and lo <= fits[m].exponent <= hi for m, (lo, hi) in bounds.items())
    bad_peaks = [
        (r.method.value, r.n, r.c)
        for r in measured
        if r.peak_elems != bench.peak_model(r.method, r.n, r.c, r.d)
    ]
    budget_ok = all(r.method is bench.Method.NL for r in skipped) and all(
        r.n * r.n * np.dtype(np.float32).itemsize > bench.DEFAULT_BYTE_BUDGET for r in skipped
    )
    detail = ", ".join(f"{m.value} {fits[m].exponent:.3f}" for m in bounds if m in fits)
    report(
        "5 complexity separation",
        exponents_ok and not bad_peaks and budget_ok and secs < 600,
        f"C=64 exponents: {detail}; peak mismatches {bad_peaks or 'none'}; "
        f"{len(measured)} cells measured, {len(skipped)} NL cells skipped over budget; "
        f"sweep {secs:.0f}s (limit 600s)",
    )


def test_6_flop_model_exactness(report, reduced_sweep):
    measured = [r for r in reduced_sweep if r.measured]
    bad = [
        (r.method.value, r.n, r.c, r.flops)
        for r in measured
        if r.flops != bench.flop_model(r.method, r.n, r.c, r.d)
    ]
    report(
        "6 FLOP-model exactness",
        len(measured) == len(reduced_sweep) and not bad and all(r.n <= 1024 for r in measured),
        f"{len(measured)} cells of the reduced sweep, mismatches {bad or 'none'}",
    )


def test_7_determinism(report, reduced_sweep, capsys):
    outputs = {}
    for argv in (["verify", "--seed", "7"], ["gradcheck", "--seed", "7", "--seeds", "3"]):
        runs = []
        for _ in range(2):
            code = cli.main(argv)
            runs.append((code, capsys.readouterr().out.encode()))
        outputs[argv[0]] = runs[0] == runs[1] and runs[0][0] == 0
    data = bench.emit_csv(reduced_sweep)
    parsed = bench.parse_csv(data)
    csv_ok = parsed == [r for r in reduced_sweep if r.measured] and bench.emit_csv(parsed) == data
    report(
        "7 determinism",
        all(outputs.values()) and csv_ok,
        f"verify identical {outputs['verify']}, gradcheck identical {outputs['gradcheck']}, "
        f"CSV round trip lossless {csv_ok} ({len(parsed)} rows)",
    )
