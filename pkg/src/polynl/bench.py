"""Runtime, FLOP and peak-intermediate benchmarks for the attention blocks.

Each grid cell is timed as the median of ``trials`` runs after ``warmup``
discarded runs. FLOPs and the largest intermediate buffer are taken from an
instrumented, untimed probe run and can be compared against the closed-form
models :func:`flop_model` and :func:`peak_model`.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
import statistics
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import blocks
from . import tensor_core as tc

log = logging.getLogger(__name__)

DEFAULT_TRIALS = 20
DEFAULT_WARMUP = 2
DEFAULT_BYTE_BUDGET = 256 * 2**20
DEFAULT_NS = (256, 512, 1024, 2048, 4096, 8192, 16384)
DEFAULT_CS = (64, 256, 1024)
DEFAULT_D = 64

CSV_COLUMNS = ("method", "n", "c", "d", "trials", "median_ns", "flops", "peak_elems")


class Method(str, enum.Enum):
    NL = "NL"
    ENL = "ENL"
    POLYNL = "PolyNL"
    LATENTGNN = "LatentGNN"
    CONV1X1 = "Conv1x1"

    @classmethod
    def parse(cls, name: str) -> "Method":
        for m in cls:
            if m.value.lower() == name.strip().lower():
                return m
        raise ValueError(f"unknown method {name!r}; choose from {[m.value for m in cls]}")


@dataclass(frozen=True)
class Cell:
    method: Method
    n: int
    c: int
    d: int = 0


@dataclass(frozen=True)
class BenchRecord:
    method: Method
    n: int
    c: int
    d: int
    trials: int
    median_ns: int
    flops: int
    peak_elems: int
    skipped: str = ""

    @property
    def measured(self) -> bool:
        return not self.skipped


@dataclass(frozen=True)
class ScalingFit:
    method: Method
    c: int
    exponent: float
    intercept: float
    r2: float
    points: int


def flop_model(method: Method, n: int, c: int, d: int = 0) -> int:
    """Closed-form FLOP count of one forward pass (multiply-add = 2 FLOPs)."""
    if n < 1 or c < 1:
        raise ValueError(f"n and c must be >= 1, got n={n}, c={c}")
    method = Method(method)
    if method is Method.NL:
        return 4 * n * n * c + 4 * n * c * c
    if method is Method.ENL:
        return 6 * n * c * c + 2 * c**3
    if method is Method.POLYNL:
        return 6 * n * c * c + 4 * n * c
    if method is Method.LATENTGNN:
        return 8 * n * d * c + 2 * d * d * c
    return 2 * n * c * c


def peak_model(method: Method, n: int, c: int, d: int = 0) -> int:
    """Largest single buffer (in elements) allocated by one forward pass."""
    if n < 1 or c < 1:
        raise ValueError(f"n and c must be >= 1, got n={n}, c={c}")
    method = Method(method)
    if method is Method.NL:
        return max(n * n, n * c)
    if method is Method.ENL:
        return max(n * c, c * c)
    if method is Method.LATENTGNN:
        return max(n * c, n * d, d * c)
    return n * c


def make_grid(
    methods: Iterable[Method] = tuple(Method),
    ns: Sequence[int] = DEFAULT_NS,
    cs: Sequence[int] = DEFAULT_CS,
    d: int = DEFAULT_D,
) -> list[Cell]:
    methods = [Method(m) for m in methods]
    return [
        Cell(m, n, c, d if m is Method.LATENTGNN else 0)
        for c in cs
        for m in methods
        for n in ns
    ]


def build_forward(cell: Cell, rng: np.random.Generator, dtype=np.float32) -> Callable[[], np.ndarray]:
    """Seeded input and parameters for ``cell``; returns a zero-argument forward."""
    x = rng.standard_normal((cell.n, cell.c)).astype(dtype)
    if cell.method in (Method.NL, Method.ENL):
        p = blocks.NlParams.init(cell.c, rng, dtype)
        fwd = blocks.nl_forward if cell.method is Method.NL else blocks.efficient_nl_forward
        return lambda: fwd(p, x)
    if cell.method is Method.POLYNL:
        p = blocks.PolyNlParams.init(cell.c, rng, dtype)
        return lambda: blocks.polynl_core_forward(p, x)
    if cell.method is Method.LATENTGNN:
        if cell.d < 1:
            raise ValueError("LatentGNN cells need d >= 1")
        p = blocks.LatentGnnParams.init(cell.c, cell.d, rng, dtype)
        return lambda: blocks.latentgnn_forward(p, x)
    w = rng.uniform(-1, 1, size=(cell.c, cell.c)).astype(dtype) / np.sqrt(cell.c)
    return lambda: blocks.conv1x1_forward(w, x)


def _skip(cell: Cell, reason: str) -> BenchRecord:
    log.info("skipping %s n=%d c=%d: %s", cell.method.value, cell.n, cell.c, reason)
    return BenchRecord(cell.method, cell.n, cell.c, cell.d, 0, 0, 0, 0, skipped=reason)


def run_bench(
    grid: Iterable[Cell | tuple],
    trials: int = DEFAULT_TRIALS,
    warmup: int = DEFAULT_WARMUP,
    *,
    seed: int = 42,
    dtype=np.float32,
    byte_budget: int = DEFAULT_BYTE_BUDGET,
    kernel: str = "blas",
    timer: Callable[[], int] = time.perf_counter_ns,
) -> list[BenchRecord]:
    """Time every cell sequentially on one thread.

    NL cells whose N x N similarity matrix would exceed ``byte_budget`` bytes,
    and cells that fail to allocate, come back as skipped records.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if warmup < 0:
        raise ValueError(f"warmup must be >= 0, got {warmup}")
    itemsize = np.dtype(dtype).itemsize
    records = []
    with threadpool_limits(limits=1), tc.use_kernel(kernel):
        for cell in grid:
            cell = cell if isinstance(cell, Cell) else Cell(Method(cell[0]), *cell[1:])
            if cell.method is Method.NL and cell.n * cell.n * itemsize > byte_budget:
                records.append(_skip(cell, f"N^2 buffer exceeds {byte_budget} bytes"))
                continue
            try:
                records.append(_time_cell(cell, trials, warmup, seed, dtype, timer))
            except MemoryError:
                records.append(_skip(cell, "allocation failed"))
    return records


def _time_cell(cell: Cell, trials, warmup, seed, dtype, timer) -> BenchRecord:
    rng = np.random.default_rng([seed, cell.n, cell.c, cell.d])
    fwd = build_forward(cell, rng, dtype)
    with tc.instrument() as counter:
        fwd()
    for _ in range(warmup):
        fwd()
    samples = []
    for _ in range(trials):
        t0 = timer()
        fwd()
        samples.append(timer() - t0)
    median = max(1, int(round(statistics.median(samples))))
    return BenchRecord(
        cell.method, cell.n, cell.c, cell.d, trials, median, counter.flops, counter.peak_elems
    )


def fit_slope(records: Sequence[BenchRecord]) -> ScalingFit:
    """Least-squares slope of log(median time) against log(N)."""
    recs = [r for r in records if r.measured]
    if not recs:
        raise ValueError("no measured records to fit")
    if len({r.method for r in recs}) != 1 or len({r.c for r in recs}) != 1:
        raise ValueError("fit_slope needs records of a single method at a fixed C")
    if len({r.n for r in recs}) < 4:
        raise ValueError(f"need at least 4 distinct N values, got {len({r.n for r in recs})}")
    lx = np.log([float(r.n) for r in recs])
    ly = np.log([float(r.median_ns) for r in recs])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(recs[0].method, recs[0].c, float(slope), float(intercept),
                      min(1.0, max(0.0, r2)), len(recs))


def fit_all(records: Sequence[BenchRecord]) -> list[ScalingFit]:
    """One fit per (method, C) group that has at least four measured N values."""
    groups: dict[tuple[Method, int], list[BenchRecord]] = {}
    for r in records:
        if r.measured:
            groups.setdefault((r.method, r.c), []).append(r)
    fits = []
    for recs in groups.values():
        if len({r.n for r in recs}) >= 4:
            fits.append(fit_slope(recs))
    return fits


def count_inversions(records: Sequence[BenchRecord]) -> int:
    """Number of adjacent N steps where median time decreases."""
    recs = sorted((r for r in records if r.measured), key=lambda r: r.n)
    return sum(1 for a, b in zip(recs, recs[1:]) if b.median_ns < a.median_ns)


def emit_csv(records: Iterable[BenchRecord]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        if r.measured:
            writer.writerow([r.method.value, r.n, r.c, r.d, r.trials, r.median_ns, r.flops, r.peak_elems])
    return buf.getvalue().encode("ascii")


def parse_csv(data: bytes) -> list[BenchRecord]:
    reader = csv.reader(io.StringIO(data.decode("ascii")))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {header!r}")
    records = []
    for row in reader:
        if not row:
            continue
        if len(row) != len(CSV_COLUMNS):
            raise ValueError(f"malformed CSV row {row!r}")
        method, *ints = row
        records.append(BenchRecord(Method(method), *(int(v) for v in ints)))
    return records


_COLORS = {
    Method.NL: "#d62728",
    Method.ENL: "#ff7f0e",
    Method.POLYNL: "#2ca02c",
    Method.LATENTGNN: "#1f77b4",
    Method.CONV1X1: "#7f7f7f",
}
_DASHES = ("", "6,3", "2,2", "8,3,2,3")


def emit_svg(records: Sequence[BenchRecord], fits: Sequence[ScalingFit] = ()) -> bytes:
    """Log-log chart of median time against N, one series per (method, C)."""
    width, height = 720, 460
    left, right, top, bottom = 70, 190, 30, 50
    pw, ph = width - left - right, height - top - bottom
    recs = [r for r in records if r.measured]

    if recs:
        x_lo = math.floor(math.log10(min(r.n for r in recs)))
        x_hi = math.ceil(math.log10(max(r.n for r in recs)))
        y_lo = math.floor(math.log10(min(r.median_ns for r in recs)))
        y_hi = math.ceil(math.log10(max(r.median_ns for r in recs)))
    else:
        x_lo, x_hi, y_lo, y_hi = 2, 5, 3, 9
    x_hi = max(x_hi, x_lo + 1)
    y_hi = max(y_hi, y_lo + 1)

    def sx(n: float) -> float:
        return left + (math.log10(n) - x_lo) / (x_hi - x_lo) * pw

    def sy(t: float) -> float:
        return top + ph - (math.log10(t) - y_lo) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for k in range(x_lo, x_hi + 1):
        x = sx(10.0**k)
        out.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{top + ph + 18}" text-anchor="middle">1e{k}</text>')
    for k in range(y_lo, y_hi + 1):
        y = sy(10.0**k)
        out.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end">1e{k}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 10}" text-anchor="middle">spatial positions N</text>')
    out.append(f'<text x="15" y="{top + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 15 {top + ph / 2:.2f})">median time (ns)</text>')

    cs = sorted({r.c for r in recs} | {f.c for f in fits})
    dash = {c: _DASHES[i % len(_DASHES)] for i, c in enumerate(cs)}
    for r in recs:
        out.append(f'<circle cx="{sx(r.n):.2f}" cy="{sy(r.median_ns):.2f}" r="3" '
                   f'fill="{_COLORS[r.method]}"/>')
    for f in fits:
        ns = [r.n for r in recs if r.method is f.method and r.c == f.c] or [10.0**x_lo, 10.0**x_hi]
        n0, n1 = min(ns), max(ns)
        t0 = math.exp(f.intercept + f.exponent * math.log(n0))
        t1 = math.exp(f.intercept + f.exponent * math.log(n1))
        style = f' stroke-dasharray="{dash[f.c]}"' if dash[f.c] else ""
        out.append(f'<line x1="{sx(n0):.2f}" y1="{sy(t0):.2f}" x2="{sx(n1):.2f}" y2="{sy(t1):.2f}" '
                   f'stroke="{_COLORS[f.method]}"{style}/>')

    ly = top + 10
    for m in Method:
        if any(r.method is m for r in recs):
            out.append(f'<rect x="{left + pw + 15}" y="{ly - 8}" width="10" height="10" fill="{_COLORS[m]}"/>')
            out.append(f'<text x="{left + pw + 30}" y="{ly + 1}">{m.value}</text>')
            ly += 16
    for f in fits:
        out.append(f'<text x="{left + pw + 15}" y="{ly + 1}">{f.method.value} C={f.c}: '
                   f'slope {f.exponent:.2f}</text>')
        ly += 14
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")
