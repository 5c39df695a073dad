"""Hand-derived backward passes and a central-difference gradient checker.

Backward functions return the gradient of the scalar <upstream, Z> where Z is
the residual block output, with respect to the input and every parameter.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import tensor_core as tc
from .blocks import NlParams, PolyNlParams, residual_nl, residual_polynl
from .errors import NumericError, ShapeError

DEFAULT_STEP = 1e-5
DEFAULT_RTOL = 1e-6
DEFAULT_ATOL = 1e-8


@dataclass
class GradBundle:
    d_x: np.ndarray
    d_params: dict[str, np.ndarray] = field(default_factory=dict)

    def scaled(self, s: float) -> "GradBundle":
        return GradBundle(self.d_x * s, {k: v * s for k, v in self.d_params.items()})


@dataclass(frozen=True)
class GradCheckRow:
    name: str
    max_rel: float
    max_abs: float
    passed: bool


@dataclass
class GradCheckReport:
    rows: list[GradCheckRow]
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def format(self) -> str:
        lines = [f"{'name':<10} {'max_rel':>12} {'max_abs':>12}  pass"]
        for r in self.rows:
            lines.append(f"{r.name:<10} {r.max_rel:12.3e} {r.max_abs:12.3e}  {'yes' if r.passed else 'NO'}")
        return "\n".join(lines)


def _upstream(x: np.ndarray, upstream) -> np.ndarray:
    upstream = tc.feature_map(upstream, dtype=np.float64)
    if upstream.shape != x.shape:
        raise ShapeError(f"upstream {upstream.shape} does not match input {x.shape}")
    return upstream


def nl_backward(p: NlParams, x, upstream) -> GradBundle:
    """Gradients of <upstream, X Wf X^T X Wg + X> w.r.t. x, wf and wg."""
    x = tc.feature_map(x, dtype=np.float64)
    gz = _upstream(x, upstream)
    xt = tc.transpose(x)
    a = tc.matmul(x, p.wf)  # N x C
    sim = tc.matmul(a, xt)  # N x N
    b = tc.matmul(sim, x)  # N x C

    d_wg = tc.matmul(tc.transpose(b), gz)
    d_b = tc.matmul(gz, tc.transpose(p.wg))
    d_sim = tc.matmul(d_b, xt)
    d_a = tc.matmul(d_sim, x)
    d_wf = tc.matmul(xt, d_a)

    d_x = tc.add(gz, tc.matmul(tc.transpose(sim), d_b))  # residual + (sim @ x) path
    d_x = tc.add(d_x, tc.matmul(tc.transpose(d_sim), a))  # x^T in the similarity
    d_x = tc.add(d_x, tc.matmul(d_a, tc.transpose(p.wf)))  # x @ wf
    return GradBundle(d_x, {"wf": d_wf, "wg": d_wg})


def polynl_backward(p: PolyNlParams, x, upstream) -> GradBundle:
    """Gradients of <upstream, alpha X + beta Y> w.r.t. x, w1, w2, w3, alpha, beta.

    pool_expand is the symmetric operator (1/N) 1 1^T, so its adjoint is
    itself: every row of the incoming gradient is averaged and redistributed.
    """
    x = tc.feature_map(x, dtype=np.float64)
    gz = _upstream(x, upstream)
    xt = tc.transpose(x)
    p1 = tc.matmul(x, p.w1)
    p2 = tc.matmul(x, p.w2)
    pooled = tc.pool_expand(tc.hadamard(p1, p2))
    k = tc.hadamard(pooled, x)
    y = tc.matmul(k, p.w3)

    d_alpha = np.array(float(np.sum(gz * x)))
    d_beta = np.array(float(np.sum(gz * y)))
    d_y = tc.scale(p.beta, gz)
    d_w3 = tc.matmul(tc.transpose(k), d_y)
    d_k = tc.matmul(d_y, tc.transpose(p.w3))
    d_h = tc.pool_expand(tc.hadamard(d_k, x))
    d_p1 = tc.hadamard(d_h, p2)
    d_p2 = tc.hadamard(d_h, p1)

    d_x = tc.add(tc.scale(p.alpha, gz), tc.hadamard(d_k, pooled))
    d_x = tc.add(d_x, tc.matmul(d_p1, tc.transpose(p.w1)))
    d_x = tc.add(d_x, tc.matmul(d_p2, tc.transpose(p.w2)))
    return GradBundle(
        d_x,
        {
            "w1": tc.matmul(xt, d_p1),
            "w2": tc.matmul(xt, d_p2),
            "w3": d_w3,
            "alpha": d_alpha,
            "beta": d_beta,
        },
    )


def finite_diff(fn: Callable[[np.ndarray], float], point, step: float = DEFAULT_STEP) -> np.ndarray:
    """Central differences (f(p + h e_i) - f(p - h e_i)) / 2h for every coordinate."""
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    point = np.array(point, dtype=np.float64)
    grad = np.zeros_like(point)
    flat = point.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        f_plus = float(fn(point.copy()))
        flat[i] = orig - step
        f_minus = float(fn(point.copy()))
        flat[i] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericError(f"non-finite function value while probing coordinate {i}")
        out[i] = (f_plus - f_minus) / (2 * step)
    return grad


def compare(name: str, analytic, numeric, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> GradCheckRow:
    """Max relative and absolute discrepancy; passes if either is within bounds."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    diff = np.abs(analytic - numeric)
    denom = np.maximum(np.abs(analytic), np.abs(numeric))
    rel = np.divide(diff, denom, out=np.zeros_like(diff), where=denom > 0)
    max_rel = float(rel.max(initial=0.0))
    max_abs = float(diff.max(initial=0.0))
    return GradCheckRow(name, max_rel, max_abs, max_rel <= rtol or max_abs <= atol)


_FORWARDS = {NlParams: residual_nl, PolyNlParams: residual_polynl}


def check_block(
    p: NlParams | PolyNlParams,
    x,
    upstream,
    backward: Callable | None = None,
    *,
    step: float = DEFAULT_STEP,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> GradCheckReport:
    """Compare ``backward`` against finite differences of <upstream, forward>.

    ``backward`` defaults to the analytic backward of the block type; passing
    a different callable lets callers check a modified implementation.
    """
    forward = _FORWARDS[type(p)]
    if backward is None:
        backward = nl_backward if isinstance(p, NlParams) else polynl_backward
    x = tc.feature_map(x, dtype=np.float64)
    gz = _upstream(x, upstream)
    grads = backward(p, x, gz)

    def probe(params, inp) -> float:
        return float(np.sum(gz * forward(params, inp)))

    rows = [compare("x", grads.d_x, finite_diff(lambda v: probe(p, v), x, step), rtol, atol)]
    for name, analytic in grads.d_params.items():
        def fn(v, name=name):
            value = float(v) if np.ndim(v) == 0 else v
            return probe(dataclasses.replace(p, **{name: value}), x)

        rows.append(compare(name, analytic, finite_diff(fn, getattr(p, name), step), rtol, atol))
    return GradCheckReport(rows, rtol, atol)


def unit_rms(a: np.ndarray) -> np.ndarray:
    rms = float(np.sqrt(np.mean(a * a)))
    return a / rms if rms > 0 else a


BLOCKS = ("NL", "PolyNL")


def _weights(rng: np.random.Generator, c: int) -> np.ndarray:
    # magnitudes in [0.5, 1] / sqrt(C): near-zero weights make derivatives
    # vanish and relative errors meaningless
    return rng.choice([-1.0, 1.0], size=(c, c)) * rng.uniform(0.5, 1.0, size=(c, c)) / np.sqrt(c)


def make_case(block: str, n: int, c: int, seed: int):
    """Seeded (params, x, upstream) with a unit-RMS input.

    Poly-NL gets random non-zero alpha and beta so every parameter influences
    the output.
    """
    rng = np.random.default_rng(seed)
    x = unit_rms(rng.standard_normal((n, c)))
    if block == "NL":
        p = NlParams(_weights(rng, c), _weights(rng, c))
    elif block == "PolyNL":
        w1, w2, w3 = (_weights(rng, c) for _ in range(3))
        p = PolyNlParams(w1, w2, w3, alpha=rng.uniform(0.5, 1.5), beta=rng.uniform(0.5, 1.5))
    else:
        raise ValueError(f"unknown block {block!r}; expected one of {BLOCKS}")
    return p, x, rng.standard_normal((n, c))


@dataclass(frozen=True)
class SuiteRow:
    block: str
    size: tuple[int, int]
    name: str
    max_rel: float
    max_abs: float
    passed: bool
    failing_seeds: tuple[int, ...] = ()


def run_suite(
    sizes,
    seed: int,
    seeds: int,
    backwards: dict[str, Callable] | None = None,
    *,
    step: float = DEFAULT_STEP,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> list[SuiteRow]:
    """Check every block at every size for ``seeds`` consecutive seeds.

    Rows are aggregated per (block, size, parameter): the worst discrepancy
    over all seeds, and the seeds whose check failed.
    """
    backwards = backwards or {}
    rows = []
    for block in BLOCKS:
        for n, c in sizes:
            agg: dict[str, list] = {}
            for s in range(seed, seed + seeds):
                p, x, up = make_case(block, n, c, s)
                report = check_block(p, x, up, backwards.get(block), step=step, rtol=rtol, atol=atol)
                for r in report.rows:
                    entry = agg.setdefault(r.name, [0.0, 0.0, []])
                    entry[0] = max(entry[0], r.max_rel)
                    entry[1] = max(entry[1], r.max_abs)
                    if not r.passed:
                        entry[2].append(s)
            for name, (max_rel, max_abs, bad) in agg.items():
                rows.append(SuiteRow(block, (n, c), name, max_rel, max_abs, not bad, tuple(bad)))
    return rows


def format_suite(rows: list[SuiteRow]) -> str:
    lines = [f"{'block':<7} {'size':>5} {'param':<6} {'max_rel':>11} {'max_abs':>11}  pass"]
    for r in rows:
        size = f"{r.size[0]}x{r.size[1]}"
        lines.append(
            f"{r.block:<7} {size:>5} {r.name:<6} {r.max_rel:11.3e} {r.max_abs:11.3e}  "
            f"{'yes' if r.passed else 'NO'}"
        )
    for r in rows:
        for s in r.failing_seeds[:3]:
            lines.append(
                f"  {r.block} {r.name} failed at seed {s}; replay: "
                f"polynl gradcheck --sizes {r.size[0]}x{r.size[1]} --seed {s} --seeds 1"
            )
    ok = all(r.passed for r in rows)
    lines.append(f"result: {'PASS' if ok else 'FAIL'}")
    return "\n".join(lines) + "\n"
