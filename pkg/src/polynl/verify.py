"""Seeded equivalence and property suites.

Instance ``i`` of a suite run with base seed ``s`` draws everything from
``numpy.random.default_rng(s + i)``, so any failure can be replayed alone
with ``--seed s+i --instances 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import blocks, oracle
from . import tensor_core as tc

MAX_REPORTED_FAILURES = 5

# (N, C) pairs small enough for the dense order-8 tensor.
ORACLE_SIZES = tuple((n, c) for n in range(1, 9) for c in range(1, 9) if n * c <= oracle.DEFAULT_CAP)


@dataclass(frozen=True)
class Failure:
    seed: int
    dims: str
    error: float


@dataclass
class SuiteResult:
    name: str
    instances: int
    tolerance: float
    max_error: float = 0.0
    failures: list[Failure] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def observe(self, seed: int, dims: str, error: float) -> None:
        self.max_error = max(self.max_error, error)
        if not error <= self.tolerance:
            self.failures.append(Failure(seed, dims, error))


def _max_pairwise(paths: list[np.ndarray]) -> float:
    return max(
        tc.rel_error(paths[i], paths[j]) for i in range(len(paths)) for j in range(i + 1, len(paths))
    )


def oracle_triangle(seed: int, instances: int = 100, tolerance: float = 1e-10) -> SuiteResult:
    """General cubic tensor vs element-wise formula vs fast forward, per block."""
    res = SuiteResult("oracle-triangle", instances, tolerance)
    for i in range(instances):
        rng = np.random.default_rng(seed + i)
        n, c = ORACLE_SIZES[rng.integers(len(ORACLE_SIZES))]
        x = rng.standard_normal((n, c))
        nl = blocks.NlParams.init(c, rng)
        pn = blocks.PolyNlParams.init(c, rng)
        w3_nl = oracle.build_w3_nl(nl.wf, nl.wg, n)
        w3_pn = oracle.build_w3_polynl(pn.w1, pn.w2, pn.w3, n)
        err = max(
            _max_pairwise([
                oracle.poly3_elementwise(w3_nl, x),
                oracle.poly3_forward(w3_nl, x),
                oracle.nl_elementwise(nl.wf, nl.wg, x),
                blocks.nl_forward(nl, x),
            ]),
            _max_pairwise([
                oracle.poly3_elementwise(w3_pn, x),
                oracle.poly3_forward(w3_pn, x),
                oracle.polynl_elementwise(pn.w1, pn.w2, pn.w3, x),
                blocks.polynl_core_forward(pn, x),
            ]),
        )
        res.observe(seed + i, f"n={n} c={c}", err)
    return res


def reassociation(
    seed: int, instances: int = 50, tolerance: float = 1e-10, max_n: int = 256, max_c: int = 32
) -> SuiteResult:
    res = SuiteResult("reassociation", instances, tolerance)
    for i in range(instances):
        rng = np.random.default_rng(seed + i)
        n = int(rng.integers(1, max_n + 1))
        c = int(rng.integers(1, max_c + 1))
        x = rng.standard_normal((n, c))
        p = blocks.NlParams.init(c, rng)
        err = tc.rel_error(blocks.efficient_nl_forward(p, x), blocks.nl_forward(p, x))
        res.observe(seed + i, f"n={n} c={c}", err)
    return res


def _core_forwards(rng: np.random.Generator, c: int) -> dict[str, Callable[[np.ndarray], np.ndarray]]:
    nl = blocks.NlParams.init(c, rng)
    pn = blocks.PolyNlParams.init(c, rng)
    lg = blocks.LatentGnnParams.init(c, int(rng.integers(1, 9)), rng)
    return {
        "NL": lambda x: blocks.nl_forward(nl, x),
        "ENL": lambda x: blocks.efficient_nl_forward(nl, x),
        "PolyNL": lambda x: blocks.polynl_core_forward(pn, x),
        "LatentGNN": lambda x: blocks.latentgnn_forward(lg, x),
    }


def homogeneity(seed: int, instances: int = 50, tolerance: float = 1e-12) -> SuiteResult:
    """forward(s X) == s**3 forward(X) for every core forward."""
    res = SuiteResult("homogeneity", instances, tolerance)
    for i in range(instances):
        rng = np.random.default_rng(seed + i)
        n, c = int(rng.integers(1, 65)), int(rng.integers(1, 17))
        s = float(rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0]))
        x = rng.standard_normal((n, c))
        for name, fwd in _core_forwards(rng, c).items():
            err = tc.rel_error(fwd(s * x), s**3 * fwd(x))
            res.observe(seed + i, f"{name} n={n} c={c} s={s:.6g}", err)
    return res


def permutation(seed: int, instances: int = 50, tolerance: float = 1e-12) -> SuiteResult:
    """forward(P X) == P forward(X) for a random row permutation P."""
    res = SuiteResult("permutation", instances, tolerance)
    for i in range(instances):
        rng = np.random.default_rng(seed + i)
        n, c = int(rng.integers(1, 65)), int(rng.integers(1, 17))
        x = rng.standard_normal((n, c))
        perm = rng.permutation(n)
        for name, fwd in _core_forwards(rng, c).items():
            err = tc.rel_error(fwd(x[perm]), fwd(x)[perm])
            res.observe(seed + i, f"{name} n={n} c={c}", err)
    return res


SUITES: dict[str, Callable[..., SuiteResult]] = {
    "oracle-triangle": oracle_triangle,
    "reassociation": reassociation,
    "homogeneity": homogeneity,
    "permutation": permutation,
}


def run_suites(
    seed: int, names=None, tolerance: float | None = None, instances: int | None = None
) -> list[SuiteResult]:
    results = []
    for name in names or SUITES:
        kwargs = {}
        if tolerance is not None:
            kwargs["tolerance"] = tolerance
        if instances is not None:
            kwargs["instances"] = instances
        results.append(SUITES[name](seed, **kwargs))
    return results


def format_report(results: list[SuiteResult], seed: int) -> str:
    lines = [
        f"verify seed={seed}",
        f"{'suite':<16} {'instances':>9} {'max_error':>11} {'tolerance':>11}  status",
    ]
    for r in results:
        lines.append(
            f"{r.name:<16} {r.instances:>9} {r.max_error:11.3e} {r.tolerance:11.3e}  "
            f"{'PASS' if r.passed else 'FAIL'}"
        )
    for r in results:
        for f in r.failures[:MAX_REPORTED_FAILURES]:
            lines.append(
                f"  {r.name} failed at seed {f.seed} ({f.dims}): error {f.error:.3e}; replay: "
                f"polynl verify --suite {r.name} --seed {f.seed} --instances 1 --tolerance {r.tolerance:g}"
            )
        if len(r.failures) > MAX_REPORTED_FAILURES:
            lines.append(f"  {r.name}: {len(r.failures) - MAX_REPORTED_FAILURES} more failures")
    ok = all(r.passed for r in results)
    lines.append(f"result: {'PASS' if ok else 'FAIL'}")
    return "\n".join(lines) + "\n"
