"""Command-line entry point: ``polynl {verify,gradcheck,bench,oracle}``.

Exit status is 0 when every executed check passed, 1 on a check failure and
2 on a usage or configuration error. Options may also come from a
``--config`` file of ``key=value`` lines; flags given on the command line
take precedence.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench, gradcheck, oracle, verify
from .errors import CapacityError, ShapeError

DEFAULT_SEED = 42
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

GRIDS = {
    "default": dict(ns=bench.DEFAULT_NS, cs=bench.DEFAULT_CS, trials=bench.DEFAULT_TRIALS),
    "reduced": dict(ns=(128, 256, 512, 1024), cs=(64, 256), trials=5),
    "tiny": dict(ns=(64, 128, 256, 512), cs=(64,), trials=3),
}


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _sizes(text: str) -> list[tuple[int, int]]:
    sizes = []
    for tok in text.split(","):
        try:
            n, c = (int(v) for v in tok.lower().split("x"))
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"sizes look like 5x3,8x4; got {tok!r}") from exc
        if n < 1 or c < 1:
            raise argparse.ArgumentTypeError(f"sizes must be positive, got {tok!r}")
        sizes.append((n, c))
    return sizes


def _positive(text: str) -> float:
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError("tolerance must be non-negative")
    return v


def _common(p: argparse.ArgumentParser, *, dtype: str, out: str | None, tolerance: bool) -> None:
    p.add_argument("--config", help="file of key=value lines; flags override it")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--dtype", choices=("f32", "f64"), default=dtype)
    if out is not None:
        p.add_argument("--out", default=out, help="output file prefix")
    if tolerance:
        p.add_argument("--tolerance", type=_positive, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polynl", description=__doc__.splitlines()[0],
                                     allow_abbrev=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", allow_abbrev=False,
                       help="oracle, reassociation, homogeneity and permutation suites")
    _common(p, dtype="f64", out=None, tolerance=True)
    p.add_argument("--suite", action="append", choices=sorted(verify.SUITES),
                   help="run only this suite (repeatable)")
    p.add_argument("--instances", type=int, default=None, help="override instances per suite")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gradcheck", allow_abbrev=False,
                       help="analytic backward vs central differences")
    _common(p, dtype="f64", out=None, tolerance=True)
    p.add_argument("--sizes", type=_sizes, default=[(5, 3), (8, 4)])
    p.add_argument("--seeds", type=int, default=20, help="consecutive seeds per size")
    p.add_argument("--step", type=float, default=gradcheck.DEFAULT_STEP)
    p.add_argument("--atol", type=float, default=gradcheck.DEFAULT_ATOL)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("bench", allow_abbrev=False, help="runtime / FLOP / peak-intermediate sweep")
    _common(p, dtype="f32", out="bench", tolerance=False)
    p.add_argument("--grid", choices=sorted(GRIDS), default="default")
    p.add_argument("--methods", default=None, help="comma-separated subset, e.g. polynl,nl")
    p.add_argument("--ns", type=_int_list, default=None)
    p.add_argument("--cs", type=_int_list, default=None)
    p.add_argument("--d", type=int, default=bench.DEFAULT_D)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--warmup", type=int, default=bench.DEFAULT_WARMUP)
    p.add_argument("--byte-budget", type=int, default=bench.DEFAULT_BYTE_BUDGET)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle", allow_abbrev=False,
                       help="dump the dense order-8 interaction tensor")
    _common(p, dtype="f64", out="w3", tolerance=False)
    p.add_argument("--block", choices=("nl", "polynl"), default="polynl")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--c", type=int, default=2)
    p.add_argument("--weights", choices=("random", "unit"), default="random")
    p.add_argument("--cap", type=int, default=oracle.DEFAULT_CAP)
    p.set_defaults(func=cmd_oracle)
    return parser


def _require_f64(cfg) -> None:
    if cfg.dtype != "f64":
        raise UsageError(f"{cfg.command} runs in f64 only")


def cmd_verify(cfg) -> int:
    _require_f64(cfg)
    if cfg.instances is not None and cfg.instances < 1:
        raise UsageError("--instances must be >= 1")
    results = verify.run_suites(cfg.seed, cfg.suite, cfg.tolerance, cfg.instances)
    sys.stdout.write(verify.format_report(results, cfg.seed))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def cmd_gradcheck(cfg, backwards=None) -> int:
    """``backwards`` maps block name to a replacement backward (test hook)."""
    _require_f64(cfg)
    if cfg.seeds < 1:
        raise UsageError("--seeds must be >= 1")
    rtol = gradcheck.DEFAULT_RTOL if cfg.tolerance is None else cfg.tolerance
    rows = gradcheck.run_suite(cfg.sizes, cfg.seed, cfg.seeds, backwards,
                               step=cfg.step, rtol=rtol, atol=cfg.atol)
    sys.stdout.write(f"gradcheck seed={cfg.seed} seeds={cfg.seeds} rtol={rtol:g} atol={cfg.atol:g}\n")
    sys.stdout.write(gradcheck.format_suite(rows))
    return EXIT_OK if all(r.passed for r in rows) else EXIT_FAIL


def cmd_bench(cfg) -> int:
    preset = GRIDS[cfg.grid]
    try:
        methods = ([bench.Method.parse(m) for m in cfg.methods.split(",")]
                   if cfg.methods else list(bench.Method))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    trials = preset["trials"] if cfg.trials is None else cfg.trials
    if trials < 1:
        raise UsageError("--trials must be >= 1")
    grid = bench.make_grid(methods, cfg.ns or preset["ns"], cfg.cs or preset["cs"], cfg.d)
    dtype = np.float32 if cfg.dtype == "f32" else np.float64
    records = bench.run_bench(grid, trials, cfg.warmup, seed=cfg.seed, dtype=dtype,
                              byte_budget=cfg.byte_budget)
    fits = bench.fit_all(records)
    csv_path, svg_path = Path(f"{cfg.out}.csv"), Path(f"{cfg.out}.svg")
    csv_path.write_bytes(bench.emit_csv(records))
    svg_path.write_bytes(bench.emit_svg(records, fits))
    for r in records:
        if not r.measured:
            print(f"skipped {r.method.value} n={r.n} c={r.c}: {r.skipped}")
    for f in fits:
        print(f"{f.method.value:<10} c={f.c:<5} exponent={f.exponent:.3f} r2={f.r2:.4f} points={f.points}")
    print(f"wrote {csv_path} and {svg_path}")
    return EXIT_OK


def cmd_oracle(cfg) -> int:
    _require_f64(cfg)
    n, c = cfg.n, cfg.c
    if n < 1 or c < 1:
        raise UsageError("--n and --c must be >= 1")
    if n * c > cfg.cap:
        raise CapacityError(f"N*C = {n * c} exceeds the cap of {cfg.cap}")
    rng = np.random.default_rng(cfg.seed)
    count = 2 if cfg.block == "nl" else 3
    if cfg.weights == "unit":
        mats = [np.ones((c, c)) for _ in range(count)]
    else:
        bound = 1.0 / np.sqrt(c)
        mats = [rng.uniform(-bound, bound, size=(c, c)) for _ in range(count)]
    build = oracle.build_w3_nl if cfg.block == "nl" else oracle.build_w3_polynl
    w3 = build(*mats, n, cap=cfg.cap)
    path = Path(f"{cfg.out}.txt")
    path.write_text(oracle.format_dump(w3), encoding="ascii")
    print(f"{cfg.block} n={n} c={c}: {w3.data.size} entries, {w3.count_nonzero()} nonzero -> {path}")
    return EXIT_OK


def _apply_config(parser: argparse.ArgumentParser, path: str) -> None:
    """Load key=value defaults into every subcommand that knows the key."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        dest = key.strip().lstrip("-").replace("-", "_")
        known = False
        for sp in subparsers.choices.values():
            action = next((a for a in sp._actions if a.dest == dest), None)
            if action is None:
                continue
            repeated = isinstance(action, argparse._AppendAction)
            values = [v.strip() for v in value.split(",") if v.strip()] if repeated else [value.strip()]
            if action.choices is not None and any(v not in action.choices for v in values):
                raise UsageError(f"{path}:{lineno}: {key.strip()} must be one of {sorted(action.choices)}")
            sp.set_defaults(**{dest: values if repeated else values[0]})
            known = True
        if not known or dest in ("config", "func", "command"):
            raise UsageError(f"{path}:{lineno}: unknown option {key.strip()!r}")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        if known.config:
            _apply_config(parser, known.config)
        cfg = parser.parse_args(argv)
    except UsageError as exc:
        print(f"polynl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if cfg.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return cfg.func(cfg)
    except (UsageError, CapacityError, ShapeError) as exc:
        print(f"polynl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
