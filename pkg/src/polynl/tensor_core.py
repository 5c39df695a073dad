"""Dense matrix kernels, shape plumbing and operation instrumentation.

Every kernel here returns a freshly allocated row-major array. When an
:class:`OpCounter` is active (see :func:`instrument`), each kernel reports the
floating point operations it performed (a multiply-add counts as two) and the
size of the buffer it allocated, so callers can audit FLOPs and the largest
intermediate of a forward pass without touching the OS allocator.

Two matmul kernels exist. ``"reference"`` accumulates over the contraction
index in a fixed sequential order, so results are bit-reproducible and equal
to a naive triple loop. ``"blas"`` hands the product to numpy and is used
only for timing.
"""

from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import NumericError, ShapeError

KERNELS = ("reference", "blas")

_kernel: contextvars.ContextVar[str] = contextvars.ContextVar("kernel", default="reference")
_counter: contextvars.ContextVar["OpCounter | None"] = contextvars.ContextVar(
    "op_counter", default=None
)


@dataclass
class OpCounter:
    """Running totals collected while :func:`instrument` is active."""

    flops: int = 0
    peak_elems: int = 0
    allocations: int = 0

    def record(self, flops: int, elems: int) -> None:
        self.flops += flops
        self.allocations += 1
        if elems > self.peak_elems:
            self.peak_elems = elems


@contextlib.contextmanager
def instrument() -> Iterator[OpCounter]:
    """Count FLOPs and track the largest buffer allocated inside the block.

    The counter is bound to the current context, so concurrent threads each
    see their own (or none).
    """
    counter = OpCounter()
    token = _counter.set(counter)
    try:
        yield counter
    finally:
        _counter.reset(token)


@contextlib.contextmanager
def use_kernel(name: str) -> Iterator[None]:
    if name not in KERNELS:
        raise ValueError(f"unknown kernel {name!r}; expected one of {KERNELS}")
    token = _kernel.set(name)
    try:
        yield
    finally:
        _kernel.reset(token)


def current_kernel() -> str:
    return _kernel.get()


def _account(flops: int, out: np.ndarray) -> np.ndarray:
    counter = _counter.get()
    if counter is not None:
        counter.record(flops, out.size)
    return out


def _as_float(data) -> np.ndarray:
    arr = np.asarray(data)
    if arr.dtype not in (np.float32, np.float64):
        arr = arr.astype(np.float64)
    return arr


def feature_map(data, *, dtype=None) -> np.ndarray:
    """Validate ``data`` as an N x C feature map and return it as an array."""
    arr = _as_float(data) if dtype is None else np.asarray(data, dtype=dtype)
    if arr.ndim != 2:
        raise ShapeError(f"feature map must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"feature map needs N >= 1 and C >= 1, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise NumericError("feature map contains non-finite entries")
    return np.ascontiguousarray(arr)


def square_weights(data, *, dtype=None) -> np.ndarray:
    """Validate ``data`` as a C x C weight matrix."""
    arr = feature_map(data, dtype=dtype)
    if arr.shape[0] != arr.shape[1]:
        raise ShapeError(f"weights must be square, got {arr.shape}")
    return arr


def check_finite(arr: np.ndarray, what: str = "result") -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NumericError(f"{what} contains non-finite entries")
    return arr


def fold(map3d) -> np.ndarray:
    """Fold an H x W x C map into an (H*W) x C matrix; row h*W + w holds (h, w)."""
    arr = _as_float(map3d)
    if arr.ndim != 3:
        raise ShapeError(f"expected an H x W x C array, got shape {arr.shape}")
    h, w, c = arr.shape
    if min(h, w, c) < 1:
        raise ShapeError(f"zero-sized dimension in {arr.shape}")
    out = np.array(arr.reshape(h * w, c), order="C", copy=True)
    return _account(0, out)


def unfold(x, h: int, w: int) -> np.ndarray:
    arr = _as_float(x)
    if arr.ndim != 2 or h < 1 or w < 1 or arr.shape[0] != h * w:
        raise ShapeError(f"cannot unfold {arr.shape} into {h} x {w} positions")
    out = np.array(arr.reshape(h, w, arr.shape[1]), order="C", copy=True)
    return _account(0, out)


def transpose(a: np.ndarray) -> np.ndarray:
    """Return a materialized transpose (a new buffer, never a view)."""
    if a.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got shape {a.shape}")
    return _account(0, a.T.copy(order="C"))


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of an M x K and a K x P matrix."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    m, k = a.shape
    p = b.shape[1]
    if _kernel.get() == "blas":
        out = np.ascontiguousarray(a @ b)
    else:
        out = np.zeros((m, p), dtype=np.result_type(a, b))
        for j in range(k):
            out += a[:, j, None] * b[None, j, :]
    return _account(2 * m * k * p, out)


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise ShapeError(f"hadamard shape mismatch: {a.shape} vs {b.shape}")
    return _account(a.size, np.multiply(a, b))


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise ShapeError(f"add shape mismatch: {a.shape} vs {b.shape}")
    return _account(a.size, np.add(a, b))


def scale(s: float, a: np.ndarray) -> np.ndarray:
    return _account(a.size, np.multiply(a.dtype.type(s), a))


def pool_expand(x: np.ndarray) -> np.ndarray:
    """Average over spatial positions and broadcast the mean row to every row.

    Costs N*C additions for the pooling and N*C multiplications (by 1/N) for
    the expansion.
    """
    if x.ndim != 2:
        raise ShapeError(f"pool_expand expects a matrix, got shape {x.shape}")
    n, c = x.shape
    if _kernel.get() == "blas":
        sums = x.sum(axis=0)
    else:
        sums = x[0].copy()
        for row in x[1:]:
            sums += row
    _account(0, sums)
    inv_n = x.dtype.type(1.0 / n)
    out = np.multiply(np.broadcast_to(sums, (n, c)), inv_n)
    return _account(2 * n * c, out)


def rel_error(value: np.ndarray, reference: np.ndarray) -> float:
    """Relative Frobenius distance ||value - reference|| / ||reference||.

    Falls back to the absolute distance when the reference is exactly zero.
    """
    value = np.asarray(value, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if value.shape != reference.shape:
        raise ShapeError(f"cannot compare {value.shape} with {reference.shape}")
    diff = float(np.linalg.norm(value - reference))
    ref = float(np.linalg.norm(reference))
    return diff / ref if ref > 0 else diff


def format_matrix(a) -> str:
    """Render a matrix as "<rows> <cols>" followed by one line per row."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"expected a matrix, got shape {arr.shape}")
    lines = [f"{arr.shape[0]} {arr.shape[1]}"]
    lines.extend(" ".join(repr(float(v)) for v in row) for row in arr)
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ShapeError("empty matrix text")
    try:
        rows, cols = (int(t) for t in lines[0].split())
    except ValueError as exc:
        raise ShapeError(f"bad matrix header {lines[0]!r}") from exc
    body = lines[1:]
    if len(body) != rows:
        raise ShapeError(f"header says {rows} rows, found {len(body)}")
    data = [[float(t) for t in ln.split()] for ln in body]
    if any(len(r) != cols for r in data):
        raise ShapeError(f"every row must hold {cols} values")
    return np.array(data, dtype=np.float64).reshape(rows, cols)


def write_matrix(path, a) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_matrix(a))


def read_matrix(path) -> np.ndarray:
    with open(path, encoding="ascii") as fh:
        return parse_matrix(fh.read())
