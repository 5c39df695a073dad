"""Brute-force evaluators for the cubic polynomial layer.

A general third-order layer maps X (N x C) to Y (N x C) through an order-8
interaction tensor W3 of shape (N, C, N, C, N, C, N, C)::

    y[a, b] = sum_{c,d,e,f,g,h} W3[a,b,c,d,e,f,g,h] * x[c,d] * x[e,f] * x[g,h]

Both the non-local block and Poly-NL are instances with a block-sparse W3
whose entries factor through C x C matrices. The builders here materialize
those tensors so the fast forwards can be checked against the general
formula. Everything in this module is deliberately naive: nested Python
loops, no vectorized shortcuts, tiny sizes only. The tensor holds (N*C)**4
scalars, hence the size cap.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import tensor_core as tc
from .errors import CapacityError, ShapeError

DEFAULT_CAP = 8


@dataclass(frozen=True)
class InteractionTensor3:
    n: int
    c: int
    data: np.ndarray
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.n < 1 or self.c < 1:
            raise ShapeError(f"need n >= 1 and c >= 1, got n={self.n}, c={self.c}")
        if self.n * self.c > self.cap:
            raise CapacityError(
                f"N*C = {self.n * self.c} exceeds the cap of {self.cap} "
                f"({(self.n * self.c) ** 4} scalars)"
            )
        data = np.asarray(self.data, dtype=np.float64)
        if data.shape != (self.n, self.c) * 4:
            raise ShapeError(f"W3 data has shape {data.shape}, expected {(self.n, self.c) * 4}")
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, n: int, c: int, cap: int = DEFAULT_CAP) -> "InteractionTensor3":
        if n * c > cap:
            raise CapacityError(f"N*C = {n * c} exceeds the cap of {cap}")
        return cls(n, c, np.zeros((n, c) * 4), cap)

    def count_nonzero(self) -> int:
        return int(np.count_nonzero(self.data))


def double_dot(w, x) -> np.ndarray:
    """Contract the trailing two indices of ``w`` against the matrix ``x``."""
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or w.ndim < 2 or w.shape[-2:] != x.shape:
        raise ShapeError(f"cannot contract tensor {w.shape} with matrix {x.shape}")
    out = np.zeros(w.shape[:-2])
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            out += w[..., i, j] * x[i, j]
    return out


def _check_pair(w3: InteractionTensor3, x) -> np.ndarray:
    x = tc.feature_map(x, dtype=np.float64)
    if x.shape != (w3.n, w3.c):
        raise ShapeError(f"input {x.shape} does not match W3 built for ({w3.n}, {w3.c})")
    return x


def poly3_forward(w3: InteractionTensor3, x) -> np.ndarray:
    """((W3 . X) . X) . X via three successive double-dot contractions."""
    x = _check_pair(w3, x)
    return double_dot(double_dot(double_dot(w3.data, x), x), x)


def poly3_trilinear(w3: InteractionTensor3, x1, x2, x3) -> np.ndarray:
    """Evaluate the cubic form with three independent inputs in the three slots."""
    x1, x2, x3 = (_check_pair(w3, x) for x in (x1, x2, x3))
    n, c = w3.n, w3.c
    w = w3.data
    y = np.zeros((n, c))
    for a in range(n):
        for b in range(c):
            acc = 0.0
            for cc in range(n):
                for d in range(c):
                    for e in range(n):
                        for f in range(c):
                            for g in range(n):
                                for h in range(c):
                                    acc += w[a, b, cc, d, e, f, g, h] * x1[cc, d] * x2[e, f] * x3[g, h]
            y[a, b] = acc
    return y


def poly3_elementwise(w3: InteractionTensor3, x) -> np.ndarray:
    """Eight nested loops over every output entry and every input triplet."""
    return poly3_trilinear(w3, x, x, x)


def _weights_for(n: int, *mats) -> list[np.ndarray]:
    mats = [tc.square_weights(m, dtype=np.float64) for m in mats]
    if any(m.shape != mats[0].shape for m in mats):
        raise ShapeError("all weight matrices must share the same C")
    if n < 1:
        raise ShapeError(f"n must be >= 1, got {n}")
    return mats


def build_w3_nl(wf, wg, n: int, cap: int = DEFAULT_CAP) -> InteractionTensor3:
    """W3[a,b,c,d,e,f,g,h] = [c == a] [g == e] wf[d,f] wg[h,b]."""
    wf, wg = _weights_for(n, wf, wg)
    c = wf.shape[0]
    w3 = InteractionTensor3.zeros(n, c, cap)
    for a, e in itertools.product(range(n), repeat=2):
        for b, d, f, h in itertools.product(range(c), repeat=4):
            w3.data[a, b, a, d, e, f, e, h] = wf[d, f] * wg[h, b]
    return w3


def build_w3_polynl(w1, w2, w3m, n: int, cap: int = DEFAULT_CAP) -> InteractionTensor3:
    """W3[a,b,c,d,e,f,g,h] = [c == a] [g == e] (1/N) w1[h,d] w2[f,d] w3m[d,b]."""
    w1, w2, w3m = _weights_for(n, w1, w2, w3m)
    c = w1.shape[0]
    w3 = InteractionTensor3.zeros(n, c, cap)
    for a, e in itertools.product(range(n), repeat=2):
        for b, d, f, h in itertools.product(range(c), repeat=4):
            w3.data[a, b, a, d, e, f, e, h] = w1[h, d] * w2[f, d] * w3m[d, b] / n
    return w3


def nl_elementwise(wf, wg, x) -> np.ndarray:
    """y[a,b] = sum_{d,f,h,e} wf[d,f] wg[h,b] x[a,d] x[e,f] x[e,h]."""
    wf, wg = _weights_for(1, wf, wg)
    x = tc.feature_map(x, dtype=np.float64)
    n, c = x.shape
    if c != wf.shape[0]:
        raise ShapeError(f"input has {c} channels, weights have {wf.shape[0]}")
    y = np.zeros((n, c))
    for a in range(n):
        for b in range(c):
            acc = 0.0
            for d in range(c):
                for f in range(c):
                    for h in range(c):
                        for e in range(n):
                            acc += wf[d, f] * wg[h, b] * x[a, d] * x[e, f] * x[e, h]
            y[a, b] = acc
    return y


def polynl_elementwise(w1, w2, w3m, x) -> np.ndarray:
    """y[a,b] = sum_{d,f,h,e} (1/N) w1[h,d] w2[f,d] w3m[d,b] x[a,d] x[e,f] x[e,h]."""
    w1, w2, w3m = _weights_for(1, w1, w2, w3m)
    x = tc.feature_map(x, dtype=np.float64)
    n, c = x.shape
    if c != w1.shape[0]:
        raise ShapeError(f"input has {c} channels, weights have {w1.shape[0]}")
    y = np.zeros((n, c))
    for a in range(n):
        for b in range(c):
            acc = 0.0
            for d in range(c):
                for f in range(c):
                    for h in range(c):
                        for e in range(n):
                            acc += w1[h, d] * w2[f, d] * w3m[d, b] * x[a, d] * x[e, f] * x[e, h] / n
            y[a, b] = acc
    return y


def format_dump(w3: InteractionTensor3) -> str:
    """Flat text dump: header "N C", then the (N*C)**4 entries in row-major order."""
    lines = [f"{w3.n} {w3.c}"]
    lines.extend(repr(float(v)) for v in w3.data.ravel())
    return "\n".join(lines) + "\n"


def parse_dump(text: str, cap: int = DEFAULT_CAP) -> InteractionTensor3:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ShapeError("empty tensor dump")
    n, c = (int(t) for t in lines[0].split())
    values = np.array([float(v) for v in lines[1:]])
    if values.size != (n * c) ** 4:
        raise ShapeError(f"dump holds {values.size} values, expected {(n * c) ** 4}")
    return InteractionTensor3(n, c, values.reshape((n, c) * 4), cap)
