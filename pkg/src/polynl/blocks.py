"""Forward passes of the non-local block family.

All blocks map an N x C feature map to an N x C output. The "core" forwards
are purely cubic in the input (no residual, no normalization); the residual
wrappers add the skip connection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor_core as tc
from .errors import NumericError, ShapeError


def _uniform(rng: np.random.Generator, shape, c: int, dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(c)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


@dataclass(frozen=True)
class NlParams:
    """Weights of the original non-local block.

    ``wf`` is the pre-multiplied pairwise embedding W_theta @ W_phi.T; use
    :meth:`from_embeddings` to build it from the two factors.
    """

    wf: np.ndarray
    wg: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "wf", tc.square_weights(self.wf))
        object.__setattr__(self, "wg", tc.square_weights(self.wg, dtype=self.wf.dtype))
        if self.wf.shape != self.wg.shape:
            raise ShapeError(f"wf {self.wf.shape} and wg {self.wg.shape} differ")

    @property
    def channels(self) -> int:
        return self.wf.shape[0]

    @classmethod
    def from_embeddings(cls, w_theta, w_phi, wg) -> "NlParams":
        w_theta = tc.square_weights(w_theta)
        w_phi = tc.square_weights(w_phi)
        return cls(tc.matmul(w_theta, tc.transpose(w_phi)), wg)

    @classmethod
    def init(cls, c: int, rng: np.random.Generator, dtype=np.float64) -> "NlParams":
        return cls(_uniform(rng, (c, c), c, dtype), _uniform(rng, (c, c), c, dtype))


@dataclass(frozen=True)
class PolyNlParams:
    w1: np.ndarray
    w2: np.ndarray
    w3: np.ndarray
    alpha: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        w1 = tc.square_weights(self.w1)
        object.__setattr__(self, "w1", w1)
        for name in ("w2", "w3"):
            w = tc.square_weights(getattr(self, name), dtype=w1.dtype)
            if w.shape != w1.shape:
                raise ShapeError(f"{name} {w.shape} does not match w1 {w1.shape}")
            object.__setattr__(self, name, w)
        for name in ("alpha", "beta"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise NumericError(f"{name} must be finite")
            object.__setattr__(self, name, v)

    @property
    def channels(self) -> int:
        return self.w1.shape[0]

    @classmethod
    def init(cls, c: int, rng: np.random.Generator, dtype=np.float64) -> "PolyNlParams":
        """Seeded uniform weights; alpha=1, beta=0 so the residual block starts as identity."""
        w1, w2, w3 = (_uniform(rng, (c, c), c, dtype) for _ in range(3))
        return cls(w1, w2, w3, alpha=1.0, beta=0.0)


@dataclass(frozen=True)
class LatentGnnParams:
    """Latent-space variant: C x d encoder/decoder projections and d x d mixing."""

    w_enc: np.ndarray
    g: np.ndarray
    w_dec: np.ndarray

    def __post_init__(self):
        w_enc = tc.feature_map(self.w_enc)
        g = tc.square_weights(self.g, dtype=w_enc.dtype)
        w_dec = tc.feature_map(self.w_dec, dtype=w_enc.dtype)
        if w_dec.shape != w_enc.shape or g.shape[0] != w_enc.shape[1]:
            raise ShapeError(
                f"inconsistent latent shapes: w_enc {w_enc.shape}, g {g.shape}, w_dec {w_dec.shape}"
            )
        object.__setattr__(self, "w_enc", w_enc)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "w_dec", w_dec)

    @property
    def channels(self) -> int:
        return self.w_enc.shape[0]

    @property
    def d(self) -> int:
        return self.w_enc.shape[1]

    @classmethod
    def init(cls, c: int, d: int, rng: np.random.Generator, dtype=np.float64) -> "LatentGnnParams":
        return cls(
            _uniform(rng, (c, d), c, dtype),
            _uniform(rng, (d, d), d, dtype),
            _uniform(rng, (c, d), c, dtype),
        )


def _input(x, channels: int) -> np.ndarray:
    x = tc.feature_map(x)
    if x.shape[1] != channels:
        raise ShapeError(f"input has {x.shape[1]} channels, block expects {channels}")
    return x


def nl_forward(p: NlParams, x) -> np.ndarray:
    """((X Wf) X^T) X Wg, evaluated left to right through the N x N similarity matrix."""
    x = _input(x, p.channels)
    sim = tc.matmul(tc.matmul(x, p.wf), tc.transpose(x))
    y = tc.matmul(tc.matmul(sim, x), p.wg)
    return tc.check_finite(y, "non-local output")


def efficient_nl_forward(p: NlParams, x) -> np.ndarray:
    """Same product as :func:`nl_forward` reassociated right to left; no N x N buffer."""
    x = _input(x, p.channels)
    ctx = tc.matmul(tc.transpose(x), tc.matmul(x, p.wg))  # C x C
    y = tc.matmul(x, tc.matmul(p.wf, ctx))
    return tc.check_finite(y, "efficient non-local output")


def polynl_core_forward(p: PolyNlParams, x) -> np.ndarray:
    """(pool_expand(X W1 * X W2) * X) W3 with element-wise products."""
    x = _input(x, p.channels)
    pooled = tc.pool_expand(tc.hadamard(tc.matmul(x, p.w1), tc.matmul(x, p.w2)))
    y = tc.matmul(tc.hadamard(pooled, x), p.w3)
    return tc.check_finite(y, "Poly-NL output")


def latentgnn_forward(p: LatentGnnParams, x) -> np.ndarray:
    x = _input(x, p.channels)
    enc = tc.matmul(x, p.w_enc)  # N x d
    latent = tc.matmul(tc.transpose(enc), x)  # d x C
    mixed = tc.matmul(p.g, latent)  # d x C
    y = tc.matmul(tc.matmul(x, p.w_dec), mixed)
    return tc.check_finite(y, "Latent-GNN output")


def conv1x1_forward(w, x) -> np.ndarray:
    """Plain channel mixing X W, the attention-free baseline."""
    w = tc.square_weights(w)
    x = _input(x, w.shape[0])
    return tc.check_finite(tc.matmul(x, w), "conv output")


def residual_nl(p: NlParams, x) -> np.ndarray:
    x = _input(x, p.channels)
    return tc.check_finite(tc.add(nl_forward(p, x), x))


def residual_polynl(p: PolyNlParams, x) -> np.ndarray:
    x = _input(x, p.channels)
    y = polynl_core_forward(p, x)
    return tc.check_finite(tc.add(tc.scale(p.alpha, x), tc.scale(p.beta, y)))
