"""Position-independent attention over an unordered feature set.

A feature set is a (C, K) array: K elements with C channels each. Two
bias-free linear projections produce O and P of shape (C/4, K); their
correlation ``O.T @ P`` is row-normalised (NRA) into weights A, and every
element is replaced by ``alpha * (B @ A.T) + B``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .tensor import as_float, axpy, matmul

NRA_EPS = 1e-8


@dataclass
class PiamParams:
    w_o: np.ndarray
    w_p: np.ndarray
    alpha: float = 0.0

    @property
    def channels(self):
        return self.w_o.shape[1]

    @classmethod
    def init(cls, channels, rng, alpha=0.0):
        if channels % 4:
            raise ConfigError(f"channels must be divisible by 4, got {channels}")
        scale = 1.0 / np.sqrt(channels)
        shape = (channels // 4, channels)
        return cls(w_o=rng.standard_normal(shape) * scale,
                   w_p=rng.standard_normal(shape) * scale,
                   alpha=float(alpha))


@dataclass
class PiamCache:
    b: np.ndarray
    o: np.ndarray
    p: np.ndarray
    rowsum: np.ndarray
    fallback: np.ndarray
    a: np.ndarray
    u: np.ndarray
    params: PiamParams


def correlate(o, p):
    """Pairwise correlation ``A[i, j] = O[:, i] . P[:, j]``."""
    o = as_float(o, "o")
    p = as_float(p, "p")
    if o.shape != p.shape:
        raise DimensionError(f"O and P shapes differ: {o.shape} vs {p.shape}")
    return matmul(o.T, p, tag="piam.corr")


def _nra(a, eps):
    rowsum = a.sum(axis=1)
    fallback = np.abs(rowsum) < eps
    safe = np.where(fallback, 1.0, rowsum)
    out = a / safe[:, None]
    out[fallback] = 1.0 / a.shape[1]
    return out, rowsum, fallback


def nra_normalize(a, eps=NRA_EPS):
    """Divide each row by its sum.

    Rows whose sum has magnitude below ``eps`` become the uniform row 1/K.
    """
    a = as_float(a, "a")
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got {a.shape}")
    return _nra(a, eps)[0]


def _check(b, params):
    b = as_float(b, "b")
    if b.ndim != 2:
        raise DimensionError(f"feature set must be (C, K), got {b.shape}")
    c = b.shape[0]
    if c % 4:
        raise ConfigError(f"channels must be divisible by 4, got {c}")
    expected = (c // 4, c)
    if params.w_o.shape != expected or params.w_p.shape != expected:
        raise DimensionError(
            f"projections must be {expected}, got {params.w_o.shape} and {params.w_p.shape}")
    return b


def piam_forward(b, params, eps=NRA_EPS):
    b = _check(b, params)
    o = matmul(params.w_o, b, tag="piam.proj")
    p = matmul(params.w_p, b, tag="piam.proj")
    a, rowsum, fallback = _nra(correlate(o, p), eps)
    u = matmul(b, a.T, tag="piam.agg")
    out = axpy(params.alpha, u, b, tag="piam.residual")
    return out, PiamCache(b=b, o=o, p=p, rowsum=rowsum, fallback=fallback, a=a, u=u, params=params)


def piam_backward(cache, d_out):
    """Returns ``(d_b, PiamParams of gradients)``."""
    d_out = np.asarray(d_out, dtype=np.float64)
    if d_out.shape != cache.b.shape:
        raise DimensionError(f"upstream gradient {d_out.shape} does not match cache {cache.b.shape}")
    params = cache.params
    d_alpha = float(np.sum(d_out * cache.u))
    d_u = params.alpha * d_out

    d_b = d_out + d_u @ cache.a
    d_a = d_u.T @ cache.b
    # quotient rule per row; fallback rows are constant in A
    d_s = (d_a - np.sum(d_a * cache.a, axis=1, keepdims=True)) / np.where(
        cache.fallback, 1.0, cache.rowsum)[:, None]
    d_s[cache.fallback] = 0.0

    d_o = cache.p @ d_s.T
    d_p = cache.o @ d_s
    d_b += params.w_o.T @ d_o + params.w_p.T @ d_p
    grads = PiamParams(w_o=d_o @ cache.b.T, w_p=d_p @ cache.b.T, alpha=d_alpha)
    return d_b, grads


def piam_macs(c, k):
    """MACs counted for one ``piam_forward`` on a (c, k) set."""
    return 2 * (c // 4) * c * k + (c // 4) * k * k + c * k * k + c * k
