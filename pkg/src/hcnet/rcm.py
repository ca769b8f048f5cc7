"""Region context: soft region pooling, region-level attention, unpooling.

Pooling takes the Q-weighted mean of the pixel features for each region,
giving R (C, N). The N region vectors go through ``piam_forward`` and the
result is spread back to pixels as ``R' @ Q``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .piam import NRA_EPS, PiamParams, piam_backward, piam_forward
from .tensor import as_float, matmul

POOL_EPS = 1e-8


def _flat(x, q):
    x = as_float(x, "x")
    q = as_float(q, "q")
    if x.ndim != 3 or q.ndim != 3 or x.shape[1:] != q.shape[1:]:
        raise DimensionError(f"feature map {x.shape} and affiliation map {q.shape} disagree")
    return x.reshape(x.shape[0], -1), q.reshape(q.shape[0], -1)


def region_pool(x, q, eps=POOL_EPS):
    """R[:, j] = sum_k X[:, k] Q[j, k] / (sum_k Q[j, k] + eps)."""
    xf, qf = _flat(x, q)
    return matmul(xf, qf.T, tag="rcm.pool") / (qf.sum(axis=1) + eps)


def region_unpool(r, q):
    """X''[:, y, x] = R @ Q[:, y, x]."""
    r = as_float(r, "r")
    q = as_float(q, "q")
    if q.ndim != 3 or r.ndim != 2 or r.shape[1] != q.shape[0]:
        raise DimensionError(f"region features {r.shape} and affiliation map {q.shape} disagree")
    n, h, w = q.shape
    return matmul(r, q.reshape(n, h * w), tag="rcm.unpool").reshape(r.shape[0], h, w)


@dataclass
class RcmCache:
    xf: np.ndarray
    qf: np.ndarray
    denom: np.ndarray
    r: np.ndarray
    r_prime: np.ndarray
    piam: object
    shape: tuple
    detach_affiliation: bool


def rcm_forward(x, q, params, eps=POOL_EPS, nra_eps=NRA_EPS, detach_affiliation=False):
    xf, qf = _flat(x, q)
    denom = qf.sum(axis=1) + eps
    r = matmul(xf, qf.T, tag="rcm.pool") / denom
    r_prime, pc = piam_forward(r, params, nra_eps)
    out = matmul(r_prime, qf, tag="rcm.unpool")
    cache = RcmCache(xf=xf, qf=qf, denom=denom, r=r, r_prime=r_prime, piam=pc,
                     shape=np.shape(x), detach_affiliation=detach_affiliation)
    return out.reshape(np.shape(x)), cache


def rcm_backward(cache, d_x2):
    """Returns ``(d_x, d_q, PiamParams of gradients)``.

    ``d_q`` is all zeros when the cache was built with ``detach_affiliation``.
    """
    g = np.asarray(d_x2, dtype=np.float64)
    if g.shape != tuple(cache.shape):
        raise DimensionError(f"upstream gradient {g.shape} does not match cache {cache.shape}")
    c, h, w = cache.shape
    g = g.reshape(c, h * w)

    d_r_prime = g @ cache.qf.T
    d_qf = cache.r_prime.T @ g
    d_r, d_params = piam_backward(cache.piam, d_r_prime)

    d_m = d_r / cache.denom
    d_xf = d_m @ cache.qf
    # R = M / denom, denom_j = sum_k Q[j, k] + eps
    d_denom = -np.sum(d_r * cache.r, axis=0) / cache.denom
    d_qf = d_qf + d_m.T @ cache.xf + d_denom[:, None]

    n = cache.qf.shape[0]
    d_q = np.zeros((n, h, w)) if cache.detach_affiliation else d_qf.reshape(n, h, w)
    return d_xf.reshape(c, h, w), d_q, d_params
