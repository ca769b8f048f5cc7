"""Pixel context: attention restricted to class-homogeneous regions.

Pixels are grouped by their hard region label, each group is run through the
shared ``piam_forward``, and the results are scattered back into place. Pixels
in different regions never interact.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError
from .piam import NRA_EPS, PiamParams, piam_backward, piam_forward
from .tensor import as_float


def build_region_index(t, n):
    """Flat (row-major) pixel indices of every class 0..n-1, ascending."""
    t = np.asarray(t)
    if t.ndim != 2:
        raise DimensionError(f"partition map must be (H, W), got {t.shape}")
    flat = t.ravel().astype(np.int64)
    if flat.size and (flat.min() < 0 or flat.max() >= n):
        bad = flat[(flat < 0) | (flat >= n)][0]
        raise InputError(f"label {bad} outside [0, {n})")
    order = np.argsort(flat, kind="stable")
    bounds = np.searchsorted(flat[order], np.arange(n + 1))
    return [order[bounds[i]:bounds[i + 1]] for i in range(n)]


def region_sizes(idx):
    return [len(ix) for ix in idx]


def gather_regions(x, idx):
    x = as_float(x, "x")
    if x.ndim != 3:
        raise DimensionError(f"feature map must be (C, H, W), got {x.shape}")
    flat = x.reshape(x.shape[0], -1)
    total = sum(len(ix) for ix in idx)
    if total != flat.shape[1]:
        raise DimensionError(f"region index covers {total} pixels, map has {flat.shape[1]}")
    return [flat[:, ix] for ix in idx]


def scatter_regions(sets, idx, shape):
    out = np.empty((shape[0], shape[1] * shape[2]))
    for b, ix in zip(sets, idx):
        out[:, ix] = b
    return out.reshape(shape)


@dataclass
class PcmCache:
    shape: tuple
    idx: list
    caches: list     # per class, None for empty regions
    params: PiamParams


def pcm_forward(x, t, params, num_classes=None, eps=NRA_EPS):
    x = as_float(x, "x")
    if x.ndim != 3 or np.shape(t) != x.shape[1:]:
        raise DimensionError(f"x {x.shape} and partition {np.shape(t)} disagree")
    n = int(np.max(t)) + 1 if num_classes is None else num_classes
    idx = build_region_index(t, n)
    sets = gather_regions(x, idx)
    outs, caches = [], []
    for b in sets:
        if b.shape[1] == 0:
            outs.append(b)
            caches.append(None)
            continue
        y, cache = piam_forward(b, params, eps)
        outs.append(y)
        caches.append(cache)
    return scatter_regions(outs, idx, x.shape), PcmCache(x.shape, idx, caches, params)


def pcm_backward(cache, d_x_prime):
    """Returns ``(d_x, PiamParams of gradients summed over regions)``."""
    d = np.asarray(d_x_prime, dtype=np.float64)
    if d.shape != tuple(cache.shape):
        raise DimensionError(f"upstream gradient {d.shape} does not match cache {cache.shape}")
    d_sets = gather_regions(d, cache.idx)
    d_w_o = np.zeros_like(cache.params.w_o)
    d_w_p = np.zeros_like(cache.params.w_p)
    d_alpha = 0.0
    d_outs = []
    for g, c in zip(d_sets, cache.caches):
        if c is None:
            d_outs.append(g)
            continue
        d_b, gp = piam_backward(c, g)
        d_outs.append(d_b)
        d_w_o += gp.w_o
        d_w_p += gp.w_p
        d_alpha += gp.alpha
    d_x = scatter_regions(d_outs, cache.idx, cache.shape)
    return d_x, PiamParams(w_o=d_w_o, w_p=d_w_p, alpha=d_alpha)
