"""Multi-scale guided pre-segmentation (the prior stream).

Three parallel 3x3 convolutions with dilation 1, 3 and 5 are summed, a 1x1
head maps the sum to N class logits, and a channel softmax yields the
affiliation probabilities Q (N, H, W). ``partition`` turns Q into the hard
region map T.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .tensor import (as_float, conv2d_dilated, conv2d_dilated_backward,
                     softmax_axis, softmax_backward)

DILATIONS = (1, 3, 5)
BRANCH_CHANNELS = 64


@dataclass
class PresegParams:
    k1: np.ndarray
    k3: np.ndarray
    k5: np.ndarray
    head: np.ndarray    # (N, branch_channels, 1, 1)

    @property
    def kernels(self):
        return (self.k1, self.k3, self.k5)

    @property
    def num_classes(self):
        return self.head.shape[0]

    @classmethod
    def init(cls, in_channels, num_classes, rng, branch_channels=BRANCH_CHANNELS):
        ks = [rng.standard_normal((branch_channels, in_channels, 3, 3)) / np.sqrt(9 * in_channels)
              for _ in DILATIONS]
        head = rng.standard_normal((num_classes, branch_channels, 1, 1)) / np.sqrt(branch_channels)
        return cls(*ks, head=head)

    @classmethod
    def zeros_like(cls, other):
        return cls(*(np.zeros_like(k) for k in other.kernels), head=np.zeros_like(other.head))


@dataclass
class PresegCache:
    f: np.ndarray
    z: np.ndarray        # summed branch activations (B, H, W)
    logits: np.ndarray
    q: np.ndarray
    params: PresegParams


def preseg_logits(f, params):
    f = as_float(f, "f")
    if f.ndim != 3:
        raise DimensionError(f"feature map must be (C, H, W), got {f.shape}")
    z = sum(conv2d_dilated(f, k, d) for k, d in zip(params.kernels, DILATIONS))
    bc, h, w = z.shape
    if params.head.shape[1:] != (bc, 1, 1):
        raise DimensionError(f"head must be (N, {bc}, 1, 1), got {params.head.shape}")
    logits = params.head[:, :, 0, 0] @ z.reshape(bc, h * w)
    return logits.reshape(-1, h, w), z


def preseg_forward(f, params):
    """Returns ``(q, cache)`` with q of shape (N, H, W)."""
    logits, z = preseg_logits(f, params)
    q = softmax_axis(logits, axis=0)
    return q, PresegCache(f=as_float(f), z=z, logits=logits, q=q, params=params)


def preseg_backward(cache, d_q=None, d_logits=None):
    """Backpropagate a gradient on Q and/or directly on the logits.

    Returns ``(d_f, PresegParams of gradients)``.
    """
    params = cache.params
    g = np.zeros_like(cache.q)
    if d_q is not None:
        g += softmax_backward(cache.q, np.asarray(d_q, dtype=np.float64), axis=0)
    if d_logits is not None:
        g += np.asarray(d_logits, dtype=np.float64)
    n, h, w = g.shape
    bc = cache.z.shape[0]
    g2 = g.reshape(n, h * w)
    d_head = (g2 @ cache.z.reshape(bc, h * w).T)[:, :, None, None]
    d_z = (params.head[:, :, 0, 0].T @ g2).reshape(bc, h, w)

    d_f = np.zeros_like(cache.f)
    d_ks = []
    for k, d in zip(params.kernels, DILATIONS):
        dx, dk = conv2d_dilated_backward(cache.f, k, d, d_z)
        d_f += dx
        d_ks.append(dk)
    return d_f, PresegParams(*d_ks, head=d_head)


def partition(q):
    """Per-pixel argmax over classes as uint16; ties go to the lowest index."""
    q = np.asarray(q)
    if q.ndim != 3:
        raise DimensionError(f"affiliation map must be (N, H, W), got {q.shape}")
    return np.argmax(q, axis=0).astype(np.uint16)
