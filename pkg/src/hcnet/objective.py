"""Median-frequency-balanced cross-entropy and the two-term training loss."""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError
from .tensor import as_float

EPS_LOG = 1e-12
DEFAULT_LAMBDA = 0.8


@dataclass
class ClassWeights:
    w: np.ndarray
    n: np.ndarray

    @property
    def frequencies(self):
        return self.n / self.n.sum()


def median_frequency_weights(counts):
    """w_i = f_median / f_i over classes that occur; absent classes get 0.

    The median of an even number of frequencies is the mean of the middle two.
    Computed from counts directly (the normaliser cancels), which keeps the
    weights exactly invariant to scaling all counts.
    """
    n = np.asarray(counts, dtype=np.float64)
    if n.ndim != 1 or np.any(n < 0):
        raise InputError("counts must be a 1-D array of nonnegative values")
    present = n > 0
    if not present.any():
        raise InputError("at least one class count must be positive")
    med = np.median(n[present])
    w = np.zeros_like(n)
    w[present] = med / n[present]
    return ClassWeights(w=w, n=n)


def class_counts(labels, num_classes, ignore_label=None):
    y = np.asarray(labels).ravel().astype(np.int64)
    if ignore_label is not None:
        y = y[y != ignore_label]
    if y.size and (y.min() < 0 or y.max() >= num_classes):
        raise InputError(f"labels outside [0, {num_classes})")
    return np.bincount(y, minlength=num_classes)


def _targets(shape, y, w, ignore_label):
    y = np.asarray(y)
    if y.shape != shape[1:]:
        raise DimensionError(f"labels {y.shape} do not match predictions {shape}")
    w = np.asarray(w.w if isinstance(w, ClassWeights) else w, dtype=np.float64)
    if w.shape != (shape[0],):
        raise DimensionError(f"need {shape[0]} class weights, got {w.shape}")
    yf = y.ravel().astype(np.int64)
    valid = np.ones(yf.size, bool) if ignore_label is None else yf != ignore_label
    if np.any((yf[valid] < 0) | (yf[valid] >= shape[0])):
        raise InputError(f"labels outside [0, {shape[0]})")
    pix = np.flatnonzero(valid)
    cls = yf[pix]
    return pix, cls, w[cls]


def weighted_ce(p, y, w, eps_log=EPS_LOG, ignore_label=None):
    """Mean over pixels of ``-w[y] * log(max(p[y], eps_log))``.

    The floor only keeps the log finite; probabilities at or above eps_log
    enter unchanged, so e.g. p = 0.5 gives exactly ln 2. p is (N, H, W)
    probabilities and y the (H, W) ground truth. Returns ``(loss, d_p)``.
    """
    p = as_float(p, "p")
    n = p.shape[0]
    pix, cls, wy = _targets(p.shape, y, w, ignore_label)
    pf = p.reshape(n, -1)
    d = np.zeros_like(pf)
    if pix.size == 0:
        return 0.0, d.reshape(p.shape)
    raw = pf[cls, pix]
    py = np.maximum(raw, eps_log)
    loss = float(np.sum(-wy * np.log(py)) / pix.size)
    # clamped entries are constant in p
    d[cls, pix] = np.where(raw >= eps_log, -wy / py / pix.size, 0.0)
    return loss, d.reshape(p.shape)


def weighted_ce_logits(logits, y, w, ignore_label=None):
    """Fused softmax + weighted cross-entropy on (N, H, W) logits.

    Uses an exact log-softmax, so no epsilon enters the loss or its gradient.
    Returns ``(loss, d_logits)``.
    """
    z = as_float(logits, "logits")
    n = z.shape[0]
    pix, cls, wy = _targets(z.shape, y, w, ignore_label)
    zf = z.reshape(n, -1)
    d = np.zeros_like(zf)
    if pix.size == 0:
        return 0.0, d.reshape(z.shape)
    zmax = zf.max(axis=0)
    lse = zmax + np.log(np.exp(zf - zmax).sum(axis=0))
    loss = float(np.sum(-wy * (zf[cls, pix] - lse[pix])) / pix.size)
    soft = np.exp(zf[:, pix] - lse[pix])
    soft[cls, np.arange(pix.size)] -= 1.0
    d[:, pix] = soft * (wy / pix.size)
    return loss, d.reshape(z.shape)


def total_loss(l_context, l_prior, lam=DEFAULT_LAMBDA):
    if lam < 0:
        raise InputError(f"lambda must be >= 0, got {lam}")
    return l_context + lam * l_prior
