"""Dense float64 kernels: matmul, softmax, dilated convolution, MAC counting.

Arrays are plain ``numpy.ndarray`` values. Every kernel accepts float32 or
float64 input and accumulates (and returns) float64. Reductions run in a fixed
order so repeated calls on the same machine are bit-identical.
"""

from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, InputError

FLOAT_DTYPES = (np.float32, np.float64)


def make_rng(seed):
    """PCG64 generator; the stream for a given seed is platform independent."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def as_float(x, name="x"):
    x = np.asarray(x)
    if x.dtype not in FLOAT_DTYPES:
        raise InputError(f"{name}: expected float32/float64, got {x.dtype}")
    return x.astype(np.float64, copy=False)


# -- multiply-accumulate accounting -------------------------------------------

@dataclass
class MacCount:
    total: int = 0
    by_tag: dict = field(default_factory=dict)

    def add(self, n, tag=None):
        self.total += int(n)
        if tag is not None:
            self.by_tag[tag] = self.by_tag.get(tag, 0) + int(n)


_active_counter: ContextVar = ContextVar("hcnet_mac_counter", default=None)


@contextmanager
def count_macs():
    """Count the MACs performed by ``matmul`` and ``axpy`` inside the block.

    >>> with count_macs() as macs:
    ...     _ = matmul(np.ones((2, 3)), np.ones((3, 4)))
    >>> macs.total
    24
    """
    box = MacCount()
    token = _active_counter.set(box)
    try:
        yield box
    finally:
        _active_counter.reset(token)


def _record(n, tag):
    box = _active_counter.get()
    if box is not None:
        box.add(n, tag)


# -- kernels ------------------------------------------------------------------

def matmul(a, b, tag=None):
    """``a @ b`` for 2-D operands, accumulated in float64."""
    a = as_float(a, "a")
    b = as_float(b, "b")
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    _record(a.shape[0] * a.shape[1] * b.shape[1], tag)
    return a @ b


def axpy(alpha, x, y, tag=None):
    """``alpha * x + y``; one MAC per element."""
    x = as_float(x, "x")
    y = as_float(y, "y")
    if x.shape != y.shape:
        raise DimensionError(f"axpy shapes differ: {x.shape} vs {y.shape}")
    _record(x.size, tag)
    return alpha * x + y


def softmax_axis(x, axis=0):
    x = as_float(x)
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_backward(y, dy, axis=0):
    """Vector-Jacobian product of softmax given its output ``y``."""
    return y * (dy - (dy * y).sum(axis=axis, keepdims=True))


def _check_conv(x, kernel, dilation):
    if x.ndim != 3 or kernel.ndim != 4:
        raise DimensionError(f"conv expects x (Cin,H,W) and kernel (Cout,Cin,k,k), got {x.shape}, {kernel.shape}")
    cout, cin, kh, kw = kernel.shape
    if cin != x.shape[0]:
        raise DimensionError(f"kernel expects {cin} input channels, x has {x.shape[0]}")
    if kh != kw:
        raise ConfigError(f"square kernels only, got {kh}x{kw}")
    if kh % 2 == 0:
        raise ConfigError(f"kernel size must be odd, got {kh}")
    if int(dilation) < 1:
        raise ConfigError(f"dilation must be a positive int, got {dilation}")
    return kh, int(dilation)


def _im2col(x, k, d):
    cin, h, w = x.shape
    pad = d * (k - 1) // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    cols = np.empty((cin, k, k, h, w))
    for i in range(k):
        for j in range(k):
            cols[:, i, j] = xp[:, i * d:i * d + h, j * d:j * d + w]
    return cols.reshape(cin * k * k, h * w)


def conv2d_dilated(x, kernel, dilation=1):
    """Cross-correlation with dilated taps and zero "same" padding.

    x is (Cin, H, W), kernel is (Cout, Cin, k, k) with k odd; the output is
    (Cout, H, W).
    """
    x = as_float(x, "x")
    kernel = as_float(kernel, "kernel")
    k, d = _check_conv(x, kernel, dilation)
    _, h, w = x.shape
    out = kernel.reshape(kernel.shape[0], -1) @ _im2col(x, k, d)
    return out.reshape(kernel.shape[0], h, w)


def conv2d_dilated_backward(x, kernel, dilation, d_out):
    """Gradients of ``conv2d_dilated`` wrt x and kernel."""
    x = as_float(x, "x")
    kernel = as_float(kernel, "kernel")
    k, d = _check_conv(x, kernel, dilation)
    cout, cin = kernel.shape[:2]
    _, h, w = x.shape
    g = np.asarray(d_out, dtype=np.float64).reshape(cout, h * w)

    d_kernel = (g @ _im2col(x, k, d).T).reshape(kernel.shape)
    dcols = (kernel.reshape(cout, -1).T @ g).reshape(cin, k, k, h, w)
    pad = d * (k - 1) // 2
    dxp = np.zeros((cin, h + 2 * pad, w + 2 * pad))
    for i in range(k):
        for j in range(k):
            dxp[:, i * d:i * d + h, j * d:j * d + w] += dcols[:, i, j]
    return dxp[:, pad:pad + h, pad:pad + w], d_kernel
