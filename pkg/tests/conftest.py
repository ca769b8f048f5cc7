import numpy as np
import pytest

from hcnet.tensor import make_rng


@pytest.fixture
def rng():
    return make_rng(1234)


def conv_oracle(x, kernel, dilation):
    """Scalar-loop dilated cross-correlation with zero padding."""
    cout, cin, k, _ = kernel.shape
    _, h, w = x.shape
    half = dilation * (k - 1) // 2
    out = np.zeros((cout, h, w))
    for o in range(cout):
        for y in range(h):
            for xx in range(w):
                acc = 0.0
                for c in range(cin):
                    for i in range(k):
                        for j in range(k):
                            yy = y - half + i * dilation
                            xj = xx - half + j * dilation
                            if 0 <= yy < h and 0 <= xj < w:
                                acc += kernel[o, c, i, j] * x[c, yy, xj]
                out[o, y, xx] = acc
    return out


def piam_oracle(b, w_o, w_p, alpha, eps=1e-8):
    """Scalar-loop attention update on a (C, K) feature set."""
    c, k = b.shape
    c4 = w_o.shape[0]
    o = np.zeros((c4, k))
    p = np.zeros((c4, k))
    for r in range(c4):
        for e in range(k):
            for ch in range(c):
                o[r, e] += w_o[r, ch] * b[ch, e]
                p[r, e] += w_p[r, ch] * b[ch, e]
    a = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            for r in range(c4):
                a[i, j] += o[r, i] * p[r, j]
    for i in range(k):
        s = sum(a[i, j] for j in range(k))
        for j in range(k):
            a[i, j] = 1.0 / k if abs(s) < eps else a[i, j] / s
    out = np.zeros((c, k))
    for ch in range(c):
        for i in range(k):
            u = sum(b[ch, j] * a[i, j] for j in range(k))
            out[ch, i] = alpha * u + b[ch, i]
    return out


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
