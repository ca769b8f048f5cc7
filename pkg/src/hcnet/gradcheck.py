"""Central-difference verification of analytic backward passes."""

from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .tensor import make_rng


@dataclass
class GradcheckReport:
    names: list
    errors: list        # per-input relative error, None when not checked
    tol: float
    eps: float

    @property
    def max_error(self):
        checked = [e for e in self.errors if e is not None]
        return max(checked) if checked else 0.0

    @property
    def passed(self):
        return self.max_error <= self.tol

    def summary(self):
        lines = []
        for name, err in zip(self.names, self.errors):
            if err is not None:
                lines.append(f"  {name:<24s} rel err {err:.3e}")
        verdict = "PASS" if self.passed else "FAIL"
        lines.append(f"  max {self.max_error:.3e} (tol {self.tol:g}) {verdict}")
        return "\n".join(lines)


def _finite(x, what):
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite values in {what}")


def relative_error(analytic, numeric, floor=1e-8):
    """Infinity-norm relative error between two gradient arrays."""
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    numeric = np.asarray(numeric, dtype=np.float64).ravel()
    if analytic.size == 0:
        return 0.0
    diff = np.max(np.abs(analytic - numeric))
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), floor)
    return float(diff / scale)


def gradcheck(forward, backward, inputs, eps=1e-5, tol=1e-4, *, names=None,
              wrt=None, cotangent="random", max_coords=None, seed=0):
    """Compare ``backward`` against central differences of ``forward``.

    ``forward(*inputs)`` returns ``(out, cache)`` and ``backward(cache, d_out)``
    returns one gradient per input (``None`` for inputs without one). The
    output is scalarized as ``sum(out * c)``; ``c`` is a fixed seeded Gaussian
    cotangent by default (``cotangent="ones"`` gives the plain element sum,
    which is blind to anything normalised along an axis, such as softmax).

    ``max_coords`` limits each input to a seeded random subset of coordinates.
    """
    rng = make_rng(seed)
    inputs = [np.array(x, dtype=np.float64) for x in inputs]
    for i, x in enumerate(inputs):
        _finite(x, f"input {i}")
    names = list(names) if names is not None else [f"input{i}" for i in range(len(inputs))]
    wrt = range(len(inputs)) if wrt is None else wrt

    out, cache = forward(*inputs)
    out = np.asarray(out, dtype=np.float64)
    _finite(out, "forward output")
    if cotangent == "ones":
        c = np.ones_like(out)
    elif cotangent == "random":
        c = rng.standard_normal(out.shape)
    else:
        c = np.asarray(cotangent, dtype=np.float64)
    grads = backward(cache, c)

    def scalar(args):
        y = np.asarray(forward(*args)[0], dtype=np.float64)
        _finite(y, "forward output")
        return float(np.sum(y * c))

    errors = [None] * len(inputs)
    for i in wrt:
        if grads[i] is None:
            continue
        g = np.asarray(grads[i], dtype=np.float64)
        _finite(g, f"analytic gradient {names[i]}")
        x = inputs[i]
        flat_idx = np.arange(x.size)
        if max_coords is not None and x.size > max_coords:
            flat_idx = np.sort(rng.choice(x.size, size=max_coords, replace=False))
        numeric = np.empty(flat_idx.size)
        for n, k in enumerate(flat_idx):
            args = list(inputs)
            xp = x.copy()
            xp.flat[k] += eps
            args[i] = xp
            fp = scalar(args)
            xm = x.copy()
            xm.flat[k] -= eps
            args[i] = xm
            fm = scalar(args)
            numeric[n] = (fp - fm) / (2 * eps)
        errors[i] = relative_error(g.ravel()[flat_idx], numeric)
    return GradcheckReport(names=names, errors=errors, tol=tol, eps=eps)
