"""MAC and attention-memory accounting: dense self-attention vs hierarchical.

Convention: one multiply-accumulate counts 1. Softmax exponentials, NRA
divisions and pooling denominators are not counted. Attention memory is the
float32 storage of the materialised attention matrices.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InputError
from .pcm import pcm_forward
from .piam import PiamParams, piam_forward
from .rcm import rcm_forward
from .tensor import count_macs, make_rng, softmax_axis

BYTES_PER_ENTRY = 4


def _check_channels(c):
    if c <= 0 or c % 4:
        raise InputError(f"channels must be a positive multiple of 4, got {c}")


def piam_components(c, k):
    """Per-term MACs of attention over one set of k elements."""
    return {
        "projections": 2 * (c // 4) * c * k,
        "correlation": (c // 4) * k * k,
        "aggregation": c * k * k,
        "residual": c * k,
    }


def count_dense(h, w, c):
    """Self-attention over all H*W pixels."""
    _check_channels(c)
    k = h * w
    comp = piam_components(c, k)
    comp["pairwise"] = comp["correlation"] + comp["aggregation"]
    comp["total"] = sum(comp[t] for t in ("projections", "correlation", "aggregation", "residual"))
    comp["attn_bytes"] = BYTES_PER_ENTRY * k * k
    return comp


def count_hier(region_sizes, n, c, h, w):
    """Pixel-context cost over the given regions plus region-context cost.

    ``region_sizes`` may be real-valued (e.g. the ideal H*W/N split); they
    must sum to H*W.
    """
    _check_channels(c)
    sizes = list(region_sizes)
    if len(sizes) > n:
        raise InputError(f"{len(sizes)} region sizes for {n} classes")
    if any(s < 0 for s in sizes):
        raise InputError("region sizes must be nonnegative")
    hw = h * w
    if abs(sum(sizes) - hw) > 1e-9 * hw:
        raise InputError(f"region sizes sum to {sum(sizes)}, expected {hw}")
    c4 = c // 4
    sq = sum(k * k for k in sizes)
    pcm = {
        "projections": 2 * c4 * c * sum(sizes),
        "pairwise": (c4 + c) * sq,
        "residual": c * sum(sizes),
    }
    pcm["total"] = pcm["projections"] + pcm["pairwise"] + pcm["residual"]
    rcm = {
        "pool_unpool": 2 * hw * n * c,
        "projections": 2 * c4 * c * n,
        "pairwise": (c4 + c) * n * n,
        "residual": c * n,
    }
    rcm["total"] = sum(rcm.values())
    return {
        "pcm": pcm,
        "rcm": rcm,
        "total": pcm["total"] + rcm["total"],
        "attn_bytes": BYTES_PER_ENTRY * (sq + n * n),
    }


@dataclass
class CostReport:
    macs_dense: float
    macs_pcm: float
    macs_rcm: float
    macs_total: float
    bytes_attn_dense: float
    bytes_attn_hier: float
    ratio: float
    pairwise_dense: float
    pairwise_pcm: float
    pairwise_ratio: float
    memory_reduction: float

    def to_dict(self):
        return asdict(self)

    def table(self):
        rows = [
            ("dense self-attention MACs", self.macs_dense),
            ("pixel-context MACs", self.macs_pcm),
            ("region-context MACs", self.macs_rcm),
            ("hierarchical total MACs", self.macs_total),
            ("MAC ratio (hier / dense)", self.ratio),
            ("pairwise ratio (pcm / dense)", self.pairwise_ratio),
            ("dense attention bytes", self.bytes_attn_dense),
            ("hierarchical attention bytes", self.bytes_attn_hier),
            ("attention memory reduction", self.memory_reduction),
        ]
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{name:<{width}}  {value:>20,.6g}" for name, value in rows)


def cost_report(h, w, c, region_sizes, n):
    dense = count_dense(h, w, c)
    hier = count_hier(region_sizes, n, c, h, w)
    return CostReport(
        macs_dense=dense["total"],
        macs_pcm=hier["pcm"]["total"],
        macs_rcm=hier["rcm"]["total"],
        macs_total=hier["total"],
        bytes_attn_dense=dense["attn_bytes"],
        bytes_attn_hier=hier["attn_bytes"],
        ratio=hier["total"] / dense["total"],
        pairwise_dense=dense["pairwise"],
        pairwise_pcm=hier["pcm"]["pairwise"],
        pairwise_ratio=hier["pcm"]["pairwise"] / dense["pairwise"],
        memory_reduction=1.0 - hier["attn_bytes"] / dense["attn_bytes"],
    )


def balanced_partition(hw, n):
    """Integer sizes differing by at most one; the first ``hw % n`` get the extra pixel."""
    base, extra = divmod(hw, n)
    return [base + 1 if i < extra else base for i in range(n)]


def random_partition(hw, n, rng):
    """Uniformly random composition of ``hw`` into ``n`` nonnegative parts."""
    cuts = np.sort(rng.integers(0, hw + 1, size=n - 1))
    edges = np.concatenate([[0], cuts, [hw]])
    return [int(s) for s in np.diff(edges)]


def partition_map_from_sizes(sizes, h, w, rng):
    """A random (H, W) label map whose class i covers exactly ``sizes[i]`` pixels."""
    labels = np.repeat(np.arange(len(sizes)), sizes)
    if labels.size != h * w:
        raise InputError(f"sizes sum to {labels.size}, map has {h * w} pixels")
    return rng.permutation(labels).reshape(h, w).astype(np.uint16)


@dataclass
class VerifyReport:
    counted: dict
    analytic: dict

    @property
    def ok(self):
        return all(self.counted[k] == self.analytic[k] for k in self.analytic)

    def diff(self):
        return {k: self.counted[k] - self.analytic[k] for k in self.analytic
                if self.counted[k] != self.analytic[k]}


def verify_counts(h, w, c, region_sizes, rng):
    """Run the real kernels under a MAC counter and compare with the formulas."""
    sizes = [int(s) for s in region_sizes]
    n = len(sizes)
    x = rng.standard_normal((c, h, w))
    t = partition_map_from_sizes(sizes, h, w, rng)
    q = softmax_axis(rng.standard_normal((n, h, w)), axis=0)
    params = PiamParams.init(c, rng, alpha=0.5)

    with count_macs() as dense:
        piam_forward(x.reshape(c, -1), params)
    with count_macs() as pcm:
        x1, _ = pcm_forward(x, t, params, num_classes=n)
    with count_macs() as rcm:
        rcm_forward(x1, q, params)

    d = count_dense(h, w, c)
    hier = count_hier(sizes, n, c, h, w)
    return VerifyReport(
        counted={"dense": dense.total, "pcm": pcm.total, "rcm": rcm.total},
        analytic={"dense": d["total"], "pcm": hier["pcm"]["total"], "rcm": hier["rcm"]["total"]},
    )
