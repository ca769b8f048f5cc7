"""
Pixel context and region context
================================

Split a feature map into homogeneous regions, attend within each region,
then summarise each region as one vector, attend across regions and
scatter the result back to pixels.
"""

import numpy as np

from hcnet.pcm import build_region_index, pcm_forward, region_sizes
from hcnet.piam import PiamParams, piam_forward
from hcnet.rcm import rcm_forward, region_pool
from hcnet.tensor import make_rng, softmax_axis

rng = make_rng(1)
c, h, w, n = 8, 6, 6, 3
x = rng.standard_normal((c, h, w))
t = rng.integers(0, n, (h, w)).astype(np.uint16)
print("partition map:")
print(t)
print("region sizes:", region_sizes(build_region_index(t, n)))

params = PiamParams.init(c, rng, alpha=0.7)
x1, _ = pcm_forward(x, t, params, num_classes=n)

# Pixels only see other pixels of their own region: nudging one pixel of
# region 0 leaves regions 1 and 2 untouched.
x_moved = x.copy()
y0, x0 = np.argwhere(t == 0)[0]
x_moved[:, y0, x0] += 5.0
moved, _ = pcm_forward(x_moved, t, params, num_classes=n)
print("other regions unchanged:", np.array_equal(moved[:, t != 0], x1[:, t != 0]))

# One region covering everything is ordinary dense attention.
whole, _ = pcm_forward(x, np.zeros((h, w), np.uint16), params)
dense, _ = piam_forward(x.reshape(c, -1), params)
print("single region == dense:", np.allclose(whole, dense.reshape(x.shape)))

# Region context works with soft affiliations: each region vector is a
# weighted mean of the pixels.
q = softmax_axis(3.0 * rng.standard_normal((n, h, w)), axis=0)
r = region_pool(x1, q)
print("region vectors:", r.shape)
x2, _ = rcm_forward(x1, q, PiamParams.init(c, rng, alpha=0.7))
fused = x1 + x2
print("fused feature:", fused.shape, "mean |x''| =", round(float(np.abs(x2).mean()), 4))
