"""
Attention over an unordered set
===============================

Run attention on a small set of feature vectors, look at the row-normalised
correlation matrix, and trigger the uniform fallback for a row whose
correlations cancel out.
"""

import numpy as np

from hcnet.piam import PiamParams, piam_forward
from hcnet.tensor import make_rng

rng = make_rng(0)
c, k = 8, 5
b = rng.standard_normal((c, k))
params = PiamParams.init(c, rng, alpha=0.5)

out, cache = piam_forward(b, params)
np.set_printoptions(precision=3, suppress=True)
print("attention rows (each sums to 1):")
print(cache.a)
print("row sums:", cache.a.sum(axis=1))

# Attention does not care about the order of the set: permuting the input
# columns permutes the output columns the same way.
perm = rng.permutation(k)
out_perm, _ = piam_forward(b[:, perm], params)
print("permutation equivariant:", np.allclose(out_perm, out[:, perm]))

# A zero feature vector projects to zero, so its correlation row sums to
# zero and the row falls back to uniform weights instead of dividing by zero.
b[:, 2] = 0.0
_, cache = piam_forward(b, params)
print("fallback rows:", np.flatnonzero(cache.fallback), "->", cache.a[2])

# With alpha = 0 the block is the identity, which is how it is initialised.
same, _ = piam_forward(b, PiamParams(params.w_o, params.w_p, 0.0))
print("alpha=0 is the identity:", np.array_equal(same, b))
