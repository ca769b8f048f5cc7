"""
How much does partitioning save?
================================

Count multiply-accumulates and attention-matrix memory for dense
self-attention and for the hierarchical path, then confirm the formulas by
running the real kernels under an instrumented counter.
"""

from hcnet.cost import balanced_partition, cost_report, random_partition, verify_counts
from hcnet.tensor import make_rng

h, w, c, n = 64, 128, 512, 19
print(f"feature map {h}x{w}, {c} channels, {n} regions (ideal equal split)")
print(cost_report(h, w, c, [h * w / n] * n, n).table())
print()

print("same, with an uneven random split:")
print(cost_report(h, w, c, random_partition(h * w, n, make_rng(0)), n).table())
print()

# The formulas against actual kernel runs on a small map.
rng = make_rng(2)
for sizes in (balanced_partition(16, 4), random_partition(16, 4, rng), [10, 0, 6, 0]):
    v = verify_counts(4, 4, 8, sizes, rng)
    print(f"sizes {sizes}: counted {v.counted} analytic {v.analytic} ok={v.ok}")
