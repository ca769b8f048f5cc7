"""
Checking analytic gradients
===========================

Every differentiable piece has a hand-written backward pass. Compare each
one with central differences along a random cotangent.
"""

from hcnet.checks import OPS, run_check

for op in OPS:
    rep = run_check(op, seed=0)
    print(f"{op:>6}: {'ok ' if rep.passed else 'BAD'} max relative error {rep.max_error:.2e}")
