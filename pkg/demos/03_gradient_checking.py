"""Verifying every hand-written backward pass with finite differences.

The package trains through a hand-derived reverse-mode chain (cross entropy
-> cascade -> adapter). Central differences are the independent oracle: they
never touch the backward code, only the forward maps.
"""

import numpy as np

import lamcore as lc
from lamcore.gradcheck import central_difference, max_relative_error, run_all

# ------------------------------------------------ one gradient, by hand
rng = np.random.default_rng(0)
c, h, w = 3, 2, 2
logits = rng.normal(size=(c, h, w))
target = lc.LabelMap(rng.integers(0, c, size=(h, w)).astype(np.uint16))

analytic = lc.ce_grad_logits(target, lc.FeatureTensor(logits)).data
fd = central_difference(
    lambda x: lc.cross_entropy(target, lc.FeatureTensor(x)), logits.copy()
)
print("cross-entropy gradient, analytic vs central differences:")
print(f"  max relative error: {max_relative_error(analytic, fd):.2e}")

# ------------------------------------------------ the full battery
print("\nfull suites (seeded, >= 100 random instances total):")
for result in run_all(rng_seed=0):
    flag = "ok " if result.passed else "BAD"
    print(f"  [{flag}] {result.name:<30} {result.instances:3d} instances   "
          f"max rel err {result.max_rel_err:.2e}")
print("\nthe same battery backs the CLI's `lamcore gradcheck` exit status")
