"""Walkthrough: train an annotator from one labeled image, then label a batch.

Generates synthetic scenes, fits the adapter + cascade to a single seed, and
compares the three guidance modes on held-out images. The oracle numbers look
spectacular because that mode is handed the ground truth it is scored
against; the self-guided column is the honest prompt-free result.
"""

import numpy as np

import lamcore as lc

# ---------------------------------------------------------------- data
# One seed image plus ten evaluation scenes from the same distribution.
C, N, SIZE = 8, 16, 48
seed_feats, seed_gt = lc.generate_scene(100, C, N, SIZE, SIZE, noise_sigma=0.1)
held_out = [lc.generate_scene(200 + i, C, N, SIZE, SIZE, noise_sigma=0.1) for i in range(10)]

print(f"seed scene: {C} classes, {N} feature channels, {SIZE}x{SIZE} pixels")
print(f"classes present in the seed: {sorted(np.unique(seed_gt.ids))}")

# ---------------------------------------------------------------- training
config = lc.TrainConfig(epochs=300, learning_rate=0.01, k_layers=10, rng_seed=0)
model, losses = lc.train_from_seed(seed_feats, seed_gt, config)

print(f"\nlearnable parameters: {model.param_count} "
      f"({lc.sca_param_count(N, C)} adapter + {model.optou.param_count} cascade)")
print(f"seed cross entropy: {losses[0]:.4f} (epoch 1) -> {losses[-1]:.4f} (epoch {len(losses)})")
print(f"learned scale factors: {np.round(model.optou.alphas, 3)}")
print(f"learned step sizes:    {np.round(model.optou.etas, 3)}")

# ---------------------------------------------------------------- annotation
# Three guidance modes for the cascade's per-layer gradient step:
#   oracle      - guided by the true labels (needs them, and leaks them)
#   self        - guided by the layer's own argmax pseudo-label
#   scale-only  - no gradient step at all, pure scaling
totals = {mode: None for mode in lc.GuidanceMode}
for feats, gt in held_out:
    for mode in lc.GuidanceMode:
        pred = lc.annotate(
            feats,
            model,
            mode_override=mode,
            oracle_gt=gt if mode is lc.GuidanceMode.ORACLE else None,
        )
        m = lc.confusion(pred, gt, C)
        totals[mode] = m if totals[mode] is None else totals[mode] + m

print("\nheld-out results over 10 scenes:")
for mode, m in totals.items():
    _, mean_iou = lc.miou(m)
    _, mean_f1 = lc.mf1(m)
    caveat = "  <- consumes the ground truth it is scored against" \
        if mode is lc.GuidanceMode.ORACLE else ""
    print(f"  {mode.value:>10}: mIoU {mean_iou:.4f}  mF1 {mean_f1:.4f}{caveat}")

# ---------------------------------------------------------------- persistence
import tempfile
from pathlib import Path

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "model.lamm"
    lc.dataio.save_model(path, model)
    reloaded = lc.dataio.load_model(path)
    assert np.array_equal(reloaded.sca.weights, model.sca.weights)
    print(f"\nmodel round-trips through {path.name} "
          f"({path.stat().st_size} bytes) bit for bit")
