"""Regenerate golden_forward.fmap. Run once; the test compares against the committed file.

    python3 tests/fixtures/make_golden.py
"""

import os

import numpy as np

from hcnet.fmap import write_fmap
from hcnet.model import HcnetConfig, hcnet_forward, init_params
from hcnet.synth import synth_scene
from hcnet.tensor import make_rng

GOLDEN_CONFIG = dict(num_classes=3, channels=8, alpha_init=0.5, branch_channels=16, seed=7)
GOLDEN_SIZE = 12


def golden_probs():
    cfg = HcnetConfig(**GOLDEN_CONFIG)
    scene = synth_scene(cfg.seed, GOLDEN_SIZE, GOLDEN_SIZE, cfg.num_classes, 3)
    params = init_params(cfg, make_rng(cfg.seed))
    probs, _, _, _ = hcnet_forward(scene.image, params, cfg)
    return probs.astype(np.float32)


if __name__ == "__main__":
    out = os.path.join(os.path.dirname(os.path.abspath(__file__)), "golden_forward.fmap")
    write_fmap(golden_probs(), out)
    print("wrote", out)
