"""Toy training loop: SGD with momentum and poly learning-rate decay."""

import time

import numpy as np

from .errors import NumericError
from .model import hcnet_forward, init_params, loss_and_grads
from .objective import class_counts, median_frequency_weights
from .prior import partition
from .synth import synth_scene
from .tensor import make_rng

MOMENTUM = 0.9
POLY_POWER = 0.9
# NRA divides by signed row sums, so a sum crossing zero spikes the gradient
CLIP_NORM = 1.0


def poly_lr(base_lr, step, total, power=POLY_POWER):
    return base_lr * (1.0 - step / total) ** power


def pixel_accuracy(pred, labels):
    return float(np.mean(np.asarray(pred) == np.asarray(labels)))


def toy_scene(seed, size=32, n_classes=3, n_instances=4):
    return synth_scene(seed, size, size, n_classes, n_instances)


def train_toy(config, steps, lr, scene=None, params=None, momentum=MOMENTUM,
              clip_norm=CLIP_NORM):
    """Fit the network to one synthetic scene.

    Minimises ``L_context + lam * L_prior`` with median-frequency weights
    from the scene's label counts. Momentum buffers start at zero; there is
    no weight decay. The global gradient norm is clipped to ``clip_norm``
    (``None`` disables clipping). Returns ``(report, params)``; ``report["diverged_at"]``
    is set when a loss goes non-finite and training stops there.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if scene is None:
        scene = toy_scene(config.seed, n_classes=config.num_classes)
    if params is None:
        params = init_params(config, make_rng(config.seed))
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    image = scene.image.astype(np.float64)
    weights = median_frequency_weights(class_counts(scene.labels, config.num_classes))

    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    history = {"total": [], "context": [], "prior": [], "lr": [], "grad_norm": []}
    diverged_at = None
    start = time.perf_counter()
    for step in range(steps):
        losses, grads, _ = loss_and_grads(image, scene.labels, params, config, weights)
        if not all(np.isfinite(v) for v in losses.values()):
            diverged_at = step
            break
        norm = float(np.sqrt(sum(np.sum(g * g) for g in grads.values())))
        if not np.isfinite(norm):
            diverged_at = step
            break
        scale = min(1.0, clip_norm / norm) if clip_norm else 1.0
        rate = poly_lr(lr, step, steps)
        for k in params:
            velocity[k] = momentum * velocity[k] + scale * grads[k]
            params[k] = params[k] - rate * velocity[k]
        for key in ("total", "context", "prior"):
            history[key].append(losses[key])
        history["lr"].append(rate)
        history["grad_norm"].append(norm)
    wall = time.perf_counter() - start

    probs, q, _, cache = hcnet_forward(image, params, config)
    pred = np.argmax(probs, axis=0)
    pre_pred = np.argmax(cache.prior_logits_up, axis=0)
    report = {
        "config": config.to_dict(),
        "steps": steps,
        "lr": lr,
        "momentum": momentum,
        "poly_power": POLY_POWER,
        "clip_norm": clip_norm,
        "class_weights": weights.w.tolist(),
        "losses": history,
        "final_pixel_accuracy": pixel_accuracy(pred, scene.labels),
        "final_preseg_accuracy": pixel_accuracy(pre_pred, scene.labels),
        "diverged_at": diverged_at,
        "wall_time_s": wall,
    }
    if diverged_at is not None:
        report["error"] = f"non-finite loss at step {diverged_at}"
    return report, params


def window_means(values, window=50):
    values = np.asarray(values, dtype=np.float64)
    n = len(values) // window
    return [float(values[i * window:(i + 1) * window].mean()) for i in range(n)]


def check_finite(report):
    if report["diverged_at"] is not None:
        raise NumericError(report["error"])
