"""Ready-made gradient checks for every differentiable op in the package."""

import numpy as np

from .gradcheck import gradcheck
from .model import HcnetConfig, hcnet_backward, hcnet_forward, init_params
from .objective import median_frequency_weights, weighted_ce, weighted_ce_logits
from .pcm import pcm_backward, pcm_forward
from .piam import PiamParams, piam_backward, piam_forward
from .prior import PresegParams, preseg_backward, preseg_forward
from .rcm import rcm_backward, rcm_forward
from .tensor import make_rng, softmax_axis

OPS = ("piam", "preseg", "pcm", "rcm", "loss", "e2e")


def _piam_grads(g):
    return [g.w_o, g.w_p, np.array(g.alpha)]


def check_piam(seed=0, eps=1e-5, tol=1e-4, c=8, k=5):
    rng = make_rng(seed)
    b = rng.standard_normal((c, k))
    p = PiamParams.init(c, rng, alpha=0.5)

    def fwd(b, w_o, w_p, alpha):
        return piam_forward(b, PiamParams(w_o, w_p, float(alpha)))

    def bwd(cache, d):
        d_b, g = piam_backward(cache, d)
        return [d_b] + _piam_grads(g)

    return gradcheck(fwd, bwd, [b, p.w_o, p.w_p, np.array(p.alpha)], eps, tol,
                     names=["b", "w_o", "w_p", "alpha"], seed=seed)


def check_preseg(seed=0, eps=1e-5, tol=1e-4, cin=4, size=6, n=3, max_coords=None):
    rng = make_rng(seed)
    f = rng.standard_normal((cin, size, size))
    p = PresegParams.init(cin, n, rng)

    def fwd(f, k1, k3, k5, head):
        return preseg_forward(f, PresegParams(k1, k3, k5, head=head))

    def bwd(cache, d):
        d_f, g = preseg_backward(cache, d_q=d)
        return [d_f, g.k1, g.k3, g.k5, g.head]

    return gradcheck(fwd, bwd, [f, p.k1, p.k3, p.k5, p.head], eps, tol,
                     names=["f", "k1", "k3", "k5", "head"], seed=seed, max_coords=max_coords)


def check_pcm(seed=0, eps=1e-5, tol=1e-4, c=8, size=6, n=3):
    rng = make_rng(seed)
    x = rng.standard_normal((c, size, size))
    t = rng.integers(0, n, size=(size, size)).astype(np.uint16)
    p = PiamParams.init(c, rng, alpha=0.5)

    def fwd(x, w_o, w_p, alpha):
        return pcm_forward(x, t, PiamParams(w_o, w_p, float(alpha)), num_classes=n)

    def bwd(cache, d):
        d_x, g = pcm_backward(cache, d)
        return [d_x] + _piam_grads(g)

    return gradcheck(fwd, bwd, [x, p.w_o, p.w_p, np.array(p.alpha)], eps, tol,
                     names=["x", "w_o", "w_p", "alpha"], seed=seed)


def check_rcm(seed=0, eps=1e-5, tol=1e-4, c=8, size=4, n=3):
    rng = make_rng(seed)
    x = rng.standard_normal((c, size, size))
    q = softmax_axis(rng.standard_normal((n, size, size)), axis=0)
    p = PiamParams.init(c, rng, alpha=0.5)

    def fwd(x, q, w_o, w_p, alpha):
        return rcm_forward(x, q, PiamParams(w_o, w_p, float(alpha)))

    def bwd(cache, d):
        d_x, d_q, g = rcm_backward(cache, d)
        return [d_x, d_q] + _piam_grads(g)

    return gradcheck(fwd, bwd, [x, q, p.w_o, p.w_p, np.array(p.alpha)], eps, tol,
                     names=["x", "q", "w_o", "w_p", "alpha"], seed=seed)


def check_loss(seed=0, eps=1e-5, tol=1e-4, n=4, size=5):
    """Fused softmax + weighted CE wrt logits, and the probability form wrt p."""
    rng = make_rng(seed)
    z = rng.standard_normal((n, size, size))
    y = rng.integers(0, n, size=(size, size))
    w = median_frequency_weights(np.bincount(y.ravel(), minlength=n) + 1)

    def fwd_logits(z):
        loss, d = weighted_ce_logits(z, y, w)
        return np.array(loss), d

    def fwd_probs(p):
        loss, d = weighted_ce(p, y, w)
        return np.array(loss), d

    def bwd(d_cached, c):
        return [d_cached * c]

    fused = gradcheck(fwd_logits, bwd, [z], eps, tol, names=["logits"], seed=seed)
    probs = gradcheck(fwd_probs, bwd, [softmax_axis(z, axis=0)], eps, tol, names=["p"], seed=seed)
    fused.names += probs.names
    fused.errors += probs.errors
    return fused


def e2e_setup(seed=0, size=8, config=None):
    config = config or HcnetConfig(num_classes=3, channels=8, seed=seed, alpha_init=0.5)
    rng = make_rng(seed)
    params = init_params(config, rng)
    image = rng.standard_normal((config.in_channels, size, size))
    labels = rng.integers(0, config.num_classes, size=(size, size))
    weights = median_frequency_weights(np.bincount(labels.ravel(), minlength=config.num_classes) + 1)
    return config, params, image, labels, weights


def check_e2e(seed=0, eps=1e-5, tol=1e-4, size=8, config=None, max_coords=48):
    """Total loss of the whole network wrt every parameter and the image."""
    config, params, image, labels, weights = e2e_setup(seed, size, config)
    names = sorted(params)

    def fwd(image, *arrays):
        p = dict(zip(names, arrays))
        _, _, _, cache = hcnet_forward(image, p, config)
        l_ctx, d_ctx = weighted_ce_logits(cache.logits_up, labels, weights)
        l_pri, d_pri = weighted_ce_logits(cache.prior_logits_up, labels, weights)
        return np.array(l_ctx + config.lam * l_pri), (cache, d_ctx, d_pri)

    def bwd(state, c):
        cache, d_ctx, d_pri = state
        g = hcnet_backward(cache, c * d_ctx, c * config.lam * d_pri, with_image=True)
        return [g["image"]] + [g[k] for k in names]

    return gradcheck(fwd, bwd, [image] + [params[k] for k in names], eps, tol,
                     names=["image"] + names, seed=seed, max_coords=max_coords)


def run_check(op, seed=0, eps=1e-5, tol=1e-4):
    fn = {"piam": check_piam, "preseg": check_preseg, "pcm": check_pcm,
          "rcm": check_rcm, "loss": check_loss, "e2e": check_e2e}[op]
    return fn(seed=seed, eps=eps, tol=tol)
