"""End-to-end network: stand-in encoder, prior stream and context stream.

Data flow for one image::

    image -> encoder -> F
    F -> pre-segmentation -> Q (soft regions) -> T = argmax Q
    X'  = pixel_context(F, T)
    X'' = region_context(X', Q)
    logits = head(fuse(X', X'')) -> bilinear upsample -> softmax

Parameters live in a flat ``dict`` keyed by the bundle names used on disk
(``"encoder.conv1"``, ``"preseg.k1"``, ``"pcm.piam.alpha"``, ...); the alphas
are 0-d arrays so an optimiser can treat every entry alike.
"""

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .fmap import read_bundle, write_bundle
from .objective import DEFAULT_LAMBDA, total_loss, weighted_ce_logits
from .pcm import pcm_backward, pcm_forward
from .piam import NRA_EPS, PiamParams
from .prior import BRANCH_CHANNELS, PresegParams, partition, preseg_backward, preseg_forward
from .rcm import POOL_EPS, rcm_backward, rcm_forward
from .tensor import as_float, conv2d_dilated, conv2d_dilated_backward, softmax_axis

FUSION_MODES = ("sum", "concat-1x1")


@dataclass
class HcnetConfig:
    num_classes: int = 3
    channels: int = 16
    in_channels: int = 3
    lam: float = DEFAULT_LAMBDA
    alpha_init: float = 0.0
    nra_eps: float = NRA_EPS
    pool_eps: float = POOL_EPS
    fusion: str = "sum"
    detach_affiliation: bool = False
    encoder_stride: int = 1
    branch_channels: int = BRANCH_CHANNELS
    seed: int = 0

    def __post_init__(self):
        if self.channels % 4 or self.channels <= 0:
            raise ConfigError(f"channels must be a positive multiple of 4, got {self.channels}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.fusion not in FUSION_MODES:
            raise ConfigError(f"fusion must be one of {FUSION_MODES}, got {self.fusion!r}")
        if self.encoder_stride not in (1, 2):
            raise ConfigError(f"encoder_stride must be 1 or 2, got {self.encoder_stride}")
        if self.num_classes < 1:
            raise ConfigError("num_classes must be >= 1")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


def init_params(config, rng):
    c, c2 = config.channels, config.channels // 2
    params = {
        "encoder.conv1": rng.standard_normal((c2, config.in_channels, 3, 3)) / np.sqrt(9 * config.in_channels),
        "encoder.conv2": rng.standard_normal((c, c2, 3, 3)) / np.sqrt(9 * c2),
    }
    pre = PresegParams.init(c, config.num_classes, rng, config.branch_channels)
    params.update({"preseg.k1": pre.k1, "preseg.k3": pre.k3, "preseg.k5": pre.k5, "preseg.head": pre.head})
    for name in ("pcm", "rcm"):
        p = PiamParams.init(c, rng, alpha=config.alpha_init)
        params[f"{name}.piam.w_o"] = p.w_o
        params[f"{name}.piam.w_p"] = p.w_p
        params[f"{name}.piam.alpha"] = np.array(p.alpha)
    if config.fusion == "concat-1x1":
        params["fusion.w"] = rng.standard_normal((c, 2 * c, 1, 1)) / np.sqrt(2 * c)
    params["head.w"] = rng.standard_normal((config.num_classes, c, 1, 1)) / np.sqrt(c)
    return params


def save_params(params, directory, config=None):
    arrays = {k: v for k, v in params.items() if np.ndim(v) > 0}
    scalars = {k: float(v) for k, v in params.items() if np.ndim(v) == 0}
    meta = {"config": config.to_dict()} if config is not None else {}
    write_bundle(directory, arrays, scalars, meta)


def load_params(directory):
    arrays, scalars, meta = read_bundle(directory)
    params = {k: np.asarray(v, dtype=np.float64) for k, v in arrays.items()}
    params.update({k: np.array(v) for k, v in scalars.items()})
    return params, meta


def _piam(params, prefix):
    return PiamParams(w_o=params[f"{prefix}.w_o"], w_p=params[f"{prefix}.w_p"],
                      alpha=float(params[f"{prefix}.alpha"]))


def _preseg(params):
    return PresegParams(params["preseg.k1"], params["preseg.k3"], params["preseg.k5"],
                        head=params["preseg.head"])


# -- bilinear resize, align_corners=False ---------------------------------------

def interp_matrix(n_out, n_in):
    """(n_out, n_in) linear-interpolation weights with half-pixel centres.

    Output sample i reads source coordinate (i + 0.5) * n_in / n_out - 0.5,
    clamped below at 0; neighbours beyond the last sample clamp to it.
    """
    m = np.zeros((n_out, n_in))
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.maximum(src, 0.0)
    i0 = np.minimum(np.floor(src).astype(np.int64), n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    frac = src - i0
    rows = np.arange(n_out)
    np.add.at(m, (rows, i0), 1.0 - frac)
    np.add.at(m, (rows, i1), frac)
    return m


def upsample_bilinear(x, size):
    """Resize (C, h, w) to (C, H, W)."""
    x = as_float(x)
    uh = interp_matrix(size[0], x.shape[1])
    uw = interp_matrix(size[1], x.shape[2])
    return np.einsum("Hh,chw,Ww->cHW", uh, x, uw)


def upsample_bilinear_backward(d_y, in_size):
    uh = interp_matrix(d_y.shape[1], in_size[0])
    uw = interp_matrix(d_y.shape[2], in_size[1])
    return np.einsum("Hh,cHW,Ww->chw", uh, d_y, uw)


def _conv1x1(w, x):
    c, h, wd = x.shape
    return (w[:, :, 0, 0] @ x.reshape(c, h * wd)).reshape(w.shape[0], h, wd)


def _conv1x1_backward(w, x, d_y):
    c, h, wd = x.shape
    g = d_y.reshape(w.shape[0], h * wd)
    xf = x.reshape(c, h * wd)
    return (w[:, :, 0, 0].T @ g).reshape(x.shape), (g @ xf.T)[:, :, None, None]


# -- forward / backward ----------------------------------------------------------

def encoder_forward(image, params, stride=1):
    a1 = conv2d_dilated(image, params["encoder.conv1"], 1)
    h1 = np.maximum(a1, 0.0)
    a2 = conv2d_dilated(h1, params["encoder.conv2"], 1)
    f = a2[:, ::stride, ::stride]
    return f, (image, a1, h1, a2.shape, stride)


def encoder_backward(cache, d_f, params):
    image, a1, h1, a2_shape, stride = cache
    d_a2 = np.zeros(a2_shape)
    d_a2[:, ::stride, ::stride] = d_f
    d_h1, d_k2 = conv2d_dilated_backward(h1, params["encoder.conv2"], 1, d_a2)
    d_a1 = d_h1 * (a1 > 0)
    d_img, d_k1 = conv2d_dilated_backward(image, params["encoder.conv1"], 1, d_a1)
    return d_img, {"encoder.conv1": d_k1, "encoder.conv2": d_k2}


@dataclass
class HcnetCache:
    config: HcnetConfig
    params: dict
    image_size: tuple
    enc: tuple
    pre: object
    t: np.ndarray
    pcm: object
    x1: np.ndarray
    rcm: object
    x2: np.ndarray
    fused_in: np.ndarray
    fused: np.ndarray
    logits: np.ndarray          # feature resolution
    logits_up: np.ndarray       # input resolution
    prior_logits_up: np.ndarray


def hcnet_forward(image, params, config):
    """Returns ``(probabilities, q, t, cache)``.

    ``probabilities`` is (N, H, W) at input resolution; q and t are at feature
    resolution.
    """
    image = as_float(image, "image")
    if image.ndim != 3 or image.shape[0] != config.in_channels:
        raise DimensionError(f"image must be ({config.in_channels}, H, W), got {image.shape}")
    size = image.shape[1:]
    n = config.num_classes

    f, enc = encoder_forward(image, params, config.encoder_stride)
    q, pre = preseg_forward(f, _preseg(params))
    t = partition(q)
    x1, pcm = pcm_forward(f, t, _piam(params, "pcm.piam"), num_classes=n, eps=config.nra_eps)
    x2, rcm = rcm_forward(x1, q, _piam(params, "rcm.piam"), eps=config.pool_eps,
                          nra_eps=config.nra_eps, detach_affiliation=config.detach_affiliation)
    if config.fusion == "sum":
        fused_in = None
        fused = x1 + x2
    else:
        fused_in = np.concatenate([x1, x2], axis=0)
        fused = _conv1x1(params["fusion.w"], fused_in)
    logits = _conv1x1(params["head.w"], fused)
    if logits.shape[1:] != size:
        logits_up = upsample_bilinear(logits, size)
        prior_up = upsample_bilinear(pre.logits, size)
    else:
        logits_up, prior_up = logits, pre.logits
    probs = softmax_axis(logits_up, axis=0)
    cache = HcnetCache(config, params, size, enc, pre, t, pcm, x1, rcm, x2, fused_in, fused,
                       logits, logits_up, prior_up)
    return probs, q, t, cache


def hcnet_backward(cache, d_logits_up, d_prior_logits_up=None, with_image=False):
    """Gradients of all parameters given gradients on the upsampled logits.

    Returns a dict keyed like ``params``; ``"image"`` is included when
    ``with_image`` is set.
    """
    cfg, params = cache.config, cache.params
    feat_size = cache.logits.shape[1:]
    resized = feat_size != cache.image_size

    d_logits = upsample_bilinear_backward(d_logits_up, feat_size) if resized else d_logits_up
    d_fused, d_head = _conv1x1_backward(params["head.w"], cache.fused, d_logits)
    grads = {"head.w": d_head}
    if cfg.fusion == "sum":
        d_x1, d_x2 = d_fused, d_fused
    else:
        d_in, grads["fusion.w"] = _conv1x1_backward(params["fusion.w"], cache.fused_in, d_fused)
        c = cache.x1.shape[0]
        d_x1, d_x2 = d_in[:c], d_in[c:]

    d_x1_rcm, d_q, g_rcm = rcm_backward(cache.rcm, d_x2)
    d_f, g_pcm = pcm_backward(cache.pcm, d_x1 + d_x1_rcm)

    d_prior = None
    if d_prior_logits_up is not None:
        d_prior = (upsample_bilinear_backward(d_prior_logits_up, feat_size)
                   if resized else d_prior_logits_up)
    d_f_pre, g_pre = preseg_backward(cache.pre, d_q=d_q, d_logits=d_prior)
    d_img, g_enc = encoder_backward(cache.enc, d_f + d_f_pre, params)

    grads.update(g_enc)
    grads.update({"preseg.k1": g_pre.k1, "preseg.k3": g_pre.k3, "preseg.k5": g_pre.k5,
                  "preseg.head": g_pre.head})
    for name, g in (("pcm", g_pcm), ("rcm", g_rcm)):
        grads[f"{name}.piam.w_o"] = g.w_o
        grads[f"{name}.piam.w_p"] = g.w_p
        grads[f"{name}.piam.alpha"] = np.array(g.alpha)
    if with_image:
        grads["image"] = d_img
    return grads


def loss_and_grads(image, labels, params, config, weights, with_image=False):
    """Total loss ``L_context + lam * L_prior`` and its gradients.

    Returns ``(losses, grads, outputs)`` where ``losses`` has keys
    ``total``, ``context`` and ``prior``, and ``outputs`` is
    ``(probabilities, q, t)``.
    """
    probs, q, t, cache = hcnet_forward(image, params, config)
    l_ctx, d_ctx = weighted_ce_logits(cache.logits_up, labels, weights)
    l_pri, d_pri = weighted_ce_logits(cache.prior_logits_up, labels, weights)
    grads = hcnet_backward(cache, d_ctx, config.lam * d_pri, with_image=with_image)
    losses = {"total": total_loss(l_ctx, l_pri, config.lam), "context": l_ctx, "prior": l_pri}
    return losses, grads, (probs, q, t)
