"""Seeded synthetic scenes: labelled blobs on a class-0 background."""

import colorsys
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .fmap import write_fmap
from .metrics import BUCKET_EDGES
from .tensor import make_rng

MARGIN = 1


@dataclass
class SyntheticScene:
    image: np.ndarray          # (3, H, W) float32
    labels: np.ndarray         # (H, W) uint16, 0 = background
    instances: np.ndarray      # (H, W) uint32, 0 = no instance
    inst_classes: dict         # instance id -> class id

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        write_fmap(self.image, os.path.join(directory, "image.fmap"))
        write_fmap(self.labels, os.path.join(directory, "labels.fmap"))
        write_fmap(self.instances, os.path.join(directory, "instances.fmap"))
        with open(os.path.join(directory, "inst_classes.json"), "w") as f:
            json.dump({str(k): v for k, v in sorted(self.inst_classes.items())}, f, indent=2)
            f.write("\n")


def palette(n_classes):
    """Evenly spaced hues mapped to [-1, 1]^3; class 0 is dark grey."""
    colors = [np.array([-0.6, -0.6, -0.6])]
    for c in range(1, n_classes):
        rgb = colorsys.hsv_to_rgb((c - 1) / max(n_classes - 1, 1), 0.9, 0.95)
        colors.append(np.array(rgb) * 2.0 - 1.0)
    return np.stack(colors)


def _default_areas(rng, h, w, n_instances):
    hw = h * w
    areas = []
    # one per S-IoU bucket when the canvas is big enough
    if n_instances >= 3 and hw >= 80000:
        areas = [int(rng.integers(BUCKET_EDGES[2] + 1000, int(0.72 * hw) + 1)),
                 int(rng.integers(BUCKET_EDGES[1] + 500, 8000)),
                 int(rng.integers(200, BUCKET_EDGES[1] - 200))]
        lo, hi = 50.0, 2000.0
    else:
        hi = max(0.55 * hw / n_instances, 4.0) if n_instances else 4.0
        lo = max(4.0, hi / 3)
    for _ in range(n_instances - len(areas)):
        areas.append(int(round(math.exp(rng.uniform(math.log(lo), math.log(hi))))))
    return areas


def _candidate_boxes(area, ellipse, ratio, h, w):
    fill = 4.0 / math.pi if ellipse else 1.0
    box_area = area * fill
    cands = []
    for r in (ratio, 1.0, 1.0 / ratio):
        bh = math.ceil(math.sqrt(box_area * r)) + (1 if ellipse else 0)
        bw = math.ceil(box_area / bh) + (1 if ellipse else 0)
        cands.append((bh, bw))
    for bw in (w - 2 * MARGIN, w // 2):
        if bw > 0:
            cands.append((math.ceil(box_area / bw) + (1 if ellipse else 0), bw))
    for bh in (h - 2 * MARGIN, h // 2):
        if bh > 0:
            cands.append((bh, math.ceil(box_area / bh) + (1 if ellipse else 0)))
    return [(bh, bw) for bh, bw in cands if bh <= h and bw <= w and bh * bw >= area]


def _shape_mask(area, bh, bw, ellipse):
    if ellipse:
        y, x = np.mgrid[0:bh, 0:bw]
        d = ((y + 0.5 - bh / 2) / (bh / 2)) ** 2 + ((x + 0.5 - bw / 2) / (bw / 2)) ** 2
        order = np.argsort(d.ravel(), kind="stable")
    else:
        order = np.arange(bh * bw)
    mask = np.zeros(bh * bw, bool)
    mask[order[:area]] = True
    return mask.reshape(bh, bw)


def _free_positions(occupied, bh, bw):
    """Top-left corners where the box plus margin touches no occupied pixel."""
    h, w = occupied.shape
    sat = np.zeros((h + 1, w + 1), np.int64)
    sat[1:, 1:] = occupied.cumsum(0).cumsum(1)
    ys = np.arange(0, h - bh + 1)
    xs = np.arange(0, w - bw + 1)
    y0 = np.clip(ys - MARGIN, 0, h)[:, None]
    y1 = np.clip(ys + bh + MARGIN, 0, h)[:, None]
    x0 = np.clip(xs - MARGIN, 0, w)[None, :]
    x1 = np.clip(xs + bw + MARGIN, 0, w)[None, :]
    blocked = sat[y1, x1] - sat[y0, x1] - sat[y1, x0] + sat[y0, x0]
    return np.argwhere(blocked == 0)


def synth_scene(seed, h, w, n_classes, n_instances, areas=None, noise=0.15):
    """Place ``n_instances`` non-touching blobs of exact pixel areas.

    Instance ``i`` (ids start at 1) gets class ``1 + (i - 1) % (n_classes - 1)``
    so every class appears when ``n_instances >= n_classes - 1``. Blobs
    alternate between axis-aligned rectangles and ellipses and are placed
    largest first. Raises ``InputError`` when they cannot be packed.
    """
    if n_classes < 1 or h < 1 or w < 1:
        raise InputError("need positive height, width and class count")
    if n_classes == 1 and n_instances:
        raise InputError("a single-class scene has no room for instances")
    if n_instances < n_classes - 1:
        raise InputError(f"{n_instances} instances cannot cover {n_classes - 1} foreground classes")
    rng = make_rng(seed)
    if areas is None:
        areas = _default_areas(rng, h, w, n_instances)
    areas = [int(a) for a in areas]
    if len(areas) != n_instances or any(a < 1 for a in areas):
        raise InputError(f"need {n_instances} positive areas, got {areas}")

    labels = np.zeros((h, w), np.uint16)
    instances = np.zeros((h, w), np.uint32)
    occupied = np.zeros((h, w), bool)
    inst_classes = {}
    for i in sorted(range(n_instances), key=lambda i: (-areas[i], i)):
        iid = i + 1
        cls = 1 + i % (n_classes - 1)
        ellipse = i % 2 == 1
        ratio = float(rng.uniform(0.5, 2.0))
        placed = False
        for shape_ellipse in ((ellipse, False) if ellipse else (False,)):
            for bh, bw in _candidate_boxes(areas[i], shape_ellipse, ratio, h, w):
                free = _free_positions(occupied, bh, bw)
                if len(free) == 0:
                    continue
                # very large blobs go top-left so the leftover space stays in one piece
                pick = 0 if areas[i] > 0.25 * h * w else rng.integers(len(free))
                y, x = free[pick]
                mask = _shape_mask(areas[i], bh, bw, shape_ellipse)
                labels[y:y + bh, x:x + bw][mask] = cls
                instances[y:y + bh, x:x + bw][mask] = iid
                occupied[y:y + bh, x:x + bw] |= mask
                placed = True
                break
            if placed:
                break
        if not placed:
            raise InputError(f"cannot place instance {iid} of area {areas[i]} in a {h}x{w} scene")
        inst_classes[iid] = cls

    image = palette(n_classes)[labels].transpose(2, 0, 1)
    image = image + noise * rng.standard_normal(image.shape)
    return SyntheticScene(image=image.astype(np.float32), labels=labels,
                          instances=instances, inst_classes=inst_classes)
