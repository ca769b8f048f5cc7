"""Pixel metrics (IoU, F1, overall accuracy) and the per-instance S-IoU."""

from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from .errors import DimensionError, InputError

# area buckets, half-open: [0, 2500), [2500, 62500), [62500, inf)
BUCKET_EDGES = (0, 2500, 62500)


@dataclass
class ConfusionCounts:
    matrix: np.ndarray     # (n, n), rows = ground truth, cols = prediction

    @property
    def tp(self):
        return np.diag(self.matrix).astype(np.int64)

    @property
    def fp(self):
        return self.matrix.sum(axis=0) - self.tp

    @property
    def fn(self):
        return self.matrix.sum(axis=1) - self.tp

    @property
    def tn(self):
        return self.matrix.sum() - self.tp - self.fp - self.fn


def confusion(pred, gt, n, ignore_label=None):
    pred = np.asarray(pred).astype(np.int64)
    gt = np.asarray(gt).astype(np.int64)
    if pred.shape != gt.shape:
        raise DimensionError(f"pred {pred.shape} and gt {gt.shape} differ")
    keep = np.ones(gt.shape, bool)
    if ignore_label is not None:
        keep = (gt != ignore_label) & (pred != ignore_label)
    p, g = pred[keep], gt[keep]
    if p.size and (min(p.min(), g.min()) < 0 or max(p.max(), g.max()) >= n):
        raise InputError(f"labels outside [0, {n}) (ignore_label={ignore_label})")
    m = np.bincount(g * n + p, minlength=n * n).reshape(n, n)
    return ConfusionCounts(matrix=m.astype(np.int64))


def _ratio(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.full(num.shape, np.nan)
    np.divide(num, den, out=out, where=den > 0)
    return out


def iou_per_class(c):
    """Per-class TP/(TP+FP+FN) and their mean; absent classes are NaN and
    left out of the mean."""
    iou = _ratio(c.tp, c.tp + c.fp + c.fn)
    valid = ~np.isnan(iou)
    miou = float(iou[valid].mean()) if valid.any() else float("nan")
    return iou, miou


def f1_oa(c):
    """Per-class F1 and overall accuracy (trace / total)."""
    f1 = _ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn)
    total = c.matrix.sum()
    oa = float(np.trace(c.matrix) / total) if total else float("nan")
    return f1, oa


@dataclass
class SIoURecord:
    instance_id: int
    class_id: int
    area: int
    s_iou: float


@dataclass
class SIoUReport:
    records: list

    def bucket_of(self, area):
        return int(np.searchsorted(BUCKET_EDGES, area, side="right"))

    @property
    def bucket_means(self):
        means = []
        for b in (1, 2, 3):
            vals = [r.s_iou for r in self.records if self.bucket_of(r.area) == b]
            means.append(float(np.mean(vals)) if vals else None)
        return means

    @property
    def ms_iou(self):
        return float(np.mean([r.s_iou for r in self.records])) if self.records else None

    def to_dict(self):
        return {
            "bucket_edges": list(BUCKET_EDGES) + [None],
            "bucket_counts": [sum(self.bucket_of(r.area) == b for r in self.records) for b in (1, 2, 3)],
            "bucket_means": self.bucket_means,
            "ms_iou": self.ms_iou,
            "records": [dict(asdict(r), bucket=self.bucket_of(r.area)) for r in self.records],
        }


def _structure(connectivity):
    if connectivity == 4:
        return ndimage.generate_binary_structure(2, 1)
    if connectivity == 8:
        return ndimage.generate_binary_structure(2, 2)
    raise InputError(f"connectivity must be 4 or 8, got {connectivity}")


def s_iou(pred, instances, inst_classes, connectivity=4, match="components"):
    """Scale-sensitive IoU of every ground-truth instance.

    ``instances`` is an (H, W) instance-id map (0 = no instance) and
    ``inst_classes`` maps instance id -> class id. With ``match="components"``
    the prediction mask of an instance of class c is the union of the
    connected components of ``pred == c`` that touch the instance; with
    ``match="classmap"`` it is all of ``pred == c``.
    """
    pred = np.asarray(pred)
    instances = np.asarray(instances)
    if pred.shape != instances.shape:
        raise DimensionError(f"pred {pred.shape} and instance map {instances.shape} differ")
    if match not in ("components", "classmap"):
        raise InputError(f"unknown match mode {match!r}")
    structure = _structure(connectivity)
    table = {int(k): int(v) for k, v in inst_classes.items()}
    present = set(np.unique(instances).tolist()) - {0}
    missing = present - set(table)
    if missing:
        raise InputError(f"instances {sorted(missing)} have no class entry")

    components = {}
    records = []
    for iid in sorted(table):
        cls = table[iid]
        mask = instances == iid
        area = int(mask.sum())
        if area == 0:
            raise InputError(f"instance {iid} has zero pixels")
        class_mask = pred == cls
        if match == "classmap":
            pmask = class_mask
        else:
            if cls not in components:
                components[cls] = ndimage.label(class_mask, structure=structure)[0]
            lab = components[cls]
            hit = np.unique(lab[mask])
            hit = hit[hit > 0]
            pmask = np.isin(lab, hit)
        inter = int(np.count_nonzero(mask & pmask))
        union = int(np.count_nonzero(mask | pmask))
        records.append(SIoURecord(iid, cls, area, inter / union))
    return SIoUReport(records=records)
