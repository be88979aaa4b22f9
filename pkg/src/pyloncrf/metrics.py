"""Segmentation metrics (OA, AA, F1) and semantic-boundary evaluation
(boundary ground truth, non-maximum suppression, ROC/AUC with pixel
tolerance)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensorio import IGNORE, LabelMap, Raster


@dataclass
class Confusion:
    """C x C counts, rows = reference, cols = prediction, IGNORE excluded."""

    matrix: np.ndarray

    @property
    def total(self) -> int:
        return int(self.matrix.sum())


@dataclass
class SegMetrics:
    overall_accuracy: float
    average_accuracy: float
    f1_per_class: dict[int, float]
    mean_f1: float
    excluded_classes: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "overall_accuracy": self.overall_accuracy,
            "average_accuracy": self.average_accuracy,
            "f1_per_class": {str(k): v for k, v in self.f1_per_class.items()},
            "mean_f1": self.mean_f1,
            "excluded_classes": self.excluded_classes,
        }


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


def confusion(gt: LabelMap, pred: LabelMap, class_count: int) -> Confusion:
    if gt.labels.shape != pred.labels.shape:
        raise ValueError(
            f"shape mismatch: gt {gt.labels.shape} vs pred {pred.labels.shape}"
        )
    keep = gt.labels != IGNORE
    g = gt.labels[keep].astype(np.int64)
    p = pred.labels[keep].astype(np.int64)
    if np.any(g >= class_count) or np.any(p >= class_count):
        raise ValueError("labels exceed class_count")
    m = np.zeros((class_count, class_count), dtype=np.int64)
    np.add.at(m, (g, p), 1)
    return Confusion(matrix=m)


def metrics(conf: Confusion) -> SegMetrics:
    """OA, AA (mean recall) and per-class / mean F1.

    Classes with zero ground-truth support are excluded from the macro
    averages and reported in ``excluded_classes``.
    """
    m = conf.matrix.astype(np.float64)
    total = m.sum()
    if total == 0:
        raise ValueError("metrics undefined: no labeled pixels")
    oa = float(np.trace(m) / total)
    gt_support = m.sum(axis=1)
    pred_support = m.sum(axis=0)
    supported = np.flatnonzero(gt_support > 0)
    excluded = np.flatnonzero(gt_support == 0)
    recalls = np.diag(m)[supported] / gt_support[supported]
    aa = float(np.mean(recalls))
    f1s: dict[int, float] = {}
    for c in supported:
        tp = m[c, c]
        prec = tp / pred_support[c] if pred_support[c] > 0 else 0.0
        rec = tp / gt_support[c]
        f1s[int(c)] = float(
            2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
        )
    mean_f1 = float(np.mean(list(f1s.values())))
    return SegMetrics(
        overall_accuracy=oa, average_accuracy=aa, f1_per_class=f1s,
        mean_f1=mean_f1, excluded_classes=[int(c) for c in excluded],
    )


def _different_neighbor(labels: np.ndarray) -> np.ndarray:
    """True where a 4-neighbor carries a different non-IGNORE label."""
    h, w = labels.shape
    out = np.zeros((h, w), dtype=bool)
    valid = labels != IGNORE
    for axis, sl_a, sl_b in (
        (0, np.s_[:-1, :], np.s_[1:, :]),
        (1, np.s_[:, :-1], np.s_[:, 1:]),
    ):
        a, b = labels[sl_a], labels[sl_b]
        diff = (a != b) & valid[sl_a] & valid[sl_b]
        out[sl_a] |= diff
        out[sl_b] |= diff
    return out


def _dilate_chebyshev(mask: np.ndarray, radius: int) -> np.ndarray:
    """Binary dilation with a (2r+1)-square structuring element."""
    out = mask.copy()
    for _ in range(radius):
        grown = out.copy()
        grown[:-1, :] |= out[1:, :]
        grown[1:, :] |= out[:-1, :]
        grown[:, :-1] |= out[:, 1:]
        grown[:, 1:] |= out[:, :-1]
        grown[:-1, :-1] |= out[1:, 1:]
        grown[1:, 1:] |= out[:-1, :-1]
        grown[:-1, 1:] |= out[1:, :-1]
        grown[1:, :-1] |= out[:-1, 1:]
        out = grown
    return out


def boundary_gt(labels: LabelMap, class_count: int, width: int = 1) -> Raster:
    """Per-class semantic boundary channels.

    With width 1, a pixel of class c is boundary iff a 4-neighbor carries a
    different (non-IGNORE) class, yielding 1-px lines on each side of a
    class transition that touch without overlapping. width=3 dilates each
    channel by one pixel per side.
    """
    if width not in (1, 3):
        raise ValueError("supported widths: 1, 3")
    lab = labels.labels
    edge = _different_neighbor(lab)
    h, w = lab.shape
    out = np.zeros((h, w, class_count), dtype=np.float32)
    for c in range(class_count):
        ch = edge & (lab == c)
        if width == 3:
            ch = _dilate_chebyshev(ch, 1)
        out[:, :, c] = ch
    return Raster(out)


def _box3(img: np.ndarray) -> np.ndarray:
    pad = np.pad(img, 1, mode="constant")
    out = np.zeros_like(img)
    for dr in (0, 1, 2):
        for dc in (0, 1, 2):
            out += pad[dr : dr + img.shape[0], dc : dc + img.shape[1]]
    return out


def _sobel(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pad = np.pad(img, 1, mode="edge")
    gx = (
        pad[:-2, 2:] + 2 * pad[1:-1, 2:] + pad[2:, 2:]
        - pad[:-2, :-2] - 2 * pad[1:-1, :-2] - pad[2:, :-2]
    )
    gy = (
        pad[2:, :-2] + 2 * pad[2:, 1:-1] + pad[2:, 2:]
        - pad[:-2, :-2] - 2 * pad[:-2, 1:-1] - pad[:-2, 2:]
    )
    return gx, gy


def nms(boundary_prob: Raster) -> Raster:
    """Thin a boundary-probability map to local maxima across the ridge.

    The comparison direction (horizontal or vertical) is quantized from the
    Sobel gradient; plateau ridges keep only their center pixel so a 3-px
    constant ridge thins to its center line.
    """
    if boundary_prob.channels != 1:
        raise ValueError("nms expects a single channel")
    p = boundary_prob.values[:, :, 0].astype(np.float64)
    h, w = p.shape
    gx, gy = _sobel(p)
    # pool magnitudes over 3x3 so ridge centers (zero gradient) inherit the
    # orientation of their flanks
    ax = _box3(np.abs(gx))
    ay = _box3(np.abs(gy))
    horiz = ax >= ay
    out = np.zeros_like(p)

    def run_center(vec: np.ndarray, i: int) -> bool:
        n = len(vec)
        v = vec[i]
        lo = i
        while lo > 0 and vec[lo - 1] == v:
            lo -= 1
        hi = i
        while hi < n - 1 and vec[hi + 1] == v:
            hi += 1
        left_ok = lo == 0 or vec[lo - 1] < v
        right_ok = hi == n - 1 or vec[hi + 1] < v
        return left_ok and right_ok and i == (lo + hi) // 2

    for r in range(h):
        for c in range(w):
            v = p[r, c]
            if v <= 0:
                continue
            if horiz[r, c]:
                a = p[r, c - 1] if c > 0 else -np.inf
                b = p[r, c + 1] if c < w - 1 else -np.inf
                if v > a and v > b:
                    out[r, c] = v
                elif v >= a and v >= b and run_center(p[r], c):
                    out[r, c] = v
            else:
                a = p[r - 1, c] if r > 0 else -np.inf
                b = p[r + 1, c] if r < h - 1 else -np.inf
                if v > a and v > b:
                    out[r, c] = v
                elif v >= a and v >= b and run_center(p[:, c], r):
                    out[r, c] = v
    return Raster(out[:, :, None].astype(np.float32))


def _max_filter_chebyshev(scores: np.ndarray, radius: int) -> np.ndarray:
    out = scores.copy()
    for _ in range(radius):
        grown = out.copy()
        np.maximum(grown[:-1, :], out[1:, :], out=grown[:-1, :])
        np.maximum(grown[1:, :], out[:-1, :], out=grown[1:, :])
        np.maximum(grown[:, :-1], out[:, 1:], out=grown[:, :-1])
        np.maximum(grown[:, 1:], out[:, :-1], out=grown[:, 1:])
        np.maximum(grown[:-1, :-1], out[1:, 1:], out=grown[:-1, :-1])
        np.maximum(grown[1:, 1:], out[:-1, :-1], out=grown[1:, 1:])
        np.maximum(grown[:-1, 1:], out[1:, :-1], out=grown[:-1, 1:])
        np.maximum(grown[1:, :-1], out[:-1, 1:], out=grown[1:, :-1])
        out = grown
    return out


def roc_auc(
    pred_boundary: Raster, gt_boundary: Raster, tolerance_px: int = 1
) -> RocCurve:
    """ROC of boundary scores with a spatial matching tolerance.

    tolerance_px is the evaluation band width (1 or 3), giving a Chebyshev
    matching radius r = (tolerance_px - 1) // 2. At threshold t, a GT pixel
    is retrieved when some prediction with score >= t lies within r of it
    (TPR over GT pixels), and a predicted pixel is a false positive when no
    GT pixel lies within r of it (FPR over pixels outside the dilated GT).
    Widening the tolerance grows both match sets, so the curve dominates
    pointwise and AUC is monotone in tolerance_px. At tolerance 1 this is
    the plain pixel-classification ROC. AUC by trapezoid.
    """
    if pred_boundary.channels != 1 or gt_boundary.channels != 1:
        raise ValueError("roc_auc evaluates one class channel at a time")
    if pred_boundary.values.shape != gt_boundary.values.shape:
        raise ValueError("shape mismatch between prediction and ground truth")
    radius = (int(tolerance_px) - 1) // 2
    gt = gt_boundary.values[:, :, 0] > 0
    scores = pred_boundary.values[:, :, 0].astype(np.float64)
    band = _dilate_chebyshev(gt, radius) if radius > 0 else gt
    matched = _max_filter_chebyshev(scores, radius) if radius > 0 else scores

    n_pos = int(gt.sum())
    n_neg = int((~band).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC undefined: ground truth is all-positive or all-negative")

    pos_scores = matched[gt]
    neg_scores = scores[~band]
    thresholds = np.unique(np.concatenate([pos_scores, neg_scores]))[::-1]
    # counts of scores >= t via cumulative histograms over the thresholds
    tp = n_pos - np.searchsorted(np.sort(pos_scores), thresholds, side="left")
    fp = n_neg - np.searchsorted(np.sort(neg_scores), thresholds, side="left")
    tpr = np.concatenate([[0.0], tp / n_pos, [1.0]])
    fpr = np.concatenate([[0.0], fp / n_neg, [1.0]])
    auc = float(np.trapezoid(tpr, fpr))
    return RocCurve(fpr=fpr, tpr=tpr, auc=auc)


def per_class_roc(
    pred: Raster, gt: Raster, tolerance_px: int = 1
) -> list[RocCurve | None]:
    """Class-wise curves; channels with degenerate GT come back as None."""
    curves: list[RocCurve | None] = []
    for c in range(pred.channels):
        try:
            curves.append(
                roc_auc(
                    Raster(pred.values[:, :, c : c + 1]),
                    Raster(gt.values[:, :, c : c + 1]),
                    tolerance_px,
                )
            )
        except ValueError:
            curves.append(None)
    return curves


def metrics_table(seg: SegMetrics, class_names: list[str] | None = None) -> str:
    """Aligned text table: per-class F1 then OA / AA / mean F1."""
    classes = sorted(seg.f1_per_class)
    names = class_names or [f"class {c}" for c in classes]
    header = [f"{n:>10}" for n in names] + [f"{s:>8}" for s in ("OA", "AA", "F1")]
    row = [f"{100 * seg.f1_per_class[c]:>10.2f}" for c in classes] + [
        f"{100 * seg.overall_accuracy:>8.2f}",
        f"{100 * seg.average_accuracy:>8.2f}",
        f"{100 * seg.mean_f1:>8.2f}",
    ]
    return " ".join(header) + "\n" + " ".join(row)
