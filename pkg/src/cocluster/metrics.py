"""Solution quality measures: overlap, consistency/efficiency curves,
sequence consistency, and boundary precision-recall."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import InputError
from .raster import LabelMap


def _mask(arr, operation: str) -> np.ndarray:
    out = np.asarray(arr)
    if out.ndim != 2:
        raise InputError("metrics", operation, f"expected a 2-d pixel mask, got shape {out.shape}")
    return out.astype(bool)


def jaccard(selected, gt) -> float:
    """Overlap ``|A ∩ B| / |A ∪ B|`` of two pixel sets on one grid.

    Two empty sets score 1 by convention (flagged with a warning), so a
    frame without the tracked object does not punish an empty selection.
    """
    a = _mask(selected, "jaccard")
    b = _mask(gt, "jaccard")
    if a.shape != b.shape:
        raise InputError("metrics", "jaccard", f"grid mismatch {a.shape} vs {b.shape}")
    union = int(np.logical_or(a, b).sum())
    if union == 0:
        warnings.warn("jaccard of two empty pixel sets is 1 by convention", RuntimeWarning,
                      stacklevel=2)
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


@dataclass(frozen=True)
class ConsistencyCurve:
    """Best overlap reachable with a growing number of selected regions.

    ``points[k] = (efficiency, consistency)``: the overlap achieved after
    selecting ``efficiency`` regions.  Efficiencies increase strictly and
    consistencies never decrease (each greedy step must improve).
    """

    points: tuple[tuple[int, float], ...]

    def __post_init__(self):
        pts = tuple((int(e), float(c)) for e, c in self.points)
        object.__setattr__(self, "points", pts)
        for (e0, c0), (e1, c1) in zip(pts, pts[1:]):
            if e1 <= e0:
                raise InputError("metrics", "ConsistencyCurve", "efficiency must increase strictly")
            if c1 < c0:
                raise InputError("metrics", "ConsistencyCurve", "consistency must not decrease")
        for _, c in pts:
            if not 0.0 <= c <= 1.0:
                raise InputError("metrics", "ConsistencyCurve", f"consistency {c} outside [0, 1]")

    @property
    def final(self) -> float:
        return self.points[-1][1] if self.points else 0.0

    def value_at(self, efficiency: int) -> float:
        """Best consistency using at most ``efficiency`` regions."""
        best = 0.0
        for e, c in self.points:
            if e <= efficiency:
                best = c
        return best

    def write_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["efficiency", "consistency"])
            writer.writerows([(e, repr(c)) for e, c in self.points])


def consistency_curve(partition, gt) -> ConsistencyCurve:
    """Greedy region selection against a ground-truth pixel set.

    Repeatedly adds the region with the largest overlap gain (ties to the
    lowest region label) and stops when no region improves; point ``k``
    records the overlap after ``k`` additions.  Greedy selection is a lower
    bound on the best possible subset, which would cost exponential time.
    """
    labels = partition.labels if isinstance(partition, LabelMap) else np.asarray(partition)
    if labels.ndim != 2:
        raise InputError("metrics", "consistency_curve", f"expected a 2-d partition, got {labels.shape}")
    gt_mask = _mask(gt, "consistency_curve")
    if labels.shape != gt_mask.shape:
        raise InputError("metrics", "consistency_curve",
                         f"grid mismatch {labels.shape} vs {gt_mask.shape}")

    n = int(labels.max()) + 1
    sizes = np.bincount(labels.ravel(), minlength=n).astype(np.int64)
    inter = np.bincount(labels[gt_mask].ravel(), minlength=n).astype(np.int64)
    g = int(gt_mask.sum())

    chosen_i = 0  # intersection of the selection
    chosen_s = 0  # size of the selection
    current = 0.0
    remaining = list(range(n))
    points = []
    while remaining:
        best_gain = 0.0
        best_label = None
        for r in remaining:
            i2 = chosen_i + int(inter[r])
            s2 = chosen_s + int(sizes[r])
            union = s2 + g - i2
            j2 = 1.0 if union == 0 else i2 / union
            gain = j2 - current
            if gain > best_gain:
                best_gain, best_label = gain, r
        if best_label is None:
            break
        chosen_i += int(inter[best_label])
        chosen_s += int(sizes[best_label])
        remaining.remove(best_label)
        union = chosen_s + g - chosen_i
        current = 1.0 if union == 0 else chosen_i / union
        points.append((len(points) + 1, current))
    return ConsistencyCurve(tuple(points))


def _frame_stack(label_maps, gts, operation: str):
    maps = [np.asarray(m) for m in label_maps]
    masks = [_mask(b, operation) for b in gts]
    if len(maps) != len(masks):
        raise InputError("metrics", operation, f"{len(maps)} frames vs {len(masks)} ground truths")
    if not maps:
        raise InputError("metrics", operation, "no frames")
    for f, (m, b) in enumerate(zip(maps, masks)):
        if m.ndim != 2 or m.shape != b.shape:
            raise InputError("metrics", operation, f"frame {f}: grid mismatch {m.shape} vs {b.shape}")
    return maps, masks


def sequence_consistency(label_maps, gts, labels) -> float:
    """Mean per-frame overlap of a fixed global label set against per-frame
    ground truth; labels must be persistent across frames for this to be
    meaningful."""
    maps, masks = _frame_stack(label_maps, gts, "sequence_consistency")
    wanted = sorted({int(v) for v in labels})
    values = []
    for arr, gt_mask in zip(maps, masks):
        selected = np.isin(arr, wanted) if wanted else np.zeros(arr.shape, dtype=bool)
        union = int(np.logical_or(selected, gt_mask).sum())
        values.append(1.0 if union == 0 else float(np.logical_and(selected, gt_mask).sum() / union))
    return float(np.mean(values))


def sequence_curve(label_maps, gts) -> ConsistencyCurve:
    """Greedy global-label selection maximizing mean per-frame overlap.

    The sequence analogue of :func:`consistency_curve`: efficiency counts
    global labels instead of regions.
    """
    maps, masks = _frame_stack(label_maps, gts, "sequence_curve")
    candidates = sorted({int(v) for arr in maps for v in np.unique(arr)})

    chosen: list[int] = []
    current = sequence_consistency(maps, masks, chosen)
    points = []
    while True:
        best_gain = 0.0
        best_label = None
        for lab in candidates:
            if lab in chosen:
                continue
            value = sequence_consistency(maps, masks, chosen + [lab])
            if value - current > best_gain:
                best_gain, best_label = value - current, lab
        if best_label is None:
            break
        chosen.append(best_label)
        current += best_gain
        points.append((len(chosen), current))
    return ConsistencyCurve(tuple(points))


def boundary_mask(labels) -> np.ndarray:
    """Pixels with any 4-neighbor in a different region."""
    arr = labels.labels if isinstance(labels, LabelMap) else np.asarray(labels)
    if arr.ndim != 2:
        raise InputError("metrics", "boundary_mask", f"expected a 2-d label map, got {arr.shape}")
    out = np.zeros(arr.shape, dtype=bool)
    vert = arr[:-1, :] != arr[1:, :]
    out[:-1, :] |= vert
    out[1:, :] |= vert
    horiz = arr[:, :-1] != arr[:, 1:]
    out[:, :-1] |= horiz
    out[:, 1:] |= horiz
    return out


def _matched_fraction(points: np.ndarray, targets: np.ndarray, tol: float) -> float:
    if not targets.any():
        return 0.0
    distance = ndimage.distance_transform_edt(~targets)
    return float((distance[points] <= tol).mean())


def boundary_pr(predicted, gt, tol: float = 2.0) -> tuple[float, float]:
    """Boundary precision and recall under distance-threshold matching.

    A predicted boundary pixel counts as correct when some ground-truth
    boundary pixel lies within ``tol`` (Euclidean); recall swaps the roles.
    An empty side makes its fraction vacuous and scores 1 by convention
    (flagged).  Distance thresholding is monotone in ``tol`` but not the
    bipartite matching used for published boundary benchmarks, so values
    here are for regression comparisons only.
    """
    pred = _mask(predicted, "boundary_pr")
    gt_mask = _mask(gt, "boundary_pr")
    if pred.shape != gt_mask.shape:
        raise InputError("metrics", "boundary_pr", f"grid mismatch {pred.shape} vs {gt_mask.shape}")
    if tol < 0:
        raise InputError("metrics", "boundary_pr", f"tol must be >= 0, got {tol}")

    if pred.any():
        precision = _matched_fraction(pred, gt_mask, tol)
    else:
        warnings.warn("empty prediction: precision is 1 by convention", RuntimeWarning,
                      stacklevel=2)
        precision = 1.0
    if gt_mask.any():
        recall = _matched_fraction(gt_mask, pred, tol)
    else:
        warnings.warn("empty ground truth: recall is 1 by convention", RuntimeWarning,
                      stacklevel=2)
        recall = 1.0
    return precision, recall
