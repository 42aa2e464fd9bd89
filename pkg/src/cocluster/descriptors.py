"""Region similarities, contour-element descriptors and affinity assembly.

Intra-image affinities compare adjacent regions through color histograms;
the more dissimilar two regions are, the more negative the coefficient, so
a minimizer keeps their common boundary active.  Inter-image affinities
compare regions element by element: each contour element carries a color
block (two half-disk histograms along its normal, averaged), a small
gradient-orientation block and its position.  Element matches are phased
by the outward normals of the regions being compared, so that matching a
region against the same side of a contour rewards merging while matching
it against the opposite side penalizes it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.ndimage import gaussian_filter

from .adjacency import _DIRECTIONS, BoundaryVariableSet, ContourElement
from .errors import InputError
from .raster import Image, LabelMap

_GAUSS_SIGMA = 1.0


@dataclass(frozen=True)
class DescriptorConfig:
    """Knobs of the similarity model.

    ``color_var``, ``shape_var`` and ``pos_var`` are the per-block variances
    of the diagonal scaling used by the inter-element similarity.
    """

    bins: int = 8
    cell: int = 16
    half_disk: int = 4
    window: float = 20.0
    mu: float = 0.2
    color_var: float = 0.05
    shape_var: float = 0.05
    pos_var: float = 25.0

    def __post_init__(self):
        if self.bins < 1 or self.bins > 256:
            raise InputError("descriptors", "DescriptorConfig", f"bins must be in 1..256, got {self.bins}")
        if self.cell < 1:
            raise InputError("descriptors", "DescriptorConfig", f"cell must be >= 1, got {self.cell}")
        if self.half_disk < 1:
            raise InputError("descriptors", "DescriptorConfig", f"half_disk must be >= 1, got {self.half_disk}")
        if not self.window > 0:
            raise InputError("descriptors", "DescriptorConfig", f"window must be positive, got {self.window}")
        if self.mu < 0:
            raise InputError("descriptors", "DescriptorConfig", f"mu must be >= 0, got {self.mu}")
        for name in ("color_var", "shape_var", "pos_var"):
            if not getattr(self, name) > 0:
                raise InputError("descriptors", "DescriptorConfig", f"{name} must be positive")

    @property
    def feature_size(self) -> int:
        return 3 * self.bins + 8 + 2

    def feature_scale(self) -> np.ndarray:
        """Per-dimension standard deviations for the diagonal distance."""
        return np.concatenate([
            np.full(3 * self.bins, math.sqrt(self.color_var)),
            np.full(8, math.sqrt(self.shape_var)),
            np.full(2, math.sqrt(self.pos_var)),
        ])


# ---------------------------------------------------------------------------
# histograms and region similarity

def histogram_counts(image: Image, leaves: LabelMap, bins: int = 8) -> np.ndarray:
    """Per-region color histogram counts, shape (n_regions, 3 * bins)."""
    if image.shape != leaves.shape:
        raise InputError("descriptors", "histogram_counts", "image and label map sizes differ")
    n = leaves.n_regions
    labels = leaves.labels.ravel()
    out = np.zeros((n, 3 * bins), dtype=np.int64)
    for ch in range(3):
        vals = (image.pixels[:, :, ch].ravel().astype(np.int64) * bins) >> 8
        np.add.at(out, (labels, ch * bins + vals), 1)
    return out


def normalize_histogram(counts: np.ndarray) -> np.ndarray:
    """Channel-normalize a concatenated histogram so the whole vector sums to 1."""
    counts = np.asarray(counts, dtype=np.float64)
    if counts.ndim != 1 or counts.size % 3:
        raise InputError("descriptors", "normalize_histogram", f"expected 3 concatenated channels, got shape {counts.shape}")
    per = counts.reshape(3, -1)
    sums = per.sum(axis=1, keepdims=True)
    if (sums == 0).any():
        raise InputError("descriptors", "normalize_histogram", "empty channel histogram")
    return (per / sums / 3.0).ravel()


def region_histograms(image: Image, leaves: LabelMap, bins: int = 8) -> np.ndarray:
    counts = histogram_counts(image, leaves, bins)
    return np.stack([normalize_histogram(c) for c in counts])


def bhattacharyya_coefficient(h1, h2) -> float:
    """Overlap of two distributions: ``sum(sqrt(h1 * h2))``, in [0, 1]."""
    h1 = np.asarray(h1, dtype=np.float64)
    h2 = np.asarray(h2, dtype=np.float64)
    if h1.shape != h2.shape:
        raise InputError("descriptors", "bhattacharyya_coefficient", f"shape mismatch {h1.shape} vs {h2.shape}")
    for h in (h1, h2):
        if (h < 0).any():
            raise InputError("descriptors", "bhattacharyya_coefficient", "histogram has negative mass")
        if abs(h.sum() - 1.0) > 1e-9:
            raise InputError("descriptors", "bhattacharyya_coefficient", f"histogram sums to {h.sum()!r}, expected 1")
    return float(np.sqrt(h1 * h2).sum())


def intra_similarity(alpha: float, bc: float) -> float:
    """Boundary-length-weighted color affinity ``alpha * (1 - exp(1 - bc))``.

    Always <= 0; exactly 0 for identical histograms; decreasing in
    dissimilarity, so minimizing keeps the most contrasted boundaries.
    """
    if alpha <= 0:
        raise InputError("descriptors", "intra_similarity", f"alpha must be positive, got {alpha}")
    if not -1e-9 <= bc <= 1.0 + 1e-9:
        raise InputError("descriptors", "intra_similarity", f"coefficient {bc} outside [0, 1]")
    return float(alpha) * (1.0 - math.exp(1.0 - min(max(bc, 0.0), 1.0)))


# ---------------------------------------------------------------------------
# element features

def _grayscale(image: Image) -> np.ndarray:
    px = image.pixels.astype(np.float64)
    return 0.299 * px[:, :, 0] + 0.587 * px[:, :, 1] + 0.114 * px[:, :, 2]


def smoothed_grayscale(image: Image) -> np.ndarray:
    return gaussian_filter(_grayscale(image), _GAUSS_SIGMA, mode="nearest")


def gradients(smooth: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Centered differences with border clamping: gx along x, gy along y."""
    padded_x = np.pad(smooth, ((0, 0), (1, 1)), mode="edge")
    gx = (padded_x[:, 2:] - padded_x[:, :-2]) / 2.0
    padded_y = np.pad(smooth, ((1, 1), (0, 0)), mode="edge")
    gy = (padded_y[2:, :] - padded_y[:-2, :]) / 2.0
    return gx, gy


@lru_cache(maxsize=None)
def _halfdisk_offsets(radius: int, axis: int, theta_index: int):
    """Integer pixel offsets (dy, dx) from the anchor pixel of an element.

    Axis 0 elements sit between vertical pixel neighbours (midpoint offset
    (0, +1/2) from the anchor), axis 1 between horizontal neighbours.  The
    doubled-coordinate arithmetic keeps both the radius test and the side
    test exact; pixels exactly on the dividing line belong to neither side.
    """
    mid2 = (0, 1) if axis == 0 else (1, 0)  # doubled (dx, dy) of midpoint offset
    dir_x, dir_y = _DIRECTIONS[theta_index]
    pos, neg = [], []
    span = radius + 1
    for dy in range(-span, span + 1):
        for dx in range(-span, span + 1):
            rx2 = 2 * dx - mid2[0]
            ry2 = 2 * dy - mid2[1]
            if rx2 * rx2 + ry2 * ry2 > 4 * radius * radius:
                continue
            side = rx2 * dir_x + ry2 * dir_y
            if side > 0:
                pos.append((dy, dx))
            elif side < 0:
                neg.append((dy, dx))
    order = lambda t: (t[0] * t[0] + t[1] * t[1], t)
    return tuple(sorted(pos, key=order)), tuple(sorted(neg, key=order))


def _halfdisk_histogram(image: Image, anchor: tuple[int, int], offsets, bins: int) -> np.ndarray:
    h, w = image.shape
    ar, ac = anchor
    rows, cols = [], []
    for dy, dx in offsets:
        r, c = ar + dy, ac + dx
        if 0 <= r < h and 0 <= c < w:
            rows.append(r)
            cols.append(c)
    if not rows:
        # Clamped to nothing (tiny image); use the nearest in-bounds pixel.
        rows = [min(max(ar, 0), h - 1)]
        cols = [min(max(ac, 0), w - 1)]
    pixels = image.pixels[rows, cols, :].astype(np.int64)
    hist = np.zeros(3 * bins, dtype=np.int64)
    for ch in range(3):
        np.add.at(hist, ch * bins + ((pixels[:, ch] * bins) >> 8), 1)
    return normalize_histogram(hist) * 3.0  # each channel sums to 1


def compute_features(image: Image, elements, config: DescriptorConfig = DescriptorConfig()) -> np.ndarray:
    """Feature matrix for a sequence of contour elements of one image.

    Layout per row: ``3 * bins`` color values (two averaged half-disk
    histograms, channel-normalized, summing to 3), 8 gradient-orientation
    values (L2-normalized over a square cell) and the (x, y) position.
    """
    smooth = smoothed_grayscale(image)
    gx, gy = gradients(smooth)
    magnitude = np.hypot(gx, gy)
    angle_bin = np.mod(np.round(np.arctan2(gy, gx) / (math.pi / 4.0)), 8).astype(np.int64)
    h, w = image.shape

    out = np.zeros((len(elements), config.feature_size), dtype=np.float64)
    for row, el in enumerate(elements):
        axis = 0 if el.y != math.floor(el.y) else 1
        anchor = (int(math.floor(el.y)), int(math.floor(el.x)))
        pos_off, neg_off = _halfdisk_offsets(config.half_disk, axis, el.theta_index)
        color = 0.5 * (
            _halfdisk_histogram(image, anchor, pos_off, config.bins)
            + _halfdisk_histogram(image, anchor, neg_off, config.bins)
        )

        # Square cell around the midpoint, half-open at the low edge so an
        # even cell size selects exactly cell x cell pixels.
        mx2, my2 = int(round(2 * el.x)), int(round(2 * el.y))
        c_lo = max((mx2 - config.cell) // 2 + 1, 0)
        c_hi = min((mx2 + config.cell) // 2, w - 1)
        r_lo = max((my2 - config.cell) // 2 + 1, 0)
        r_hi = min((my2 + config.cell) // 2, h - 1)
        weights = magnitude[r_lo:r_hi + 1, c_lo:c_hi + 1].ravel()
        cell_bins = angle_bin[r_lo:r_hi + 1, c_lo:c_hi + 1].ravel()
        shape = np.bincount(cell_bins, weights=weights, minlength=8).astype(np.float64)
        norm = math.sqrt(float(shape @ shape))
        if norm > 0:
            shape /= norm

        out[row, : 3 * config.bins] = color
        out[row, 3 * config.bins: 3 * config.bins + 8] = shape
        out[row, -2] = el.x
        out[row, -1] = el.y
    return out


def element_feature(image: Image, element: ContourElement, config: DescriptorConfig = DescriptorConfig()) -> np.ndarray:
    return compute_features(image, [element], config)[0]


def inter_element_similarity(f_u: np.ndarray, f_v: np.ndarray, config: DescriptorConfig = DescriptorConfig()) -> float:
    """Gaussian similarity with a hard positional cutoff at the window."""
    f_u = np.asarray(f_u, dtype=np.float64)
    f_v = np.asarray(f_v, dtype=np.float64)
    if f_u.shape != (config.feature_size,) or f_v.shape != (config.feature_size,):
        raise InputError("descriptors", "inter_element_similarity", "feature size mismatch")
    dx = f_u[-2] - f_v[-2]
    dy = f_u[-1] - f_v[-1]
    if math.hypot(dx, dy) >= config.window:
        return 0.0
    d = (f_u - f_v) / config.feature_scale()
    return math.exp(-float(d @ d))


# ---------------------------------------------------------------------------
# affinity assembly

def assemble_affinity(vars: BoundaryVariableSet, images, config: DescriptorConfig = DescriptorConfig()) -> np.ndarray:
    """Objective coefficients for every boundary variable.

    Intra coefficients are boundary-length-weighted color affinities
    (always <= 0).  Inter coefficients sum phased element similarities,
    minus ``mu`` per element pair inside the window, so weak matches come
    out negative and favour separation.
    """
    images = list(images)
    if len(images) != len(vars.graphs):
        raise InputError("descriptors", "assemble_affinity", f"{len(images)} images for {len(vars.graphs)} partitions")

    hists = []
    features = []
    scaled = []
    thetas = []
    positions = []
    scale = None
    for image, graph in zip(images, vars.graphs):
        if image.shape != graph.labels.shape:
            raise InputError("descriptors", "assemble_affinity",
                             f"image {graph.image}: size {image.shape} differs from partition {graph.labels.shape}")
        hists.append(region_histograms(image, LabelMap(graph.labels), config.bins))
        feats = compute_features(image, graph.elements, config)
        features.append(feats)
        if scale is None:
            scale = config.feature_scale()
        scaled.append(feats / scale)
        thetas.append(np.array([e.theta for e in graph.elements], dtype=np.float64))
        positions.append(feats[:, -2:])

    q = np.zeros(len(vars), dtype=np.float64)
    for v in vars.variables:
        if v.kind == "intra":
            graph = vars.graphs[v.image_a]
            bc = bhattacharyya_coefficient(hists[v.image_a][v.region_a], hists[v.image_a][v.region_b])
            q[v.index] = intra_similarity(graph.alpha[(v.region_a, v.region_b)], bc)
        else:
            i, m, j, n = v.image_a, v.region_a, v.image_b, v.region_b
            iu = np.array(vars.graphs[i].elements_by_region[m])
            iv = np.array(vars.graphs[j].elements_by_region[n])
            du = positions[i][iu][:, None, :] - positions[j][iv][None, :, :]
            inside = np.einsum("uvk,uvk->uv", du, du) < config.window * config.window
            if not inside.any():
                q[v.index] = 0.0
                continue
            diff = scaled[i][iu][:, None, :] - scaled[j][iv][None, :, :]
            w = np.exp(-np.einsum("uvk,uvk->uv", diff, diff))
            out_u = _outward(vars.graphs[i], iu, m, thetas[i])
            out_v = _outward(vars.graphs[j], iv, n, thetas[j])
            phase = np.cos(out_v[None, :] - out_u[:, None])
            k_mn = int(inside.sum())
            q[v.index] = float((w * phase)[inside].sum() - config.mu * k_mn)
    return q


def _outward(graph, element_ids, region, theta_arr):
    flip = np.array([graph.elements[e].region_hi == region for e in element_ids])
    return theta_arr[element_ids] + np.where(flip, math.pi, 0.0)
