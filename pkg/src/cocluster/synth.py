"""Deterministic synthetic scenes for tests and the `synth` command.

Every generator is pure in its seed: the same seed yields byte-identical
images, leaf partitions and masks on any platform (PCG64 stream stability).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .hierarchy import Hierarchy
from .raster import Image, LabelMap

GRAY_A = 118
GRAY_B = 138
RED = (200, 40, 40)
BLUE = (40, 40, 200)
GREEN = (40, 180, 40)
YELLOW = (220, 210, 60)


@dataclass(frozen=True)
class SynthScene:
    """A generated sequence plus its ground truth.

    ``masks[f][k]`` is the boolean pixel mask of object k in frame f; the
    object order is stable across frames, so mask k tracks one object.
    """

    images: tuple[Image, ...]
    leaves: tuple[LabelMap, ...]
    masks: tuple[tuple[np.ndarray, ...], ...]
    seed: int


def voronoi_labels(height: int, width: int, sites: np.ndarray) -> np.ndarray:
    """Nearest-site partition; ties go to the lowest site index."""
    ys, xs = np.mgrid[0:height, 0:width]
    d = (ys[..., None] - sites[:, 0]) ** 2 + (xs[..., None] - sites[:, 1]) ** 2
    return np.argmin(d, axis=-1).astype(np.int64)


def jittered_sites(rng: np.random.Generator, height: int, width: int,
                   rows: int, cols: int, jitter: float = 0.33) -> np.ndarray:
    """Grid-aligned fragment sites with bounded jitter.

    Compared to uniform sites this keeps the fragments compact and their
    mutual boundaries short, so no single merge swallows more boundary
    mass than a resolution band is wide.
    """
    ys = (np.arange(rows) + 0.5) * height / rows
    xs = (np.arange(cols) + 0.5) * width / cols
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    jy = rng.uniform(-jitter, jitter, size=gy.shape) * height / rows
    jx = rng.uniform(-jitter, jitter, size=gx.shape) * width / cols
    return np.stack([(gy + jy).ravel(), (gx + jx).ravel()], axis=1).astype(np.int64)


def _dithered_background(rng: np.random.Generator, fragments: np.ndarray) -> np.ndarray:
    """Two-gray dither with a per-fragment mixing proportion.

    Fragments end up with slightly different histograms, so merging them is
    cheap but not entirely free — coarse levels eat the background first.
    """
    h, w = fragments.shape
    n = int(fragments.max()) + 1
    proportion = rng.uniform(0.35, 0.65, size=n)
    noise = rng.random(size=(h, w))
    value = np.where(noise < proportion[fragments], GRAY_A, GRAY_B).astype(np.uint8)
    return np.repeat(value[..., None], 3, axis=2)


def _paint_rect(pixels: np.ndarray, labels: np.ndarray, x: int, y: int,
                w: int, h: int, color, label: int) -> np.ndarray:
    """Draw a solid rectangle as a single leaf region."""
    if x < 0 or y < 0 or x + w > pixels.shape[1] or y + h > pixels.shape[0]:
        raise InputError("synth", "_paint_rect", f"rectangle {x},{y},{w},{h} leaves the canvas")
    pixels[y:y + h, x:x + w] = color
    labels[y:y + h, x:x + w] = label
    mask = np.zeros(pixels.shape[:2], dtype=bool)
    mask[y:y + h, x:x + w] = True
    return mask


def _frame(rng_pixels: np.ndarray, fragments: np.ndarray, rects) -> tuple[Image, LabelMap, tuple]:
    pixels = rng_pixels.copy()
    labels = fragments.copy()
    next_label = int(fragments.max()) + 1
    masks = []
    for x, y, w, h, color in rects:
        masks.append(_paint_rect(pixels, labels, x, y, w, h, color, next_label))
        next_label += 1
    return Image(pixels), LabelMap(labels), tuple(masks)


def two_rectangle_scene(seed: int = 19, height: int = 90, width: int = 120,
                        grid: tuple[int, int] = (4, 6)) -> SynthScene:
    """Two frames, two solid rectangles over a dithered fragment background.

    The camera is static; both rectangles shift by (2, 1) pixels in the
    second frame.  Each solid rectangle is one leaf (a leave partition
    never splits a flat color), while the background fragments supply the
    multi-leaf merging work.  The default geometry is tuned so every level
    of a ten-step 0.40 -> 0.10 resolution schedule admits a tree cut in
    both frames and the rectangle outlines fit under the finest band.
    """
    rng = np.random.default_rng(seed)
    cells = voronoi_labels(height, width, jittered_sites(rng, height, width, *grid))
    background = _dithered_background(rng, cells)
    rect_a = (14, 12, 14, 8, RED)
    rect_b = (88, 67, 14, 8, BLUE)
    frame0 = _frame(background, cells, [rect_a, rect_b])
    shifted = [(x + 2, y + 1, w, h, c) for x, y, w, h, c in (rect_a, rect_b)]
    frame1 = _frame(background, cells, shifted)
    return SynthScene(
        images=(frame0[0], frame1[0]),
        leaves=(frame0[1], frame1[1]),
        masks=(frame0[2], frame1[2]),
        seed=seed,
    )


def translated_sequence(seed: int = 19, frames: int = 6, height: int = 90,
                        width: int = 120, grid: tuple[int, int] = (4, 6),
                        step: int = 3) -> SynthScene:
    """A single rectangle translating ``step`` px per frame over a static background."""
    if frames < 2:
        raise InputError("synth", "translated_sequence", "need at least two frames")
    rng = np.random.default_rng(seed)
    cells = voronoi_labels(height, width, jittered_sites(rng, height, width, *grid))
    background = _dithered_background(rng, cells)
    x0, y0, w, h = 15, 40, 14, 8
    images, leaves, masks = [], [], []
    for f in range(frames):
        img, lab, msk = _frame(background, cells, [(x0 + step * f, y0, w, h, RED)])
        images.append(img)
        leaves.append(lab)
        masks.append(msk)
    return SynthScene(tuple(images), tuple(leaves), tuple(masks), seed)


def fixture_config():
    """Descriptor parameters matched to the synthetic scene scale.

    The library defaults (20 px window, μ = 0.2) suit full-size footage;
    on these small canvases the window must shrink to the object scale and
    μ to the shorter contours, or no cross-image pair can score positive.
    """
    from .descriptors import DescriptorConfig

    return DescriptorConfig(window=6.0, mu=0.02)


def four_leaf_fixture() -> tuple[Image, LabelMap, Hierarchy]:
    """The 4-region worked example used throughout the encoding tests.

    Regions 0|1 sit over 2|3 with region 2 reaching under region 1, giving
    exactly the five adjacent pairs (0,1) (0,2) (1,2) (1,3) (2,3).  The
    hierarchy merges 0+1, then 2+3, then everything.
    """
    labels = np.array(
        [
            [0, 0, 1, 1],
            [0, 0, 1, 1],
            [2, 2, 2, 3],
            [2, 2, 2, 3],
        ],
        dtype=np.int64,
    )
    palette = {0: RED, 1: GREEN, 2: BLUE, 3: YELLOW}
    pixels = np.zeros((4, 4, 3), dtype=np.uint8)
    for lab, color in palette.items():
        pixels[labels == lab] = color
    h = Hierarchy(4, ((0, 1, 4), (2, 3, 5), (4, 5, 6)))
    return Image(pixels), LabelMap(labels), h


def random_scene(rng: np.random.Generator, n_leaves: int, height: int = 18,
                 width: int = 30, max_edges: int | None = None):
    """A random colored leaf partition (rejection-sampled edge budget).

    Used by the exhaustive constraint/cut equivalence checks, which need the
    intra variable count small enough to enumerate.
    """
    from .adjacency import build_graph

    for _ in range(200):
        sites = np.stack([rng.integers(0, height, n_leaves), rng.integers(0, width, n_leaves)], axis=1)
        if len(np.unique(sites[:, 0] * width + sites[:, 1])) != n_leaves:
            continue
        cells = voronoi_labels(height, width, sites)
        if len(np.unique(cells)) != n_leaves:
            continue
        leaves = LabelMap(cells)
        if leaves.n_regions != n_leaves:
            continue
        graph = build_graph(leaves)
        if max_edges is not None and len(graph.edges) > max_edges:
            continue
        colors = rng.integers(30, 226, size=(n_leaves, 3))
        pixels = colors[cells].astype(np.uint8)
        noise = rng.integers(-12, 13, size=pixels.shape)
        pixels = np.clip(pixels.astype(np.int16) + noise, 0, 255).astype(np.uint8)
        return Image(pixels), leaves
    raise InputError("synth", "random_scene",
                     f"could not sample a {n_leaves}-leaf scene within the edge budget")


def random_hierarchy(rng: np.random.Generator, leaves: LabelMap) -> Hierarchy:
    """A random (adjacency-respecting) merge order over the leaf partition."""
    from .adjacency import build_graph

    graph = build_graph(leaves)
    n = leaves.n_regions
    adj = {i: set() for i in range(n)}
    for a, b in graph.edges:
        adj[a].add(b)
        adj[b].add(a)
    merges = []
    nxt = n
    nodes = set(range(n))
    while len(nodes) > 1:
        candidates = sorted({tuple(sorted((u, v))) for u in nodes for v in adj[u] if v in nodes and v != u})
        a, b = candidates[int(rng.integers(0, len(candidates)))]
        merges.append((a, b, nxt))
        nodes.discard(a)
        nodes.discard(b)
        nodes.add(nxt)
        adj[nxt] = (adj[a] | adj[b]) - {a, b, nxt}
        for u in adj[nxt]:
            adj[u].discard(a)
            adj[u].discard(b)
            adj[u].add(nxt)
        nxt += 1
    return Hierarchy(n, tuple(merges))
