"""Region adjacency graphs, contour elements and boundary variables.

Every pair of 4-adjacent pixels with different labels contributes one
contour element: a point sitting on the shared pixel edge, tagged with the
ordered region pair ``(lo, hi)`` and a unit normal pointing from the lower
into the higher region id.  Normals are estimated from the two 3x3 pixel
neighbourhoods around the element and quantized to eight directions, which
fixes the phase convention used by the affinity assembly.

Coordinates are image coordinates: ``x`` grows to the right, ``y`` grows
downward, and angles are measured from the +x axis toward +y, so an element
whose normal points straight down has ``theta = pi/2``.

``enumerate_variables`` turns one graph per image into a flat, densely
indexed set of boundary variables: one intra variable per adjacent region
pair inside each image, plus one inter variable for every cross-image
region pair that has at least one pair of contour elements closer than the
matching window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError
from .raster import LabelMap

# The eight quantized normal directions, as exact integer vectors (dx, dy).
# Index k corresponds to the angle k * pi/4.
_DIRECTIONS = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))


@dataclass(frozen=True)
class ContourElement:
    """One unit of boundary between two regions of one image."""

    index: int
    image: int
    x: float
    y: float
    region_lo: int
    region_hi: int
    theta_index: int  # quantized direction, angle = theta_index * pi/4

    @property
    def theta(self) -> float:
        """Normal direction from ``region_lo`` into ``region_hi``, in [0, 2*pi)."""
        return self.theta_index * (math.pi / 4.0)

    def outward_theta(self, region: int) -> float:
        """Outward normal of ``region`` at this element."""
        if region == self.region_lo:
            return self.theta
        if region == self.region_hi:
            return (self.theta_index * (math.pi / 4.0) + math.pi) % (2.0 * math.pi)
        raise InputError("adjacency", "outward_theta", f"region {region} not incident to element {self.index}")


@dataclass(frozen=True)
class RegionGraph:
    """Adjacency structure of one leave partition."""

    image: int
    n_regions: int
    labels: np.ndarray  # the (H, W) partition the graph was built from
    edges: tuple[tuple[int, int], ...]  # sorted (m, n) pairs with m < n
    alpha: dict[tuple[int, int], int]  # shared boundary length per edge
    elements: tuple[ContourElement, ...]
    elements_by_region: dict[int, tuple[int, ...]]
    elements_by_edge: dict[tuple[int, int], tuple[int, ...]]

    @property
    def total_boundary(self) -> int:
        """Total boundary mass of the partition (sum of all alphas)."""
        return sum(self.alpha.values())

    def neighbors(self, region: int) -> tuple[int, ...]:
        return tuple(sorted(set(n for m, n in self.edges if m == region) | set(m for m, n in self.edges if n == region)))


def build_graph(leaves: LabelMap, image: int = 0) -> RegionGraph:
    """Build the region adjacency graph and contour elements of a partition."""
    labels = leaves.labels
    h, w = labels.shape

    # Boundary pixel pairs along both axes.  Vertical pairs share a
    # horizontal pixel edge below pixel (r, c); horizontal pairs share a
    # vertical edge right of (r, c).
    records = []  # (y, x, axis, r, c, la, lb)
    vr, vc = np.nonzero(labels[:-1, :] != labels[1:, :])
    for r, c in zip(vr.tolist(), vc.tolist()):
        records.append((r + 0.5, float(c), 0, r, c, int(labels[r, c]), int(labels[r + 1, c])))
    hr, hc = np.nonzero(labels[:, :-1] != labels[:, 1:])
    for r, c in zip(hr.tolist(), hc.tolist()):
        records.append((float(r), c + 0.5, 1, r, c, int(labels[r, c]), int(labels[r, c + 1])))
    records.sort(key=lambda t: (t[0], t[1]))

    padded = np.full((h + 2, w + 2), -1, dtype=np.int64)
    padded[1:-1, 1:-1] = labels

    elements = []
    alpha: dict[tuple[int, int], int] = {}
    by_region: dict[int, list[int]] = {}
    by_edge: dict[tuple[int, int], list[int]] = {}
    for y, x, axis, r, c, la, lb in records:
        lo, hi = (la, lb) if la < lb else (lb, la)
        theta_index = _normal_index(padded, y, x, axis, r, c, la, lb, lo)
        idx = len(elements)
        elements.append(ContourElement(idx, image, x, y, lo, hi, theta_index))
        key = (lo, hi)
        alpha[key] = alpha.get(key, 0) + 1
        by_edge.setdefault(key, []).append(idx)
        by_region.setdefault(lo, []).append(idx)
        by_region.setdefault(hi, []).append(idx)

    return RegionGraph(
        image=image,
        n_regions=leaves.n_regions,
        labels=labels,
        edges=tuple(sorted(alpha)),
        alpha=alpha,
        elements=tuple(elements),
        elements_by_region={k: tuple(v) for k, v in by_region.items()},
        elements_by_edge={k: tuple(v) for k, v in by_edge.items()},
    )


def _normal_index(padded, y, x, axis, r, c, la, lb, lo) -> int:
    """Quantized normal from the 3x3 neighbourhoods of the two boundary pixels.

    Pixels of the higher region pull the direction toward themselves, pixels
    of the lower region push it away; the result is snapped to the nearest
    of eight directions.  Scaled integer arithmetic keeps the vote exact.
    """
    hi = lb if lo == la else la
    if axis == 0:
        rows, cols = range(r - 1, r + 3), range(c - 1, c + 2)
    else:
        rows, cols = range(r - 1, r + 2), range(c - 1, c + 3)
    # Work in half-pixel units so the midpoint offset stays integral.
    dx2 = 0
    dy2 = 0
    for rr in rows:
        for cc in cols:
            lab = padded[rr + 1, cc + 1]
            if lab == hi:
                sign = 1
            elif lab == lo:
                sign = -1
            else:
                continue
            dx2 += sign * int(round(2 * (cc - x)))
            dy2 += sign * int(round(2 * (rr - y)))
    if dx2 == 0 and dy2 == 0:
        # Degenerate vote; fall back to the axis direction from lo into hi.
        if axis == 0:
            return 2 if la == lo else 6
        return 0 if la == lo else 4
    angle = math.atan2(dy2, dx2)
    return int(round(angle / (math.pi / 4.0))) % 8


@dataclass(frozen=True)
class BoundaryVariable:
    """One binary boundary variable between two regions.

    Value 1 means the boundary is active (regions separated), 0 means the
    regions are merged into the same cluster.
    """

    index: int
    kind: str  # "intra" | "inter"
    image_a: int
    region_a: int
    image_b: int
    region_b: int

    @property
    def key(self) -> tuple[tuple[int, int], tuple[int, int]]:
        return ((self.image_a, self.region_a), (self.image_b, self.region_b))


@dataclass(frozen=True)
class BoundaryVariableSet:
    """Densely indexed boundary variables over a collection of partitions."""

    graphs: tuple[RegionGraph, ...]
    window: float
    variables: tuple[BoundaryVariable, ...]
    _by_key: dict = field(repr=False, default_factory=dict)

    def __len__(self) -> int:
        return len(self.variables)

    def id_of(self, image_a: int, region_a: int, image_b: int, region_b: int) -> int:
        key = tuple(sorted(((image_a, region_a), (image_b, region_b))))
        try:
            return self._by_key[key]
        except KeyError:
            raise InputError("adjacency", "id_of", f"no boundary variable for {key}") from None

    def find(self, image_a: int, region_a: int, image_b: int, region_b: int) -> int | None:
        key = tuple(sorted(((image_a, region_a), (image_b, region_b))))
        return self._by_key.get(key)

    def intra_ids(self, image: int) -> list[int]:
        return [v.index for v in self.variables if v.kind == "intra" and v.image_a == image]

    def inter_ids(self) -> list[int]:
        return [v.index for v in self.variables if v.kind == "inter"]


def enumerate_variables(graphs, window: float = 20.0) -> BoundaryVariableSet:
    """Assign dense variable ids: image-major intra first, then inter pairs.

    An inter variable between region ``m`` of image ``i`` and region ``n``
    of image ``j`` exists iff some contour element of ``m`` lies strictly
    closer than ``window`` (Euclidean pixels) to some contour element of
    ``n``; all images share one pixel coordinate frame.
    """
    graphs = tuple(graphs)
    if not graphs:
        raise InputError("adjacency", "enumerate_variables", "no graphs")
    if [g.image for g in graphs] != list(range(len(graphs))):
        raise InputError("adjacency", "enumerate_variables", "graph image indices must be 0..M-1 in order")
    if window <= 0:
        raise InputError("adjacency", "enumerate_variables", f"window must be positive, got {window}")

    variables: list[BoundaryVariable] = []
    for g in graphs:
        for m, n in g.edges:
            variables.append(BoundaryVariable(len(variables), "intra", g.image, m, g.image, n))

    trees = []
    positions = []
    for g in graphs:
        pos = np.array([(e.x, e.y) for e in g.elements], dtype=np.float64).reshape(len(g.elements), 2)
        positions.append(pos)
        trees.append(cKDTree(pos) if len(g.elements) else None)

    for i in range(len(graphs)):
        for j in range(i + 1, len(graphs)):
            if trees[i] is None or trees[j] is None:
                continue
            pairs: set[tuple[int, int]] = set()
            neighbor_lists = trees[i].query_ball_tree(trees[j], r=window)
            for u, close in enumerate(neighbor_lists):
                if not close:
                    continue
                eu = graphs[i].elements[u]
                du = positions[i][u] - positions[j][np.array(close)]
                strict = np.array(close)[np.einsum("ij,ij->i", du, du) < window * window]
                for v in strict.tolist():
                    ev = graphs[j].elements[v]
                    for m in (eu.region_lo, eu.region_hi):
                        for n in (ev.region_lo, ev.region_hi):
                            pairs.add((m, n))
            for m, n in sorted(pairs):
                variables.append(BoundaryVariable(len(variables), "inter", i, m, j, n))

    by_key = {v.key: v.index for v in variables}
    return BoundaryVariableSet(graphs=graphs, window=float(window), variables=tuple(variables), _by_key=by_key)
