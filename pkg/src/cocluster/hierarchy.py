"""Binary region hierarchies and their boundary-variable encodings.

A hierarchy over ``N`` leaves is a sequence of ``N - 1`` merges; the k-th
merge joins two existing nodes under parent id ``N + k``.  Any partition
that can be produced by cutting the tree has an exact encoding over the
boundary variables of the leave partition: a variable is 0 iff its two
leaves lie under the same cut node.

``encoding_to_cut`` is the inverse: it either recovers the cut or rejects
the assignment, reporting the lowest tree node whose merging constraints
are violated.  For hierarchies built by merging adjacent regions, the set
of accepted assignments coincides exactly with the feasible set of the
linear constraints emitted by :func:`cocluster.constraints.intra_constraints`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, InputError
from .raster import Image, LabelMap
from . import descriptors
from .adjacency import BoundaryVariableSet, build_graph


@dataclass(frozen=True)
class Hierarchy:
    """A binary merge tree over leaves ``0 .. leaf_count - 1``."""

    leaf_count: int
    merges: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        if self.leaf_count < 1:
            raise InputError("hierarchy", "Hierarchy", f"leaf_count must be >= 1, got {self.leaf_count}")
        merges = tuple((int(a), int(b), int(p)) for a, b, p in self.merges)
        object.__setattr__(self, "merges", merges)
        if len(merges) != self.leaf_count - 1:
            raise InputError(
                "hierarchy", "Hierarchy",
                f"expected {self.leaf_count - 1} merges for {self.leaf_count} leaves, got {len(merges)}",
            )
        used = set()
        for k, (a, b, p) in enumerate(merges):
            if p != self.leaf_count + k:
                raise InputError("hierarchy", "Hierarchy", f"merge {k}: parent id {p}, expected {self.leaf_count + k}")
            if a == b:
                raise InputError("hierarchy", "Hierarchy", f"merge {k}: children must differ")
            for child in (a, b):
                if not (0 <= child < p):
                    raise InputError("hierarchy", "Hierarchy", f"merge {k}: child {child} out of range")
                if child in used:
                    raise InputError("hierarchy", "Hierarchy", f"merge {k}: node {child} already merged")
                used.add(child)

    @property
    def n_nodes(self) -> int:
        return 2 * self.leaf_count - 1

    @property
    def root(self) -> int:
        return self.n_nodes - 1

    def children(self, node: int) -> tuple[int, int]:
        if node < self.leaf_count or node >= self.n_nodes:
            raise InputError("hierarchy", "children", f"node {node} is not internal")
        a, b, _ = self.merges[node - self.leaf_count]
        return a, b

    def leaves_under(self, node: int) -> frozenset[int]:
        return self._leaf_sets()[node]

    def _leaf_sets(self) -> list[frozenset[int]]:
        sets: list[frozenset[int]] = [frozenset([i]) for i in range(self.leaf_count)]
        for a, b, _ in self.merges:
            sets.append(sets[a] | sets[b])
        return sets

    def validate_cut(self, nodes) -> tuple[int, ...]:
        """Check that ``nodes`` partition the leaf set; return them sorted."""
        nodes = tuple(sorted(int(n) for n in nodes))
        sets = self._leaf_sets()
        seen: set[int] = set()
        for n in nodes:
            if not (0 <= n < self.n_nodes):
                raise InputError("hierarchy", "validate_cut", f"node {n} out of range")
            leaves = sets[n]
            if seen & leaves:
                raise InputError("hierarchy", "validate_cut", f"node {n} overlaps earlier cut nodes")
            seen |= leaves
        if len(seen) != self.leaf_count:
            raise InputError("hierarchy", "validate_cut", "cut does not cover all leaves")
        return nodes


@dataclass(frozen=True)
class TreeCut:
    """A set of tree nodes whose leaf sets partition the leaves."""

    nodes: tuple[int, ...]


@dataclass(frozen=True)
class DecodeResult:
    """Outcome of decoding a binary assignment back into a tree cut."""

    cut: TreeCut | None
    violated_node: int | None

    @property
    def ok(self) -> bool:
        return self.cut is not None


# ---------------------------------------------------------------------------
# construction

def build_bpt(image: Image, leaves: LabelMap) -> Hierarchy:
    """Greedy binary partition tree over a leave partition.

    At every step the adjacent pair with the highest Bhattacharyya
    coefficient between 8-bin-per-channel color histograms is merged; the
    merged histogram is the pixel-count-weighted sum of the children
    (i.e. the sum of raw counts, renormalized).  Exact similarity ties are
    broken toward the smallest ``(min id, max id)`` pair, which makes the
    merge order fully deterministic.
    """
    if image.shape != leaves.shape:
        raise InputError("hierarchy", "build_bpt", f"image {image.shape} vs leaves {leaves.shape} size mismatch")
    n = leaves.n_regions
    counts = descriptors.histogram_counts(image, leaves)
    hists = {r: counts[r].astype(np.float64) for r in range(n)}
    adj: dict[int, set[int]] = {r: set() for r in range(n)}
    for m, k in build_graph(leaves).edges:
        adj[m].add(k)
        adj[k].add(m)

    def bc_of(a: int, b: int) -> float:
        return descriptors.bhattacharyya_coefficient(
            descriptors.normalize_histogram(hists[a]), descriptors.normalize_histogram(hists[b])
        )

    alive = set(range(n))
    merges = []
    next_id = n
    while len(alive) > 1:
        best = None
        best_pair = None
        for a in sorted(alive):
            for b in sorted(adj[a]):
                if b <= a:
                    continue
                bc = bc_of(a, b)
                if best is None or bc > best or (bc == best and (a, b) < best_pair):
                    best, best_pair = bc, (a, b)
        if best_pair is None:
            raise InputError("hierarchy", "build_bpt", "adjacency graph is disconnected")
        a, b = best_pair
        merges.append((a, b, next_id))
        hists[next_id] = hists[a] + hists[b]
        neighbors = (adj[a] | adj[b]) - {a, b}
        adj[next_id] = neighbors
        for c in neighbors:
            adj[c].discard(a)
            adj[c].discard(b)
            adj[c].add(next_id)
        for gone in (a, b):
            alive.discard(gone)
            del adj[gone]
        alive.add(next_id)
        next_id += 1
    return Hierarchy(leaf_count=n, merges=tuple(merges))


# ---------------------------------------------------------------------------
# JSON interchange

def hierarchy_to_json(h: Hierarchy) -> str:
    return json.dumps({"leaf_count": h.leaf_count, "merges": [list(m) for m in h.merges]})


def hierarchy_from_json(text: str) -> Hierarchy:
    """Parse a hierarchy; non-binary merge entries are binarized.

    An entry ``[c1, ..., ck, parent]`` with ``k > 2`` children is folded
    left-to-right in listed order; internal ids are reassigned consecutively
    in merge order.
    """
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError("hierarchy", "hierarchy_from_json", f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise FormatError("hierarchy", "hierarchy_from_json", "top level must be an object")
    try:
        leaf_count = int(obj["leaf_count"])
        entries = obj["merges"]
    except (KeyError, TypeError, ValueError):
        raise FormatError("hierarchy", "hierarchy_from_json", "need integer 'leaf_count' and list 'merges'") from None
    if not isinstance(entries, list):
        raise FormatError("hierarchy", "hierarchy_from_json", "'merges' must be a list")

    id_map = {i: i for i in range(leaf_count)}
    merges: list[tuple[int, int, int]] = []
    next_id = leaf_count
    for k, entry in enumerate(entries):
        if not isinstance(entry, list) or len(entry) < 3 or not all(isinstance(v, int) for v in entry):
            raise FormatError("hierarchy", "hierarchy_from_json", f"merges[{k}]: need [child, child, ..., parent] ints")
        *children, parent = entry
        try:
            mapped = [id_map[c] for c in children]
        except KeyError as exc:
            raise FormatError("hierarchy", "hierarchy_from_json", f"merges[{k}]: unknown child id {exc}") from None
        acc = mapped[0]
        for c in mapped[1:]:
            merges.append((acc, c, next_id))
            acc = next_id
            next_id += 1
        if parent in id_map:
            raise FormatError("hierarchy", "hierarchy_from_json", f"merges[{k}]: duplicate node id {parent}")
        id_map[parent] = acc
    try:
        return Hierarchy(leaf_count=leaf_count, merges=tuple(merges))
    except InputError as exc:
        raise FormatError("hierarchy", "hierarchy_from_json", exc.cause) from None


def load_hierarchy(path: str | Path) -> Hierarchy:
    path = Path(path)
    if not path.exists():
        raise InputError("hierarchy", "load_hierarchy", f"no such file: {path}")
    return hierarchy_from_json(path.read_text())


def save_hierarchy(h: Hierarchy, path: str | Path) -> None:
    Path(path).write_text(hierarchy_to_json(h) + "\n")


# ---------------------------------------------------------------------------
# encodings

def _intra_pairs(vars: BoundaryVariableSet, image: int) -> list[tuple[int, int]]:
    graph = vars.graphs[image]
    return list(graph.edges)


def _check_alignment(h: Hierarchy, vars: BoundaryVariableSet, image: int) -> None:
    if image < 0 or image >= len(vars.graphs):
        raise InputError("hierarchy", "encoding", f"image {image} out of range")
    if vars.graphs[image].n_regions != h.leaf_count:
        raise InputError(
            "hierarchy", "encoding",
            f"hierarchy has {h.leaf_count} leaves but partition of image {image} has {vars.graphs[image].n_regions} regions",
        )


def merging_step_encoding(h: Hierarchy, vars: BoundaryVariableSet, step: int, image: int = 0) -> np.ndarray:
    """Encoding of the partition reached after ``step`` merges.

    Returned over the intra variables of ``image`` in variable-id order;
    ``step = 0`` is the leave partition (all ones), ``step = N - 1`` the
    root (all zeros).
    """
    _check_alignment(h, vars, image)
    if not (0 <= step <= len(h.merges)):
        raise InputError("hierarchy", "merging_step_encoding", f"step {step} out of range 0..{len(h.merges)}")
    group = list(range(h.leaf_count))

    def find(i: int) -> int:
        while group[i] != i:
            group[i] = group[group[i]]
            i = group[i]
        return i

    sets = h._leaf_sets()
    for a, b, _ in h.merges[:step]:
        ra = find(min(sets[a]))
        rb = find(min(sets[b]))
        group[max(ra, rb)] = min(ra, rb)
    return np.array([0 if find(m) == find(n) else 1 for m, n in _intra_pairs(vars, image)], dtype=np.int8)


def cut_to_encoding(h: Hierarchy, vars: BoundaryVariableSet, cut: TreeCut, image: int = 0) -> np.ndarray:
    """Encode a tree cut: a variable is 0 iff both leaves share a cut node."""
    _check_alignment(h, vars, image)
    nodes = h.validate_cut(cut.nodes)
    sets = h._leaf_sets()
    owner = {}
    for node in nodes:
        for leaf in sets[node]:
            owner[leaf] = node
    return np.array([0 if owner[m] == owner[n] else 1 for m, n in _intra_pairs(vars, image)], dtype=np.int8)


def encoding_to_cut(h: Hierarchy, vars: BoundaryVariableSet, assignment, image: int = 0) -> DecodeResult:
    """Decode a binary assignment into a tree cut, or reject it.

    Rejection reports the lowest tree node at which the assignment breaks
    the merging rules: either the boundary variables crossing between the
    node's two siblings disagree, or they are 0 while some boundary inside
    a sibling is still active.
    """
    _check_alignment(h, vars, image)
    pairs = _intra_pairs(vars, image)
    values = np.asarray(assignment)
    if values.shape != (len(pairs),):
        raise InputError("hierarchy", "encoding_to_cut", f"expected {len(pairs)} values, got shape {values.shape}")
    if not np.isin(values, (0, 1)).all():
        raise InputError("hierarchy", "encoding_to_cut", "assignment must be binary")

    sets = h._leaf_sets()
    # lowest common ancestor of each pair: the first merge joining them
    lca = {}
    for a, b, p in h.merges:
        in_a = sets[a]
        for k, (m, n) in enumerate(pairs):
            if k in lca:
                continue
            if (m in in_a) != (n in in_a) and m in sets[p] and n in sets[p]:
                lca[k] = p
    cross: dict[int, list[int]] = {p: [] for _, _, p in h.merges}
    for k, p in lca.items():
        cross[p].append(k)
    under: dict[int, list[int]] = {node: [] for node in range(h.n_nodes)}
    for a, b, p in h.merges:
        under[p] = under[a] + under[b] + cross[p]

    fully = [True] * h.leaf_count + [False] * len(h.merges)
    for a, b, p in h.merges:
        cross_vals = values[cross[p]] if cross[p] else None
        if cross_vals is None:
            continue  # non-adjacent siblings: no constraints, never mergeable
        if cross_vals.min() != cross_vals.max():
            return DecodeResult(None, p)
        if cross_vals[0] == 0:
            inner = [k for k in under[p] if k not in set(cross[p])]
            if any(values[k] == 1 for k in inner):
                return DecodeResult(None, p)
            fully[p] = True

    chosen: list[int] = []
    stack = [h.root]
    while stack:
        node = stack.pop()
        if fully[node]:
            chosen.append(node)
        else:
            a, b = h.children(node)
            stack.extend((b, a))
    cut = TreeCut(tuple(sorted(chosen)))
    if not np.array_equal(cut_to_encoding(h, vars, cut, image), values):
        # Only reachable for imported trees with non-adjacent siblings.
        return DecodeResult(None, h.root)
    return DecodeResult(cut, None)
