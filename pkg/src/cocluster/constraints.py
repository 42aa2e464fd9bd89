"""Linear constraint generators over boundary variables.

Four families:

* intra: per internal hierarchy node, the boundary variables crossing
  between its two siblings must agree (chained equalities), and the
  boundaries inside the siblings can only stay active while the siblings
  stay separated (one subtree-sum inequality anchored on the smallest
  cross variable).
* triangle: on every 3-clique of the combined region graph that involves
  at least one inter-image pair, each boundary is at most the sum of the
  other two, ruling out the inconsistent (1, 0, 0) pattern.
* band: per image, the (optionally boundary-length-weighted) count of
  active intra boundaries is pinched into a resolution band.
* freeze: single-variable equalities that transplant an already published
  clustering into a new solve.

All coefficients are exact rationals; generated right-hand sides are
integers, so feasibility of binary points can be checked exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .adjacency import BoundaryVariableSet
from .errors import InputError
from .hierarchy import Hierarchy

_KINDS = ("eq", "le")


@dataclass(frozen=True)
class LinearConstraint:
    """``sum(coeff * b[var]) (== | <=) rhs``"""

    kind: str
    terms: tuple[tuple[int, Fraction], ...]
    rhs: Fraction
    tag: str

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InputError("constraints", "LinearConstraint", f"kind must be one of {_KINDS}, got {self.kind!r}")
        terms = tuple((int(v), Fraction(c)) for v, c in self.terms)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "rhs", Fraction(self.rhs))
        seen = set()
        for v, c in terms:
            if v in seen:
                raise InputError("constraints", "LinearConstraint", f"variable {v} appears twice")
            seen.add(v)
            if c == 0:
                raise InputError("constraints", "LinearConstraint", f"zero coefficient on variable {v}")

    def satisfied(self, values, tol: Fraction = Fraction(0)) -> bool:
        """Exact check against a full assignment (indexable by variable id)."""
        total = sum((c * Fraction(values[v]) for v, c in self.terms), Fraction(0))
        if self.kind == "eq":
            return abs(total - self.rhs) <= tol
        return total <= self.rhs + tol


def intra_constraints(h: Hierarchy, vars: BoundaryVariableSet, image: int = 0) -> list[LinearConstraint]:
    """Hierarchical merging constraints of one image.

    For a node with cross-sibling variables ``c_1 < c_2 < ... < c_k`` (by
    region pair) and inner variables ``I``: emit ``c_1 = c_2``, ...,
    ``c_(k-1) = c_k`` and ``sum(I) <= |I| * c_1``.  Nodes with at most one
    cross variable emit no equalities; nodes with no inner variable emit no
    inequality.
    """
    if image < 0 or image >= len(vars.graphs):
        raise InputError("constraints", "intra_constraints", f"image {image} out of range")
    graph = vars.graphs[image]
    if graph.n_regions != h.leaf_count:
        raise InputError("constraints", "intra_constraints",
                         f"hierarchy has {h.leaf_count} leaves, partition has {graph.n_regions} regions")

    sets = h._leaf_sets()
    pairs = list(graph.edges)
    out: list[LinearConstraint] = []
    one = Fraction(1)
    for a, b, p in h.merges:
        la, lb = sets[a], sets[b]
        cross = []
        inner = []
        for m, n in pairs:
            if m in la and n in lb or m in lb and n in la:
                cross.append((m, n))
            elif (m in la and n in la) or (m in lb and n in lb):
                inner.append((m, n))
        cross.sort()
        inner.sort()
        ids = [vars.id_of(image, m, image, n) for m, n in cross]
        for left, right in zip(ids, ids[1:]):
            out.append(LinearConstraint("eq", ((left, one), (right, -one)), Fraction(0), "intra-equal"))
        if inner and ids:
            terms = [(vars.id_of(image, m, image, n), one) for m, n in inner]
            terms.append((ids[0], Fraction(-len(inner))))
            out.append(LinearConstraint("le", tuple(terms), Fraction(0), "intra-subtree"))
    return out


def triangle_constraints(vars: BoundaryVariableSet) -> list[LinearConstraint]:
    """Cycle inequalities on 3-cliques touching at least one inter pair.

    Cliques whose three edges all live inside one image are left to the
    hierarchical constraints.  Each qualifying clique yields its three
    rotations ``b_uv <= b_uw + b_vw`` etc.
    """
    neighbors: dict[tuple[int, int], set[tuple[int, int]]] = {}
    for v in vars.variables:
        a = (v.image_a, v.region_a)
        b = (v.image_b, v.region_b)
        neighbors.setdefault(a, set()).add(b)
        neighbors.setdefault(b, set()).add(a)

    one = Fraction(1)
    out: list[LinearConstraint] = []
    for u in sorted(neighbors):
        for v in sorted(neighbors[u]):
            if v <= u:
                continue
            for w in sorted(neighbors[u] & neighbors[v]):
                if w <= v:
                    continue
                if u[0] == v[0] == w[0]:
                    continue
                uv = vars.id_of(u[0], u[1], v[0], v[1])
                uw = vars.id_of(u[0], u[1], w[0], w[1])
                vw = vars.id_of(v[0], v[1], w[0], w[1])
                for lhs, r1, r2 in ((uv, uw, vw), (uw, uv, vw), (vw, uv, uw)):
                    out.append(LinearConstraint("le", ((lhs, one), (r1, -one), (r2, -one)), Fraction(0), "triangle"))
    return out


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        # str() round-trips the decimal literal users actually wrote
        return Fraction(str(x))
    raise InputError("constraints", "band_constraints", f"cannot interpret {x!r} as a rational")


def band_constraints(vars: BoundaryVariableSet, image: int, t_r, beta, weighted: bool = True) -> list[LinearConstraint]:
    """Resolution band on the active intra boundary mass of one image.

    With total mass ``N_b`` (sum of boundary lengths, or variable count in
    unweighted mode) the active mass is constrained to
    ``ceil((t_r - beta) * N_b) <= mass <= floor(t_r * N_b)``.
    The bounds are computed in exact rational arithmetic.
    """
    if image < 0 or image >= len(vars.graphs):
        raise InputError("constraints", "band_constraints", f"image {image} out of range")
    t = _as_fraction(t_r)
    b = _as_fraction(beta)
    if not 0 < t <= 1:
        raise InputError("constraints", "band_constraints", f"t_r must be in (0, 1], got {t_r}")
    if b < 0 or b > t:
        raise InputError("constraints", "band_constraints", f"beta must be in [0, t_r], got {beta}")

    graph = vars.graphs[image]
    ids = vars.intra_ids(image)
    if not ids:
        raise InputError("constraints", "band_constraints", f"image {image} has a single region, no band possible")
    weights = []
    for vid in ids:
        var = vars.variables[vid]
        weights.append(Fraction(graph.alpha[(var.region_a, var.region_b)]) if weighted else Fraction(1))
    n_b = sum(weights)
    lo = Fraction(math.ceil((t - b) * n_b))
    hi = Fraction(math.floor(t * n_b))
    lo_terms = tuple((vid, -wt) for vid, wt in zip(ids, weights))
    hi_terms = tuple((vid, wt) for vid, wt in zip(ids, weights))
    return [
        LinearConstraint("le", lo_terms, -lo, "band-lo"),
        LinearConstraint("le", hi_terms, hi, "band-hi"),
    ]


def band_bounds(vars: BoundaryVariableSet, image: int, t_r, beta, weighted: bool = True) -> tuple[int, int]:
    """The integer band ``(lo, hi)`` that :func:`band_constraints` encodes."""
    rows = band_constraints(vars, image, t_r, beta, weighted)
    return int(-rows[0].rhs), int(rows[1].rhs)


def freeze_constraints(vars: BoundaryVariableSet, frozen_labels) -> list[LinearConstraint]:
    """Pin every variable between already-labeled partitions.

    ``frozen_labels`` holds one entry per image: a sequence assigning a
    cluster label to every region of that image, or ``None`` for images
    still being solved.  A variable whose two endpoints are both frozen is
    fixed to 1 when their labels differ and to 0 when they agree; realized
    clusterings therefore reappear verbatim.
    """
    frozen_labels = list(frozen_labels)
    if len(frozen_labels) != len(vars.graphs):
        raise InputError("constraints", "freeze_constraints",
                         f"{len(frozen_labels)} label sets for {len(vars.graphs)} images")
    for i, labels in enumerate(frozen_labels):
        if labels is None:
            continue
        if len(labels) != vars.graphs[i].n_regions:
            raise InputError("constraints", "freeze_constraints",
                             f"image {i}: {len(labels)} labels for {vars.graphs[i].n_regions} regions")

    one = Fraction(1)
    out: list[LinearConstraint] = []
    for v in vars.variables:
        la = frozen_labels[v.image_a]
        lb = frozen_labels[v.image_b]
        if la is None or lb is None:
            continue
        separated = la[v.region_a] != lb[v.region_b]
        out.append(LinearConstraint(
            "eq", ((v.index, one),), Fraction(1 if separated else 0),
            "freeze-sep" if separated else "freeze-merge",
        ))
    return out
