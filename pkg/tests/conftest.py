"""Shared fixtures and independent oracles used across the test modules."""

from fractions import Fraction

import numpy as np
import pytest

from cocluster.adjacency import build_graph, enumerate_variables
from cocluster.constraints import LinearConstraint
from cocluster.solver import LpProblem
from cocluster.synth import four_leaf_fixture


@pytest.fixture(scope="session")
def four_leaf_case():
    """The 4-region worked example plus its variable set.

    Intra pair order is (0,1) (0,2) (1,2) (1,3) (2,3); the hierarchy merges
    0+1 -> 4, 2+3 -> 5, 4+5 -> 6.
    """
    image, leaves, h = four_leaf_fixture()
    vars_ = enumerate_variables([build_graph(leaves)])
    return image, leaves, h, vars_


def all_cuts(h):
    """Every tree cut of ``h``, enumerated directly from the merge list.

    Independent of the encoding code: a cut either takes a node whole or
    recurses into both children.
    """
    children = {parent: (a, b) for a, b, parent in h.merges}

    def expand(node):
        if node not in children:
            return [(node,)]
        a, b = children[node]
        out = [(node,)]
        for left in expand(a):
            for right in expand(b):
                out.append(tuple(sorted(left + right)))
        return out

    root = h.leaf_count + len(h.merges) - 1
    return {tuple(sorted(c)) for c in expand(root)}


def satisfies(rows, values):
    """Exact feasibility check of constraint rows, independent of the solver."""
    vals = [Fraction(v) for v in values]
    for row in rows:
        s = sum((c * vals[i] for i, c in row.terms), Fraction(0))
        if row.kind == "eq" and s != row.rhs:
            return False
        if row.kind == "le" and s > row.rhs:
            return False
    return True


def random_problem(rng):
    """A random 0/1 instance mixing the four constraint families.

    Returns the problem plus the set of 3-cliques that carry transitivity
    rows, so callers can audit realized assignments for the one-active
    pattern.
    """
    n = int(rng.integers(4, 15))
    q = tuple(Fraction(int(rng.integers(-6, 7))) for _ in range(n))
    rows = []
    triples = set()
    for _ in range(int(rng.integers(0, 4))):
        i, j = (int(v) for v in rng.choice(n, size=2, replace=False))
        rows.append(LinearConstraint("eq", ((i, Fraction(1)), (j, Fraction(-1))), Fraction(0), "chain"))
    for _ in range(int(rng.integers(0, 4))):
        i, j = (int(v) for v in rng.choice(n, size=2, replace=False))
        rows.append(LinearConstraint("le", ((i, Fraction(1)), (j, Fraction(-1))), Fraction(0), "step"))
    for _ in range(int(rng.integers(0, 4))):
        a, b, c = (int(v) for v in rng.choice(n, size=3, replace=False))
        triples.add(frozenset((a, b, c)))
        for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
            rows.append(LinearConstraint(
                "le", ((x, Fraction(1)), (y, Fraction(-1)), (z, Fraction(-1))), Fraction(0), "triangle"))
    for _ in range(int(rng.integers(0, 3))):
        k = int(rng.integers(2, n + 1))
        subset = [int(v) for v in rng.choice(n, size=k, replace=False)]
        weights = [int(rng.integers(1, 4)) for _ in subset]
        total = sum(weights)
        lo = int(rng.integers(0, total + 1))
        hi = int(rng.integers(lo, total + 1))
        rows.append(LinearConstraint("le", tuple((i, Fraction(-w)) for i, w in zip(subset, weights)),
                                     Fraction(-lo), "band-lo"))
        rows.append(LinearConstraint("le", tuple((i, Fraction(w)) for i, w in zip(subset, weights)),
                                     Fraction(hi), "band-hi"))
    return LpProblem(objective=q, constraints=tuple(rows)), triples


def triangle_triples(rows):
    return {frozenset(i for i, _ in row.terms) for row in rows if row.tag == "triangle"}


def no_lone_separation(triples, values):
    """True iff no constrained 3-clique realizes the one-active pattern."""
    return all(sum(int(values[i]) for i in t) != 1 for t in triples)
