import itertools
from fractions import Fraction

import numpy as np
import pytest

from conftest import no_lone_separation, random_problem, satisfies
from cocluster.constraints import LinearConstraint, intra_constraints
from cocluster.errors import InputError
from cocluster.solver import (
    LpProblem,
    brute_force,
    check_feasible,
    exact_objective,
    extract_fixings,
    lp_dumps,
    lp_loads,
    solve_binary,
    solve_relaxation,
)


def band_row(ids, lo, hi):
    return [
        LinearConstraint("le", tuple((i, Fraction(-1)) for i in ids), Fraction(-lo), "band-lo"),
        LinearConstraint("le", tuple((i, Fraction(1)) for i in ids), Fraction(hi), "band-hi"),
    ]


def four_leaf_band_problem(four_leaf_case):
    _, _, h, vars_ = four_leaf_case
    rows = intra_constraints(h, vars_) + band_row(range(5), 2, 3)
    return LpProblem(objective=(0, -1, -2, -3, -4), constraints=tuple(rows))


def test_single_variable_unconstrained():
    p = LpProblem(objective=(-1,), constraints=())
    for solve in (solve_relaxation, solve_binary):
        s = solve(p)
        assert s.status == "optimal"
        assert s.objective == Fraction(-1)
        assert list(s.values) == [1]


def test_single_variable_pinned_to_zero():
    p = LpProblem(
        objective=(-1,),
        constraints=(LinearConstraint("eq", ((0, Fraction(1)),), Fraction(0), "pin"),),
    )
    assert solve_relaxation(p).objective == 0
    assert solve_binary(p).objective == 0


def test_four_leaf_band_gap(four_leaf_case):
    """The relaxation dips to -8 on a fractional point; the true optimum is -6."""
    p = four_leaf_band_problem(four_leaf_case)
    lp = solve_relaxation(p, mode="exact")
    assert lp.status == "optimal"
    assert lp.objective == Fraction(-8)
    assert any(0 < v < 1 for v in lp.values)
    for mode in ("exact", "float", "auto"):
        ilp = solve_binary(p, mode=mode)
        assert ilp.status == "optimal"
        assert ilp.objective == Fraction(-6)
        assert list(ilp.values) == [0, 1, 1, 1, 0]
    bf = brute_force(p)
    assert bf.objective == Fraction(-6)


def test_exclusive_band_keeps_most_negative():
    # one boundary must stay active; the cheapest (most negative) one wins
    p = LpProblem(objective=(-1, -2, -3), constraints=tuple(band_row(range(3), 1, 1)))
    s = solve_binary(p)
    assert list(s.values) == [0, 0, 1]
    assert s.objective == Fraction(-3)
    # cross-checked by hand over all 8 assignments
    best = min(
        (x for x in itertools.product((0, 1), repeat=3) if sum(x) == 1),
        key=lambda x: -1 * x[0] + -2 * x[1] + -3 * x[2],
    )
    assert list(s.values) == list(best)


def test_brute_force_prefers_lexicographically_smallest():
    p = LpProblem(objective=(0, 0), constraints=())
    assert list(brute_force(p).values) == [0, 0]


def test_brute_force_edge_cases():
    assert brute_force(LpProblem(objective=(), constraints=())).objective == 0
    contradictory = LpProblem(
        objective=(1,),
        constraints=(
            LinearConstraint("eq", ((0, Fraction(1)),), Fraction(0), "a"),
            LinearConstraint("eq", ((0, Fraction(1)),), Fraction(1), "b"),
        ),
    )
    assert brute_force(contradictory).status == "infeasible"
    with pytest.raises(InputError):
        brute_force(LpProblem(objective=(0,) * 25, constraints=()))


def test_infeasible_relaxation_reports_certificate():
    p = LpProblem(
        objective=(1,),
        constraints=(
            LinearConstraint("le", ((0, Fraction(-1)),), Fraction(-1, 2), "lo"),
            LinearConstraint("le", ((0, Fraction(1)),), Fraction(1, 4), "hi"),
        ),
    )
    s = solve_relaxation(p, mode="exact")
    assert s.status == "infeasible"
    assert s.certificate_row is not None


def test_fixed_variables_respected():
    p = LpProblem(objective=(-1, -1), constraints=(), fixed={0: 0})
    s = solve_binary(p)
    assert list(s.values) == [0, 1]
    assert s.objective == Fraction(-1)


def test_extract_fixings_splits_single_variable_rows():
    rows = [
        LinearConstraint("eq", ((2, Fraction(1)),), Fraction(1), "freeze-sep"),
        LinearConstraint("le", ((0, Fraction(1)), (1, Fraction(-1))), Fraction(0), "step"),
    ]
    fixed, rest = extract_fixings(rows)
    assert fixed == {2: 1}
    assert rest == [rows[1]]


def test_exact_objective_and_feasibility_check(four_leaf_case):
    p = four_leaf_band_problem(four_leaf_case)
    x = [0, 1, 1, 1, 0]
    assert exact_objective(p, x) == Fraction(-6)
    assert check_feasible(p, x) == (True, None)
    ok, row = check_feasible(p, [1, 1, 1, 1, 1])  # violates the band
    assert not ok and row is not None
    assert p.constraints[row].tag.startswith("band")
    with pytest.raises(InputError):
        check_feasible(p, [0, 1])  # wrong arity


def test_node_limit_flags_non_optimal(four_leaf_case):
    p = four_leaf_band_problem(four_leaf_case)
    s = solve_binary(p, node_limit=1)
    assert s.status == "iteration-limit"
    assert not s.ok
    if s.values:  # any incumbent handed back must be a real solution
        assert check_feasible(p, s.values) == (True, None)
        assert s.objective == exact_objective(p, s.values)


def test_lp_text_round_trip(four_leaf_case):
    p = four_leaf_band_problem(four_leaf_case)
    text = lp_dumps(p)
    back = lp_loads(text)
    assert solve_binary(back).objective == solve_binary(p).objective
    assert len(back.objective) == len(p.objective)


def test_determinism_across_repeat_solves(four_leaf_case):
    p = four_leaf_band_problem(four_leaf_case)
    runs = [solve_binary(p) for _ in range(3)]
    assert len({tuple(r.values) for r in runs}) == 1
    assert len({r.objective for r in runs}) == 1


def test_random_battery_matches_brute_force():
    rng = np.random.default_rng(1234)
    seen_status = set()
    for _ in range(30):
        p, triples = random_problem(rng)
        bf = brute_force(p)
        s = solve_binary(p)
        seen_status.add(bf.status)
        assert s.status in ("optimal", "infeasible")
        assert s.status == bf.status
        if bf.status == "optimal":
            assert s.objective == bf.objective
            assert check_feasible(p, s.values) == (True, None)
            assert no_lone_separation(triples, s.values)
    assert "optimal" in seen_status  # the battery actually exercised solves


def test_random_battery_float_mode_agrees():
    rng = np.random.default_rng(99)
    for _ in range(15):
        p, _ = random_problem(rng)
        bf = brute_force(p)
        s = solve_binary(p, mode="float")
        assert s.status == bf.status
        if bf.status == "optimal":
            assert s.objective == bf.objective
            assert check_feasible(p, s.values) == (True, None)


def test_lp_sandwich_on_random_instances():
    rng = np.random.default_rng(7)
    for _ in range(25):
        p, _ = random_problem(rng)
        lp = solve_relaxation(p, mode="exact")
        ilp = solve_binary(p, mode="exact")
        if lp.status == "infeasible":
            assert ilp.status == "infeasible"
            continue
        if ilp.status == "infeasible":
            # fractional-only feasible region; nothing to sandwich
            assert any(v not in (0, 1) for v in lp.values)
            continue
        assert lp.objective <= ilp.objective
        if all(v in (0, 1) for v in lp.values):
            assert lp.objective == ilp.objective
