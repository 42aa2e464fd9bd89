"""Solvers for the boundary-selection program ``min q·b`` over binary b.

Three entry points share one problem type:

* :func:`solve_relaxation` — the linear relaxation with ``b ∈ [0, 1]``.
  Small reduced problems are solved by a two-phase tableau simplex with
  Bland's rule over exact rationals; larger ones go to dual simplex in
  floating point (1e-9 feasibility tolerances).
* :func:`solve_binary` — best-first branch and bound with LP bound
  pruning; every reported binary point is re-checked and re-priced in
  exact rational arithmetic.
* :func:`brute_force` — exhaustive oracle for up to 24 free variables.

Problems round-trip through CPLEX-LP text (:func:`lp_dumps` /
:func:`lp_loads`) for interop testing with external solvers.
"""

from __future__ import annotations

import heapq
import math
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from .constraints import LinearConstraint
from .errors import CoclusterError, ConfigError, FormatError, InfeasibleError, InputError

DEFAULT_ITERATION_LIMIT = 1_000_000
DEFAULT_NODE_LIMIT = 100_000

# mode="auto" uses exact rational pivots when the reduced problem fits in
# this envelope, floating point above it.
EXACT_AUTO_VARS = 24
EXACT_AUTO_ROWS = 64

_ZERO = Fraction(0)
_ONE = Fraction(1)
_HALF = Fraction(1, 2)
_STATUSES = ("optimal", "infeasible", "iteration-limit")


@dataclass(frozen=True)
class LpProblem:
    """Dense objective + constraint rows + pre-fixed variables, all in [0, 1]."""

    objective: tuple[Fraction, ...]
    constraints: tuple[LinearConstraint, ...] = ()
    fixed: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        obj = tuple(c if isinstance(c, Fraction) else Fraction(c) for c in self.objective)
        object.__setattr__(self, "objective", obj)
        object.__setattr__(self, "constraints", tuple(self.constraints))
        n = len(obj)
        for idx, row in enumerate(self.constraints):
            for v, _ in row.terms:
                if not 0 <= v < n:
                    raise InputError("solver", "LpProblem", f"row {idx} references undeclared variable {v}")
        pairs = self.fixed.items() if isinstance(self.fixed, dict) else self.fixed
        seen: dict[int, int] = {}
        for v, val in pairs:
            v, val = int(v), int(val)
            if not 0 <= v < n:
                raise InputError("solver", "LpProblem", f"fixed variable {v} out of range")
            if val not in (0, 1):
                raise InputError("solver", "LpProblem", f"variable {v} fixed to non-binary {val}")
            if seen.get(v, val) != val:
                raise InfeasibleError("solver", "LpProblem", f"variable {v} fixed to both 0 and 1")
            seen[v] = val
        object.__setattr__(self, "fixed", tuple(sorted(seen.items())))

    @property
    def n_vars(self) -> int:
        return len(self.objective)

    @property
    def fixed_map(self) -> dict[int, int]:
        return dict(self.fixed)


@dataclass(frozen=True)
class Solution:
    """Solver outcome; ``values`` is empty unless status allows a point.

    ``objective`` and ``values`` are exact :class:`~fractions.Fraction`s on
    the exact paths (and for every binary solve) and floats on the float LP
    path.  ``certificate_row`` indexes the constraint that phase 1 could not
    satisfy when the exact path proves infeasibility.
    """

    status: str
    values: tuple
    objective: object = None
    certificate_row: int | None = None

    def __post_init__(self):
        if self.status not in _STATUSES:
            raise InputError("solver", "Solution", f"status must be one of {_STATUSES}, got {self.status!r}")
        object.__setattr__(self, "values", tuple(self.values))

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


# ---------------------------------------------------------------------------
# reduction: substitute fixed variables out of the problem


@dataclass
class _System:
    back: list[int]  # reduced column -> original variable id
    obj: list[Fraction]
    rows: list[tuple[str, tuple[tuple[int, Fraction], ...], Fraction, int]]
    shift: Fraction


def _reduce(p: LpProblem, extra: dict[int, int] | None = None):
    """Substitute fixings into the rows.

    Returns ``(system, None)``; or ``(None, row_index)`` when a row becomes a
    violated constant (``row_index`` may be None for a fixing conflict).
    """
    fixed = p.fixed_map
    if extra:
        for v, val in extra.items():
            if fixed.get(v, val) != val:
                return None, None
            fixed[v] = val
    back = [v for v in range(p.n_vars) if v not in fixed]
    col = {v: j for j, v in enumerate(back)}
    shift = sum((p.objective[v] * val for v, val in fixed.items() if val), _ZERO)
    rows = []
    for idx, c in enumerate(p.constraints):
        terms = []
        rhs = c.rhs
        for v, coef in c.terms:
            if v in fixed:
                rhs -= coef * fixed[v]
            else:
                terms.append((col[v], coef))
        if not terms:
            if (rhs != 0) if c.kind == "eq" else (rhs < 0):
                return None, idx
            continue
        rows.append((c.kind, tuple(terms), rhs, idx))
    return _System(back, [p.objective[v] for v in back], rows, shift), None


def _expand(p: LpProblem, extra: dict[int, int] | None, sys_: _System, x, cast):
    full = [None] * p.n_vars
    for v, val in p.fixed:
        full[v] = cast(val)
    if extra:
        for v, val in extra.items():
            full[v] = cast(val)
    for j, v in enumerate(sys_.back):
        full[v] = x[j]
    return tuple(full)


def _pick_exact(mode: str, sys_: _System, operation: str) -> bool:
    if mode == "exact":
        return True
    if mode == "float":
        return False
    if mode == "auto":
        return len(sys_.back) <= EXACT_AUTO_VARS and len(sys_.rows) <= EXACT_AUTO_ROWS
    raise ConfigError("solver", operation, f"mode must be auto, exact or float, got {mode!r}")


# ---------------------------------------------------------------------------
# exact two-phase tableau simplex, Bland's rule


def _simplex_exact(sys_: _System, iteration_limit: int):
    """Returns (status, values, objective, certificate_row) in reduced space."""
    n = len(sys_.back)
    prepared = []  # (terms, rhs >= 0, kind in {le, ge, eq}, original row index)
    for kind, terms, rhs, orig in sys_.rows:
        if rhs < 0:
            terms = tuple((j, -c) for j, c in terms)
            rhs, kind = -rhs, ("ge" if kind == "le" else "eq")
        prepared.append((terms, rhs, kind, orig))
    for j in range(n):  # explicit upper bounds x_j <= 1
        prepared.append((((j, _ONE),), _ONE, "le", None))

    m = len(prepared)
    nslack = sum(1 for t in prepared if t[2] in ("le", "ge"))
    nart = sum(1 for t in prepared if t[2] in ("ge", "eq"))
    ncols = n + nslack + nart
    rows = [[_ZERO] * (ncols + 1) for _ in range(m)]
    basis = [0] * m
    origin = [t[3] for t in prepared]
    art_cols = set()
    s, a = n, n + nslack
    for i, (terms, rhs, kind, _) in enumerate(prepared):
        r = rows[i]
        for j, c in terms:
            r[j] = c
        r[-1] = rhs
        if kind == "le":
            r[s] = _ONE
            basis[i] = s
            s += 1
        else:
            if kind == "ge":
                r[s] = -_ONE
                s += 1
            r[a] = _ONE
            basis[i] = a
            art_cols.add(a)
            a += 1

    obj_row = [_ZERO] * (ncols + 1)
    iters = 0

    def pivot(pr: int, pc: int) -> None:
        prow = rows[pr]
        pv = prow[pc]
        if pv != _ONE:
            inv = _ONE / pv
            rows[pr] = prow = [x * inv for x in prow]
        for i in range(m):
            if i == pr:
                continue
            f = rows[i][pc]
            if f:
                ri = rows[i]
                rows[i] = [x - f * y for x, y in zip(ri, prow)]
        f = obj_row[pc]
        if f:
            obj_row[:] = [x - f * y for x, y in zip(obj_row, prow)]
        basis[pr] = pc

    def run() -> str:
        # Bland: entering = lowest improving column (artificials never
        # re-enter), leaving = min ratio with ties by lowest basic index.
        nonlocal iters
        while True:
            enter = -1
            for j in range(ncols):
                if obj_row[j] < 0 and j not in art_cols:
                    enter = j
                    break
            if enter < 0:
                return "optimal"
            leave, best = -1, None
            for i in range(m):
                aij = rows[i][enter]
                if aij > 0:
                    ratio = rows[i][-1] / aij
                    if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                        best, leave = ratio, i
            if leave < 0:
                return "unbounded"
            pivot(leave, enter)
            iters += 1
            if iters > iteration_limit:
                return "iteration-limit"

    # phase 1: minimize the artificial sum
    for j in art_cols:
        obj_row[j] = _ONE
    for i in range(m):
        if basis[i] in art_cols:
            ri = rows[i]
            obj_row[:] = [x - y for x, y in zip(obj_row, ri)]
    status = run()
    if status != "optimal":
        return status, None, None, None
    if -obj_row[-1] > 0:  # positive infeasibility
        cert = [origin[i] for i in range(m)
                if basis[i] in art_cols and rows[i][-1] > 0 and origin[i] is not None]
        return "infeasible", None, None, (min(cert) if cert else None)
    # drive basic artificials (all at value 0) out of the basis; rows with no
    # structural support are redundant and stay inert.
    for i in range(m):
        if basis[i] in art_cols:
            for j in range(ncols):
                if j not in art_cols and rows[i][j] != 0:
                    pivot(i, j)
                    break

    # phase 2: original costs
    cost = [sys_.obj[j] if j < n else _ZERO for j in range(ncols)]
    obj_row[:] = cost + [_ZERO]
    for i in range(m):
        cb = cost[basis[i]]
        if cb:
            ri = rows[i]
            obj_row[:] = [x - cb * y for x, y in zip(obj_row, ri)]
    status = run()
    if status == "unbounded":
        raise CoclusterError("solver", "solve_relaxation", "unbounded LP despite box bounds (internal)")
    if status != "optimal":
        return status, None, None, None
    x = [_ZERO] * n
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = rows[i][-1]
    value = sum((c * v for c, v in zip(sys_.obj, x) if v), _ZERO)
    return "optimal", x, value, None


# ---------------------------------------------------------------------------
# floating-point path (dual simplex)


def _lp_float(sys_: _System, iteration_limit: int):
    n = len(sys_.back)
    c = np.array([float(v) for v in sys_.obj], dtype=float)
    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    for kind, terms, rhs, _ in sys_.rows:
        row = np.zeros(n, dtype=float)
        for j, coef in terms:
            row[j] = float(coef)
        if kind == "le":
            a_ub.append(row)
            b_ub.append(float(rhs))
        else:
            a_eq.append(row)
            b_eq.append(float(rhs))
    res = linprog(
        c,
        A_ub=np.array(a_ub) if a_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(a_eq) if a_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=[(0.0, 1.0)] * n,
        method="highs-ds",
        options={
            "maxiter": iteration_limit,
            "primal_feasibility_tolerance": 1e-9,
            "dual_feasibility_tolerance": 1e-9,
        },
    )
    if res.status == 0:
        return "optimal", [float(v) for v in res.x], float(res.fun), None
    if res.status == 2:
        return "infeasible", None, None, None
    if res.status == 1:
        return "iteration-limit", None, None, None
    raise CoclusterError("solver", "solve_relaxation", f"LP backend failure: {res.message}")


# ---------------------------------------------------------------------------
# public solves


def solve_relaxation(p: LpProblem, mode: str = "auto",
                     iteration_limit: int = DEFAULT_ITERATION_LIMIT) -> Solution:
    """Optimal basic solution of the relaxation with ``b ∈ [0, 1]``."""
    sys_, cert = _reduce(p)
    if sys_ is None:
        return Solution("infeasible", (), None, cert)
    exact = _pick_exact(mode, sys_, "solve_relaxation")
    if not sys_.back:
        return Solution("optimal", _expand(p, None, sys_, [], Fraction), sys_.shift)
    if exact:
        status, x, value, cert = _simplex_exact(sys_, iteration_limit)
    else:
        status, x, value, cert = _lp_float(sys_, iteration_limit)
    if status != "optimal":
        return Solution(status, (), None, cert)
    if exact:
        return Solution("optimal", _expand(p, None, sys_, x, Fraction), value + sys_.shift)
    return Solution("optimal", _expand(p, None, sys_, x, float), value + float(sys_.shift))


def exact_objective(p: LpProblem, values) -> Fraction:
    """``q · b`` as an exact rational."""
    return sum((c * Fraction(v) for c, v in zip(p.objective, values) if v), _ZERO)


def check_feasible(p: LpProblem, values, tol: Fraction = _ZERO):
    """Exact rational check of fixings and every row.

    Returns ``(ok, first offending constraint index or None)``.
    """
    vals = [Fraction(v) for v in values]
    if len(vals) != p.n_vars:
        raise InputError("solver", "check_feasible", f"{len(vals)} values for {p.n_vars} variables")
    for v, val in p.fixed:
        if vals[v] != val:
            return False, None
    for idx, c in enumerate(p.constraints):
        if not c.satisfied(vals, tol):
            return False, idx
    return True, None


def extract_fixings(constraints):
    """Split single-variable equality rows into a fixing map.

    Returns ``(fixed, rest)``.  A variable pinned to conflicting values
    raises; a non-binary pin is a malformed input.
    """
    fixed: dict[int, int] = {}
    rest = []
    for c in constraints:
        if c.kind == "eq" and len(c.terms) == 1:
            (v, coef), = c.terms
            val = c.rhs / coef
            if val not in (_ZERO, _ONE):
                raise InputError("solver", "extract_fixings", f"variable {v} pinned to non-binary value {val}")
            iv = int(val)
            if fixed.get(v, iv) != iv:
                raise InfeasibleError("solver", "extract_fixings", f"variable {v} pinned to both 0 and 1")
            fixed[v] = iv
        else:
            rest.append(c)
    return fixed, rest


def _round_repair(p: LpProblem, sys_: _System, x, fix, exact: bool):
    """Round a fractional point and repair it along equality chains."""
    vals: dict[int, int] = {}
    for j, v in enumerate(sys_.back):
        if exact:
            vals[v] = 1 if x[j] >= _HALF else 0
        else:
            vals[v] = 1 if x[j] >= 0.5 else 0

    parent = {v: v for v in vals}

    def find(v: int) -> int:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    forced: dict[int, int] = {}
    for kind, terms, rhs, _ in sys_.rows:
        if kind != "eq":
            continue
        if len(terms) == 1:
            (j, coef), = terms
            val = rhs / coef
            if val not in (_ZERO, _ONE):
                return None
            forced[sys_.back[j]] = int(val)
        elif len(terms) == 2 and rhs == 0 and terms[0][1] == -terms[1][1]:
            ra, rb = find(sys_.back[terms[0][0]]), find(sys_.back[terms[1][0]])
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for v in vals:
        groups.setdefault(find(v), []).append(v)
    for members in groups.values():
        pins = {forced[v] for v in members if v in forced}
        if len(pins) > 1:
            return None
        value = pins.pop() if pins else vals[min(members)]
        for v in members:
            vals[v] = value
    full = [0] * p.n_vars
    for v, val in p.fixed:
        full[v] = val
    for v, val in fix.items():
        full[v] = val
    for v, val in vals.items():
        full[v] = val
    return tuple(full)


def solve_binary(p: LpProblem, mode: str = "auto", node_limit: int = DEFAULT_NODE_LIMIT,
                 iteration_limit: int = DEFAULT_ITERATION_LIMIT) -> Solution:
    """Exact binary optimum by best-first branch and bound.

    Branches on the most fractional variable (ties: lowest id), explores the
    0 branch first among equal bounds, prunes with LP bounds, and re-checks
    every candidate point in exact rational arithmetic, so the reported
    objective is an exact Fraction even on the float LP path.  Exhausting
    ``node_limit`` returns the best incumbent with status "iteration-limit".
    """
    base, cert = _reduce(p)
    if base is None:
        return Solution("infeasible", (), None, cert)
    exact = _pick_exact(mode, base, "solve_binary")
    incumbent: tuple[Fraction, tuple[int, ...]] | None = None

    def consider(full) -> None:
        nonlocal incumbent
        ok, _ = check_feasible(p, full)
        if not ok:
            return
        value = exact_objective(p, full)
        if incumbent is None or value < incumbent[0]:
            incumbent = (value, tuple(int(v) for v in full))

    # heap entries: (float bound, tie-break sequence, exact bound, fixings)
    heap: list = [(-math.inf, 0, None, {})]
    seq = 1
    expanded = 0
    root_bound = None
    status = "optimal"
    while heap:
        bound_f, _, bound_x, fix = heapq.heappop(heap)
        if incumbent is not None:
            if exact:
                if bound_x is not None and bound_x >= incumbent[0]:
                    continue
            elif bound_f >= float(incumbent[0]) - 1e-9:
                continue
        if expanded >= node_limit:
            status = "iteration-limit"
            break
        expanded += 1
        sys_, _c = _reduce(p, fix)
        if sys_ is None:
            continue
        if not sys_.back:
            consider(_expand(p, fix, sys_, [], int))
            continue
        st, x, value, _ = (_simplex_exact if exact else _lp_float)(sys_, iteration_limit)
        if st == "infeasible":
            continue
        if st == "iteration-limit":
            status = "iteration-limit"
            break
        bound = value + (sys_.shift if exact else float(sys_.shift))
        if root_bound is None:
            root_bound = bound
        if incumbent is not None:
            if (bound >= incumbent[0]) if exact else (bound >= float(incumbent[0]) - 1e-9):
                continue
        if exact:
            integral = all(v.denominator == 1 for v in x)
        else:
            integral = all(abs(v - round(v)) <= 1e-9 for v in x)
        if integral:
            consider(_expand(p, fix, sys_, [int(round(float(v))) for v in x], int))
            continue
        repaired = _round_repair(p, sys_, x, fix, exact)
        if repaired is not None:
            consider(repaired)
        if exact:
            j_star = min(range(len(x)), key=lambda j: (abs(x[j] - _HALF), sys_.back[j]))
        else:
            j_star = min(range(len(x)), key=lambda j: (abs(x[j] - 0.5), sys_.back[j]))
        var = sys_.back[j_star]
        for branch_val in (0, 1):
            child = dict(fix)
            child[var] = branch_val
            heapq.heappush(heap, (float(bound), seq, bound if exact else None, child))
            seq += 1

    if incumbent is None:
        return Solution("infeasible" if status == "optimal" else status, (), None)
    if root_bound is not None:
        lo = root_bound if exact else root_bound - 1e-6
        if incumbent[0] < lo:
            raise CoclusterError("solver", "solve_binary",
                                 "incumbent beats the root relaxation bound (internal)")
    return Solution(status, incumbent[1], incumbent[0])


def brute_force(p: LpProblem) -> Solution:
    """Exhaustive scan of all assignments; lexicographically smallest optimum.

    Feasibility runs on integerized rows in int64; the objective is ranked in
    floating point and re-priced exactly among near-ties, so the winner (and
    its reported objective) is exact.
    """
    sys_, cert = _reduce(p)
    if sys_ is None:
        return Solution("infeasible", (), None, cert)
    n = len(sys_.back)
    if n > 24:
        raise InputError("solver", "brute_force", f"{n} free variables exceed the 24-variable cap")
    if n == 0:
        return Solution("optimal", _expand(p, None, sys_, [], int), sys_.shift)

    mats = []
    for kind, terms, rhs, _ in sys_.rows:
        den = math.lcm(rhs.denominator, *(c.denominator for _, c in terms))
        a = np.zeros(n, dtype=np.int64)
        for j, c in terms:
            a[j] = int(c * den)
        mats.append((kind, a, int(rhs * den)))
    c_float = np.array([float(v) for v in sys_.obj], dtype=float)
    eps = 1e-9 * (1.0 + float(np.abs(c_float).sum()))
    shifts = (n - 1 - np.arange(n)).astype(np.int64)

    best: tuple[Fraction, int, list[int]] | None = None  # (exact value, code, bits)
    total = 1 << n
    step = 1 << min(n, 16)
    for start in range(0, total, step):
        codes = np.arange(start, min(start + step, total), dtype=np.int64)
        bits = (codes[:, None] >> shifts[None, :]) & 1
        feasible = np.ones(len(codes), dtype=bool)
        for kind, a, rhs in mats:
            dot = bits @ a
            feasible &= (dot == rhs) if kind == "eq" else (dot <= rhs)
        if not feasible.any():
            continue
        objs = bits[feasible] @ c_float
        fcodes = codes[feasible]
        cutoff = float(objs.min()) + eps
        if best is not None:
            cutoff = min(cutoff, float(best[0]) + eps)
        for code in fcodes[objs <= cutoff]:
            code = int(code)
            row = [(code >> (n - 1 - j)) & 1 for j in range(n)]
            value = sum((sys_.obj[j] for j in range(n) if row[j]), _ZERO)
            if best is None or value < best[0] or (value == best[0] and code < best[1]):
                best = (value, code, row)
    if best is None:
        return Solution("infeasible", (), None)
    return Solution("optimal", _expand(p, None, sys_, best[2], int), best[0] + sys_.shift)


# ---------------------------------------------------------------------------
# CPLEX-LP text


def _decimal(f: Fraction) -> str:
    """Exact decimal rendering; requires a 2^a·5^b denominator."""
    if f.denominator == 1:
        return str(f.numerator)
    den = f.denominator
    a = b = 0
    while den % 2 == 0:
        den //= 2
        a += 1
    while den % 5 == 0:
        den //= 5
        b += 1
    if den != 1:
        raise FormatError("solver", "lp_dumps",
                          f"coefficient {f} has no exact decimal form")
    m = max(a, b)
    scaled = abs(f.numerator) * 10**m // f.denominator
    digits = str(scaled).rjust(m + 1, "0")
    return ("-" if f < 0 else "") + digits[:-m] + "." + digits[-m:]


def _expr(pairs) -> str:
    parts = []
    for coef, name in pairs:
        mag = abs(coef)
        body = name if mag == 1 else f"{_decimal(mag)} {name}"
        if not parts:
            parts.append(("- " if coef < 0 else "") + body)
        else:
            parts.append(("- " if coef < 0 else "+ ") + body)
    return " ".join(parts)


def lp_dumps(p: LpProblem) -> str:
    lines = ["\\ boundary-selection linear program", "Minimize"]
    obj_pairs = [(c, f"x{v}") for v, c in enumerate(p.objective) if c]
    lines.append(" obj: " + (_expr(obj_pairs) if obj_pairs else "0 x0" if p.n_vars else ""))
    lines.append("Subject To")
    for i, c in enumerate(p.constraints):
        den = math.lcm(c.rhs.denominator, *(t.denominator for _, t in c.terms))
        pairs = [(coef * den, f"x{v}") for v, coef in c.terms]
        rel = "=" if c.kind == "eq" else "<="
        name = f"c{i}_{c.tag.replace('-', '_')}"
        lines.append(f" {name}: {_expr(pairs)} {rel} {_decimal(c.rhs * den)}")
    lines.append("Bounds")
    fixed = p.fixed_map
    for v in range(p.n_vars):
        if v in fixed:
            lines.append(f" x{v} = {fixed[v]}")
        else:
            lines.append(f" 0 <= x{v} <= 1")
    lines.append("End")
    return "\n".join(lines) + "\n"


_TOKEN = re.compile(r"<=|>=|=|\+|-|:|[A-Za-z_][A-Za-z0-9_.]*|\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?")
_SECTIONS = {"minimize": "obj", "maximize": "obj-max", "min": "obj", "max": "obj-max",
             "subject": "rows", "st": "rows", "s.t.": "rows",
             "bounds": "bounds", "binary": "skip", "binaries": "skip",
             "general": "skip", "generals": "skip", "end": "end"}


def _parse_terms(tokens, i):
    """Parse signed terms until a relation token; returns (terms, i)."""
    terms = []
    sign, num = 1, None
    while i < len(tokens):
        t = tokens[i]
        if t in ("<=", ">=", "="):
            break
        if t == "+":
            pass
        elif t == "-":
            sign = -sign
        elif t[0].isdigit() or t[0] == ".":
            num = Fraction(t)
        else:
            coef = sign * (num if num is not None else _ONE)
            terms.append((t, coef))
            sign, num = 1, None
        i += 1
    if num is not None:
        raise FormatError("solver", "lp_loads", f"dangling number near token {i}")
    return terms, i


def _var_id(name: str) -> int:
    m = re.fullmatch(r"x(\d+)", name)
    if not m:
        raise FormatError("solver", "lp_loads", f"variable names must look like x<k>, got {name!r}")
    return int(m.group(1))


def lp_loads(text: str) -> LpProblem:
    """Parse CPLEX-LP text (the dialect :func:`lp_dumps` writes)."""
    section = None
    blobs: dict[str, list[str]] = {"obj": [], "rows": [], "bounds": []}
    negate = False
    for raw in text.splitlines():
        line = raw.split("\\")[0].strip()
        if not line:
            continue
        head = line.split()[0].lower().rstrip(":")
        if head in _SECTIONS:
            kind = _SECTIONS[head]
            if kind == "end":
                break
            if kind == "obj-max":
                negate, kind = True, "obj"
            section = kind
            rest = line.split(None, 1)[1] if " " in line else ""
            if head == "subject" and rest.lower().startswith("to"):
                rest = rest[2:].strip()
            if rest and section != "skip":
                blobs[section].append(rest)
            continue
        if section and section != "skip":
            blobs[section].append(line)

    def named_chunks(blob: str):
        pieces = re.split(r"([A-Za-z_][A-Za-z0-9_.]*)\s*:", blob)
        out = []
        for k in range(1, len(pieces), 2):
            out.append((pieces[k], pieces[k + 1]))
        if not out and blob.strip():
            out.append((None, blob))
        return out

    obj_terms: dict[int, Fraction] = {}
    max_var = -1
    for _, body in named_chunks(" ".join(blobs["obj"])):
        tokens = _TOKEN.findall(body)
        terms, i = _parse_terms(tokens, 0)
        if i != len(tokens):
            raise FormatError("solver", "lp_loads", "relation inside the objective")
        for name, coef in terms:
            v = _var_id(name)
            max_var = max(max_var, v)
            obj_terms[v] = obj_terms.get(v, _ZERO) + (-coef if negate else coef)

    parsed_rows = []
    for name, body in named_chunks(" ".join(blobs["rows"])):
        tokens = _TOKEN.findall(body)
        terms, i = _parse_terms(tokens, 0)
        if i >= len(tokens):
            if not terms:
                continue
            raise FormatError("solver", "lp_loads", f"row {name!r} has no relation")
        rel = tokens[i]
        sign, val = 1, None
        for t in tokens[i + 1:]:
            if t == "-":
                sign = -sign
            elif t == "+":
                pass
            elif t[0].isdigit() or t[0] == ".":
                if val is not None:
                    raise FormatError("solver", "lp_loads", f"row {name!r} has multiple right-hand sides")
                val = Fraction(t)
            else:
                raise FormatError("solver", "lp_loads", f"row {name!r} has variables on the right-hand side")
        if val is None:
            raise FormatError("solver", "lp_loads", f"row {name!r} missing right-hand side")
        rhs = sign * val
        pairs = {}
        for vname, coef in terms:
            v = _var_id(vname)
            max_var = max(max_var, v)
            pairs[v] = pairs.get(v, _ZERO) + coef
        pairs = {v: c for v, c in pairs.items() if c}
        if rel == ">=":
            pairs = {v: -c for v, c in pairs.items()}
            rhs = -rhs
            rel = "<="
        kind = "eq" if rel == "=" else "le"
        m = re.fullmatch(r"c\d+_([A-Za-z0-9_]+)", name or "")
        tag = m.group(1).replace("_", "-") if m else "imported"
        parsed_rows.append((kind, tuple(sorted(pairs.items())), rhs, tag))

    fixed: dict[int, int] = {}
    for line in blobs["bounds"]:
        tokens = _TOKEN.findall(line)
        vs = [t for t in tokens if re.fullmatch(r"x\d+", t)]
        if not vs:
            raise FormatError("solver", "lp_loads", f"unparseable bounds line {line!r}")
        v = _var_id(vs[0])
        max_var = max(max_var, v)
        if "=" in tokens and "<=" not in tokens and ">=" not in tokens:
            val = Fraction(tokens[-1])
            if val not in (_ZERO, _ONE):
                raise FormatError("solver", "lp_loads", f"bound pins x{v} outside binary range")
            fixed[v] = int(val)

    n = max_var + 1
    objective = tuple(obj_terms.get(v, _ZERO) for v in range(n))
    constraints = tuple(
        LinearConstraint(kind, tuple((v, c) for v, c in pairs), rhs, tag)
        for kind, pairs, rhs, tag in parsed_rows
    )
    return LpProblem(objective, constraints, fixed)


def lp_write(p: LpProblem, path) -> None:
    from pathlib import Path

    Path(path).write_text(lp_dumps(p), encoding="ascii")


def lp_read(path) -> LpProblem:
    from pathlib import Path

    return lp_loads(Path(path).read_text(encoding="ascii"))
