"""Reference LP/MILP kernel.

Bounded-variable primal simplex on a dense tableau (two phases, Dantzig
pricing with a Bland's-rule fallback after a run of degenerate pivots) and a
plain branch-and-bound over the integer-masked variables (best-bound node
selection, most-fractional branching). Everything is deterministic: fixed
pivoting and branching order, no randomization, so identical inputs produce
bit-identical solutions.

Not a competitive solver: no presolve, no cuts, no warm starts, dense
tableau only, with an explicit refusal beyond 2000 structural columns.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .model import MipSet, interval_of_linear

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
INT_TOL = 1e-6
MIP_GAP_TOL = 1e-6
MAX_DENSE_COLS = 2000
_REFACTOR_EVERY = 4096

__all__ = [
    "LinearProgram",
    "MilpSolution",
    "Limits",
    "CapExceeded",
    "solve_lp",
    "solve_milp",
    "linearize_indicator",
    "enumerate_integer_points",
    "feasibility_program",
    "write_lp",
]


class CapExceeded(RuntimeError):
    """Raised when an enumeration/scale cap makes an operation inapplicable."""


@dataclass
class LinearProgram:
    """min obj.x + obj_const s.t. rows, lb <= x <= ub, x_i integer on mask.

    Rows are (coeffs, rel, rhs) with rel in {"<=", "=", ">="}. Indicator
    entries are (guard index, guard value in {0,1}, implied "<=" row); guards
    must be binary variables. All variable bounds must be finite.
    """

    n: int
    obj: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    int_mask: np.ndarray
    rows: List[Tuple[np.ndarray, str, float]] = field(default_factory=list)
    indicators: List[Tuple[int, int, Tuple[np.ndarray, str, float]]] = field(default_factory=list)
    obj_const: float = 0.0

    def __post_init__(self):
        self.obj = np.asarray(self.obj, dtype=float).ravel()
        self.lb = np.asarray(self.lb, dtype=float).ravel()
        self.ub = np.asarray(self.ub, dtype=float).ravel()
        self.int_mask = np.asarray(self.int_mask, dtype=bool).ravel()

    def add_row(self, coeffs, rel: str, rhs: float):
        if rel not in ("<=", "=", ">="):
            raise ValueError(f"bad relation {rel!r}")
        self.rows.append((np.asarray(coeffs, dtype=float).ravel(), rel, float(rhs)))

    def add_indicator(self, guard: int, value: int, coeffs, rhs: float):
        self.indicators.append((int(guard), int(value),
                                (np.asarray(coeffs, dtype=float).ravel(), "<=", float(rhs))))


@dataclass
class MilpSolution:
    status: str                  # optimal | infeasible | unbounded | limit
    value: float
    x: Optional[np.ndarray]
    bound: float
    duals: Optional[np.ndarray] = None
    dual_value: Optional[float] = None
    iterations: int = 0
    nodes: int = 0


@dataclass
class Limits:
    node_limit: Optional[int] = None
    time_limit_s: Optional[float] = None
    gap_tol: float = MIP_GAP_TOL


def feasibility_program(ms: MipSet) -> LinearProgram:
    """min 0 over the set's coordinates (primary + aux)."""
    n = ms.total_dim
    lp = LinearProgram(n, np.zeros(n), ms.lb.copy(), ms.ub.copy(), ms.int_mask.copy())
    for i in range(ms.n_rows):
        lp.add_row(ms.A[i], "<=", ms.b[i])
    return lp


# ---------------------------------------------------------------------------
# bounded-variable simplex

_BASIC, _AT_LOWER, _AT_UPPER = 0, 1, 2


class _Simplex:
    """One simplex solve over equality-standardized data.

    Columns: n structural, then one +1 slack per row. Rows whose initial
    slack value violates the slack bounds get a positional artificial
    (column sigma*e_row, never re-enters, so it needs no tableau column).
    """

    def __init__(self, lp: LinearProgram, lb=None, ub=None):
        if lp.n > MAX_DENSE_COLS:
            raise CapExceeded(f"{lp.n} structural columns exceed the dense-tableau "
                              f"limit of {MAX_DENSE_COLS}")
        self.n = lp.n
        self.m = len(lp.rows)
        self.lb_x = np.asarray(lp.lb if lb is None else lb, dtype=float).copy()
        self.ub_x = np.asarray(lp.ub if ub is None else ub, dtype=float).copy()
        if not (np.all(np.isfinite(self.lb_x)) and np.all(np.isfinite(self.ub_x))):
            raise ValueError("finite variable bounds required")
        self.c_x = lp.obj
        self.obj_const = lp.obj_const

        m, n = self.m, self.n
        A = np.zeros((m, n))
        b = np.zeros(m)
        slack_lb = np.zeros(m)
        slack_ub = np.zeros(m)
        for i, (coeffs, rel, rhs) in enumerate(lp.rows):
            A[i, :] = coeffs
            b[i] = rhs
            if rel == "<=":
                slack_lb[i], slack_ub[i] = 0.0, math.inf
            elif rel == ">=":
                slack_lb[i], slack_ub[i] = -math.inf, 0.0
            else:
                slack_lb[i] = slack_ub[i] = 0.0
        self.A_full = np.hstack([A, np.eye(m)])
        self.b = b
        self.ncols = n + m
        self.lb = np.concatenate([self.lb_x, slack_lb])
        self.ub = np.concatenate([self.ub_x, slack_ub])
        self.c = np.concatenate([self.c_x, np.zeros(m)])
        self.iterations = 0

    def solve(self) -> MilpSolution:
        m, n, ncols = self.m, self.n, self.ncols
        if np.any(self.lb_x > self.ub_x + 1e-12):
            return MilpSolution("infeasible", math.inf, None, math.inf)
        if m == 0:
            x = np.where(self.c_x > 0.0, self.lb_x, np.where(self.c_x < 0.0, self.ub_x, self.lb_x))
            val = float(self.c_x @ x) + self.obj_const
            return MilpSolution("optimal", val, x, val, duals=np.zeros(0), dual_value=val)

        status = np.full(ncols, _AT_LOWER, dtype=np.int8)
        # nonbasic slacks rest at 0, which is the upper bound of >= slacks
        for i in range(m):
            if self.lb[n + i] == -math.inf:
                status[n + i] = _AT_UPPER

        x0 = self.lb_x.copy()
        s0 = self.b - self.A_full[:, :n] @ x0
        basis = np.empty(m, dtype=np.int64)
        xB = np.empty(m)
        art_sign = np.zeros(m)
        n_art = 0
        for i in range(m):
            if self.lb[n + i] - FEAS_TOL <= s0[i] <= self.ub[n + i] + FEAS_TOL:
                basis[i] = n + i
                xB[i] = s0[i]
                status[n + i] = _BASIC
            else:
                basis[i] = ncols + i
                art_sign[i] = 1.0 if s0[i] >= 0.0 else -1.0
                xB[i] = abs(s0[i])
                n_art += 1

        self._tab = self.A_full.copy()
        for i in range(m):
            if basis[i] >= ncols and art_sign[i] < 0:
                self._tab[i, :] *= -1.0
        self._basis = basis
        self._xB = xB
        self._status = status
        self._art_sign = art_sign
        # bounds addressed by basis id (real columns, then artificials)
        self._lb_all = np.concatenate([self.lb, np.zeros(m)])
        self._ub_all = np.concatenate([self.ub, np.full(m, math.inf)])

        if n_art:
            verdict = self._iterate(phase=1)
            if verdict != "optimal":
                return MilpSolution("limit", math.inf, None, -math.inf,
                                    iterations=self.iterations)
            if self._phase1_value() > FEAS_TOL:
                return MilpSolution("infeasible", math.inf, None, math.inf,
                                    iterations=self.iterations)
            self._ub_all[ncols:] = 0.0
            art_basic = self._basis >= ncols
            self._xB[art_basic] = 0.0

        verdict = self._iterate(phase=2)
        if verdict == "unbounded":
            return MilpSolution("unbounded", -math.inf, None, -math.inf,
                                iterations=self.iterations)
        if verdict != "optimal":
            return MilpSolution("limit", math.inf, None, -math.inf,
                                iterations=self.iterations)
        return self._extract()

    # -- internals ----------------------------------------------------------

    def _phase1_value(self) -> float:
        mask = self._basis >= self.ncols
        return float(np.sum(np.maximum(self._xB[mask], 0.0))) if np.any(mask) else 0.0

    def _phase_costs(self, phase: int) -> Tuple[np.ndarray, float]:
        if phase == 1:
            return np.zeros(self.ncols), 1.0
        return self.c, 0.0

    def _basic_costs(self, c_cols: np.ndarray, art_cost: float) -> np.ndarray:
        cb = np.full(self.m, art_cost)
        real = self._basis < self.ncols
        cb[real] = c_cols[self._basis[real]]
        return cb

    def _current_x(self) -> np.ndarray:
        x = np.empty(self.ncols)
        at_lo = self._status == _AT_LOWER
        at_up = self._status == _AT_UPPER
        x[at_lo] = self.lb[at_lo]
        x[at_up] = self.ub[at_up]
        real = self._basis < self.ncols
        x[self._basis[real]] = self._xB[real]
        return x

    def _refactorize(self) -> bool:
        m, ncols = self.m, self.ncols
        B = np.zeros((m, m))
        for i, j in enumerate(self._basis):
            if j < ncols:
                B[:, i] = self.A_full[:, j]
            else:
                B[j - ncols, i] = self._art_sign[j - ncols]
        try:
            binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return False
        self._tab = binv @ self.A_full
        xn = np.empty(ncols)
        at_lo = self._status == _AT_LOWER
        at_up = self._status == _AT_UPPER
        xn[at_lo] = self.lb[at_lo]
        xn[at_up] = self.ub[at_up]
        xn[self._status == _BASIC] = 0.0
        self._xB = binv @ (self.b - self.A_full @ xn)
        return True

    def _iterate(self, phase: int) -> str:
        m, ncols = self.m, self.ncols
        c_cols, art_cost = self._phase_costs(phase)
        rc = c_cols - self._basic_costs(c_cols, art_cost) @ self._tab
        lb, ub = self.lb, self.ub
        lb_all, ub_all = self._lb_all, self._ub_all
        movable = (ub - lb) > 0.0
        degen_run = 0
        bland = False
        max_iter = 200000 + 200 * ncols
        since_refactor = 0

        with np.errstate(divide="ignore", invalid="ignore"):
            while True:
                self.iterations += 1
                since_refactor += 1
                if self.iterations > max_iter:
                    return "stalled"
                if since_refactor >= _REFACTOR_EVERY:
                    since_refactor = 0
                    if self._refactorize():
                        rc = c_cols - self._basic_costs(c_cols, art_cost) @ self._tab

                tab, basis, xB, status = self._tab, self._basis, self._xB, self._status
                nonbasic = status != _BASIC
                eff = np.where(status == _AT_UPPER, -rc, rc)
                eligible = nonbasic & movable & (eff < -PIVOT_TOL)
                if not np.any(eligible):
                    return "optimal"

                if bland:
                    j = int(np.argmax(eligible))
                else:
                    j = int(np.argmin(np.where(eligible, eff, 0.0)))
                sigma = 1.0 if status[j] == _AT_LOWER else -1.0
                col = tab[:, j]
                d = sigma * col

                blo = lb_all[basis]
                bhi = ub_all[basis]
                lo_room = np.where(d > PIVOT_TOL, (xB - blo) / np.where(d > PIVOT_TOL, d, 1.0), math.inf)
                hi_room = np.where(d < -PIVOT_TOL, (bhi - xB) / np.where(d < -PIVOT_TOL, -d, 1.0), math.inf)
                room = np.maximum(np.minimum(lo_room, hi_room), 0.0)

                step_cap = ub[j] - lb[j]
                rmin = float(np.min(room))
                leave = -1
                if rmin < step_cap - 1e-15:
                    t_best = rmin
                    cands = np.flatnonzero(room <= rmin + 1e-15)
                    if cands.size > 1:
                        if bland:
                            leave = int(cands[np.argmin(basis[cands])])
                        else:
                            stab = np.abs(col[cands])
                            keep = cands[stab >= stab.max() - 1e-12]
                            leave = int(keep[np.argmin(basis[keep])])
                    else:
                        leave = int(cands[0])
                else:
                    t_best = step_cap

                if not np.isfinite(t_best):
                    return "unbounded"

                if t_best <= 1e-12:
                    degen_run += 1
                    if degen_run >= 3 * ncols:
                        bland = True
                else:
                    degen_run = 0
                    bland = False

                if leave < 0:
                    xB -= d * t_best
                    status[j] = _AT_UPPER if status[j] == _AT_LOWER else _AT_LOWER
                    continue

                enter_val = (lb[j] if sigma > 0 else ub[j]) + sigma * t_best
                xB -= d * t_best
                old = basis[leave]
                if old < ncols:
                    status[old] = _AT_LOWER if d[leave] > 0.0 else _AT_UPPER
                piv = col[leave]
                colc = col.copy()
                pivrow = tab[leave] / piv
                tab -= np.outer(colc, pivrow)
                tab[leave] = pivrow
                rc = rc - rc[j] * pivrow
                rc[j] = 0.0
                basis[leave] = j
                xB[leave] = enter_val
                status[j] = _BASIC

    def _extract(self) -> MilpSolution:
        n, m, ncols = self.n, self.m, self.ncols
        x_all = self._current_x()
        x = np.minimum(np.maximum(x_all[:n], self.lb_x), self.ub_x)
        value = float(self.c_x @ x) + self.obj_const

        cb = np.zeros(m)
        real = self._basis < ncols
        cb[real] = self.c[self._basis[real]]
        y = cb @ self._tab[:, n:]
        rc_exact = self.c - y @ self.A_full
        nonbasic = self._status != _BASIC
        dual = float(y @ self.b) + float(rc_exact[nonbasic] @ x_all[nonbasic]) + self.obj_const
        return MilpSolution("optimal", value, x, value, duals=y, dual_value=dual,
                            iterations=self.iterations)


def solve_lp(lp: LinearProgram, lb=None, ub=None) -> MilpSolution:
    """Primal-dual optimal basic solution of a continuous program.

    With explicit lb/ub overrides this solves the continuous relaxation at
    those bounds (used by the MILP search); otherwise the program must be
    all-continuous.
    """
    if lp.indicators:
        raise ValueError("indicators must be linearized first (linearize_indicator)")
    if lb is None and ub is None and bool(np.any(lp.int_mask)):
        raise ValueError("solve_lp requires an all-continuous program")
    if lp.n == 0:
        for coeffs, rel, rhs in lp.rows:
            bad = (rel == "<=" and 0.0 > rhs + FEAS_TOL) or \
                  (rel == ">=" and 0.0 < rhs - FEAS_TOL) or \
                  (rel == "=" and abs(rhs) > FEAS_TOL)
            if bad:
                return MilpSolution("infeasible", math.inf, None, math.inf)
        return MilpSolution("optimal", lp.obj_const, np.zeros(0), lp.obj_const,
                            duals=np.zeros(len(lp.rows)), dual_value=lp.obj_const)
    return _Simplex(lp, lb, ub).solve()


def solve_milp(lp: LinearProgram, limits: Optional[Limits] = None) -> MilpSolution:
    """Branch-and-bound over the LP relaxation.

    Best-bound node selection (ties by insertion order), most-fractional
    branching (ties by smallest index). A limit verdict always carries the
    proven global bound; a non-optimal value is never reported as optimal.
    """
    if lp.indicators:
        raise ValueError("indicators must be linearized first (linearize_indicator)")
    limits = limits or Limits()
    t0 = time.monotonic()

    int_idx = np.flatnonzero(lp.int_mask)
    lb0 = lp.lb.astype(float).copy()
    ub0 = lp.ub.astype(float).copy()
    lb0[int_idx] = np.ceil(lb0[int_idx] - INT_TOL)
    ub0[int_idx] = np.floor(ub0[int_idx] + INT_TOL)

    if int_idx.size == 0:
        sol = solve_lp(lp, lb0, ub0)
        sol.nodes = 1
        return sol

    import heapq

    counter = 0
    heap = [(-math.inf, counter, lb0, ub0)]
    inc_val = math.inf
    inc_x = None
    nodes = 0
    iters = 0
    pruned_lb = math.inf
    status = "optimal"

    while heap:
        if limits.node_limit is not None and nodes >= limits.node_limit:
            status = "limit"
            break
        if limits.time_limit_s is not None and time.monotonic() - t0 > limits.time_limit_s:
            status = "limit"
            break
        bound, _, nlb, nub = heapq.heappop(heap)
        gap_abs = limits.gap_tol * max(1.0, abs(inc_val))
        if inc_val < math.inf and bound >= inc_val - gap_abs:
            pruned_lb = min(pruned_lb, bound)
            heap.clear()
            break
        nodes += 1
        sol = solve_lp(lp, nlb, nub)
        iters += sol.iterations
        if sol.status != "optimal":
            continue
        if inc_val < math.inf and sol.value >= inc_val - gap_abs:
            pruned_lb = min(pruned_lb, sol.value)
            continue
        xi = sol.x[int_idx]
        frac = np.abs(xi - np.round(xi))
        worst = int(np.argmax(frac))
        if frac[worst] <= INT_TOL:
            if sol.value < inc_val:
                inc_val = sol.value
                inc_x = sol.x.copy()
                inc_x[int_idx] = np.round(inc_x[int_idx])
            continue
        j = int(int_idx[worst])
        v = sol.x[j]
        lo_ub = nub.copy()
        lo_ub[j] = math.floor(v)
        hi_lb = nlb.copy()
        hi_lb[j] = math.ceil(v)
        child_bound = max(bound, sol.value)
        counter += 1
        heapq.heappush(heap, (child_bound, counter, nlb, lo_ub))
        counter += 1
        heapq.heappush(heap, (child_bound, counter, hi_lb, nub))

    if status == "limit":
        open_bounds = [t[0] for t in heap]
        bound = min(open_bounds) if open_bounds else min(pruned_lb, inc_val)
        return MilpSolution("limit", inc_val, inc_x, bound, iterations=iters, nodes=nodes)
    if inc_x is None:
        return MilpSolution("infeasible", math.inf, None, math.inf,
                            iterations=iters, nodes=nodes)
    return MilpSolution("optimal", inc_val, inc_x, min(pruned_lb, inc_val),
                        iterations=iters, nodes=nodes)


def linearize_indicator(lp: LinearProgram) -> LinearProgram:
    """Fold (guard = v  =>  a.x <= b) implications into big-M rows.

    M is the interval-arithmetic upper bound of (a.x - b) over the variable
    box, clipped at zero, so solution sets over integer-feasible points are
    unchanged and vacuous implications stay vacuous.
    """
    out = LinearProgram(lp.n, lp.obj.copy(), lp.lb.copy(), lp.ub.copy(),
                        lp.int_mask.copy(), [(c.copy(), r, b) for c, r, b in lp.rows],
                        [], lp.obj_const)
    for guard, val, (coeffs, rel, rhs) in lp.indicators:
        if rel != "<=":
            raise ValueError("only <= rows can be guarded")
        if not (lp.int_mask[guard] and lp.lb[guard] >= 0.0 and lp.ub[guard] <= 1.0):
            raise ValueError(f"guard variable {guard} is not binary")
        if val not in (0, 1):
            raise ValueError("guard value must be 0 or 1")
        _, hi = interval_of_linear(coeffs, lp.lb, lp.ub)
        big_m = max(hi - rhs, 0.0)
        row = coeffs.copy()
        if val == 1:
            # a.x + M g <= rhs + M
            row[guard] += big_m
            out.add_row(row, "<=", rhs + big_m)
        else:
            # a.x - M g <= rhs
            row[guard] -= big_m
            out.add_row(row, "<=", rhs)
    return out


def enumerate_integer_points(ms: MipSet, cap: int = 4096) -> List[np.ndarray]:
    """All feasible integer points of an all-integer set, lexicographic.

    Refuses (CapExceeded) when the bounding grid is larger than `cap`.
    """
    if ms.total_dim == 0:
        return [np.zeros(0)]
    if not np.all(ms.int_mask):
        raise ValueError("enumerate_integer_points requires an all-integer set")
    lo = np.ceil(ms.lb - 1e-9).astype(np.int64)
    hi = np.floor(ms.ub + 1e-9).astype(np.int64)
    if np.any(hi < lo):
        return []
    total = 1
    for a, b in zip(lo, hi):
        total *= int(b - a + 1)
        if total > cap:
            raise CapExceeded(f"integer grid of {total}+ points exceeds cap {cap}")
    import itertools

    pts = []
    for tup in itertools.product(*[range(int(a), int(b) + 1) for a, b in zip(lo, hi)]):
        v = np.array(tup, dtype=float)
        if ms.n_rows == 0 or np.all(ms.A @ v <= ms.b + 1e-9):
            pts.append(v)
    return pts


def write_lp(lp: LinearProgram, path: str):
    """Debug export in LP format with 17-significant-digit coefficients."""
    def num(v):
        return f"{v:.17g}"

    def expr(coeffs):
        terms = []
        for j, a in enumerate(coeffs):
            if a != 0.0:
                sign = "+" if a >= 0 else "-"
                terms.append(f"{sign} {num(abs(a))} x{j}")
        return " ".join(terms) if terms else "0 x0"

    lines = ["Minimize", f" obj: {expr(lp.obj)}", "Subject To"]
    for i, (coeffs, rel, rhs) in enumerate(lp.rows):
        lines.append(f" r{i}: {expr(coeffs)} {rel if rel != '=' else '='} {num(rhs)}")
    lines.append("Bounds")
    for j in range(lp.n):
        lines.append(f" {num(lp.lb[j])} <= x{j} <= {num(lp.ub[j])}")
    ints = [f"x{j}" for j in range(lp.n) if lp.int_mask[j]]
    if ints:
        lines.append("General")
        lines.append(" " + " ".join(ints))
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
