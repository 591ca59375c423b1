"""Independent brute-force ground truth for desk-scale validation.

Everything here reports values in the canonical minimize sense (the sense
the instance data are stored in); callers undo the maximize negation via
`inst.report_value` when comparing against solver reports.

The worst-case evaluator deliberately goes through the enumeration
separation path and a theta-bisection, so it shares nothing with the
branch-and-bound driver or the indicator MILP it validates.
"""

from __future__ import annotations

import itertools
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import mathprog
from .mathprog import CapExceeded, LinearProgram
from .master import theta_box
from .model import KAdaptInstance, eval_affine
from .rng import Xoshiro256
from .separation import solve_separation_enumeration, violation

__all__ = ["worst_case_value", "brute_force_k_adapt", "two_stage_value",
           "sample_check"]

BISECT_TOL = 1e-7


def _sep_value(inst, theta, x, y, cap) -> float:
    return solve_separation_enumeration(inst, theta, x, y, cap).zeta


def _policy_obj_interval(inst: KAdaptInstance, x, yk) -> Tuple[float, float]:
    """Interval of c.x + d(xi).yk over the uncertainty box."""
    cx = float(inst.c @ np.asarray(x, float).ravel())
    lo = hi = cx + float(inst.d.const[:, 0] @ yk)
    xi_lb, xi_ub = inst.Xi.lb[: inst.np_], inst.Xi.ub[: inst.np_]
    for p, m in inst.d.lin.items():
        coef = float(m[:, 0] @ yk)
        lo += min(coef * xi_lb[p], coef * xi_ub[p])
        hi += max(coef * xi_lb[p], coef * xi_ub[p])
    return lo, hi


def worst_case_value(inst: KAdaptInstance, x, y, cap: int = 4096,
                     tol: float = BISECT_TOL,
                     cutoff: Optional[float] = None) -> float:
    """Worst-case objective of fixed policies by bisection on the level theta.

    The separation value is non-increasing in theta, so the supremum of the
    objective equals the smallest theta with non-positive separation value;
    bisection resolves it to `tol`. Returns +inf when some realization
    admits no feasible policy (the infeasibility convention), and returns
    suprema even when they are not attained.

    With `cutoff`, returns +inf early once the value is proven >= cutoff
    (pruning hook for the enumeration oracle).
    """
    y = [np.asarray(v, float).ravel() for v in y]
    intervals = [_policy_obj_interval(inst, x, yk) for yk in y]
    hi = max(b for _, b in intervals) + 1.0
    lo = min(a for a, _ in intervals) - 1.0
    if _sep_value(inst, hi, x, y, cap) > 0.0:
        return math.inf
    if cutoff is not None:
        if cutoff <= lo:
            return math.inf
        if _sep_value(inst, cutoff, x, y, cap) > 0.0:
            return math.inf
        hi = min(hi, cutoff)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _sep_value(inst, mid, x, y, cap) > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


def brute_force_k_adapt(inst: KAdaptInstance, k: Optional[int] = None,
                        cap: int = 100_000
                        ) -> Tuple[float, np.ndarray, List[np.ndarray]]:
    """Exact optimum by enumerating first-stage points and unordered policy
    multisets, scored through the bisection evaluator.

    Requires all-integer decision sets; refuses when |Y|^k * |X| exceeds the
    cap. Ties keep the lexicographically first tuple.
    """
    k = inst.k if k is None else int(k)
    xpts = ([np.zeros(0)] if inst.n1 == 0
            else mathprog.enumerate_integer_points(inst.X, cap))
    ypts = mathprog.enumerate_integer_points(inst.Y, cap)
    if not xpts or not ypts:
        return math.inf, None, None
    if len(ypts) ** k * len(xpts) > cap:
        raise CapExceeded(f"{len(ypts)}^{k} * {len(xpts)} policy tuples exceed cap {cap}")

    best = math.inf
    best_x, best_y = None, None
    for x in xpts:
        for combo in itertools.combinations_with_replacement(range(len(ypts)), k):
            ys = [ypts[i] for i in combo]
            val = worst_case_value(inst, x, ys,
                                   cutoff=None if best == math.inf else best)
            if val < best - 1e-12:
                best, best_x, best_y = val, x, ys
    return best, best_x, best_y


def _finite_xi_two_stage(inst: KAdaptInstance, scenarios: Sequence[np.ndarray]) -> float:
    """min over x of max over the listed realizations of the best recourse,
    as one monolithic MILP with a recourse copy per realization."""
    n1, n2 = inst.n1, inst.n2
    S = len(scenarios)
    ncols = 1 + n1 + S * n2
    t_lo, t_hi = theta_box(inst)
    lb = np.concatenate([[t_lo], inst.X.lb, np.tile(inst.Y.lb, S)])
    ub = np.concatenate([[t_hi], inst.X.ub, np.tile(inst.Y.ub, S)])
    int_mask = np.concatenate([[False], inst.X.int_mask, np.tile(inst.Y.int_mask, S)])
    obj = np.zeros(ncols)
    obj[0] = 1.0
    lp = LinearProgram(ncols, obj, lb, ub, int_mask)
    x_off = 1
    for i in range(inst.X.n_rows):
        row = np.zeros(ncols)
        row[x_off:x_off + n1] = inst.X.A[i]
        lp.add_row(row, "<=", inst.X.b[i])
    for s, xi in enumerate(scenarios):
        y_off = 1 + n1 + s * n2
        for i in range(inst.Y.n_rows):
            row = np.zeros(ncols)
            row[y_off:y_off + n2] = inst.Y.A[i]
            lp.add_row(row, "<=", inst.Y.b[i])
        dxi = eval_affine(inst.d, xi).ravel()
        row = np.zeros(ncols)
        row[0] = -1.0
        row[x_off:x_off + n1] = inst.c
        row[y_off:y_off + n2] = dxi
        lp.add_row(row, "<=", 0.0)
        if inst.n_rows:
            Txi = eval_affine(inst.T, xi)
            Wxi = eval_affine(inst.W, xi)
            hxi = eval_affine(inst.h, xi).ravel()
            for l in range(inst.n_rows):
                row = np.zeros(ncols)
                row[x_off:x_off + n1] = Txi[l]
                row[y_off:y_off + n2] = Wxi[l]
                lp.add_row(row, "<=", hxi[l])
    sol = mathprog.solve_milp(lp)
    if sol.status == "infeasible":
        return math.inf
    if sol.status != "optimal":
        raise RuntimeError(f"finite-scenario oracle hit {sol.status}")
    return float(sol.value)


def two_stage_value(inst: KAdaptInstance, cap: int = 100_000,
                    scenarios: Optional[Sequence] = None) -> float:
    """Exact fully-adjustable value under an applicable finiteness.

    Routes, in order: an explicit hand-listed scenario set (exact whenever
    the worst case is attained on the list, e.g. vertex candidates); a
    finite recourse set (solved as the k = |Y| policy problem); a finite
    integer uncertainty set. Otherwise refuses.
    """
    if scenarios is not None:
        return _finite_xi_two_stage(inst, [np.asarray(s, float).ravel()
                                           for s in scenarios])
    if np.all(inst.Y.int_mask):
        try:
            ypts = mathprog.enumerate_integer_points(inst.Y, cap)
        except CapExceeded:
            ypts = None
        if ypts is not None:
            return brute_force_k_adapt(inst, k=len(ypts), cap=cap)[0]
    if np.all(inst.Xi.int_mask):
        pts = mathprog.enumerate_integer_points(inst.Xi, cap)
        return _finite_xi_two_stage(inst, [p[: inst.np_] for p in pts])
    raise CapExceeded("two_stage_value needs finite Y, finite Xi, "
                      "or an explicit scenario list")


def _enumerable_xi_points(inst: KAdaptInstance, cap: int):
    if not np.all(inst.Xi.int_mask):
        return None
    try:
        return mathprog.enumerate_integer_points(inst.Xi, cap)
    except CapExceeded:
        return None


def sample_check(inst: KAdaptInstance, solution, n_samples: int = 10_000,
                 seed: int = 7) -> float:
    """Max violation of a reported solution over sampled realizations.

    Continuous sets are explored by hit-and-run with the chord clipped
    against the box and every row; all-integer sets are sampled uniformly
    from their enumerated points. Deterministic given the seed.
    """
    theta = inst.report_value(solution.theta)
    x = np.asarray(solution.x, float).ravel()
    y = [np.asarray(v, float).ravel() for v in solution.y]
    rng = Xoshiro256(seed)
    worst = -math.inf

    pts = _enumerable_xi_points(inst, 100_000)
    if pts is not None:
        if not pts:
            raise RuntimeError("uncertainty set is empty")
        for _ in range(n_samples):
            xi = pts[rng.randint(len(pts))][: inst.np_]
            worst = max(worst, violation(inst, theta, x, y, xi))
        return worst

    lp = mathprog.feasibility_program(inst.Xi)
    sol = mathprog.solve_milp(lp) if np.any(inst.Xi.int_mask) else mathprog.solve_lp(lp)
    if sol.status != "optimal":
        raise RuntimeError("uncertainty set is empty")
    point = sol.x.copy()
    n = point.size
    A, b = inst.Xi.A, inst.Xi.b
    lo, hi = inst.Xi.lb, inst.Xi.ub
    def gaussians(count):
        vals = []
        while len(vals) < count:
            a = max(rng.uniform(), 1e-300)
            t = rng.uniform()
            r = math.sqrt(-2.0 * math.log(a))
            vals.append(r * math.cos(2 * math.pi * t))
            vals.append(r * math.sin(2 * math.pi * t))
        return np.array(vals[:count])

    burn = 64
    produced = 0
    while produced < n_samples:
        direction = gaussians(n)
        norm = float(np.linalg.norm(direction))
        if norm < 1e-12:
            continue
        direction /= norm
        t_min, t_max = -math.inf, math.inf
        for j in range(n):
            dj = direction[j]
            if abs(dj) > 1e-14:
                a1 = (lo[j] - point[j]) / dj
                a2 = (hi[j] - point[j]) / dj
                t_min = max(t_min, min(a1, a2))
                t_max = min(t_max, max(a1, a2))
        if inst.Xi.n_rows:
            ad = A @ direction
            slack = b - A @ point
            for i in range(len(b)):
                if ad[i] > 1e-14:
                    t_max = min(t_max, slack[i] / ad[i])
                elif ad[i] < -1e-14:
                    t_min = max(t_min, slack[i] / ad[i])
        if not (t_max - t_min > -1e-12):
            continue
        t_min, t_max = min(t_min, t_max), max(t_min, t_max)
        point = point + (t_min + (t_max - t_min) * rng.uniform()) * direction
        np.clip(point, lo, hi, out=point)
        if burn > 0:
            burn -= 1
            continue
        produced += 1
        worst = max(worst, violation(inst, theta, x, y, point[: inst.np_]))
    return worst
