"""Separation: find a realization under which every candidate policy is
infeasible or exceeds the current objective level.

Two interchangeable routes: the indicator MILP (big-M linearized) and plain
enumeration of every per-policy binding-row assignment, each solved as a
small LP/MILP over (zeta, xi).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import mathprog
from .mathprog import CapExceeded, LinearProgram, Limits
from .model import KAdaptInstance, affine_row_interval, eval_affine

__all__ = ["SeparationResult", "violation", "build_separation_milp",
           "solve_separation_milp", "solve_separation_enumeration"]


@dataclass
class SeparationResult:
    zeta: float
    xi: Optional[np.ndarray]
    aux: Optional[np.ndarray]
    z: Optional[np.ndarray]      # K x (L+1) booleans, column 0 = objective row
    proven: bool = True          # False when a limit stopped the MILP early


def violation(inst: KAdaptInstance, theta: Optional[float], x, y, xi) -> float:
    """Max-violation value at one realization.

    min over policies of max(objective excess over theta, worst constraint
    residual). The -inf sentinel for theta yields +inf.
    """
    if theta is None or theta == -math.inf:
        return math.inf
    xi = np.asarray(xi, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    dxi = eval_affine(inst.d, xi).ravel()
    cx = float(inst.c @ x)
    if inst.n_rows:
        Txi = eval_affine(inst.T, xi)
        Wxi = eval_affine(inst.W, xi)
        hxi = eval_affine(inst.h, xi).ravel()
        res_x = Txi @ x - hxi
    best = math.inf
    for yk in y:
        v = cx + float(dxi @ yk) - theta
        if inst.n_rows:
            v = max(v, float(np.max(res_x + Wxi @ yk)))
        best = min(best, v)
    return best


def _policy_exprs(inst: KAdaptInstance, theta: float, x, y):
    """Affine-in-xi expressions of every disjunct row.

    exprs[k][l] = (xi_coefs, const) with l = 0 the objective row and l >= 1
    the constraint rows, so that the row value at xi is const + xi_coefs.xi.
    """
    np_ = inst.np_
    x = np.asarray(x, dtype=float).ravel()
    cx = float(inst.c @ x)
    exprs = []
    for yk in y:
        rows = []
        const = cx + float(inst.d.const[:, 0] @ yk) - theta
        coefs = np.zeros(np_)
        for p, m in inst.d.lin.items():
            coefs[p] = m[:, 0] @ yk
        rows.append((coefs, const))
        for l in range(inst.n_rows):
            const = float(inst.T.const[l] @ x + inst.W.const[l] @ yk
                          - inst.h.const[l, 0])
            coefs = np.zeros(np_)
            for p, m in inst.T.lin.items():
                coefs[p] += m[l] @ x
            for p, m in inst.W.lin.items():
                coefs[p] += m[l] @ yk
            for p, m in inst.h.lin.items():
                coefs[p] -= m[l, 0]
            rows.append((coefs, const))
        exprs.append(rows)
    return exprs


def _zeta_bound(inst: KAdaptInstance, exprs) -> float:
    xi_lb = inst.Xi.lb[: inst.np_]
    xi_ub = inst.Xi.ub[: inst.np_]
    v = 1.0
    for rows in exprs:
        for coefs, const in rows:
            lo = const + float(np.minimum(coefs * xi_lb, coefs * xi_ub).sum())
            hi = const + float(np.maximum(coefs * xi_lb, coefs * xi_ub).sum())
            v = max(v, abs(lo), abs(hi))
    return v


def _xi_block_program(inst: KAdaptInstance, extra_cols: int, zeta_box: float):
    """Program skeleton over [zeta, xi, aux, extras] with the set rows."""
    np_, aux = inst.np_, inst.Xi.aux_dim
    n = 1 + np_ + aux + extra_cols
    lb = np.concatenate([[-zeta_box], inst.Xi.lb, np.zeros(extra_cols)])
    ub = np.concatenate([[zeta_box], inst.Xi.ub, np.ones(extra_cols)])
    int_mask = np.concatenate([[False], inst.Xi.int_mask,
                               np.ones(extra_cols, dtype=bool)])
    obj = np.zeros(n)
    obj[0] = -1.0  # maximize zeta
    lp = LinearProgram(n, obj, lb, ub, int_mask)
    for i in range(inst.Xi.n_rows):
        row = np.zeros(n)
        row[1:1 + np_ + aux] = inst.Xi.A[i]
        lp.add_row(row, "<=", inst.Xi.b[i])
    return lp


def build_separation_milp(inst: KAdaptInstance, theta: float, x, y) -> LinearProgram:
    """Indicator MILP over (zeta, xi, aux, z): per policy one binding row is
    selected and the selected row caps zeta. Maximization is encoded as
    min -zeta; indicators are left for linearize_indicator.
    """
    if theta is None or not np.isfinite(theta):
        raise ValueError("separation MILP needs a finite theta")
    K, L, np_ = len(y), inst.n_rows, inst.np_
    aux = inst.Xi.aux_dim
    exprs = _policy_exprs(inst, theta, x, y)
    zbox = _zeta_bound(inst, exprs)
    lp = _xi_block_program(inst, K * (L + 1), zbox)
    z_off = 1 + np_ + aux
    for k in range(K):
        row = np.zeros(lp.n)
        row[z_off + k * (L + 1): z_off + (k + 1) * (L + 1)] = 1.0
        lp.add_row(row, "=", 1.0)
        for l in range(L + 1):
            coefs, const = exprs[k][l]
            impl = np.zeros(lp.n)
            impl[0] = 1.0
            impl[1:1 + np_] = -coefs
            lp.add_indicator(z_off + k * (L + 1) + l, 1, impl, const)
    return lp


def _any_feasible_xi(inst: KAdaptInstance) -> Tuple[np.ndarray, np.ndarray]:
    lp = mathprog.feasibility_program(inst.Xi)
    sol = mathprog.solve_milp(lp)
    if sol.status != "optimal":
        raise RuntimeError("uncertainty set is empty")
    return sol.x[: inst.np_], sol.x[inst.np_:]


def solve_separation_milp(inst: KAdaptInstance, theta, x, y,
                          limits: Optional[Limits] = None) -> SeparationResult:
    """Solve the linearized indicator MILP; +inf sentinel when theta is -inf
    (any realization attains it)."""
    if theta is None or theta == -math.inf:
        xi, aux = _any_feasible_xi(inst)
        return SeparationResult(math.inf, xi, aux, None)
    K, L, np_ = len(y), inst.n_rows, inst.np_
    aux_dim = inst.Xi.aux_dim
    lp = mathprog.linearize_indicator(build_separation_milp(inst, theta, x, y))
    sol = mathprog.solve_milp(lp, limits)
    if sol.status not in ("optimal", "limit") or sol.x is None:
        raise RuntimeError(f"separation MILP unexpectedly {sol.status}")
    xi = sol.x[1:1 + np_]
    aux = sol.x[1 + np_:1 + np_ + aux_dim]
    zraw = sol.x[1 + np_ + aux_dim:]
    z = zraw.reshape(K, L + 1) > 0.5
    return SeparationResult(-float(sol.value), xi, aux, z,
                            proven=sol.status == "optimal")


def solve_separation_enumeration(inst: KAdaptInstance, theta, x, y,
                                 cap: int = 4096) -> SeparationResult:
    """Enumerate all (L+1)^K binding-row assignments, one small LP/MILP each.

    Exact tie-break: the lexicographically smallest assignment wins. Refuses
    (CapExceeded) past the cap; callers fall back to the MILP route.
    """
    if theta is None or theta == -math.inf:
        xi, aux = _any_feasible_xi(inst)
        return SeparationResult(math.inf, xi, aux, None)
    K, L, np_ = len(y), inst.n_rows, inst.np_
    aux_dim = inst.Xi.aux_dim
    count = (L + 1) ** K
    if count > cap:
        raise CapExceeded(f"(L+1)^K = {count} assignments exceed cap {cap}")
    exprs = _policy_exprs(inst, theta, x, y)
    zbox = _zeta_bound(inst, exprs)
    discrete = bool(np.any(inst.Xi.int_mask))

    base = _xi_block_program(inst, 0, zbox)
    base_rows = list(base.rows)
    best = None
    for assign in itertools.product(range(L + 1), repeat=K):
        lp = LinearProgram(base.n, base.obj, base.lb, base.ub, base.int_mask,
                           list(base_rows))
        for k in range(K):
            coefs, const = exprs[k][assign[k]]
            row = np.zeros(lp.n)
            row[0] = 1.0
            row[1:1 + np_] = -coefs
            lp.add_row(row, "<=", const)
        sol = mathprog.solve_milp(lp) if discrete else mathprog.solve_lp(lp)
        if sol.status != "optimal":
            continue
        val = -float(sol.value)
        if best is None or val > best[0]:
            best = (val, assign, sol.x[1:1 + np_], sol.x[1 + np_:1 + np_ + aux_dim])
    if best is None:
        raise RuntimeError("all separation subproblems infeasible; "
                           "uncertainty set is empty")
    val, assign, xi, aux = best
    z = np.zeros((K, L + 1), dtype=bool)
    for k in range(K):
        z[k, assign[k]] = True
    return SeparationResult(val, xi, aux, z)
