"""Scenario-based master problem: K candidate policies, each enforced on its
own finite scenario list, deterministic rows enforced for every policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import mathprog
from .mathprog import LinearProgram, Limits
from .model import (
    AffineMap,
    KAdaptInstance,
    Scenario,
    affine_row_interval,
    eval_affine,
    interval_of_linear,
    interval_product,
)

__all__ = ["ScenarioPool", "MasterSolution", "build_master", "solve_master",
           "theta_box"]

_GRID = 1e-9


class ScenarioPool:
    """Global scenario store, deduplicated on a 1e-9 coordinate grid."""

    def __init__(self):
        self._scenarios: List[Scenario] = []
        self._index = {}

    def __len__(self):
        return len(self._scenarios)

    def get(self, sid: int) -> Scenario:
        return self._scenarios[sid]

    def key_of(self, xi, aux) -> tuple:
        full = np.concatenate([np.asarray(xi, float).ravel(),
                               np.asarray(aux, float).ravel()])
        return tuple(int(round(v / _GRID)) for v in full)

    def add(self, xi, aux=()) -> Scenario:
        key = self.key_of(xi, aux)
        sid = self._index.get(key)
        if sid is not None:
            return self._scenarios[sid]
        sc = Scenario(np.asarray(xi, float).ravel(),
                      np.asarray(aux, float).ravel(), len(self._scenarios))
        self._scenarios.append(sc)
        self._index[key] = sc.id
        return sc


@dataclass
class MasterSolution:
    theta: Optional[float]       # None encodes the -inf root sentinel
    x: Optional[np.ndarray]
    y: Optional[List[np.ndarray]]
    status: str                  # optimal | infeasible | limit
    bound: float = -math.inf     # valid lower bound (meaningful on limit)


def theta_box(inst: KAdaptInstance) -> Tuple[float, float]:
    """Interval-arithmetic bounds of c.x + d(xi).y over the variable boxes."""
    lo, hi = interval_of_linear(inst.c, inst.X.lb[: inst.n1], inst.X.ub[: inst.n1])
    xi_lb = inst.Xi.lb[: inst.np_]
    xi_ub = inst.Xi.ub[: inst.np_]
    d_iv = affine_row_interval(
        AffineMap(1, inst.n2, inst.d.const.T, {p: m.T for p, m in inst.d.lin.items()}),
        0, xi_lb, xi_ub)
    for j in range(inst.n2):
        plo, phi = interval_product((d_iv[j, 0], d_iv[j, 1]),
                                    (inst.Y.lb[j], inst.Y.ub[j]))
        lo += plo
        hi += phi
    return lo - 1.0, hi + 1.0


def _scenario_rows(inst: KAdaptInstance, lp: LinearProgram, xi, k: int,
                   n1: int, n2: int, theta_col: int, x_off: int, y_off):
    """Objective row and uncertain constraint rows of one (k, xi) block."""
    ncols = lp.n
    dxi = eval_affine(inst.d, xi).ravel()
    row = np.zeros(ncols)
    row[theta_col] = -1.0
    row[x_off:x_off + n1] = inst.c
    row[y_off[k]:y_off[k] + n2] = dxi
    lp.add_row(row, "<=", 0.0)

    if inst.uncertain_rows:
        Txi = eval_affine(inst.T, xi)
        Wxi = eval_affine(inst.W, xi)
        hxi = eval_affine(inst.h, xi).ravel()
        for l in inst.uncertain_rows:
            row = np.zeros(ncols)
            row[x_off:x_off + n1] = Txi[l]
            row[y_off[k]:y_off[k] + n2] = Wxi[l]
            lp.add_row(row, "<=", hxi[l])


def build_master(inst: KAdaptInstance, scenario_lists: Sequence[Sequence[int]],
                 pool: ScenarioPool,
                 fixed_policies: Optional[Sequence[Tuple[np.ndarray, np.ndarray]]] = None,
                 ) -> LinearProgram:
    """Assemble the scenario-based program as a kernel LinearProgram.

    Variable layout: [theta, x, y_1, ..., y_K]. Deterministic rows are added
    once per policy; every scenario contributes its objective row plus the
    uncertain constraint rows, with coefficients evaluated exactly at the
    scenario. `fixed_policies` pins leading policies by collapsing variable
    bounds (entry k is (values, fix_mask)).
    """
    K = inst.k
    n1, n2 = inst.n1, inst.n2
    theta_col = 0
    x_off = 1
    y_off = [1 + n1 + k * n2 for k in range(K)]
    ncols = 1 + n1 + K * n2

    t_lo, t_hi = theta_box(inst)
    lb = np.concatenate([[t_lo], inst.X.lb, np.tile(inst.Y.lb, K)])
    ub = np.concatenate([[t_hi], inst.X.ub, np.tile(inst.Y.ub, K)])
    int_mask = np.concatenate([[False], inst.X.int_mask, np.tile(inst.Y.int_mask, K)])
    obj = np.zeros(ncols)
    obj[theta_col] = 1.0
    lp = LinearProgram(ncols, obj, lb, ub, int_mask)

    if fixed_policies:
        for k, (vals, mask) in enumerate(fixed_policies):
            sl = slice(y_off[k], y_off[k] + n2)
            lp.lb[sl][mask] = vals[mask]
            lp.ub[sl][mask] = vals[mask]

    for i in range(inst.X.n_rows):
        row = np.zeros(ncols)
        row[x_off:x_off + n1] = inst.X.A[i]
        lp.add_row(row, "<=", inst.X.b[i])
    for k in range(K):
        for i in range(inst.Y.n_rows):
            row = np.zeros(ncols)
            row[y_off[k]:y_off[k] + n2] = inst.Y.A[i]
            lp.add_row(row, "<=", inst.Y.b[i])
        for l in inst.det_rows:
            row = np.zeros(ncols)
            row[x_off:x_off + n1] = inst.T.const[l]
            row[y_off[k]:y_off[k] + n2] = inst.W.const[l]
            lp.add_row(row, "<=", inst.h.const[l, 0])

    for k, sids in enumerate(scenario_lists):
        for sid in sids:
            _scenario_rows(inst, lp, pool.get(sid).xi, k, n1, n2,
                           theta_col, x_off, y_off)
    return lp


def solve_master(inst: KAdaptInstance, scenario_lists: Sequence[Sequence[int]],
                 pool: ScenarioPool, limits: Optional[Limits] = None,
                 fixed_policies=None) -> MasterSolution:
    """Solve one node's master problem.

    With every scenario list empty the program is unbounded in theta; per the
    stipulated semantics this returns the -inf sentinel together with any
    point satisfying the decision sets and the deterministic rows (one
    feasibility solve, theta ignored).
    """
    lp = build_master(inst, scenario_lists, pool, fixed_policies)
    root = all(len(s) == 0 for s in scenario_lists)
    if root:
        lp.obj[:] = 0.0
        lp.lb[0] = 0.0
        lp.ub[0] = 0.0
    sol = mathprog.solve_milp(lp, limits)
    if sol.status == "infeasible":
        return MasterSolution(None, None, None, "infeasible", bound=math.inf)
    if sol.status != "optimal":
        return MasterSolution(None, None, None, "limit", bound=sol.bound)
    n1, n2, K = inst.n1, inst.n2, inst.k
    x = sol.x[1:1 + n1]
    y = [sol.x[1 + n1 + k * n2: 1 + n1 + (k + 1) * n2] for k in range(K)]
    if root:
        return MasterSolution(None, x, y, "optimal", bound=-math.inf)
    return MasterSolution(float(sol.value), x, y, "optimal", bound=float(sol.value))
