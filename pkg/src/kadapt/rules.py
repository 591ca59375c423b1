"""Piecewise affine decision rules via lifting.

A two-stage instance with fixed recourse and deterministic objective is
rewritten so that each policy carries an affine rule y(xi) = y0 + Y.xi:
the policy vector becomes (y0, vec(Y), z1, z2) with z1 = Y'd and z2 the
stacked Y'w_l, the objective picks up xi.z1, and every constraint row picks
up the xi-block of z2. Recourse-set rows and the continuous coordinate
bounds must hold for every realization, so they are absorbed into the
constraint rows before lifting; discrete recourse coordinates are not
lifted and stay constant within each piece.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .model import AffineMap, KAdaptInstance, MipSet, eval_affine

__all__ = ["PwaRule", "build_pwa_instance", "extract_decision_rule",
           "eval_decision_rule", "lift_offsets"]

PIECE_FEAS_TOL = 1e-6
CONSISTENCY_TOL = 1e-6
BOX_BIND_TOL = 1e-3


@dataclass
class PwaRule:
    """K affine pieces (intercept, matrix); the applied piece at a
    realization is the objective-minimizing feasible one."""

    pieces: List[Tuple[np.ndarray, np.ndarray]]
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))


def lift_offsets(meta: dict) -> dict:
    """Column offsets of the lifted policy blocks."""
    n2, nc, np_, l_tot = (meta["orig_n2"], len(meta["cont_idx"]),
                          meta["np"], meta["l_tot"])
    return {
        "y0": 0,
        "vecY": n2,
        "z1": n2 + nc * np_,
        "z2": n2 + nc * np_ + np_,
        "total": n2 + nc * np_ + np_ + l_tot * np_,
    }


def _absorbed_rows(inst: KAdaptInstance, cont: np.ndarray):
    """(W-row, T-row-index-or-None, h-entry) description of every constraint
    row once the recourse set is folded in: original rows, then recourse-set
    rows, then continuous upper bounds, then continuous lower bounds."""
    rows_w = []
    rows_h_const = []
    keep_T = []
    keep_h_lin = []
    for l in range(inst.n_rows):
        rows_w.append(inst.W.const[l].copy())
        rows_h_const.append(inst.h.const[l, 0])
        keep_T.append(l)
        keep_h_lin.append(l)
    for i in range(inst.Y.n_rows):
        rows_w.append(inst.Y.A[i].copy())
        rows_h_const.append(inst.Y.b[i])
        keep_T.append(None)
        keep_h_lin.append(None)
    for j in cont:
        e = np.zeros(inst.n2)
        e[j] = 1.0
        rows_w.append(e)
        rows_h_const.append(inst.Y.ub[j])
        keep_T.append(None)
        keep_h_lin.append(None)
    for j in cont:
        e = np.zeros(inst.n2)
        e[j] = -1.0
        rows_w.append(e)
        rows_h_const.append(-inst.Y.lb[j])
        keep_T.append(None)
        keep_h_lin.append(None)
    return rows_w, rows_h_const, keep_T, keep_h_lin


def build_pwa_instance(inst: KAdaptInstance, mode: str = "affine",
                       coeff_box: float = 100.0) -> KAdaptInstance:
    """Equivalent random-recourse instance whose constant policies encode
    K-piece decision rules.

    mode="constant" bypasses the lifting (pieces are plain recourse points);
    mode="affine" builds the lifted instance. The rule coefficients need a
    bounded home, which the source problem does not provide, so every lifted
    coordinate is boxed in [-coeff_box, +coeff_box]; a post-solve diagnostic
    flags solutions that press against the box (extract_decision_rule).
    """
    if not inst.d.is_constant():
        raise ValueError("decision rules need a deterministic objective "
                         "(d depends on the uncertainty)")
    if not inst.W.is_constant():
        raise ValueError("decision rules need fixed recourse "
                         "(W depends on the uncertainty)")
    if inst.Y.aux_dim:
        raise ValueError("recourse set with auxiliary coordinates is not supported")
    if mode == "constant":
        if not (np.all(np.isfinite(inst.Y.lb)) and np.all(np.isfinite(inst.Y.ub))):
            raise ValueError("recourse bounds must be finite")
        return replace(inst, meta={**inst.meta, "pwa": {"mode": "constant"}})
    if mode != "affine":
        raise ValueError(f"unknown decision-rule mode {mode!r}")

    cont = np.flatnonzero(~inst.Y.int_mask)
    if cont.size == 0:
        raise ValueError("no continuous recourse coordinates to lift")
    n2, np_ = inst.n2, inst.np_
    nc = cont.size
    rows_w, rows_h_const, keep_T, keep_h_lin = _absorbed_rows(inst, cont)
    l_tot = len(rows_w)

    meta = {**inst.meta, "pwa": {
        "mode": "affine", "orig_n2": n2, "cont_idx": [int(j) for j in cont],
        "np": np_, "l_tot": l_tot, "coeff_box": float(coeff_box),
    }}
    off = lift_offsets(meta["pwa"])
    n2_new = off["total"]

    d_const = np.zeros((n2_new, 1))
    d_const[:n2, 0] = inst.d.const[:, 0]
    d_lin = {}
    for p in range(np_):
        m = np.zeros((n2_new, 1))
        m[off["z1"] + p, 0] = 1.0
        d_lin[p] = m
    d_new = AffineMap(n2_new, 1, d_const, d_lin)

    W_const = np.zeros((l_tot, n2_new))
    for l, w in enumerate(rows_w):
        W_const[l, :n2] = w
    W_lin = {}
    for p in range(np_):
        m = np.zeros((l_tot, n2_new))
        for l in range(l_tot):
            m[l, off["z2"] + l * np_ + p] = 1.0
        W_lin[p] = m
    W_new = AffineMap(l_tot, n2_new, W_const, W_lin)

    T_const = np.zeros((l_tot, inst.n1))
    T_lin = {p: np.zeros((l_tot, inst.n1)) for p in inst.T.lin}
    h_const = np.array(rows_h_const, dtype=float).reshape(-1, 1)
    h_lin = {p: np.zeros((l_tot, 1)) for p in inst.h.lin}
    for l_new, l_old in enumerate(keep_T):
        if l_old is None:
            continue
        T_const[l_new] = inst.T.const[l_old]
        for p, m in inst.T.lin.items():
            T_lin[p][l_new] = m[l_old]
        for p, m in inst.h.lin.items():
            h_lin[p][l_new, 0] = m[l_old, 0]
    T_new = AffineMap(l_tot, inst.n1, T_const, T_lin)
    h_new = AffineMap(l_tot, 1, h_const, h_lin)

    lb = np.full(n2_new, -coeff_box)
    ub = np.full(n2_new, coeff_box)
    int_mask = np.zeros(n2_new, dtype=bool)
    disc = np.flatnonzero(inst.Y.int_mask)
    lb[disc] = inst.Y.lb[disc]
    ub[disc] = inst.Y.ub[disc]
    int_mask[disc] = True

    # consistency: z1 = Y'd and z2 row blocks = Y'w_l, as equality pairs
    n_eq = np_ + l_tot * np_
    A_eq = np.zeros((n_eq, n2_new))
    b_eq = np.zeros(n_eq)
    r = 0
    d0 = inst.d.const[:, 0]
    for p in range(np_):
        A_eq[r, off["z1"] + p] = 1.0
        for ci, j in enumerate(cont):
            A_eq[r, off["vecY"] + ci * np_ + p] = -d0[j]
        r += 1
    for l in range(l_tot):
        w = rows_w[l]
        for p in range(np_):
            A_eq[r, off["z2"] + l * np_ + p] = 1.0
            for ci, j in enumerate(cont):
                A_eq[r, off["vecY"] + ci * np_ + p] = -w[j]
            r += 1
    Y_new = MipSet.box(lb, ub, int_mask).with_eq_rows(A_eq, b_eq)

    return KAdaptInstance(
        n1=inst.n1, n2=n2_new, np_=np_, n_rows=l_tot, k=inst.k,
        sense=inst.sense, c=inst.c, d=d_new, T=T_new, W=W_new, h=h_new,
        X=inst.X, Y=Y_new, Xi=inst.Xi, meta=meta,
    )


def extract_decision_rule(inst_lifted: KAdaptInstance, solution) -> PwaRule:
    """Rebuild the (intercept, matrix) pieces from a solved lifted instance.

    Verifies the z-consistency rows; a violation beyond tolerance means the
    kernel returned an inconsistent point and is raised as an error. Warns
    when any lifted coordinate sits within 1e-3 of its coefficient box.
    """
    y_vectors = solution.y if hasattr(solution, "y") else solution
    x = getattr(solution, "x", np.zeros(inst_lifted.n1))
    info = inst_lifted.meta.get("pwa")
    if info is None or info["mode"] == "constant":
        n2 = inst_lifted.n2
        pieces = [(np.asarray(yk, float).ravel(), np.zeros((n2, inst_lifted.np_)))
                  for yk in y_vectors]
        return PwaRule(pieces, np.asarray(x, float).ravel())

    n2, np_ = info["orig_n2"], info["np"]
    cont = info["cont_idx"]
    box = info["coeff_box"]
    off = lift_offsets(info)
    d0 = None
    pieces = []
    for yk in y_vectors:
        yk = np.asarray(yk, float).ravel()
        y0 = yk[:n2].copy()
        Y = np.zeros((n2, np_))
        for ci, j in enumerate(cont):
            Y[j, :] = yk[off["vecY"] + ci * np_: off["vecY"] + (ci + 1) * np_]
        if d0 is None:
            d0 = inst_lifted.d.const[:n2, 0]
        z1 = yk[off["z1"]: off["z1"] + np_]
        err = float(np.max(np.abs(z1 - Y.T @ d0))) if np_ else 0.0
        for l in range(info["l_tot"]):
            w = inst_lifted.W.const[l, :n2]
            z2l = yk[off["z2"] + l * np_: off["z2"] + (l + 1) * np_]
            err = max(err, float(np.max(np.abs(z2l - Y.T @ w))) if np_ else 0.0)
        if err > CONSISTENCY_TOL:
            raise RuntimeError(f"inconsistent lifted coordinates (error {err:.2e}); "
                               "kernel tolerance issue")
        lifted_part = yk[n2:]
        if lifted_part.size and float(np.max(np.abs(lifted_part))) > box - BOX_BIND_TOL:
            warnings.warn("decision-rule coefficient box is binding; "
                          "re-solve with a larger coeff_box", RuntimeWarning)
        pieces.append((y0, Y))
    return PwaRule(pieces, np.asarray(x, float).ravel())


def eval_decision_rule(rule: PwaRule, inst: KAdaptInstance, xi
                       ) -> Tuple[Optional[int], Optional[np.ndarray], float]:
    """Apply the rule at a realization of the original instance.

    Among the pieces feasible at xi (recourse-set membership plus the
    constraint rows, 1e-6 tolerance) returns the objective-minimizing one,
    ties to the lowest index; (None, None, +inf) when no piece is feasible.
    """
    xi = np.asarray(xi, float).ravel()
    x = rule.x
    dxi = eval_affine(inst.d, xi).ravel()
    cx = float(inst.c @ x) if inst.n1 else 0.0
    if inst.n_rows:
        Txi = eval_affine(inst.T, xi)
        Wxi = eval_affine(inst.W, xi)
        hxi = eval_affine(inst.h, xi).ravel()
    best = (None, None, math.inf)
    for idx, (y0, Y) in enumerate(rule.pieces):
        y = y0 + Y @ xi
        if not inst.Y.contains(y, PIECE_FEAS_TOL):
            continue
        if inst.n_rows:
            res = Txi @ x + Wxi @ y - hxi
            if float(np.max(res)) > PIECE_FEAS_TOL:
                continue
        obj = cx + float(dxi @ y)
        if obj < best[2]:
            best = (idx, y, obj)
    return best
