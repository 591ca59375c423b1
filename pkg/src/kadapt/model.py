"""Problem data model: affine-in-uncertainty coefficients, bounded
MILP-representable sets, and assembled min-max-min instances.

All types are immutable after construction and safe to share across threads.
Maximization problems are stored negated (one canonical minimize form
everywhere); only reporting flips the sign back.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

FEAS_TOL = 1e-6  # absolute per-row membership tolerance for scenarios

__all__ = [
    "AffineScalar",
    "AffineMap",
    "MipSet",
    "KAdaptInstance",
    "Scenario",
    "eval_affine",
    "validate_instance",
    "lift_first_stage_objective",
    "interval_of_linear",
    "interval_product",
]


def _as_matrix(a, rows, cols) -> np.ndarray:
    m = np.asarray(a, dtype=float).reshape(rows, cols)
    m.setflags(write=False)
    return m


@dataclass(frozen=True)
class AffineScalar:
    """Scalar affine function of the uncertainty vector: const + lin . xi."""

    const: float
    lin: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lin", np.asarray(self.lin, dtype=float).ravel())
        self.lin.setflags(write=False)

    def value(self, xi) -> float:
        return float(self.const + self.lin @ np.asarray(xi, dtype=float))


@dataclass(frozen=True)
class AffineMap:
    """Matrix affine function of the uncertainty vector.

    Value at xi is ``const + sum_p xi[p] * lin[p]``. The per-coordinate
    slices `lin` are stored sparsely as a dict keyed by the uncertainty
    coordinate; absent keys are zero matrices.
    """

    rows: int
    cols: int
    const: np.ndarray
    lin: Dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "const", _as_matrix(self.const, self.rows, self.cols))
        clean = {}
        for p, m in self.lin.items():
            m = _as_matrix(m, self.rows, self.cols)
            if np.any(m != 0.0):
                clean[int(p)] = m
        object.__setattr__(self, "lin", clean)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "AffineMap":
        return cls(rows, cols, np.zeros((rows, cols)))

    @classmethod
    def constant(cls, const) -> "AffineMap":
        const = np.atleast_2d(np.asarray(const, dtype=float))
        return cls(const.shape[0], const.shape[1], const)

    def is_constant(self) -> bool:
        return not self.lin

    def row_depends_on_xi(self, r: int) -> bool:
        return any(np.any(m[r, :] != 0.0) for m in self.lin.values())

    def coef_of_xi(self, p: int) -> np.ndarray:
        m = self.lin.get(p)
        if m is None:
            return np.zeros((self.rows, self.cols))
        return m

    def vstack(self, other: "AffineMap") -> "AffineMap":
        if self.cols != other.cols:
            raise ValueError("column mismatch in vstack")
        lin = {}
        for p in set(self.lin) | set(other.lin):
            lin[p] = np.vstack([self.coef_of_xi(p), other.coef_of_xi(p)])
        return AffineMap(self.rows + other.rows, self.cols,
                         np.vstack([self.const, other.const]), lin)

    def hcat(self, other: "AffineMap") -> "AffineMap":
        if self.rows != other.rows:
            raise ValueError("row mismatch in hcat")
        lin = {}
        for p in set(self.lin) | set(other.lin):
            lin[p] = np.hstack([self.coef_of_xi(p), other.coef_of_xi(p)])
        return AffineMap(self.rows, self.cols + other.cols,
                         np.hstack([self.const, other.const]), lin)

    def negated(self) -> "AffineMap":
        return AffineMap(self.rows, self.cols, -self.const,
                         {p: -m for p, m in self.lin.items()})


def eval_affine(amap: AffineMap, xi) -> np.ndarray:
    """Value of an affine map at a realization: const + sum_p xi_p lin[p]."""
    xi = np.asarray(xi, dtype=float).ravel()
    out = amap.const.copy()
    for p, m in amap.lin.items():
        if p >= xi.size:
            raise ValueError(f"xi has {xi.size} coordinates, map references p={p}")
        out = out + xi[p] * m
    return out


@dataclass(frozen=True)
class MipSet:
    """Bounded MILP-representable set {v : A v <= b, lb <= v <= ub, v_i int}.

    The first `dim` coordinates are primary; the remaining `aux_dim` are
    auxiliary lifting coordinates (a primary point belongs to the set iff
    some completion of the auxiliary block is feasible). Equality
    constraints are stored as paired inequalities.
    """

    dim: int
    aux_dim: int
    A: np.ndarray
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    int_mask: np.ndarray

    def __post_init__(self):
        n = self.dim + self.aux_dim
        A = np.asarray(self.A, dtype=float)
        A = A.reshape(-1, n) if n else A.reshape(A.shape[0] if A.ndim == 2 else 0, 0)
        object.__setattr__(self, "A", A)
        self.A.setflags(write=False)
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float).ravel())
        self.b.setflags(write=False)
        for name in ("lb", "ub"):
            v = np.asarray(getattr(self, name), dtype=float).ravel()
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        object.__setattr__(self, "int_mask", np.asarray(self.int_mask, dtype=bool).ravel())
        self.int_mask.setflags(write=False)

    @property
    def total_dim(self) -> int:
        return self.dim + self.aux_dim

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @classmethod
    def box(cls, lb, ub, int_mask=None, aux_dim: int = 0) -> "MipSet":
        lb = np.asarray(lb, dtype=float).ravel()
        n = lb.size
        if int_mask is None:
            int_mask = np.zeros(n, dtype=bool)
        return cls(n - aux_dim, aux_dim, np.zeros((0, n)), np.zeros(0), lb, ub, int_mask)

    @classmethod
    def binary(cls, n: int) -> "MipSet":
        return cls.box(np.zeros(n), np.ones(n), np.ones(n, dtype=bool))

    @classmethod
    def empty_point(cls) -> "MipSet":
        """Zero-dimensional set holding exactly the empty vector."""
        return cls.box(np.zeros(0), np.zeros(0))

    def with_rows(self, A_new, b_new) -> "MipSet":
        A_new = np.asarray(A_new, dtype=float).reshape(-1, self.total_dim)
        return replace(self, A=np.vstack([self.A, A_new]),
                       b=np.concatenate([self.b, np.asarray(b_new, dtype=float).ravel()]))

    def with_eq_rows(self, A_eq, b_eq) -> "MipSet":
        """Append equality rows as paired inequalities."""
        A_eq = np.asarray(A_eq, dtype=float).reshape(-1, self.total_dim)
        b_eq = np.asarray(b_eq, dtype=float).ravel()
        return self.with_rows(np.vstack([A_eq, -A_eq]), np.concatenate([b_eq, -b_eq]))

    def contains(self, v, tol: float = FEAS_TOL) -> bool:
        """Full-space membership (primary + aux coordinates supplied)."""
        v = np.asarray(v, dtype=float).ravel()
        if v.size != self.total_dim:
            return False
        if np.any(v < self.lb - tol) or np.any(v > self.ub + tol):
            return False
        if self.n_rows and np.any(self.A @ v > self.b + tol):
            return False
        ints = v[self.int_mask]
        return bool(np.all(np.abs(ints - np.round(ints)) <= tol))

    def residuals(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float).ravel()
        return self.A @ v - self.b if self.n_rows else np.zeros(0)


@dataclass(frozen=True)
class Scenario:
    """One uncertainty realization from the global pool."""

    xi: np.ndarray
    aux: np.ndarray
    id: int

    def __post_init__(self):
        for name in ("xi", "aux"):
            v = np.asarray(getattr(self, name), dtype=float).ravel()
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def full(self) -> np.ndarray:
        return np.concatenate([self.xi, self.aux])


@dataclass(frozen=True)
class KAdaptInstance:
    """Full problem data for min over (x, y_1..y_K) of the worst case over xi
    of the best policy's objective, subject to per-policy constraint rows.

    Maximize-sense problems are negated at ingestion (`c`, `d` hold the
    negated data); `sense` only drives sign restoration in reports.
    """

    n1: int
    n2: int
    np_: int
    n_rows: int
    k: int
    sense: str
    c: np.ndarray
    d: AffineMap            # n2 x 1
    T: AffineMap            # n_rows x n1
    W: AffineMap            # n_rows x n2
    h: AffineMap            # n_rows x 1
    X: MipSet
    Y: MipSet
    Xi: MipSet
    det_rows: Tuple[int, ...] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        c.setflags(write=False)
        object.__setattr__(self, "c", c)
        if self.det_rows is None:
            object.__setattr__(self, "det_rows", self.classify_det_rows())
        else:
            object.__setattr__(self, "det_rows", tuple(int(r) for r in self.det_rows))

    def classify_det_rows(self) -> Tuple[int, ...]:
        """Rows whose T, W and h entries have no xi dependence."""
        det = []
        for r in range(self.n_rows):
            if not (self.T.row_depends_on_xi(r) or self.W.row_depends_on_xi(r)
                    or self.h.row_depends_on_xi(r)):
                det.append(r)
        return tuple(det)

    @property
    def uncertain_rows(self) -> Tuple[int, ...]:
        det = set(self.det_rows)
        return tuple(r for r in range(self.n_rows) if r not in det)

    def objective_uncertain(self) -> bool:
        return not self.d.is_constant()

    def constraints_uncertain(self) -> bool:
        return len(self.det_rows) < self.n_rows

    def with_k(self, k: int) -> "KAdaptInstance":
        return replace(self, k=int(k))

    def report_value(self, theta: float) -> float:
        """Objective in the user's sense (undoes the ingestion negation)."""
        if self.sense == "max" and theta is not None and np.isfinite(theta):
            return -theta
        if self.sense == "max" and theta == float("inf"):
            return float("-inf")
        if self.sense == "max" and theta == float("-inf"):
            return float("inf")
        return theta


def interval_of_linear(coefs, lb, ub) -> Tuple[float, float]:
    """Exact interval of `coefs . v` for v in the box [lb, ub]."""
    coefs = np.asarray(coefs, dtype=float).ravel()
    lo_terms = np.minimum(coefs * lb, coefs * ub)
    hi_terms = np.maximum(coefs * lb, coefs * ub)
    return float(lo_terms.sum()), float(hi_terms.sum())


def interval_product(a: Tuple[float, float], b: Tuple[float, float]) -> Tuple[float, float]:
    prods = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]
    return min(prods), max(prods)


def affine_row_interval(amap: AffineMap, r: int, xi_lb, xi_ub) -> np.ndarray:
    """Per-column intervals of row r of an affine map over the xi box.

    Returns an array of shape (cols, 2).
    """
    lo = amap.const[r, :].astype(float).copy()
    hi = amap.const[r, :].astype(float).copy()
    for p, m in amap.lin.items():
        a, b = xi_lb[p], xi_ub[p]
        t1 = m[r, :] * a
        t2 = m[r, :] * b
        lo += np.minimum(t1, t2)
        hi += np.maximum(t1, t2)
    return np.stack([lo, hi], axis=1)


def validate_instance(inst: KAdaptInstance) -> List[str]:
    """Shape/boundedness/classification diagnostics; empty list means valid.

    Never raises: callers decide what to do with the findings. Nonemptiness
    of the uncertainty set costs one feasibility solve.
    """
    diags: List[str] = []

    def chk(cond, msg):
        if not cond:
            diags.append(msg)

    chk(inst.c.size == inst.n1, f"c has length {inst.c.size}, expected n1={inst.n1}")
    chk(inst.d.rows == inst.n2 and inst.d.cols == 1,
        f"d shaped {inst.d.rows}x{inst.d.cols}, expected {inst.n2}x1")
    chk(inst.T.rows == inst.n_rows and inst.T.cols == inst.n1,
        f"T shaped {inst.T.rows}x{inst.T.cols}, expected {inst.n_rows}x{inst.n1}")
    chk(inst.W.rows == inst.n_rows and inst.W.cols == inst.n2,
        f"W shaped {inst.W.rows}x{inst.W.cols}, expected {inst.n_rows}x{inst.n2}")
    chk(inst.h.rows == inst.n_rows and inst.h.cols == 1,
        f"h shaped {inst.h.rows}x{inst.h.cols}, expected {inst.n_rows}x1")
    chk(inst.sense in ("min", "max"), f"unknown sense {inst.sense!r}")
    chk(inst.k >= 1, f"k={inst.k} must be >= 1")

    for name, ms, want_dim in (("X", inst.X, inst.n1), ("Y", inst.Y, inst.n2),
                               ("Xi", inst.Xi, inst.np_)):
        chk(ms.dim == want_dim, f"{name}.dim={ms.dim}, expected {want_dim}")
        n = ms.total_dim
        chk(ms.lb.size == n and ms.ub.size == n and ms.int_mask.size == n,
            f"{name} bound/mask lengths inconsistent with dim+aux_dim={n}")
        if ms.lb.size == n and ms.ub.size == n:
            if not np.all(np.isfinite(ms.lb)) or not np.all(np.isfinite(ms.ub)):
                diags.append(f"{name}: unbounded set (non-finite bound)")
            elif np.any(ms.lb > ms.ub):
                diags.append(f"{name}: lb > ub at coordinate "
                             f"{int(np.argmax(ms.lb > ms.ub))}")
        chk(ms.A.shape == (ms.n_rows, n) and ms.b.size == ms.n_rows,
            f"{name}: A/b shapes inconsistent")
    for name, ms in (("X", inst.X), ("Y", inst.Y)):
        chk(ms.aux_dim == 0, f"{name}: auxiliary coordinates only allowed in Xi")

    for p in set(inst.d.lin) | set(inst.T.lin) | set(inst.W.lin) | set(inst.h.lin):
        chk(0 <= p < inst.np_, f"affine data references xi coordinate {p} >= np={inst.np_}")

    true_det = set(inst.classify_det_rows())
    declared = set(inst.det_rows)
    for r in sorted(declared - true_det):
        diags.append(f"misclassified deterministic row {r} (has xi dependence)")
    for r in sorted(true_det - declared):
        diags.append(f"row {r} is deterministic but not in det_rows")

    if not diags:
        from . import mathprog

        lp = mathprog.feasibility_program(inst.Xi)
        sol = mathprog.solve_milp(lp) if np.any(inst.Xi.int_mask) else mathprog.solve_lp(lp)
        if sol.status != "optimal":
            diags.append("Xi: uncertainty set is empty")
    return diags


def lift_first_stage_objective(inst: KAdaptInstance, c_prime: AffineMap) -> KAdaptInstance:
    """Fold an uncertain first-stage cost c'(xi) into the second stage.

    Augments the policies with a mirror block y' tied to x by paired
    inequality rows, and extends d with c'. Objective values of any
    (x, y, y'=x) match the original plus c'(xi).x.
    """
    if c_prime.rows != inst.n1 or c_prime.cols != 1:
        raise ValueError(f"c_prime must be {inst.n1}x1, got {c_prime.rows}x{c_prime.cols}")
    n1, n2 = inst.n1, inst.n2

    d_new = inst.d.vstack(c_prime)

    # Rows y' - x <= 0 and x - y' <= 0, appended after the existing rows.
    eye = np.eye(n1)
    T_extra = AffineMap(2 * n1, n1, np.vstack([-eye, eye]))
    W_extra = AffineMap(2 * n1, n2 + n1,
                        np.vstack([np.hstack([np.zeros((n1, n2)), eye]),
                                   np.hstack([np.zeros((n1, n2)), -eye])]))
    h_extra = AffineMap.zeros(2 * n1, 1)

    W_new = inst.W.hcat(AffineMap.zeros(inst.n_rows, n1)).vstack(W_extra)
    T_new = inst.T.vstack(T_extra)
    h_new = inst.h.vstack(h_extra)

    # Mirror block is continuous with the first-stage box; the equality rows
    # transfer integrality from x where it matters.
    Y_new = MipSet(
        dim=n2 + n1,
        aux_dim=0,
        A=np.hstack([inst.Y.A, np.zeros((inst.Y.n_rows, n1))]) if inst.Y.n_rows
          else np.zeros((0, n2 + n1)),
        b=inst.Y.b,
        lb=np.concatenate([inst.Y.lb, inst.X.lb]),
        ub=np.concatenate([inst.Y.ub, inst.X.ub]),
        int_mask=np.concatenate([inst.Y.int_mask, np.zeros(n1, dtype=bool)]),
    )

    meta = dict(inst.meta)
    meta["lifted_first_stage"] = {"n_mirror": n1, "orig_n2": n2}
    return KAdaptInstance(
        n1=n1, n2=n2 + n1, np_=inst.np_, n_rows=inst.n_rows + 2 * n1, k=inst.k,
        sense=inst.sense, c=inst.c, d=d_new, T=T_new, W=W_new, h=h_new,
        X=inst.X, Y=Y_new, Xi=inst.Xi, det_rows=None, meta=meta,
    )
