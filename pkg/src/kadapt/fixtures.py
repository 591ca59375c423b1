"""Canonical desk-size instances used across the test and regression suites.

Each builder returns a fresh immutable instance; sizes are small enough for
every brute-force oracle to apply.
"""

from __future__ import annotations

import numpy as np

from .model import AffineMap, KAdaptInstance, MipSet

__all__ = [
    "sum_of_maxima_instance",
    "geometric_stall_instance",
    "tiny_shortest_path_instance",
    "minimax_sign_instance",
    "TINY_SP_ARCS",
    "TINY_SP_WEIGHTS",
]


def sum_of_maxima_instance(k: int = 1, y_cap: float = 10.0) -> KAdaptInstance:
    """Worst case over the box [-1,1]^2 of the cheapest nonnegative cover of
    the four ramps +-xi1 +- xi2; objective is the plain sum of the covers.

    Two-stage optimum 2; best single affine rule 4; two affine pieces recover
    the optimum. Fixed recourse, deterministic objective, so the decision
    rule lifting applies.
    """
    n2 = 4
    # rows: -y_i <= -(s1*xi1 + s2*xi2) for the four sign patterns
    signs = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
    W = AffineMap(4, n2, -np.eye(4))
    h_lin = {0: -np.array([[s1] for s1, _ in signs], dtype=float),
             1: -np.array([[s2] for _, s2 in signs], dtype=float)}
    h = AffineMap(4, 1, np.zeros((4, 1)), h_lin)
    return KAdaptInstance(
        n1=0, n2=n2, np_=2, n_rows=4, k=k, sense="min",
        c=np.zeros(0),
        d=AffineMap.constant(np.ones((n2, 1))),
        T=AffineMap.zeros(4, 0),
        W=W,
        h=h,
        X=MipSet.empty_point(),
        Y=MipSet.box(np.zeros(n2), np.full(n2, y_cap)),
        Xi=MipSet.box(-np.ones(2), np.ones(2)),
        meta={"fixture": "sum_of_maxima"},
    )


def geometric_stall_instance(k: int = 2) -> KAdaptInstance:
    """Binary choice y in {0,1} with objective (xi-1)(1-2y) and feasibility
    y >= xi over xi in [0,1].

    The branch-and-bound tree has exactly one branch of unbounded depth along
    which the separation value halves at every level, so epsilon-acceptance
    fathoms it after O(log 1/eps) nodes. The two-policy optimum is 1 (a
    supremum, attained at (1,1), approached but not attained at (1,0)).

    Encoded with a second, fixed-at-one recourse coordinate carrying the
    policy-independent (xi-1) term.
    """
    d = AffineMap(2, 1, np.array([[2.0], [-1.0]]),
                  {0: np.array([[-2.0], [1.0]])})
    W = AffineMap(1, 2, np.array([[-1.0, 0.0]]))
    h = AffineMap(1, 1, np.zeros((1, 1)), {0: np.array([[-1.0]])})
    return KAdaptInstance(
        n1=0, n2=2, np_=1, n_rows=1, k=k, sense="min",
        c=np.zeros(0),
        d=d,
        T=AffineMap.zeros(1, 0),
        W=W,
        h=h,
        X=MipSet.empty_point(),
        Y=MipSet(2, 0, np.zeros((0, 2)), np.zeros(0),
                 np.array([0.0, 1.0]), np.array([1.0, 1.0]),
                 np.array([True, True])),
        Xi=MipSet.box(np.zeros(1), np.ones(1)),
        meta={"fixture": "geometric_stall"},
    )


# 5-node DAG, source 0, sink 4; integer flow points are exactly the s-t paths
TINY_SP_ARCS = [(0, 1), (0, 2), (1, 2), (1, 4), (2, 3), (2, 4), (3, 4)]
TINY_SP_WEIGHTS = [3.0, 1.0, 1.0, 4.0, 2.0, 3.0, 1.0]


def tiny_shortest_path_instance(k: int = 2, gamma: float = 1.0) -> KAdaptInstance:
    """Hand-made budget-uncertainty shortest path on a 5-node DAG.

    Arc weights inflate by up to 50% (factor 1 + xi/2, xi in [0,1], total
    deviation budget gamma); policies are s-t paths chosen up front.
    """
    arcs = TINY_SP_ARCS
    w0 = np.array(TINY_SP_WEIGHTS)
    n_arcs = len(arcs)
    n_nodes = 5
    d = AffineMap(n_arcs, 1, w0.reshape(-1, 1),
                  {p: np.eye(1, n_arcs, p).T * (w0[p] / 2.0) for p in range(n_arcs)})
    # flow conservation, >= form flipped to <=
    A = np.zeros((n_nodes, n_arcs))
    b = np.zeros(n_nodes)
    for p, (i, j) in enumerate(arcs):
        A[i, p] -= 1.0
        A[j, p] += 1.0
    b[0] = -1.0
    b[4] = 1.0
    Y = MipSet(n_arcs, 0, A, b, np.zeros(n_arcs), np.ones(n_arcs),
               np.ones(n_arcs, dtype=bool))
    Xi = MipSet(n_arcs, 0, np.ones((1, n_arcs)), np.array([gamma]),
                np.zeros(n_arcs), np.ones(n_arcs), np.zeros(n_arcs, dtype=bool))
    return KAdaptInstance(
        n1=0, n2=n_arcs, np_=n_arcs, n_rows=0, k=k, sense="min",
        c=np.zeros(0), d=d,
        T=AffineMap.zeros(0, 0), W=AffineMap.zeros(0, n_arcs),
        h=AffineMap.zeros(0, 1),
        X=MipSet.empty_point(), Y=Y, Xi=Xi,
        meta={"fixture": "tiny_shortest_path", "arcs": arcs},
    )


def minimax_sign_instance(k: int = 1) -> KAdaptInstance:
    """Objective xi*y with discrete xi in {-1, 1} and y in [-1, 1].

    The two-stage (max-min) value is -1 while the single-policy (min-max)
    value is 0, so the gap between the orders of optimization is exact here.
    xi is tied to a binary auxiliary b through xi = 2b - 1.
    """
    d = AffineMap(1, 1, np.zeros((1, 1)), {0: np.ones((1, 1))})
    Xi = MipSet(
        dim=1, aux_dim=1,
        A=np.array([[1.0, -2.0], [-1.0, 2.0]]),
        b=np.array([-1.0, 1.0]),
        lb=np.array([-1.0, 0.0]), ub=np.array([1.0, 1.0]),
        int_mask=np.array([True, True]),
    )
    return KAdaptInstance(
        n1=0, n2=1, np_=1, n_rows=0, k=k, sense="min",
        c=np.zeros(0), d=d,
        T=AffineMap.zeros(0, 0), W=AffineMap.zeros(0, 1), h=AffineMap.zeros(0, 1),
        X=MipSet.empty_point(),
        Y=MipSet.box(np.array([-1.0]), np.array([1.0])),
        Xi=Xi,
        meta={"fixture": "minimax_sign"},
    )
