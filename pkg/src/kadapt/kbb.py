"""Branch-and-bound driver over scenario assignments.

Nodes are tuples of per-policy scenario lists. Each node solves its master
to optimality, is fathomed against the incumbent, and otherwise either
yields a new incumbent (when the worst remaining violation is within the
acceptance tolerance) or branches the violating realization into each
policy's list, optionally restricted by the symmetry rule.
"""

from __future__ import annotations

import heapq
import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import mathprog, separation
from .mathprog import CapExceeded, Limits
from .master import MasterSolution, ScenarioPool, solve_master
from .model import KAdaptInstance

log = logging.getLogger("kadapt.kbb")

__all__ = ["BnBNode", "SolveConfig", "SolveReport", "OpenSet", "select_node",
           "branch", "solve_k_adapt", "solve_heuristic"]

FATHOM_SLACK = 1e-9


@dataclass(frozen=True)
class BnBNode:
    scenario_lists: Tuple[Tuple[int, ...], ...]
    parent_bound: float
    depth: int


@dataclass
class SolveConfig:
    k: int = 2
    epsilon: float = 1e-4
    time_limit_s: Optional[float] = None
    node_limit: Optional[int] = None
    node_selection: str = "best_bound"      # best_bound | depth_first | breadth_first
    symmetry_breaking: bool = True
    separation_mode: str = "auto"           # auto | milp | enumeration
    enumeration_cap: int = 4096
    heuristic: bool = False
    seed: int = 0


@dataclass
class SolveReport:
    status: str                              # optimal | infeasible | limit
    theta: float
    x: Optional[np.ndarray]
    y: Optional[List[np.ndarray]]
    lower_bound: float
    upper_bound: float
    gap: float
    nodes_processed: int
    wall_time_s: float
    incumbent_trace: List[Tuple[float, int, float]]   # (time, nodes, theta)
    sense: str = "min"
    deepest_depth: int = 0
    stall_events: int = 0
    stage_trace: List[Tuple[int, float]] = field(default_factory=list)
    scenarios_generated: int = 0


class OpenSet:
    """Open-node container with the three selection strategies.

    best_bound pops the smallest parent bound, ties broken by greater depth
    and then by insertion order.
    """

    def __init__(self, strategy: str = "best_bound"):
        if strategy not in ("best_bound", "depth_first", "breadth_first"):
            raise ValueError(f"unknown node selection strategy {strategy!r}")
        self.strategy = strategy
        self._heap = []
        self._fifo = deque()
        self._stack = []
        self._count = 0

    def __len__(self):
        return len(self._heap) + len(self._fifo) + len(self._stack)

    def push(self, node: BnBNode):
        if self.strategy == "best_bound":
            heapq.heappush(self._heap, (node.parent_bound, -node.depth, self._count, node))
            self._count += 1
        elif self.strategy == "breadth_first":
            self._fifo.append(node)
        else:
            self._stack.append(node)

    def push_children(self, children: Sequence[BnBNode]):
        if self.strategy == "depth_first":
            for node in reversed(children):
                self.push(node)
        else:
            for node in children:
                self.push(node)

    def pop(self) -> BnBNode:
        if self.strategy == "best_bound":
            return heapq.heappop(self._heap)[-1]
        if self.strategy == "breadth_first":
            return self._fifo.popleft()
        return self._stack.pop()

    def min_bound(self) -> float:
        nodes = [t[-1] for t in self._heap] + list(self._fifo) + self._stack
        if not nodes:
            return math.inf
        return min(n.parent_bound for n in nodes)


def select_node(open_set: OpenSet) -> BnBNode:
    """Pop the next node under the open set's strategy."""
    return open_set.pop()


def branch(node: BnBNode, scenario_id: int, k: int, symmetry: bool,
           bound: float) -> List[BnBNode]:
    """Children appending the violating scenario to each policy list.

    With symmetry breaking on, only the first K' lists receive it: one child
    from an all-empty node, otherwise one past the last nonempty list.
    """
    lists = node.scenario_lists
    if symmetry:
        nonempty = [i + 1 for i, s in enumerate(lists) if s]
        kp = 1 if not nonempty else min(k, 1 + max(nonempty))
    else:
        kp = k
    children = []
    for target in range(kp):
        new_lists = tuple(s + (scenario_id,) if i == target else s
                          for i, s in enumerate(lists))
        children.append(BnBNode(new_lists, bound, node.depth + 1))
    return children


def _separate(inst, theta, x, y, mode, cap):
    if mode == "enumeration":
        return separation.solve_separation_enumeration(inst, theta, x, y, cap)
    if mode == "milp":
        return separation.solve_separation_milp(inst, theta, x, y)
    count = (inst.n_rows + 1) ** inst.k
    if count <= cap:
        return separation.solve_separation_enumeration(inst, theta, x, y, cap)
    return separation.solve_separation_milp(inst, theta, x, y)


def _fix_mask(inst: KAdaptInstance) -> np.ndarray:
    """Coordinates frozen when a policy is fixed: everything except the
    first-stage mirror block introduced by the objective lifting."""
    mask = np.ones(inst.n2, dtype=bool)
    lift = inst.meta.get("lifted_first_stage")
    if lift:
        mask[inst.n2 - int(lift["n_mirror"]):] = False
    return mask


def solve_k_adapt(inst: KAdaptInstance, config: SolveConfig,
                  fixed_policies: Optional[List[np.ndarray]] = None,
                  pool: Optional[ScenarioPool] = None) -> SolveReport:
    """Exact solve; Steps: pop node, master, fathom, separate, accept or
    branch. Returns optimal/infeasible on natural termination, otherwise a
    limit verdict carrying valid global bounds.
    """
    t0 = time.monotonic()
    inst = inst.with_k(config.k)
    pool = pool if pool is not None else ScenarioPool()
    fixed = None
    if fixed_policies:
        mask = _fix_mask(inst)
        fixed = [(np.asarray(v, dtype=float), mask) for v in fixed_policies]

    open_set = OpenSet(config.node_selection)
    root = BnBNode(tuple(() for _ in range(config.k)), -math.inf, 0)
    open_set.push(root)

    inc_theta = math.inf
    inc_x = None
    inc_y = None
    trace: List[Tuple[float, int, float]] = []
    nodes_processed = 0
    deepest = 0
    stalls = 0
    status = None
    popped_bound = math.inf  # bound of the node in flight when a limit hits

    def out_of_budget():
        if config.node_limit is not None and nodes_processed >= config.node_limit:
            return True
        if config.time_limit_s is not None and time.monotonic() - t0 > config.time_limit_s:
            return True
        return False

    def master_limits():
        if config.time_limit_s is None:
            return None
        left = config.time_limit_s - (time.monotonic() - t0)
        return Limits(time_limit_s=max(left, 0.5))

    while len(open_set):
        if out_of_budget():
            status = "limit"
            break
        node = select_node(open_set)
        nodes_processed += 1
        deepest = max(deepest, node.depth)
        popped_bound = node.parent_bound
        log.info("node open depth=%d bound=%s lists=%s", node.depth,
                 node.parent_bound, node.scenario_lists)

        ms = solve_master(inst, node.scenario_lists, pool, master_limits(), fixed)
        if ms.status == "infeasible":
            log.info("node fathomed: master infeasible")
            continue
        if ms.status == "limit":
            open_set.push(replace(node, parent_bound=max(node.parent_bound, ms.bound)))
            status = "limit"
            break
        theta = ms.theta
        if theta is not None and theta >= inc_theta - FATHOM_SLACK:
            log.info("node fathomed: theta=%.12g >= incumbent %.12g", theta, inc_theta)
            continue

        sep = _separate(inst, theta, ms.x, ms.y, config.separation_mode,
                        config.enumeration_cap)
        if not sep.proven:
            open_set.push(node)
            status = "limit"
            break
        if sep.zeta <= config.epsilon:
            inc_theta, inc_x, inc_y = theta, ms.x, ms.y
            trace.append((time.monotonic() - t0, nodes_processed, theta))
            log.info("incumbent theta=%.12g nodes=%d", theta, nodes_processed)
            continue

        sc = pool.add(sep.xi, sep.aux)
        bound = theta if theta is not None else -math.inf
        children = branch(node, sc.id, config.k, config.symmetry_breaking, bound)
        fresh = [ch for ch in children if ch.scenario_lists != node.scenario_lists]
        if not fresh:
            # the violating realization is already assigned everywhere the
            # branching rule allows: numerical stall, accept defensively
            stalls += 1
            log.warning("numerical stall at depth=%d zeta=%.3g; accepting", node.depth, sep.zeta)
            if theta is not None and theta < inc_theta:
                inc_theta, inc_x, inc_y = theta, ms.x, ms.y
                trace.append((time.monotonic() - t0, nodes_processed, theta))
            continue
        open_set.push_children(fresh)

    wall = time.monotonic() - t0
    if status is None:
        status = "infeasible" if inc_theta == math.inf else "optimal"

    if status == "limit":
        lower = min(open_set.min_bound(), popped_bound)
        upper = inc_theta
    elif status == "optimal":
        lower = upper = inc_theta
    else:
        lower = upper = math.inf

    theta_user = inst.report_value(inc_theta if inc_theta != math.inf else math.inf)
    if inst.sense == "max":
        lo_user, up_user = -upper, -lower
        trace_user = [(t, n, -v) for (t, n, v) in trace]
    else:
        lo_user, up_user = lower, upper
        trace_user = list(trace)
    if math.isfinite(up_user) and math.isfinite(lo_user):
        gap = abs(up_user - lo_user) / max(1.0, abs(up_user))
    else:
        gap = math.inf if status == "limit" else 0.0
    if status == "infeasible":
        gap = 0.0

    return SolveReport(
        status=status, theta=theta_user, x=inc_x, y=inc_y,
        lower_bound=lo_user, upper_bound=up_user, gap=gap,
        nodes_processed=nodes_processed, wall_time_s=wall,
        incumbent_trace=trace_user, sense=inst.sense, deepest_depth=deepest,
        stall_events=stalls, scenarios_generated=len(pool),
    )


def solve_heuristic(inst: KAdaptInstance, k: int, config: SolveConfig) -> SolveReport:
    """Sequential 1-, 2-, ..., K-policy solves, each freezing the previously
    found policies and optimizing the one new policy (plus the first stage).

    Can improve on a single policy only when the objective coefficients are
    uncertain; with pure constraint uncertainty every stage repeats the
    static value.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    stage_cfg = replace(config, heuristic=False, symmetry_breaking=False)
    fixed_vals: List[np.ndarray] = []
    stage_trace: List[Tuple[int, float]] = []
    report = None
    budget = config.time_limit_s
    t0 = time.monotonic()
    for j in range(1, k + 1):
        cfg_j = replace(stage_cfg, k=j,
                        time_limit_s=None if budget is None
                        else max(budget - (time.monotonic() - t0), 0.5))
        report = solve_k_adapt(inst, cfg_j, fixed_policies=fixed_vals or None)
        stage_trace.append((j, report.theta))
        if report.status != "optimal":
            break
        fixed_vals = [yk.copy() for yk in report.y]
    report.stage_trace = stage_trace
    report.wall_time_s = time.monotonic() - t0
    return report
