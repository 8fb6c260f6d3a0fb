"""Robust spatial branch-and-bound.

Best-first search over variable boxes.  Each node carries a McCormick bound of
the sampled problem; local solutions that beat the incumbent are certified
against the worst case, and any violating samples join a global store shared
by every node.  When the store grows the bounds of all waiting nodes are
recomputed before the next selection.
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .cutting import CutRoundLog, infeasibility_test
from .mccormick import approximation_errors, solve_relaxation
from .qcqp import Pair, QcqpProblem, VariableBox
from .simplex import IterationLimit
from .slp import SampledNlp, SlpOptions, solve_local
from .trace import ConvergenceTrace, TraceEvent, relative_gap
from .uncertainty import SampleStore, UncertaintySet

MIN_WIDTH = 1e-9
INTERIOR = 0.2


class NodeState(str, enum.Enum):
    WAITING = "Waiting"
    CURRENT = "Current"
    FATHOMED = "Fathomed"
    CLOSED = "Closed"


class Termination(str, enum.Enum):
    OPTIMAL = "Optimal"
    TIME_LIMIT = "TimeLimit"
    NODE_LIMIT = "NodeLimit"
    ROBUST_INFEASIBLE = "RobustInfeasible"


@dataclass
class SolveConfig:
    tol: float = 1e-6
    epsilon: float = 1e-4
    delta: float = 1e-6
    branch_error_tol: float = 1e-6
    max_nodes: int = 100_000
    max_cut_rounds: int = 200
    time_limit: float = 3600.0
    strong_branch_cap: int = 8
    # score an infeasible strong-branching child with a literal zero bound
    # instead of treating it as an unbounded improvement
    infeasible_child_zero: bool = False
    slp: SlpOptions = field(default_factory=SlpOptions)

    def __post_init__(self):
        for name in ("tol", "epsilon", "delta", "branch_error_tol", "time_limit"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_nodes < 1 or self.max_cut_rounds < 1:
            raise ValueError("node and cut-round limits must be at least 1")


@dataclass
class Node:
    id: int
    box: VariableBox
    lb: float
    parent: int | None = None
    depth: int = 0
    state: NodeState = NodeState.WAITING
    lp_x: np.ndarray | None = field(default=None, repr=False)
    errors: dict[Pair, float] = field(default_factory=dict, repr=False)


@dataclass
class RobustSolution:
    point: np.ndarray | None
    objective: float
    lb: float
    gap: float
    store: SampleStore
    trace: ConvergenceTrace
    termination: Termination
    root_lb: float = -math.inf
    nodes_explored: int = 0
    cut_rounds: int = 0
    samples_added: int = 0
    wall_ms: float = 0.0
    sample_log: list[tuple[int, int, np.ndarray]] = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.termination is Termination.OPTIMAL


def fathom_threshold(ub: float, epsilon: float) -> float:
    return ub - epsilon * abs(ub) if math.isfinite(ub) else math.inf


def select_current(waiting: list[Node], tol: float) -> list[Node]:
    """Pop every waiting node whose bound is within ``tol`` of the best one."""
    if not waiting:
        raise ValueError("no waiting nodes")
    z_bp = min(n.lb for n in waiting)
    chosen = sorted((n for n in waiting if n.lb - z_bp <= tol), key=lambda n: n.id)
    ids = {n.id for n in chosen}
    waiting[:] = [n for n in waiting if n.id not in ids]
    for n in chosen:
        n.state = NodeState.CURRENT
    return chosen


def _clip_point(value: float, lo: float, hi: float) -> float:
    w = hi - lo
    return float(min(max(value, lo + INTERIOR * w), hi - INTERIOR * w))


def _relax_bound(problem, box, store) -> tuple[float, np.ndarray | None, dict]:
    """Relaxation value, solution and product errors; ``+inf`` when infeasible."""
    rlp, out = solve_relaxation(problem, box, store)
    if not out.optimal:
        return math.inf, None, {}
    return out.objective, out.x, approximation_errors(out.x, rlp.pair_index)


def _objective_weights(problem: QcqpProblem) -> np.ndarray:
    w = np.zeros(problem.n_vars)
    obj = problem.objective
    for i, a in obj.linear.items():
        w[i] += abs(a)
    for (b, j), a in obj.bilinear.items():
        w[b] += abs(a)
        w[j] += abs(a)
    return w


def select_branch_var(problem: QcqpProblem, store: SampleStore, node: Node,
                      config: SolveConfig) -> tuple[int, float] | None:
    """Branching variable and point, or ``None`` when every candidate is too narrow."""
    box = node.box
    width = box.width
    x = node.lp_x if node.lp_x is not None else np.concatenate([box.midpoint(), np.zeros(len(problem.pairs))])
    errors = node.errors
    if errors and max(errors.values()) >= config.branch_error_tol:
        for pair, err in sorted(errors.items(), key=lambda kv: (-kv[1], kv[0])):
            if err < config.branch_error_tol:
                break
            b, j = pair
            var = b if width[b] >= width[j] else j
            if width[var] < MIN_WIDTH:
                var = j if var == b else b
            if width[var] >= MIN_WIDTH:
                return var, _clip_point(x[var], box.lower[var], box.upper[var])
    return _strong_branch(problem, store, node, x, config)


def _strong_branch(problem, store, node, x, config) -> tuple[int, float] | None:
    box = node.box
    width = box.width
    cands = sorted({v for p in problem.pairs for v in p if width[v] >= MIN_WIDTH})
    if not cands:
        return None
    # rank by width scaled by objective sensitivity; keep pure width as a floor
    weight = _objective_weights(problem)
    ranked = sorted(cands, key=lambda v: (-width[v] * (1.0 + weight[v]), v))[:config.strong_branch_cap]
    best, best_score = None, -math.inf
    for v in sorted(ranked):
        pt = _clip_point(x[v], box.lower[v], box.upper[v])
        down, up = box.split(v, pt)
        scores = []
        for child, dist in ((up, box.upper[v] - pt), (down, pt - box.lower[v])):
            lb, _, _ = _relax_bound(problem, child, store)
            if math.isinf(lb):
                if not config.infeasible_child_zero:
                    scores.append(math.inf)
                    continue
                lb = 0.0
            scores.append((lb - node.lb) / dist)
        score = max(scores)
        if score > best_score:
            best, best_score = (v, pt), score
    return best


class _Search:
    """Mutable state of one branch-and-bound run."""

    def __init__(self, problem: QcqpProblem, uset: UncertaintySet | None,
                 config: SolveConfig, store: SampleStore | None):
        self.problem = problem
        self.uset = uset
        self.cfg = config
        self.store = store if store is not None else SampleStore.nominal(problem)
        self.trace = ConvergenceTrace()
        self.t0 = time.perf_counter()
        self.ub = math.inf
        self.incumbent: np.ndarray | None = None
        self.lb_floor = -math.inf
        self.waiting: list[Node] = []
        self.current: dict[int, Node] = {}
        self.leaves: dict[int, float] = {}  # fathomed/closed leaves with finite bounds
        self.next_id = 0
        self.explored = 0
        self.cut_rounds = 0
        self.sample_log: list[tuple[int, int, np.ndarray]] = []
        self.dirty = False

    # bookkeeping --------------------------------------------------------
    def global_lb(self) -> float:
        vals = [n.lb for n in self.waiting] + [n.lb for n in self.current.values()]
        vals += list(self.leaves.values())
        lb = min(vals) if vals else self.ub
        lb = min(lb, self.ub)
        self.lb_floor = max(self.lb_floor, lb) if math.isfinite(lb) else self.lb_floor
        return min(self.lb_floor, self.ub) if math.isfinite(self.lb_floor) else lb

    def log(self, event, node_id=-1, cut_round=0, value=None):
        self.trace.log(event, self.ub, self.global_lb(), node_id, cut_round, value)

    def new_node(self, box, lb, parent=None, depth=0, lp_x=None, errors=None) -> Node:
        node = Node(self.next_id, box, lb, parent, depth, NodeState.WAITING, lp_x, errors or {})
        self.next_id += 1
        return node

    def fathom(self, node: Node) -> None:
        node.state = NodeState.FATHOMED
        if math.isfinite(node.lb):
            self.leaves[node.id] = node.lb
        self.log(TraceEvent.NODE_FATHOMED, node.id, value=node.lb)

    def prunable(self, lb: float) -> bool:
        return lb >= fathom_threshold(self.ub, self.cfg.epsilon)

    def out_of_time(self) -> bool:
        return time.perf_counter() - self.t0 > self.cfg.time_limit

    # steps ----------------------------------------------------------------
    def refresh_waiting(self) -> None:
        """Recompute every waiting bound against the enlarged store."""
        self.dirty = False
        for node in sorted(self.waiting, key=lambda n: (n.lb, n.id)):
            self.rebound(node)
        self.log(TraceEvent.STORE_REFRESH, value=self.store.size())
        self.prune_waiting()

    def prune_waiting(self) -> None:
        keep = []
        for node in self.waiting:
            if self.prunable(node.lb):
                self.fathom(node)
            else:
                keep.append(node)
        self.waiting = keep

    def _bound(self, box, fallback):
        try:
            return _relax_bound(self.problem, box, self.store)
        except IterationLimit:
            return fallback, None, {}

    def update_incumbent(self, point, obj, node_id) -> None:
        if obj < self.ub:
            self.ub = float(obj)
            self.incumbent = np.array(point, dtype=float)
            self.log(TraceEvent.INCUMBENT_UPDATED, node_id, value=obj)
            self.prune_waiting()

    def local_search(self, node: Node):
        box = node.box
        n = self.problem.n_vars
        starts = []
        if node.lp_x is not None:
            starts.append(node.lp_x[:n])
        starts.append(box.midpoint())
        if self.incumbent is not None:
            starts.append(self.incumbent[:n])
        nlp = SampledNlp(self.problem, self.store)
        return solve_local(self.problem, box, self.store, starts[0], starts[1:],
                           options=self.cfg.slp, nlp=nlp)

    def certify(self, node: Node, point, obj):
        """Run the infeasibility test; returns the certified point/objective or ``None``."""
        if self.uset is None or not self.problem.uncertain:
            return point, obj

        def on_round(r: CutRoundLog):
            self.cut_rounds += 1
            for cid, xi, _ in r.violated_constraints:
                self.sample_log.append((node.id, cid, np.array(xi)))
            self.dirty = True
            self.log(TraceEvent.CUT_ADDED, node.id, r.round, r.objective_after)

        res = infeasibility_test(self.problem, point, obj, self.store, self.uset, self.cfg.delta,
                                 node.box, self.cfg.max_cut_rounds, self.cfg.slp, on_round)
        if res.point is None or not math.isfinite(res.objective):
            return None
        return res.point, res.objective

    def process(self, node: Node) -> None:
        if self.dirty:
            self.rebound(node)
        if math.isinf(node.lb) or self.prunable(node.lb):
            self.fathom(node)
            return
        local = self.local_search(node)
        self.log(TraceEvent.NODE_SOLVED, node.id, value=local.objective if local.feasible else node.lb)
        if local.feasible and local.objective <= self.ub:
            cert = self.certify(node, local.point, local.objective)
            if cert is not None:
                self.update_incumbent(cert[0], cert[1], node.id)
        if self.dirty:
            self.rebound(node)
        if math.isinf(node.lb) or self.prunable(node.lb):
            self.fathom(node)
            return
        self.branch(node)

    def rebound(self, node: Node) -> None:
        lb, x, err = self._bound(node.box, node.lb)
        node.lb = max(node.lb, lb)
        if x is not None:
            node.lp_x, node.errors = x, err

    def branch(self, node: Node) -> None:
        choice = select_branch_var(self.problem, self.store, node, self.cfg)
        if choice is None:
            node.state = NodeState.CLOSED
            self.leaves[node.id] = node.lb
            return
        var, at = choice
        node.state = NodeState.CLOSED
        for box in node.box.split(var, at):
            lb, x, err = self._bound(box, node.lb)
            child = self.new_node(box, max(lb, node.lb), node.id, node.depth + 1, x, err)
            if math.isinf(child.lb) or self.prunable(child.lb):
                self.fathom(child)
            else:
                self.waiting.append(child)

    def result(self, termination: Termination, root_lb: float) -> RobustSolution:
        lb = self.global_lb()
        if termination is Termination.OPTIMAL and self.incumbent is None:
            termination = Termination.ROBUST_INFEASIBLE
        if termination is Termination.OPTIMAL:
            lb = min(self.lb_floor, self.ub)
        return RobustSolution(self.incumbent, self.ub, lb, relative_gap(self.ub, lb), self.store,
                              self.trace, termination, root_lb, self.explored, self.cut_rounds,
                              len(self.sample_log), (time.perf_counter() - self.t0) * 1000.0,
                              self.sample_log)


def solve_rsbb(problem: QcqpProblem, uset: UncertaintySet | None, config: SolveConfig | None = None,
               store: SampleStore | None = None) -> RobustSolution:
    """Globally solve the robust problem over ``uset``.

    With ``uset=None`` the problem is solved as the sampled problem defined by
    ``store`` (nominal samples by default), without certification.
    """
    cfg = config or SolveConfig()
    s = _Search(problem, uset, cfg, store)
    root_lb, x, err = s._bound(problem.box, -math.inf)
    root = s.new_node(problem.box, root_lb, lp_x=x, errors=err)
    if math.isinf(root_lb) and root_lb > 0:
        s.log(TraceEvent.NODE_FATHOMED, root.id, value=root_lb)
        return s.result(Termination.ROBUST_INFEASIBLE, root_lb)
    s.waiting.append(root)
    s.log(TraceEvent.NODE_SOLVED, root.id, value=root_lb)
    while s.waiting:
        if s.dirty:
            s.refresh_waiting()
            if not s.waiting:
                break
        if s.out_of_time():
            return s.result(Termination.TIME_LIMIT, root_lb)
        batch = select_current(s.waiting, cfg.tol)
        s.current = {n.id: n for n in batch}
        for node in batch:
            if s.explored >= cfg.max_nodes:
                return s.result(Termination.NODE_LIMIT, root_lb)
            s.explored += 1
            s.process(node)
            del s.current[node.id]
    return s.result(Termination.OPTIMAL, root_lb)


def solve_sampled_global(problem: QcqpProblem, store: SampleStore, config: SolveConfig | None = None) -> RobustSolution:
    """Global solve of the sampled problem for a fixed store (a copy is used)."""
    return solve_rsbb(problem, None, config, store.copy())
