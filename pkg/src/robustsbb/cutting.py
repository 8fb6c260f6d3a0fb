"""Robust cutting planes: the node-level infeasibility test and the standalone
cutting-set baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .qcqp import QcqpProblem, VariableBox
from .slp import LocalOutcome, SlpOptions, solve_local
from .uncertainty import (SampleStore, UncertaintySet, add_sample, extract_affine,
                          worst_case)


class CutRoundLimit(RuntimeError):
    """The cutting loop hit its round cap without certifying the point."""


class RobustInfeasible(RuntimeError):
    pass


@dataclass
class CutRoundLog:
    round: int
    violated_constraints: list[tuple[int, np.ndarray, float]]
    objective_before: float
    objective_after: float


@dataclass
class InfeasibilityTestResult:
    store: SampleStore
    point: np.ndarray | None
    objective: float
    rounds: list[CutRoundLog] = field(default_factory=list)
    certified: bool = True

    @property
    def samples_added(self) -> int:
        return sum(len(r.violated_constraints) for r in self.rounds)


def scan_violations(problem: QcqpProblem, point, uset: UncertaintySet, delta: float):
    """Fresh oracle value for every uncertain constraint, in declaration order."""
    out = []
    for i, c in enumerate(problem.uncertain):
        a0, a = extract_affine(c, point)
        xi, val = worst_case(a0, a, uset.with_dim(c.dim))
        out.append((i, xi, val))
    return out


def max_robust_violation(problem: QcqpProblem, point, uset: UncertaintySet | None) -> float:
    if uset is None or not problem.uncertain:
        return -math.inf
    return max(v for _, _, v in scan_violations(problem, point, uset, 0.0))


def infeasibility_test(problem: QcqpProblem, x_star, objective: float, store: SampleStore,
                       uset: UncertaintySet, delta: float, node_box: VariableBox,
                       max_rounds: int = 200, slp_options: SlpOptions | None = None,
                       on_round: Callable[[CutRoundLog], None] | None = None) -> InfeasibilityTestResult:
    """Certify ``x_star`` against the worst case, cutting and re-solving until it passes.

    ``store`` is updated in place.  A failed local re-solve ends the test with
    objective ``+inf``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    x = np.asarray(x_star, dtype=float)
    obj = objective
    rounds: list[CutRoundLog] = []
    for r in range(1, max_rounds + 2):
        violated = []
        for i, xi, val in scan_violations(problem, x, uset, delta):
            if val > delta:
                _, added = add_sample(store, i, xi)
                if added:
                    violated.append((i, xi, val))
        if not violated:
            return InfeasibilityTestResult(store, x, obj, rounds, certified=True)
        if r > max_rounds:
            break
        res: LocalOutcome = solve_local(problem, node_box, store, x, options=slp_options)
        log = CutRoundLog(r, violated, obj, res.objective if res.feasible else math.inf)
        rounds.append(log)
        if on_round is not None:
            on_round(log)
        if not res.feasible:
            return InfeasibilityTestResult(store, None, math.inf, rounds, certified=False)
        x, obj = res.point, res.objective
    raise CutRoundLimit(f"no certified point after {max_rounds} cut rounds")


@dataclass
class CuttingSetResult:
    point: np.ndarray
    objective: float
    rounds: list[CutRoundLog]
    store: SampleStore
    inner_solves: int
    inner_nodes: int = 0


def robust_cutting_set(problem: QcqpProblem, uset: UncertaintySet, delta: float = 1e-6,
                       use_global: bool = True, config=None, max_rounds: int = 200) -> CuttingSetResult:
    """Alternate an inner solve of the sampled problem with the worst-case oracle.

    With ``use_global`` each inner solve is a full spatial branch-and-bound of
    the sampled problem (no infeasibility tests inside); otherwise a single
    local solve from the box midpoint.
    """
    from .bnb import SolveConfig, solve_sampled_global

    if delta <= 0:
        raise ValueError("delta must be positive")
    cfg = config or SolveConfig()
    store = SampleStore.nominal(problem)
    rounds: list[CutRoundLog] = []
    inner = nodes = 0

    def inner_solve():
        nonlocal inner, nodes
        inner += 1
        if use_global:
            sol = solve_sampled_global(problem, store, cfg)
            nodes += sol.nodes_explored
            return sol.point, sol.objective
        res = solve_local(problem, problem.box, store, problem.box.midpoint())
        return (res.point, res.objective) if res.feasible else (None, math.inf)

    x, obj = inner_solve()
    for r in range(1, max_rounds + 2):
        if x is None:
            raise RobustInfeasible("sampled problem has no feasible point")
        violated = []
        for i, xi, val in scan_violations(problem, x, uset, delta):
            if val > delta:
                _, added = add_sample(store, i, xi)
                if added:
                    violated.append((i, xi, val))
        if not violated:
            return CuttingSetResult(x, obj, rounds, store, inner, nodes)
        if r > max_rounds:
            break
        before = obj
        x, obj = inner_solve()
        rounds.append(CutRoundLog(r, violated, before, obj))
    raise CutRoundLimit(f"cutting set did not converge in {max_rounds} rounds")
