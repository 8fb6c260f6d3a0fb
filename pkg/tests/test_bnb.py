import math

import numpy as np
import pytest

from oracles import grid_optimum
from problems import random_bilinear
from robustsbb.bnb import (Node, SolveConfig, Termination, fathom_threshold, select_branch_var,
                           select_current, solve_rsbb)
from robustsbb.cutting import max_robust_violation
from robustsbb.qcqp import ProblemBuilder, QuadExpr, VariableBox, eval_expr
from robustsbb.toy import toy_problem, toy_set
from robustsbb.trace import TraceEvent, check_invariants
from robustsbb.uncertainty import SampleStore, UncertaintySet


def _node(i, lb, box=None):
    return Node(i, box or VariableBox(np.zeros(2), np.ones(2)), lb)


def test_select_current_examples():
    w = [_node(0, -0.5), _node(1, -0.39), _node(2, -0.35)]
    c = select_current(w, 1e-6)
    assert [n.id for n in c] == [0] and len(w) == 2
    w = [_node(3, -1.0), _node(1, -1.0)]
    assert [n.id for n in select_current(w, 1e-6)] == [1, 3] and w == []
    w = [_node(5, 2.0)]
    assert [n.id for n in select_current(w, 1e-6)] == [5]
    with pytest.raises(ValueError):
        select_current([], 1e-6)


def test_fathom_threshold_sign_safe():
    assert fathom_threshold(100.0, 1e-2) == pytest.approx(99.0)
    assert fathom_threshold(-100.0, 1e-2) == pytest.approx(-101.0)
    assert fathom_threshold(math.inf, 1e-2) == math.inf


def test_branch_on_wider_variable_of_max_error_pair():
    p = toy_problem()
    box = VariableBox(np.array([0.0, 0.0]), np.array([1.0, 0.5]))
    node = _node(0, -1.0, box)
    node.lp_x = np.array([0.5, 0.25, 0.0, 0.0, 0.0])
    node.errors = {(0, 1): 0.25}
    var, at = select_branch_var(p, SampleStore.nominal(p), node, SolveConfig())
    assert var == 0 and at == pytest.approx(0.5)


def test_branch_point_clipped_to_interior():
    p = toy_problem()
    node = _node(0, -1.0, p.box)
    node.lp_x = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
    node.errors = {(0, 1): 0.5}
    var, at = select_branch_var(p, SampleStore.nominal(p), node, SolveConfig())
    assert var == 0 and at == pytest.approx(0.8)


def test_zero_errors_use_strong_branching():
    p = toy_problem()
    node = _node(0, -0.75, p.box)
    node.lp_x = np.array([0.5, 0.5, 0.25, 0.25, 0.25])
    node.errors = {pair: 0.0 for pair in p.pairs}
    var, at = select_branch_var(p, SampleStore.nominal(p), node, SolveConfig())
    assert var in (0, 1) and 0.2 <= at <= 0.8


def test_exhausted_node_returns_none():
    p = toy_problem()
    box = VariableBox(np.array([0.3, 0.3]), np.array([0.3, 0.3]))
    node = _node(0, 0.0, box)
    assert select_branch_var(p, SampleStore.nominal(p), node, SolveConfig()) is None


def test_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        SolveConfig(max_nodes=0)


def test_toy_golden():
    sol = solve_rsbb(toy_problem(), toy_set())
    assert sol.termination is Termination.OPTIMAL
    assert sol.objective == pytest.approx(-0.36, abs=5e-3)
    assert sol.samples_added == 1
    assert [x.tolist() for _, _, x in sol.sample_log] == [[1.0]]
    solved = [r.value for r in sol.trace.events(TraceEvent.NODE_SOLVED)]
    assert any(abs(v + 0.45) <= 5e-3 for v in solved)
    assert sol.gap <= SolveConfig().epsilon
    assert check_invariants(sol.trace) == []
    assert max_robust_violation(toy_problem(), sol.point, toy_set()) <= 1e-6


def test_toy_root_bound_is_mccormick_value():
    sol = solve_rsbb(toy_problem(), toy_set())
    assert sol.root_lb == pytest.approx(-0.75, abs=1e-9)


def test_toy_nominal():
    sol = solve_rsbb(toy_problem(), None)
    g, _ = grid_optimum(toy_problem())
    assert sol.objective <= -0.45
    assert sol.objective == pytest.approx(g, abs=2e-3)


def test_infeasible_root():
    pb = ProblemBuilder()
    x = pb.var("x", 0, 1)
    pb.objective = QuadExpr.build(0, {x: 1.0})
    pb.leq(QuadExpr.build(2.0, {x: -1.0}))  # x >= 2
    sol = solve_rsbb(pb.build(), None)
    assert sol.termination is Termination.ROBUST_INFEASIBLE and sol.point is None


def test_node_limit_reports_honest_gap():
    sol = solve_rsbb(toy_problem(), toy_set(), SolveConfig(max_nodes=1))
    assert sol.termination is Termination.NODE_LIMIT
    assert sol.lb <= sol.objective + 1e-9
    assert check_invariants(sol.trace) == []


def test_deterministic_traces():
    a = solve_rsbb(toy_problem(), toy_set())
    b = solve_rsbb(toy_problem(), toy_set())
    strip = lambda s: [(r.event, r.ub, r.lb, r.node_id, r.cut_round, r.value) for r in s.trace]
    assert strip(a) == strip(b)


def test_incumbent_updates_follow_certification():
    sol = solve_rsbb(toy_problem(), toy_set())
    recs = sol.trace.records
    for k, r in enumerate(recs):
        if r.event is TraceEvent.INCUMBENT_UPDATED:
            prev = [q for q in recs[:k] if q.node_id == r.node_id]
            assert prev and prev[-1].event in (TraceEvent.NODE_SOLVED, TraceEvent.CUT_ADDED)


@pytest.mark.parametrize("seed", range(12))
def test_matches_grid_robust_optimum(seed):
    p = random_bilinear(np.random.default_rng(seed))
    sol = solve_rsbb(p, UncertaintySet("box", 1.0, 1))
    g, _ = grid_optimum(p, [np.array([-1.0]), np.array([1.0])], step=2e-3)
    assert sol.termination is Termination.OPTIMAL
    assert sol.objective == pytest.approx(g, abs=5e-3)
    assert check_invariants(sol.trace) == []


@pytest.mark.parametrize("seed", range(4))
def test_three_variable_problems(seed):
    rng = np.random.default_rng(100 + seed)
    p = random_bilinear(rng, n=3)
    sol = solve_rsbb(p, UncertaintySet("box", 1.0, 1))
    # brute force on a coarse 3-D grid: no robust-feasible grid point beats the answer
    g = np.linspace(0, 1, 41)
    X = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
    best = math.inf
    for x in X:
        if all(eval_expr(e, x) <= 0 for e in p.certain):
            c = p.uncertain[0]
            if all(eval_expr(c.expr_at([s]), x) <= 0 for s in (-1.0, 1.0)):
                best = min(best, eval_expr(p.objective, x))
    assert sol.objective <= best + 1e-4 * abs(best) + 1e-9
