import numpy as np
import pytest

from oracles import grid_optimum
from problems import random_bilinear
from robustsbb.qcqp import ProblemBuilder, QuadExpr
from robustsbb.slp import LocalStatus, SampledNlp, solve_local
from robustsbb.toy import toy_problem
from robustsbb.uncertainty import SampleStore, add_sample


def test_toy_nominal_local_solution():
    p = toy_problem()
    store = SampleStore.nominal(p)
    out = solve_local(p, p.box, store, [0.375, 0.375])
    assert out.status is LocalStatus.LOCAL_OPTIMAL
    assert out.objective == pytest.approx(-0.4512, abs=1e-3)
    assert out.max_violation <= 1e-6


def test_toy_with_worst_sample():
    p = toy_problem()
    store = SampleStore.nominal(p)
    add_sample(store, 0, [1.0])
    out = solve_local(p, p.box, store, [0.75, 0.3])
    assert out.objective == pytest.approx(-0.3607, abs=1e-3)


def test_stationary_infeasible_start_reported():
    # the centre of the excluded disc is a stationary point of the disc row
    p = toy_problem()
    out = solve_local(p, p.box, SampleStore.nominal(p), [0.5, 0.5])
    assert out.status is LocalStatus.INFEASIBLE_POINT
    assert out.max_violation > 1e-6


def test_multistart_keeps_best_feasible():
    p = toy_problem()
    store = SampleStore.nominal(p)
    out = solve_local(p, p.box, store, [0.5, 0.5], extra_starts=[[0.0, 0.0], [0.375, 0.375]])
    assert out.feasible and out.objective == pytest.approx(-0.4512, abs=1e-3)


def test_start_length_checked():
    p = toy_problem()
    with pytest.raises(ValueError):
        solve_local(p, p.box, SampleStore.nominal(p), [0.1])


def test_equality_constrained():
    # min -x - y  s.t.  x*y = 0.25, x, y in [0, 1]
    pb = ProblemBuilder()
    x = pb.var("x", 0, 1)
    y = pb.var("y", 0, 1)
    pb.objective = QuadExpr.build(0, {x: -1.0, y: -1.0})
    pb.eq(QuadExpr.build(-0.25, bilinear={(x, y): 1.0}), "prod")
    p = pb.build()
    out = solve_local(p, p.box, SampleStore.nominal(p), [0.9, 0.9])
    assert out.feasible
    assert out.point[0] * out.point[1] == pytest.approx(0.25, abs=1e-6)
    assert out.objective == pytest.approx(-1.25, abs=1e-4)


@pytest.mark.parametrize("seed", range(10))
def test_local_never_beats_grid_global(seed):
    p = random_bilinear(np.random.default_rng(seed), uncertain=False)
    nlp = SampledNlp(p, SampleStore.nominal(p))
    out = solve_local(p, p.box, SampleStore.nominal(p), p.box.midpoint(), [p.box.lower], nlp=nlp)
    if out.feasible:
        g, _ = grid_optimum(p, step=2e-3)
        # local optimum is feasible, the grid optimum is within one cell of the true one
        assert out.objective >= g - 5e-3
        assert p.box.contains(out.point)
