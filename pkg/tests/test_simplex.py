import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from robustsbb.simplex import IterationLimit, LinearProgram, LpStatus, dual_bound, solve_lp


def test_small_known_lp():
    # max x + y s.t. x + 2y <= 4, 3x + y <= 6
    lp = LinearProgram.make([-1, -1], [[1, 2], [3, 1]], [4, 6])
    out = solve_lp(lp)
    assert out.optimal
    assert out.objective == pytest.approx(-2.8)
    assert out.x == pytest.approx([1.6, 1.2])


def test_infeasible_and_unbounded():
    assert solve_lp(LinearProgram.make([1.0], A_eq=[[1.0]], b_eq=[5.0], ub=[2.0])).status is LpStatus.INFEASIBLE
    assert solve_lp(LinearProgram.make([-1.0, 0.0], [[0.0, 1.0]], [1.0])).status is LpStatus.UNBOUNDED
    assert solve_lp(LinearProgram.make([1.0], lb=[2.0], ub=[1.0])).status is LpStatus.INFEASIBLE


def test_free_variables_and_equalities():
    lp = LinearProgram.make([1.0, 1.0], A_eq=[[1.0, -1.0]], b_eq=[2.0], lb=[-np.inf, -3.0], ub=[np.inf, np.inf])
    out = solve_lp(lp)
    assert out.optimal and out.objective == pytest.approx(-4.0)


def test_iteration_limit_is_distinct():
    rng = np.random.default_rng(3)
    A = rng.random((20, 20))
    lp = LinearProgram.make(-np.ones(20), A, np.ones(20))
    with pytest.raises(IterationLimit):
        solve_lp(lp, max_iter=1)


def test_degenerate_cycling_example():
    # Beale's classic cycling LP
    c = [-0.75, 150, -0.02, 6]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    out = solve_lp(LinearProgram.make(c, A, [0, 0, 1]))
    assert out.optimal and out.objective == pytest.approx(-0.05)


@st.composite
def random_lps(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    mu = int(rng.integers(0, 6))
    me = int(rng.integers(0, 3))
    x0 = rng.uniform(-1, 1, n)
    A_ub = rng.normal(size=(mu, n))
    b_ub = A_ub @ x0 + rng.uniform(-0.5, 1.0, mu)
    A_eq = rng.normal(size=(me, n))
    b_eq = A_eq @ x0 if rng.random() < 0.8 else rng.normal(size=me)
    lb = np.where(rng.random(n) < 0.8, -2.0, -np.inf)
    ub = np.where(rng.random(n) < 0.8, 2.0, np.inf)
    return LinearProgram.make(rng.normal(size=n), A_ub, b_ub, A_eq, b_eq, lb, ub)


@settings(max_examples=200, deadline=None)
@given(random_lps())
def test_matches_highs(lp):
    ref = linprog(lp.c, lp.A_ub if lp.A_ub.size else None, lp.b_ub if lp.b_ub.size else None,
                  lp.A_eq if lp.A_eq.size else None, lp.b_eq if lp.b_eq.size else None,
                  bounds=list(zip(lp.lb, lp.ub)), method="highs")
    out = solve_lp(lp)
    expected = {0: LpStatus.OPTIMAL, 2: LpStatus.INFEASIBLE, 3: LpStatus.UNBOUNDED}[ref.status]
    assert out.status is expected
    if out.optimal:
        assert out.objective == pytest.approx(ref.fun, abs=1e-6, rel=1e-6)
        assert np.all(lp.A_ub @ out.x <= lp.b_ub + 1e-6)
        assert np.allclose(lp.A_eq @ out.x, lp.b_eq, atol=1e-6)
        assert dual_bound(lp, out) == pytest.approx(out.objective, abs=1e-5, rel=1e-6)
