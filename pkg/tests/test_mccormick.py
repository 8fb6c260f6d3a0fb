import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from robustsbb.mccormick import approximation_errors, envelope_rows, product_bounds, relax, solve_relaxation
from robustsbb.qcqp import VariableBox
from robustsbb.toy import toy_problem
from robustsbb.uncertainty import SampleStore, add_sample

bounds = st.tuples(st.floats(-3, 3), st.floats(0.01, 3)).map(lambda t: (t[0], t[0] + t[1]))


@given(bounds, bounds, st.floats(0, 1), st.floats(0, 1))
def test_envelopes_contain_true_product(b0, b1, s, t):
    box = VariableBox(np.array([b0[0], b1[0]]), np.array([b0[1], b1[1]]))
    G, h = envelope_rows((0, 1), box, 2, 2)
    x = np.array([b0[0] + s * (b0[1] - b0[0]), b1[0] + t * (b1[1] - b1[0])])
    z = np.array([x[0], x[1], x[0] * x[1]])
    assert np.all(G @ z <= h + 1e-9)
    lo, hi = product_bounds((0, 1), box)
    assert lo - 1e-12 <= x[0] * x[1] <= hi + 1e-12


@given(bounds, st.floats(0, 1))
def test_square_envelopes_valid(b0, s):
    box = VariableBox(np.array([b0[0]]), np.array([b0[1]]))
    G, h = envelope_rows((0, 0), box, 1, 1)
    x = b0[0] + s * (b0[1] - b0[0])
    assert np.all(G @ np.array([x, x * x]) <= h + 1e-9)
    lo, hi = product_bounds((0, 0), box)
    assert lo - 1e-12 <= x * x <= hi + 1e-12


def test_envelopes_exact_at_corners():
    box = VariableBox(np.array([0.0, 1.0]), np.array([2.0, 3.0]))
    G, h = envelope_rows((0, 1), box, 2, 2)
    for x0 in (0.0, 2.0):
        for x1 in (1.0, 3.0):
            # the only feasible y at a corner is the product
            ys = [y for y in np.linspace(-1, 7, 801) if np.all(G @ [x0, x1, y] <= h + 1e-9)]
            assert min(ys) == pytest.approx(x0 * x1, abs=0.02) and max(ys) == pytest.approx(x0 * x1, abs=0.02)


def _scipy_bound(rlp):
    lp = rlp.lp
    r = linprog(lp.c, lp.A_ub, lp.b_ub, lp.A_eq if lp.A_eq.size else None, lp.b_eq if lp.b_eq.size else None,
                bounds=list(zip(lp.lb, lp.ub)), method="highs")
    return r.fun + lp.c0


def test_toy_root_relaxation_value():
    p = toy_problem()
    rlp, out = solve_relaxation(p, p.box, SampleStore.nominal(p))
    assert out.optimal
    assert out.objective == pytest.approx(_scipy_bound(rlp), abs=1e-9)
    assert out.objective == pytest.approx(-0.75, abs=1e-9)
    assert rlp.n_envelope_rows == 4 * len(p.pairs)


def test_samples_add_rows_and_tighten():
    p = toy_problem()
    store = SampleStore.nominal(p)
    r0, o0 = solve_relaxation(p, p.box, store)
    add_sample(store, 0, [1.0])
    r1, o1 = solve_relaxation(p, p.box, store)
    assert r1.n_sample_rows == r0.n_sample_rows + 1
    assert o1.objective >= o0.objective - 1e-12


def test_relaxation_lower_bounds_subboxes():
    p = toy_problem()
    store = SampleStore.nominal(p)
    _, root = solve_relaxation(p, p.box, store)
    for down in p.box.split(0, 0.4):
        _, child = solve_relaxation(p, down, store)
        if child.optimal:
            assert child.objective >= root.objective - 1e-9


def test_approximation_errors():
    errs = approximation_errors([0.5, 0.5, 0.0], {(0, 1): 2})
    assert errs[(0, 1)] == pytest.approx(0.25)
