import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import enumerate_worst_case, sphere_samples
from robustsbb.qcqp import QuadExpr, UncertainConstraint, VariableBox, eval_expr
from robustsbb.toy import toy_problem
from robustsbb.uncertainty import (EllipsoidalNotRepresentable, SampleOutsideSet, SampleStore, SetKind,
                                   SignAmbiguous, UncertaintySet, add_sample, dual_counterpart,
                                   dual_rho_rows, extract_affine, worst_case)

vec = st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=4).map(np.array)
sizes = st.floats(0.01, 3.0)


def test_worst_case_examples():
    xi, v = worst_case(1.0, [2.0, -1.0], UncertaintySet("box", 0.5, 2))
    assert v == pytest.approx(2.5) and np.allclose(xi, [0.5, -0.5])
    xi, v = worst_case(0.0, [3.0, 4.0], UncertaintySet("ellipsoidal", 1.0, 2))
    assert v == pytest.approx(5.0) and np.allclose(xi, [0.6, 0.8])
    xi, v = worst_case(0.0, [2.0, -2.0], UncertaintySet("polyhedral", 1.0, 2))
    assert v == pytest.approx(2.0) and np.allclose(xi, [1.0, 0.0])  # lowest index on ties


def test_worst_case_zero_coefficients():
    for kind in SetKind:
        xi, v = worst_case(-0.3, [0.0, 0.0], UncertaintySet(kind, 1.0, 2))
        assert v == -0.3 and not xi.any()


def test_invalid_sets():
    with pytest.raises(ValueError):
        UncertaintySet("box", 0.0)
    with pytest.raises(ValueError):
        UncertaintySet("box", 1.0, 0)
    with pytest.raises(ValueError):
        UncertaintySet("sphere", 1.0)
    with pytest.raises(ValueError):
        worst_case(0.0, [1.0, 2.0], UncertaintySet("box", 1.0, 1))


@given(st.floats(-5, 5), vec, sizes, st.sampled_from(["box", "polyhedral"]))
def test_worst_case_matches_enumeration(a0, a, size, kind):
    uset = UncertaintySet(kind, size, a.size)
    xi, v = worst_case(a0, a, uset)
    assert v == pytest.approx(enumerate_worst_case(a0, a, kind, size), abs=1e-6)
    assert uset.contains(xi)
    assert a0 + a @ xi == pytest.approx(v, abs=1e-9)


@settings(max_examples=50)
@given(st.floats(-5, 5), vec, sizes)
def test_ellipsoidal_dominates_samples(a0, a, size):
    uset = UncertaintySet("ellipsoidal", size, a.size)
    xi, v = worst_case(a0, a, uset)
    pts = sphere_samples(a.size, size, 500, np.random.default_rng(0))
    assert np.all(a0 + pts @ a <= v + 1e-6)
    assert uset.contains(xi)


def test_extract_affine_toy():
    p = toy_problem()
    a0, a = extract_affine(p.uncertain[0], [0.5, 0.5])
    assert a0 == pytest.approx(0.0) and a == pytest.approx([0.5])


def test_sample_store_dedup_and_bounds():
    p = toy_problem()
    store = SampleStore.nominal(p)
    assert store.size() == 1 and not store[0][0].any()
    _, added = add_sample(store, 0, [1.0])
    assert added
    _, added = add_sample(store, 0, [1.0 + 1e-12])
    assert not added
    with pytest.raises(SampleOutsideSet):
        add_sample(store, 0, [1.5], UncertaintySet("box", 1.0, 1))
    assert store.size() == 2


def _lin_constraint():
    # x0 + x1 - 1 + xi0 * 0.5 x0 + xi1 * 0.2 x1 <= 0 on [0, 1]^2
    base = QuadExpr.build(-1.0, {0: 1.0, 1: 1.0})
    perts = ((0, QuadExpr.build(0, {0: 0.5})), (1, QuadExpr.build(0, {1: 0.2})))
    return UncertainConstraint(base, perts, dim=2, name="c")


def test_dual_rows_box_equivalent_to_worst_case():
    c = _lin_constraint()
    box = VariableBox(np.zeros(2), np.ones(2))
    uset = UncertaintySet("box", 0.3, 2)
    rows, aux = dual_rho_rows(c, uset, box)
    assert not aux
    rng = np.random.default_rng(1)
    for x in rng.random((50, 2)):
        a0, a = extract_affine(c, x)
        _, v = worst_case(a0, a, uset)
        assert eval_expr(rows[0], x) == pytest.approx(v)


def test_dual_rows_polyhedral_one_epigraph():
    c = _lin_constraint()
    box = VariableBox(np.zeros(2), np.ones(2))
    rows, aux = dual_rho_rows(c, UncertaintySet("polyhedral", 0.3, 2), box, aux_index=2)
    assert len(aux) == 1 and len(rows) == 3


def test_dual_rows_errors():
    c = _lin_constraint()
    box = VariableBox(np.zeros(2), np.ones(2))
    with pytest.raises(EllipsoidalNotRepresentable):
        dual_rho_rows(c, UncertaintySet("ellipsoidal", 0.3, 2), box)
    mixed = UncertainConstraint(c.base, ((0, QuadExpr.build(-0.5, {0: 1.0})),), dim=1)
    with pytest.raises(SignAmbiguous):
        dual_rho_rows(mixed, UncertaintySet("box", 0.3, 1), box)


def test_dual_counterpart_toy_is_certain():
    p = toy_problem()
    d = dual_counterpart(p, UncertaintySet("box", 1.0, 1))
    assert not d.uncertain and d.n_vars == 2
    assert len(d.certain) == len(p.certain) + 1
