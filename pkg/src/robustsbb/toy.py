"""The two-variable illustrative problem with one uncertain bilinear coefficient.

    min  -2 x1 x2
    s.t. u x1 x2 + 2 x1 + 2 x2 <= 3          u in [2, 6], nominal 4
         0.1 - (x1 - 0.5)^2 - (x2 - 0.5)^2 <= 0
         x2 - 0.09 x2 - 0.5 <= 0
         x in [0, 1]^2

The uncertain coefficient is re-centred as ``u = 4 + 2 xi`` with ``xi`` in a
unit box, so the set is ``UncertaintySet("box", 1.0)``.
"""
from __future__ import annotations

from .qcqp import ProblemBuilder, QcqpProblem, QuadExpr, UncertainConstraint
from .uncertainty import SetKind, UncertaintySet

U_NOMINAL = 4.0
U_HALF_RANGE = 2.0


def toy_problem() -> QcqpProblem:
    pb = ProblemBuilder()
    x1 = pb.var("x1", 0.0, 1.0)
    x2 = pb.var("x2", 0.0, 1.0)
    pb.objective = QuadExpr.build(bilinear={(x1, x2): -2.0})
    base = QuadExpr.build(-3.0, {x1: 2.0, x2: 2.0}, {(x1, x2): U_NOMINAL})
    pert = QuadExpr.build(bilinear={(x1, x2): U_HALF_RANGE})
    pb.add_uncertain(UncertainConstraint(base, ((0, pert),), group="u", dim=1, name="capacity"))
    # 0.1 - (x1-0.5)^2 - (x2-0.5)^2 = -0.4 + x1 + x2 - x1^2 - x2^2
    pb.leq(QuadExpr.build(-0.4, {x1: 1.0, x2: 1.0}, {(x1, x1): -1.0, (x2, x2): -1.0}))
    pb.leq(QuadExpr.build(-0.5, {x2: 1.0 - 0.09}))
    return pb.build()


def toy_set(size: float = 1.0) -> UncertaintySet:
    return UncertaintySet(SetKind.BOX, size, 1)
