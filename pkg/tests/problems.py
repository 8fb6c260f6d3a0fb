"""Random small problems for property tests."""
from __future__ import annotations

import numpy as np

from robustsbb.qcqp import ProblemBuilder, QuadExpr, UncertainConstraint


def random_bilinear(rng: np.random.Generator, uncertain: bool = True, n: int = 2):
    """Bilinear objective and constraint on ``[0, 1]^n``; the origin is always robust feasible.

    The uncertain row is ``a x0 x1 + b . x - d + xi * e x0 x1 <= 0`` with ``d > 0``,
    so at ``x = 0`` it reads ``-d`` whatever ``xi``.
    """
    pb = ProblemBuilder()
    for i in range(n):
        pb.var(f"x{i}", 0.0, 1.0)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    pb.objective = QuadExpr.build(0.0, {i: rng.uniform(-1, 1) for i in range(n)},
                                  {p: rng.uniform(-2, 2) for p in pairs})
    base = QuadExpr.build(-rng.uniform(0.3, 1.5), {i: rng.uniform(0, 2) for i in range(n)},
                          {(0, 1): rng.uniform(-1, 2)})
    pert = QuadExpr.build(bilinear={(0, 1): rng.uniform(0.2, 1.5)})
    if uncertain:
        pb.add_uncertain(UncertainConstraint(base, ((0, pert),), dim=1, name="u"))
    else:
        pb.leq(base)
    # a second, certain, nonconvex row keeps the feasible set interesting
    pb.leq(QuadExpr.build(-rng.uniform(0.5, 1.0), {0: rng.uniform(0, 1)}, {(0, 1): rng.uniform(-1, 1)}))
    return pb.build()
