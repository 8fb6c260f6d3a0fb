"""Local solver for the sampled non-convex problem on a node box.

Successive linear programming: each bilinear term is linearised at the current
point, the LP is solved inside a trust region intersected with the node box,
and steps are accepted on the ratio of actual to predicted reduction of the
l1 merit ``f + mu * (sum max(g, 0) + sum |h|)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .mccormick import sampled_exprs
from .qcqp import CompiledExprs, QcqpProblem, VariableBox
from .simplex import LinearProgram, solve_lp
from .uncertainty import SampleStore


class LocalStatus(str, enum.Enum):
    LOCAL_OPTIMAL = "local_optimal"
    INFEASIBLE_POINT = "infeasible_point"
    STALL_LIMIT = "stall_limit"


@dataclass
class LocalOutcome:
    status: LocalStatus
    point: np.ndarray
    objective: float
    max_violation: float
    iterations: int = 0
    merit_log: list[tuple[float, float]] = field(default_factory=list, repr=False)

    @property
    def feasible(self) -> bool:
        return self.status is LocalStatus.LOCAL_OPTIMAL


@dataclass
class SlpOptions:
    feas_tol: float = 1e-6
    max_iter: int = 300
    min_radius: float = 1e-8
    init_radius: float = 0.25
    shrink: float = 0.5
    expand: float = 1.5
    accept_ratio: float = 0.1
    good_ratio: float = 0.75
    penalty_cap: float = 1e8
    merit_rtol: float = 1e-10


class SampledNlp:
    """The sampled problem compiled to dense arrays for repeated evaluation."""

    def __init__(self, problem: QcqpProblem, store: SampleStore):
        n = problem.n_vars
        pairs = problem.pairs
        ineq = [e for i, e in enumerate(problem.certain) if problem.eq_tags[i] is None]
        ineq += sampled_exprs(problem, store)
        eq = [problem.certain[i] for i in problem.equality_rows]
        self.n = n
        self.obj = CompiledExprs([problem.objective], n, pairs)
        self.g = CompiledExprs(ineq, n, pairs)
        self.h = CompiledExprs(eq, n, pairs)

    def f(self, x) -> float:
        return float(self.obj.values(x)[0])

    def violation(self, x) -> float:
        g = self.g.values(x)
        h = self.h.values(x)
        return float(np.sum(np.maximum(g, 0.0)) + np.sum(np.abs(h)))

    def max_violation(self, x) -> float:
        g = self.g.values(x)
        h = self.h.values(x)
        return float(max(np.max(g, initial=0.0), np.max(np.abs(h), initial=0.0), 0.0))


def _slp_step(nlp: SampledNlp, x, lo, hi, mu, use_objective: bool = True):
    n = nlp.n
    grad = nlp.obj.jacobian(x)[0] if use_objective else np.zeros(n)
    g, Jg = nlp.g.values(x), nlp.g.jacobian(x)
    h, Jh = nlp.h.values(x), nlp.h.jacobian(x)
    mg, me = g.size, h.size
    nv = n + mg + 2 * me
    c = np.concatenate([grad, np.full(mg + 2 * me, mu)])
    A_ub = np.zeros((mg, nv))
    A_ub[:, :n] = Jg
    A_ub[:, n:n + mg] = -np.eye(mg)
    A_eq = np.zeros((me, nv))
    A_eq[:, :n] = Jh
    A_eq[:, n + mg:n + mg + me] = -np.eye(me)
    A_eq[:, n + mg + me:] = np.eye(me)
    lb = np.concatenate([lo, np.zeros(mg + 2 * me)])
    ub = np.concatenate([hi, np.full(mg + 2 * me, np.inf)])
    out = solve_lp(LinearProgram.make(c, A_ub, -g, A_eq, -h, lb, ub))
    if not out.optimal:
        return None, 0.0
    d = out.x[:n]
    lin_model = float(grad @ d + mu * np.sum(out.x[n:]))
    current = mu * (float(np.sum(np.maximum(g, 0.0))) + float(np.sum(np.abs(h))))
    return d, current - lin_model


def _slp_single(nlp: SampledNlp, box: VariableBox, start, opts: SlpOptions) -> LocalOutcome:
    x = box.project(start)
    width = box.width
    radius = opts.init_radius * width
    mu = 10.0 * (1.0 + abs(nlp.f(x)))
    log: list[tuple[float, float]] = []

    def merit(z):
        return nlp.f(z) + mu * nlp.violation(z)

    it = 0
    while it < opts.max_iter:
        it += 1
        lo = np.maximum(box.lower - x, -radius)
        hi = np.minimum(box.upper - x, radius)
        d, pred = _slp_step(nlp, x, lo, hi, mu)
        fx = merit(x)
        scale = 1.0 + abs(fx)
        stationary = d is None or pred <= 1e-12 * scale or np.max(radius, initial=0.0) < opts.min_radius
        if stationary:
            if nlp.max_violation(x) <= opts.feas_tol:
                break
            if mu < opts.penalty_cap:
                mu = min(2.0 * mu, opts.penalty_cap)
                radius = np.maximum(radius, opts.init_radius * width * 0.1)
                continue
            break
        x_new = np.clip(x + d, box.lower, box.upper)
        ared = fx - merit(x_new)
        ratio = ared / pred
        if ratio < opts.accept_ratio and nlp.violation(x_new) > 0.0:
            # second-order correction: restore the linearised constraints at
            # the trial point, inside a region no larger than the trial step
            span = np.abs(d)
            d2, _ = _slp_step(nlp, x_new, np.maximum(box.lower - x_new, -span),
                              np.minimum(box.upper - x_new, span), 1.0, use_objective=False)
            if d2 is not None:
                x_soc = np.clip(x_new + d2, box.lower, box.upper)
                ared_soc = fx - merit(x_soc)
                if ared_soc / pred >= opts.accept_ratio:
                    x_new, ared, ratio = x_soc, ared_soc, ared_soc / pred
        if ratio >= opts.accept_ratio:
            log.append((mu, merit(x_new)))
            on_edge = np.any(np.abs(d) >= radius * (1 - 1e-9) - 1e-15)
            x = x_new
            if ared <= opts.merit_rtol * scale and nlp.max_violation(x) <= opts.feas_tol:
                break
            if ratio > opts.good_ratio and on_edge:
                radius = np.minimum(radius * opts.expand, width)
        else:
            radius = radius * opts.shrink
    mv = nlp.max_violation(x)
    if mv <= opts.feas_tol:
        status = LocalStatus.LOCAL_OPTIMAL
    elif it >= opts.max_iter:
        status = LocalStatus.STALL_LIMIT
    else:
        status = LocalStatus.INFEASIBLE_POINT
    return LocalOutcome(status, x, nlp.f(x), mv, it, log)


def solve_local(problem: QcqpProblem, box: VariableBox, store: SampleStore, start,
                extra_starts: Sequence = (), options: SlpOptions | None = None,
                nlp: SampledNlp | None = None) -> LocalOutcome:
    """Best result over ``start`` followed by ``extra_starts`` (duplicates skipped)."""
    if len(start) != problem.n_vars:
        raise ValueError(f"start has length {len(start)}, expected {problem.n_vars}")
    opts = options or SlpOptions()
    nlp = nlp or SampledNlp(problem, store)
    best: LocalOutcome | None = None
    tried: list[np.ndarray] = []
    for s in (start, *extra_starts):
        if s is None:
            continue
        s = box.project(s)
        if any(np.array_equal(s, t) for t in tried):
            continue
        tried.append(s)
        res = _slp_single(nlp, box, s, opts)
        if best is None or _better(res, best):
            best = res
    return best


def _better(a: LocalOutcome, b: LocalOutcome) -> bool:
    if a.feasible != b.feasible:
        return a.feasible
    if a.feasible:
        return a.objective < b.objective - 1e-12
    return a.max_violation < b.max_violation
