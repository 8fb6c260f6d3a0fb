"""McCormick relaxations of bilinear and square terms over a node box."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qcqp import CompiledExprs, Pair, QcqpProblem, QuadExpr, VariableBox
from .simplex import LinearProgram, LpOutcome, solve_lp
from .uncertainty import SampleStore


@dataclass
class RelaxedLp:
    """LP over ``[x, y]`` where ``y[k]`` stands in for the product of ``pairs[k]``."""

    lp: LinearProgram
    n_orig: int
    pairs: tuple[Pair, ...]
    pair_index: dict[Pair, int]
    n_envelope_rows: int
    n_sample_rows: int

    @property
    def n_total(self) -> int:
        return self.lp.n


def envelope_rows(pair: Pair, box: VariableBox, n_orig: int, col: int) -> tuple[np.ndarray, np.ndarray]:
    """Four ``<=`` rows ``G @ [x, y] <= h`` for ``y = x_b * x_j``.

    Rows are the two underestimators (lower/lower and upper/upper corners)
    followed by the two overestimators.  For ``b == j`` the overestimators
    coincide with the secant.
    """
    b, j = pair
    lb, ub = box.lower, box.upper
    G = np.zeros((4, n_orig + 1))
    h = np.zeros(4)
    yc = n_orig
    # y >= xb_lo*xj + xb*xj_lo - xb_lo*xj_lo
    G[0, j] += lb[b]; G[0, b] += lb[j]; G[0, yc] = -1.0; h[0] = lb[b] * lb[j]
    # y >= xb_hi*xj + xb*xj_hi - xb_hi*xj_hi
    G[1, j] += ub[b]; G[1, b] += ub[j]; G[1, yc] = -1.0; h[1] = ub[b] * ub[j]
    # y <= xb_hi*xj + xb*xj_lo - xb_hi*xj_lo
    G[2, j] -= ub[b]; G[2, b] -= lb[j]; G[2, yc] = 1.0; h[2] = -ub[b] * lb[j]
    # y <= xb_lo*xj + xb*xj_hi - xb_lo*xj_hi
    G[3, j] -= lb[b]; G[3, b] -= ub[j]; G[3, yc] = 1.0; h[3] = -lb[b] * ub[j]
    full = np.zeros((4, col + 1))
    full[:, :n_orig] = G[:, :n_orig]
    full[:, col] = G[:, yc]
    return full, h


def product_bounds(pair: Pair, box: VariableBox) -> tuple[float, float]:
    b, j = pair
    lo_b, hi_b, lo_j, hi_j = box.lower[b], box.upper[b], box.lower[j], box.upper[j]
    if b == j:
        lo = 0.0 if lo_b <= 0.0 <= hi_b else min(lo_b * lo_b, hi_b * hi_b)
        return lo, max(lo_b * lo_b, hi_b * hi_b)
    corners = (lo_b * lo_j, lo_b * hi_j, hi_b * lo_j, hi_b * hi_j)
    return min(corners), max(corners)


def _linearize(exprs: list[QuadExpr], n: int, pairs) -> tuple[np.ndarray, np.ndarray]:
    """Rows ``[A | B] @ [x, y] <= -const`` for a list of ``expr <= 0``."""
    if not exprs:
        return np.zeros((0, n + len(pairs))), np.zeros(0)
    ce = CompiledExprs(exprs, n, pairs)
    return np.hstack([ce.A, ce.B]), -ce.const


def sampled_exprs(problem: QcqpProblem, store: SampleStore) -> list[QuadExpr]:
    """One certain row per (uncertain constraint, stored sample)."""
    out = []
    for i, c in enumerate(problem.uncertain):
        for xi in store[i]:
            out.append(c.expr_at(xi))
    return out


def relax(problem: QcqpProblem, box: VariableBox, store: SampleStore, uset=None) -> RelaxedLp:
    """Build the McCormick LP of the sampled problem on ``box``.

    ``uset`` is accepted for signature symmetry; samples already encode the set.
    """
    n = problem.n_vars
    pairs = problem.pairs
    P = len(pairs)
    N = n + P
    pidx = {p: n + k for k, p in enumerate(pairs)}

    ub_exprs = [e for i, e in enumerate(problem.certain)
                if problem.eq_tags[i] is None]
    eq_exprs = [problem.certain[i] for i in problem.equality_rows]
    samp = sampled_exprs(problem, store)
    A1, b1 = _linearize(ub_exprs + samp, n, pairs)
    Aeq, beq = _linearize(eq_exprs, n, pairs)

    env_A = np.zeros((4 * P, N))
    env_b = np.zeros(4 * P)
    for k, p in enumerate(pairs):
        G, h = envelope_rows(p, box, n, n + k)
        env_A[4 * k:4 * k + 4, :G.shape[1]] = G
        env_b[4 * k:4 * k + 4] = h

    lb = np.concatenate([box.lower, np.zeros(P)])
    ub = np.concatenate([box.upper, np.zeros(P)])
    for k, p in enumerate(pairs):
        lb[n + k], ub[n + k] = product_bounds(p, box)

    obj = CompiledExprs([problem.objective], n, pairs)
    c = np.concatenate([obj.A[0], obj.B[0]])
    lp = LinearProgram.make(c, np.vstack([A1, env_A]), np.concatenate([b1, env_b]),
                            Aeq, beq, lb, ub, c0=obj.const[0])
    return RelaxedLp(lp, n, pairs, pidx, 4 * P, len(samp))


def solve_relaxation(problem: QcqpProblem, box: VariableBox, store: SampleStore) -> tuple[RelaxedLp, LpOutcome]:
    rlp = relax(problem, box, store)
    return rlp, solve_lp(rlp.lp)


def approximation_errors(lp_solution, pair_index: dict[Pair, int]) -> dict[Pair, float]:
    z = np.asarray(lp_solution, dtype=float)
    return {p: abs(z[col] - z[p[0]] * z[p[1]]) for p, col in pair_index.items()}
