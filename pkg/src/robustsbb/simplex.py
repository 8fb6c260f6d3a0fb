"""Dense revised simplex with native variable bounds.

Solves ``min c @ x + c0`` subject to ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq``
and ``lb <= x <= ub``.  Inequality rows get a logical column ``s >= 0``; rows
that are violated by the initial nonbasic point get an artificial column, and
phase 1 minimises the sum of artificials.  Pricing is Dantzig's rule, switching
to Bland's rule after a streak of degenerate pivots.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

PRIMAL_TOL = 1e-7
DUAL_TOL = 1e-7
PIVOT_TOL = 1e-9
DEGENERATE_STREAK = 30
REFACTOR_EVERY = 64

_LOWER, _UPPER, _BASIC, _FREE = 0, 1, 2, 3


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class IterationLimit(RuntimeError):
    """The simplex exhausted its pivot budget; distinct from infeasibility."""


@dataclass
class LinearProgram:
    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    c0: float = 0.0

    @classmethod
    def make(cls, c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lb=None, ub=None, c0=0.0):
        c = np.asarray(c, dtype=float)
        n = c.size
        A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, n)
        A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
        b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).reshape(-1)
        b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).reshape(-1)
        lb = np.zeros(n) if lb is None else np.asarray(lb, dtype=float).copy()
        ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float).copy()
        return cls(c, A_ub, b_ub, A_eq, b_eq, lb, ub, float(c0))

    @property
    def n(self) -> int:
        return self.c.size


@dataclass
class LpOutcome:
    status: LpStatus
    x: np.ndarray | None = None
    objective: float = np.inf
    duals_ub: np.ndarray | None = None
    duals_eq: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    iterations: int = 0
    basis: tuple | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class BoundedSimplex:
    """One solver instance per solve; holds all mutable working memory."""

    def __init__(self, lp: LinearProgram, max_iter: int | None = None):
        self.lp = lp
        n, mu, me = lp.n, lp.A_ub.shape[0], lp.A_eq.shape[0]
        self.n, self.mu, self.me = n, mu, me
        self.m = mu + me
        # columns: structural | logical (one per ub row) | artificial (added later)
        A = np.zeros((self.m, n + mu))
        A[:mu, :n] = lp.A_ub
        A[mu:, :n] = lp.A_eq
        A[:mu, n:] = np.eye(mu)
        self.A = A
        self.b = np.concatenate([lp.b_ub, lp.b_eq])
        self.lo = np.concatenate([lp.lb, np.zeros(mu)])
        self.hi = np.concatenate([lp.ub, np.full(mu, np.inf)])
        self.max_iter = max_iter if max_iter is not None else 100 * (self.m + n) + 1000
        self.iterations = 0

    # -- setup --------------------------------------------------------------
    def _initial_point(self):
        N = self.A.shape[1]
        x = np.zeros(N)
        status = np.full(N, _LOWER)
        for j in range(N):
            if np.isfinite(self.lo[j]):
                x[j], status[j] = self.lo[j], _LOWER
            elif np.isfinite(self.hi[j]):
                x[j], status[j] = self.hi[j], _UPPER
            else:
                x[j], status[j] = 0.0, _FREE
        return x, status

    def _crash(self):
        """Slack basis where feasible, artificials elsewhere."""
        n, mu = self.n, self.mu
        x, status = self._initial_point()
        r = self.b - self.A[:, :n] @ x[:n]
        basic = np.empty(self.m, dtype=int)
        art_cols = []
        for i in range(self.m):
            if i < mu and r[i] >= -PRIMAL_TOL:
                basic[i] = n + i
                x[n + i] = max(r[i], 0.0)
                status[n + i] = _BASIC
            else:
                sign = -1.0 if i < mu else (1.0 if r[i] >= 0 else -1.0)
                col = np.zeros(self.m)
                col[i] = sign
                art_cols.append((i, col, abs(r[i])))
        n_art = len(art_cols)
        if n_art:
            N0 = self.A.shape[1]
            self.A = np.hstack([self.A, np.column_stack([c for _, c, _ in art_cols])])
            self.lo = np.concatenate([self.lo, np.zeros(n_art)])
            self.hi = np.concatenate([self.hi, np.full(n_art, np.inf)])
            x = np.concatenate([x, np.array([v for _, _, v in art_cols])])
            status = np.concatenate([status, np.full(n_art, _BASIC)])
            for k, (i, _, _) in enumerate(art_cols):
                basic[i] = N0 + k
        self.n_art = n_art
        self.art_start = self.A.shape[1] - n_art
        self.x, self.status, self.basic = x, status, basic
        self._refactor()

    def _refactor(self):
        B = self.A[:, self.basic]
        self.Binv = np.linalg.inv(B) if self.m else np.zeros((0, 0))
        self._recompute_basics()

    def _recompute_basics(self):
        nb = self.status != _BASIC
        rhs = self.b - self.A[:, nb] @ self.x[nb]
        self.x[self.basic] = self.Binv @ rhs

    # -- core loop ------------------------------------------------------------
    def _run(self, cost: np.ndarray) -> LpStatus:
        streak = 0
        since_refactor = 0
        A = self.A
        while True:
            if self.iterations >= self.max_iter:
                raise IterationLimit(f"simplex exceeded {self.max_iter} iterations")
            cB = cost[self.basic]
            pi = cB @ self.Binv
            d = cost - pi @ A
            st = self.status
            fixed = self.hi - self.lo <= 0.0
            cand = ((st == _LOWER) & (d < -DUAL_TOL)) | ((st == _UPPER) & (d > DUAL_TOL)) | \
                   ((st == _FREE) & (np.abs(d) > DUAL_TOL))
            cand &= ~fixed
            if not cand.any():
                return LpStatus.OPTIMAL
            idx = np.flatnonzero(cand)
            bland = streak >= DEGENERATE_STREAK
            q = int(idx[0]) if bland else int(idx[np.argmax(np.abs(d[idx]))])
            direction = 1.0 if d[q] < 0 else -1.0
            alpha = self.Binv @ A[:, q]
            rate = -direction * alpha  # change of each basic per unit step
            xB = self.x[self.basic]
            loB, hiB = self.lo[self.basic], self.hi[self.basic]
            t_best = self.hi[q] - self.lo[q]  # bound flip
            leave = -1
            with np.errstate(divide="ignore", invalid="ignore"):
                dec = rate < -PIVOT_TOL
                inc = rate > PIVOT_TOL
                t_dec = np.where(dec & np.isfinite(loB), (xB - loB) / -rate, np.inf)
                t_inc = np.where(inc & np.isfinite(hiB), (hiB - xB) / rate, np.inf)
            t_all = np.maximum(np.minimum(t_dec, t_inc), 0.0)
            if t_all.size:
                tmin = t_all.min()
                if tmin < t_best:
                    ties = np.flatnonzero(t_all <= tmin + 1e-12)
                    if bland:
                        leave = int(ties[np.argmin(self.basic[ties])])
                    else:
                        leave = int(ties[np.argmax(np.abs(rate[ties]))])
                    t_best = t_all[leave]
            if not np.isfinite(t_best):
                return LpStatus.UNBOUNDED
            self.iterations += 1
            streak = streak + 1 if t_best <= 1e-12 else 0
            self.x[q] += direction * t_best
            self.x[self.basic] += t_best * rate
            if leave < 0:
                self.status[q] = _UPPER if direction > 0 else _LOWER
                continue
            out = self.basic[leave]
            hit_lower = t_dec[leave] <= t_inc[leave]
            self.x[out] = self.lo[out] if hit_lower else self.hi[out]
            self.status[out] = _LOWER if hit_lower else _UPPER
            if not np.isfinite(self.x[out]):
                self.x[out] = 0.0
                self.status[out] = _FREE
            self.basic[leave] = q
            self.status[q] = _BASIC
            piv = alpha[leave]
            row = self.Binv[leave] / piv
            self.Binv -= np.outer(alpha, row)
            self.Binv[leave] = row
            since_refactor += 1
            if since_refactor >= REFACTOR_EVERY:
                self._refactor()
                since_refactor = 0

    def solve(self) -> LpOutcome:
        lp = self.lp
        if np.any(lp.lb > lp.ub):
            return LpOutcome(LpStatus.INFEASIBLE)
        self._crash()
        if self.n_art:
            cost1 = np.zeros(self.A.shape[1])
            cost1[self.art_start:] = 1.0
            self._run(cost1)
            self._refactor()
            infeas = float(self.x[self.art_start:].sum())
            scale = 1.0 + float(np.max(np.abs(self.b), initial=0.0))
            if infeas > PRIMAL_TOL * scale:
                return LpOutcome(LpStatus.INFEASIBLE, iterations=self.iterations)
            self.hi[self.art_start:] = 0.0
            self.x[self.art_start:] = np.minimum(self.x[self.art_start:], 0.0)
            nb = self.status[self.art_start:] != _BASIC
            self.status[self.art_start:][nb] = _LOWER
            self._recompute_basics()
        cost = np.zeros(self.A.shape[1])
        cost[:self.n] = lp.c
        status = self._run(cost)
        if status is LpStatus.UNBOUNDED:
            return LpOutcome(LpStatus.UNBOUNDED, iterations=self.iterations)
        self._refactor()
        x = np.clip(self.x[:self.n], lp.lb, lp.ub)
        pi = cost[self.basic] @ self.Binv
        d = cost - pi @ self.A
        return LpOutcome(LpStatus.OPTIMAL, x=x, objective=float(lp.c @ x + lp.c0),
                         duals_ub=pi[:self.mu].copy(), duals_eq=pi[self.mu:].copy(),
                         reduced_costs=d[:self.n].copy(), iterations=self.iterations,
                         basis=(tuple(self.basic.tolist()), tuple(self.status.tolist())))


def solve_lp(lp: LinearProgram, warm_start=None, max_iter: int | None = None) -> LpOutcome:
    """Solve ``lp``.  ``warm_start`` is accepted for interface symmetry; the solver
    always crashes a fresh slack/artificial basis (node LPs are tiny)."""
    return BoundedSimplex(lp, max_iter=max_iter).solve()


def dual_bound(lp: LinearProgram, out: LpOutcome) -> float:
    """Lagrangian bound from the returned duals; equals the optimum at optimality.

    For fixed row duals ``y`` (``y <= 0`` on ``<=`` rows), the bound is
    ``y @ b + min_{lb<=x<=ub} (c - A^T y) @ x + c0``.
    """
    y_ub = np.minimum(out.duals_ub, 0.0)
    y_eq = out.duals_eq
    r = lp.c - lp.A_ub.T @ y_ub - lp.A_eq.T @ y_eq
    r = np.where(np.abs(r) <= DUAL_TOL, 0.0, r)  # round-off on free columns
    with np.errstate(invalid="ignore"):
        box_min = np.where(r > 0, r * lp.lb, r * lp.ub)
    box_min = np.where(r == 0, 0.0, box_min)
    return float(y_ub @ lp.b_ub + y_eq @ lp.b_eq + box_min.sum() + lp.c0)
