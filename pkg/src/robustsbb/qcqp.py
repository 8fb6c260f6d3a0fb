"""In-memory representation of bilinear QCQPs with uncertain affine coefficients.

Every constraint is stored in ``expr <= 0`` form.  Equalities are kept as two
opposite inequalities that share a tag, so relaxations and cutting loops can
treat all rows uniformly while still recognising the pair when useful.

Uncertain constraints are affine in a zero-centred perturbation vector ``xi``::

    base(x) + sum_k xi[k] * perturbation_k(x) <= 0
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

Pair = tuple[int, int]


def _canon_pair(b: int, j: int) -> Pair:
    return (b, j) if b <= j else (j, b)


@dataclass(frozen=True, eq=True)
class QuadExpr:
    """constant + sum linear[i] * x_i + sum bilinear[(b, j)] * x_b * x_j.

    Bilinear keys are canonical (``b <= j``); ``b == j`` encodes a square.
    Use :meth:`build` to canonicalise arbitrary input.
    """

    constant: float = 0.0
    linear: Mapping[int, float] = field(default_factory=dict)
    bilinear: Mapping[Pair, float] = field(default_factory=dict)

    @classmethod
    def build(cls, constant: float = 0.0,
              linear: Mapping[int, float] | Iterable[tuple[int, float]] = (),
              bilinear: Mapping[Pair, float] | Iterable[tuple[Pair, float]] = ()) -> "QuadExpr":
        lin: dict[int, float] = {}
        items = linear.items() if isinstance(linear, Mapping) else linear
        for i, c in items:
            lin[int(i)] = lin.get(int(i), 0.0) + float(c)
        bil: dict[Pair, float] = {}
        items = bilinear.items() if isinstance(bilinear, Mapping) else bilinear
        for (b, j), c in items:
            key = _canon_pair(int(b), int(j))
            bil[key] = bil.get(key, 0.0) + float(c)
        lin = {i: c for i, c in sorted(lin.items()) if c != 0.0}
        bil = {p: c for p, c in sorted(bil.items()) if c != 0.0}
        return cls(float(constant), lin, bil)

    def canonical(self) -> "QuadExpr":
        return QuadExpr.build(self.constant, self.linear, self.bilinear)

    def is_canonical(self) -> bool:
        return all(b <= j for b, j in self.bilinear) and self == self.canonical()

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other: "QuadExpr | float") -> "QuadExpr":
        if not isinstance(other, QuadExpr):
            return QuadExpr(self.constant + float(other), dict(self.linear), dict(self.bilinear))
        return QuadExpr.build(self.constant + other.constant,
                              list(self.linear.items()) + list(other.linear.items()),
                              list(self.bilinear.items()) + list(other.bilinear.items()))

    __radd__ = __add__

    def __mul__(self, s: float) -> "QuadExpr":
        s = float(s)
        if s == 0.0:
            return QuadExpr()
        return QuadExpr(self.constant * s,
                        {i: c * s for i, c in self.linear.items()},
                        {p: c * s for p, c in self.bilinear.items()})

    __rmul__ = __mul__

    def __neg__(self) -> "QuadExpr":
        return self * -1.0

    def __sub__(self, other: "QuadExpr | float") -> "QuadExpr":
        return self + (-other if isinstance(other, QuadExpr) else -float(other))

    # -- queries ----------------------------------------------------------
    def variables(self) -> set[int]:
        out = set(self.linear)
        for b, j in self.bilinear:
            out.update((b, j))
        return out

    def is_zero(self) -> bool:
        return self.constant == 0.0 and not self.linear and not self.bilinear

    def interval(self, lower: np.ndarray, upper: np.ndarray) -> tuple[float, float]:
        """Natural interval extension over the box (valid, not always tight)."""
        lo = hi = self.constant
        for i, c in self.linear.items():
            a, b = c * lower[i], c * upper[i]
            lo += min(a, b)
            hi += max(a, b)
        for (b, j), c in self.bilinear.items():
            if b == j:
                l, u = lower[b], upper[b]
                sq_lo = 0.0 if l <= 0.0 <= u else min(l * l, u * u)
                sq_hi = max(l * l, u * u)
                prods = (c * sq_lo, c * sq_hi)
            else:
                corners = (lower[b] * lower[j], lower[b] * upper[j],
                           upper[b] * lower[j], upper[b] * upper[j])
                prods = tuple(c * v for v in corners)
            lo += min(prods)
            hi += max(prods)
        return lo, hi


def eval_expr(expr: QuadExpr, point: Sequence[float] | np.ndarray, n_vars: int | None = None) -> float:
    """Evaluate ``expr`` at ``point``.

    Raises ValueError when ``n_vars`` is given and the point length differs, or
    when the expression references an index outside the point.
    """
    if n_vars is not None and len(point) != n_vars:
        raise ValueError(f"point has length {len(point)}, expected {n_vars}")
    x = point
    try:
        val = expr.constant
        for i, c in expr.linear.items():
            val += c * x[i]
        for (b, j), c in expr.bilinear.items():
            val += c * x[b] * x[j]
    except IndexError as exc:
        raise ValueError("expression references a variable outside the point") from exc
    return float(val)


@dataclass(frozen=True)
class VariableBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be 1-D arrays of equal length")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def __len__(self) -> int:
        return len(self.lower)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    def contains(self, point, tol: float = 1e-9) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= self.lower - tol) and np.all(p <= self.upper + tol))

    def project(self, point) -> np.ndarray:
        return np.clip(np.asarray(point, dtype=float), self.lower, self.upper)

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def split(self, var: int, at: float) -> tuple["VariableBox", "VariableBox"]:
        if not self.lower[var] <= at <= self.upper[var]:
            raise ValueError(f"split point {at} outside [{self.lower[var]}, {self.upper[var]}]")
        down_hi = self.upper.copy()
        down_hi[var] = at
        up_lo = self.lower.copy()
        up_lo[var] = at
        return VariableBox(self.lower.copy(), down_hi), VariableBox(up_lo, self.upper.copy())

    def is_subbox_of(self, other: "VariableBox", tol: float = 0.0) -> bool:
        return bool(np.all(self.lower >= other.lower - tol) and np.all(self.upper <= other.upper + tol))

    def __eq__(self, other):
        if not isinstance(other, VariableBox):
            return NotImplemented
        return bool(np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper))

    __hash__ = None


@dataclass(frozen=True)
class UncertainConstraint:
    """``base + sum_k xi[k] * perturbations[k] <= 0`` with ``xi`` drawn from ``group``.

    ``perturbations`` is a list of ``(xi_index, expr)``; indices refer to
    components of the group's xi vector and may be listed sparsely.
    """

    base: QuadExpr
    perturbations: tuple[tuple[int, QuadExpr], ...]
    group: str = "xi"
    dim: int | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "perturbations", tuple((int(k), e) for k, e in self.perturbations))
        if self.dim is None:
            d = 1 + max((k for k, _ in self.perturbations), default=-1)
            object.__setattr__(self, "dim", d)

    def expr_at(self, xi: Sequence[float]) -> QuadExpr:
        """The certain QuadExpr obtained by fixing the perturbation vector."""
        if len(xi) != self.dim:
            raise ValueError(f"xi has length {len(xi)}, expected {self.dim}")
        out = self.base
        for k, e in self.perturbations:
            if xi[k] != 0.0:
                out = out + e * float(xi[k])
        return out

    def variables(self) -> set[int]:
        out = self.base.variables()
        for _, e in self.perturbations:
            out |= e.variables()
        return out


def eval_uncertain(c: UncertainConstraint, point, xi) -> float:
    if len(xi) != c.dim:
        raise ValueError(f"xi has length {len(xi)}, expected {c.dim}")
    val = eval_expr(c.base, point)
    for k, e in c.perturbations:
        val += float(xi[k]) * eval_expr(e, point)
    return val


@dataclass(frozen=True)
class QcqpProblem:
    """min objective(x) s.t. certain[i](x) <= 0, uncertain constraints, x in box."""

    n_vars: int
    box: VariableBox
    objective: QuadExpr
    certain: tuple[QuadExpr, ...] = ()
    eq_tags: tuple[str | None, ...] = ()
    uncertain: tuple[UncertainConstraint, ...] = ()
    names: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "certain", tuple(self.certain))
        object.__setattr__(self, "uncertain", tuple(self.uncertain))
        tags = tuple(self.eq_tags) or (None,) * len(self.certain)
        if len(tags) != len(self.certain):
            raise ValueError("eq_tags must match certain constraints")
        object.__setattr__(self, "eq_tags", tags)
        if not self.names:
            object.__setattr__(self, "names", tuple(f"x{i}" for i in range(self.n_vars)))

    def all_exprs(self) -> Iterable[QuadExpr]:
        yield self.objective
        yield from self.certain
        for c in self.uncertain:
            yield c.base
            for _, e in c.perturbations:
                yield e

    @cached_property
    def pairs(self) -> tuple[Pair, ...]:
        """Distinct bilinear/square pairs across all expressions, sorted."""
        seen: set[Pair] = set()
        for e in self.all_exprs():
            seen.update(e.bilinear)
        return tuple(sorted(seen))

    @cached_property
    def equality_rows(self) -> tuple[int, ...]:
        """Indices of certain rows that stand for an equality (first of each pair)."""
        first: dict[str, int] = {}
        for i, t in enumerate(self.eq_tags):
            if t is not None and t not in first:
                first[t] = i
        return tuple(sorted(first.values()))

    @cached_property
    def shadow_rows(self) -> frozenset[int]:
        """Second members of equality pairs (redundant once the pair is known)."""
        keep = set(self.equality_rows)
        return frozenset(i for i, t in enumerate(self.eq_tags) if t is not None and i not in keep)

    def with_box(self, box: VariableBox) -> "QcqpProblem":
        return QcqpProblem(self.n_vars, box, self.objective, self.certain, self.eq_tags,
                           self.uncertain, self.names)


class ProblemBuilder:
    """Incremental construction helper; produces an immutable QcqpProblem."""

    def __init__(self):
        self.names: list[str] = []
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.objective = QuadExpr()
        self.certain: list[QuadExpr] = []
        self.tags: list[str | None] = []
        self.uncertain: list[UncertainConstraint] = []
        self._index: dict[str, int] = {}

    def var(self, name: str, lower: float, upper: float) -> int:
        if name in self._index:
            raise ValueError(f"duplicate variable {name!r}")
        self._index[name] = len(self.names)
        self.names.append(name)
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        return self._index[name]

    def index(self, name: str) -> int:
        return self._index[name]

    def leq(self, expr: QuadExpr) -> None:
        self.certain.append(expr.canonical())
        self.tags.append(None)

    def eq(self, expr: QuadExpr, tag: str) -> None:
        e = expr.canonical()
        self.certain.extend((e, -e))
        self.tags.extend((tag, tag))

    def add_uncertain(self, c: UncertainConstraint) -> None:
        self.uncertain.append(c)

    def build(self) -> QcqpProblem:
        return QcqpProblem(len(self.names), VariableBox(np.array(self.lower), np.array(self.upper)),
                           self.objective.canonical(), tuple(self.certain), tuple(self.tags),
                           tuple(self.uncertain), tuple(self.names))


def validate(problem: QcqpProblem) -> list[str]:
    """Structural findings; an empty list means the problem is well formed."""
    report: list[str] = []
    box = problem.box
    if len(box) != problem.n_vars:
        report.append(f"box has {len(box)} entries for {problem.n_vars} variables")
    else:
        for i in range(problem.n_vars):
            lo, hi = box.lower[i], box.upper[i]
            if not (math.isfinite(lo) and math.isfinite(hi)):
                report.append(f"non-compact domain: variable {problem.names[i]} has bounds [{lo}, {hi}]")
            elif lo > hi:
                report.append(f"empty domain: variable {problem.names[i]} has lower {lo} > upper {hi}")

    def check(expr: QuadExpr, where: str) -> None:
        for v in expr.variables():
            if not 0 <= v < problem.n_vars:
                report.append(f"index out of range: {where} references variable {v}")
        if not expr.is_canonical():
            report.append(f"non-canonical expression in {where}")

    check(problem.objective, "objective")
    for i, e in enumerate(problem.certain):
        check(e, f"certain constraint {i}")
    for i, c in enumerate(problem.uncertain):
        check(c.base, f"uncertain constraint {i} base")
        for k, e in c.perturbations:
            if not 0 <= k < c.dim:
                report.append(f"uncertain constraint {i} perturbation index {k} outside dim {c.dim}")
            check(e, f"uncertain constraint {i} perturbation {k}")
    return report


class CompiledExprs:
    """Dense vectorised form of a list of QuadExprs over a fixed pair list.

    values(x) = const + A @ x + B @ w(x) where w_p = x[p0] * x[p1].
    """

    def __init__(self, exprs: Sequence[QuadExpr], n_vars: int, pairs: Sequence[Pair]):
        self.n_vars = n_vars
        self.pairs = tuple(pairs)
        pidx = {p: k for k, p in enumerate(self.pairs)}
        m = len(exprs)
        self.const = np.zeros(m)
        self.A = np.zeros((m, n_vars))
        self.B = np.zeros((m, len(self.pairs)))
        for r, e in enumerate(exprs):
            self.const[r] = e.constant
            for i, c in e.linear.items():
                self.A[r, i] += c
            for p, c in e.bilinear.items():
                self.B[r, pidx[p]] += c
        self.p0 = np.array([p[0] for p in self.pairs], dtype=int)
        self.p1 = np.array([p[1] for p in self.pairs], dtype=int)

    def products(self, x: np.ndarray) -> np.ndarray:
        return x[self.p0] * x[self.p1]

    def values(self, x: np.ndarray) -> np.ndarray:
        return self.const + self.A @ x + self.B @ self.products(x)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        J = self.A.copy()
        if len(self.pairs):
            # d(x_a x_b)/dx_a = x_b ; squares get 2x through the double add
            np.add.at(J.T, self.p0, (self.B * x[self.p1]).T)
            np.add.at(J.T, self.p1, (self.B * x[self.p0]).T)
        return J
