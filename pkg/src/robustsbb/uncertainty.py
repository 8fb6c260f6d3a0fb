"""Uncertainty sets, the closed-form worst-case oracle, sample stores and dual rows.

All sets are norm balls around the nominal ``xi = 0``:

* box: ``max_k |xi_k| <= size``
* ellipsoidal: ``||xi||_2 <= size``
* polyhedral (budget): ``sum_k |xi_k| <= size``
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

from .qcqp import (QcqpProblem, QuadExpr, UncertainConstraint, VariableBox,
                   eval_expr)

DUPLICATE_TOL = 1e-9


class SetKind(str, enum.Enum):
    BOX = "box"
    ELLIPSOIDAL = "ellipsoidal"
    POLYHEDRAL = "polyhedral"


class EllipsoidalNotRepresentable(ValueError):
    """The ellipsoidal counterpart needs a second-order cone term."""


class SignAmbiguous(ValueError):
    """A perturbation term can change sign over the variable box."""


class SampleOutsideSet(ValueError):
    pass


@dataclass(frozen=True)
class UncertaintySet:
    kind: SetKind
    size: float
    dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", SetKind(self.kind))
        if not self.size > 0:
            raise ValueError(f"uncertainty set size must be positive, got {self.size}")
        if self.dim < 1:
            raise ValueError(f"uncertainty set dimension must be >= 1, got {self.dim}")

    def with_dim(self, dim: int) -> "UncertaintySet":
        return UncertaintySet(self.kind, self.size, dim)

    def norm(self, xi) -> float:
        xi = np.asarray(xi, dtype=float)
        if self.kind is SetKind.BOX:
            return float(np.max(np.abs(xi))) if xi.size else 0.0
        if self.kind is SetKind.ELLIPSOIDAL:
            return float(np.linalg.norm(xi))
        return float(np.sum(np.abs(xi)))

    def contains(self, xi, tol: float = 1e-9) -> bool:
        return len(xi) == self.dim and self.norm(xi) <= self.size + tol


def worst_case(a0: float, a: Sequence[float], uset: UncertaintySet) -> tuple[np.ndarray, float]:
    """Maximise ``a0 + a @ xi`` over the set; returns ``(xi_star, value)``."""
    a = np.asarray(a, dtype=float)
    if a.shape != (uset.dim,):
        raise ValueError(f"coefficient vector has shape {a.shape}, set has dim {uset.dim}")
    s = uset.size
    xi = np.zeros(uset.dim)
    if uset.kind is SetKind.BOX:
        xi = s * np.sign(a)
        return xi, float(a0 + s * np.sum(np.abs(a)))
    if uset.kind is SetKind.ELLIPSOIDAL:
        nrm = float(np.linalg.norm(a))
        if nrm > 0.0:
            xi = s * a / nrm
        return xi, float(a0 + s * nrm)
    m = int(np.argmax(np.abs(a)))  # first index on ties
    if a[m] != 0.0:
        xi[m] = s * np.sign(a[m])
    return xi, float(a0 + s * abs(a[m]))


def extract_affine(c: UncertainConstraint, point) -> tuple[float, np.ndarray]:
    a = np.zeros(c.dim)
    for k, e in c.perturbations:
        a[k] += eval_expr(e, point)
    return eval_expr(c.base, point), a


@dataclass
class SampleStore:
    """Sampled xi vectors per uncertain constraint; the nominal vector is always first."""

    samples: dict[Hashable, list[np.ndarray]] = field(default_factory=dict)

    @classmethod
    def nominal(cls, problem: QcqpProblem) -> "SampleStore":
        return cls({i: [np.zeros(c.dim)] for i, c in enumerate(problem.uncertain)})

    def __getitem__(self, cid) -> list[np.ndarray]:
        return self.samples[cid]

    def __contains__(self, cid) -> bool:
        return cid in self.samples

    def size(self) -> int:
        return sum(len(v) for v in self.samples.values())

    def copy(self) -> "SampleStore":
        return SampleStore({k: [x.copy() for x in v] for k, v in self.samples.items()})

    def items(self) -> Iterable[tuple[Hashable, list[np.ndarray]]]:
        return self.samples.items()


def add_sample(store: SampleStore, cid, xi, uset: UncertaintySet | None = None,
               tol: float = DUPLICATE_TOL) -> tuple[SampleStore, bool]:
    """Append ``xi`` to the list of ``cid`` unless it is a duplicate (sup-norm ``tol``).

    The store is updated in place and returned for convenience.
    """
    xi = np.asarray(xi, dtype=float).copy()
    if uset is not None and not uset.contains(xi):
        raise SampleOutsideSet(f"sample {xi} lies outside the {uset.kind.value} set of size {uset.size}")
    lst = store.samples.setdefault(cid, [np.zeros_like(xi)])
    for old in lst:
        if old.shape == xi.shape and np.max(np.abs(old - xi), initial=0.0) <= tol:
            return store, False
    lst.append(xi)
    return store, True


def perturbation_sign(expr: QuadExpr, box: VariableBox) -> int:
    """+1 if expr >= 0 over the box, -1 if <= 0, 0 if identically zero; raises otherwise."""
    lo, hi = expr.interval(box.lower, box.upper)
    if lo == 0.0 and hi == 0.0:
        return 0
    if lo >= 0.0:
        return 1
    if hi <= 0.0:
        return -1
    raise SignAmbiguous(f"perturbation term ranges over [{lo}, {hi}] on the box")


@dataclass(frozen=True)
class AuxRequest:
    """An auxiliary epigraph variable the caller must add before using the rows."""

    name: str
    lower: float
    upper: float


def dual_rho_rows(c: UncertainConstraint, uset: UncertaintySet, box: VariableBox,
                  aux_index: int | None = None) -> tuple[list[QuadExpr], list[AuxRequest]]:
    """Deterministic rows equivalent to the robust constraint for box/polyhedral sets.

    Box: ``base + size * sum_k |p_k| <= 0``.  Polyhedral: with epigraph ``t``,
    ``|p_k| - t <= 0`` for every k and ``base + size * t <= 0``.  ``|p_k|``
    is resolved from the sign of ``p_k`` over ``box``.
    """
    if uset.kind is SetKind.ELLIPSOIDAL:
        raise EllipsoidalNotRepresentable("ellipsoidal counterpart is not bilinear-representable")
    absterms = []
    for _, e in c.perturbations:
        sgn = perturbation_sign(e, box)
        if sgn:
            absterms.append(e * float(sgn))
    if uset.kind is SetKind.BOX:
        row = c.base
        for e in absterms:
            row = row + e * uset.size
        return [row.canonical()], []
    if not absterms:
        return [c.base.canonical()], []
    if aux_index is None:
        raise ValueError("polyhedral rows need the column index of the epigraph variable")
    t_hi = max(e.interval(box.lower, box.upper)[1] for e in absterms)
    t = QuadExpr.build(linear={aux_index: 1.0})
    rows = [(e - t).canonical() for e in absterms]
    rows.append((c.base + t * uset.size).canonical())
    return rows, [AuxRequest(f"t_{c.name or 'rho'}", 0.0, max(t_hi, 0.0))]


def dual_counterpart(problem: QcqpProblem, uset: UncertaintySet) -> QcqpProblem:
    """Replace every uncertain constraint by its dual rows; returns a certain problem."""
    names = list(problem.names)
    lower = list(problem.box.lower)
    upper = list(problem.box.upper)
    certain = list(problem.certain)
    tags = list(problem.eq_tags)
    for c in problem.uncertain:
        cset = uset.with_dim(c.dim)
        aux = len(names) if cset.kind is SetKind.POLYHEDRAL else None
        rows, reqs = dual_rho_rows(c, cset, problem.box, aux)
        for r in reqs:
            names.append(r.name if r.name not in names else f"{r.name}_{len(names)}")
            lower.append(r.lower)
            upper.append(r.upper)
        certain.extend(rows)
        tags.extend([None] * len(rows))
    box = VariableBox(np.array(lower), np.array(upper))
    return QcqpProblem(len(names), box, problem.objective, tuple(certain), tuple(tags), (), tuple(names))
