"""Pooling instances and their pq-formulation.

Instance files are JSON objects with ``feeds``, ``pools``, ``products`` and an
optional ``arcs`` block::

    {"name": "haverly1",
     "feeds": [{"name": "A", "cost": 6, "availability": 300,
                "quality": {"S": 3.0}, "perturbation": {"S": 3.0}}, ...],
     "pools": [{"name": "P", "capacity": 300}],
     "products": [{"name": "X", "price": 9, "demand": 100,
                   "quality_lower": {}, "quality_upper": {"S": 2.5}}, ...],
     "arcs": {"feed_pool": [["A", "P"]], "pool_product": [...],
              "feed_product": [["C", "X"]]}}

Missing arc lists default to every possible arc of that kind.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .qcqp import ProblemBuilder, QcqpProblem, QuadExpr, UncertainConstraint
from .uncertainty import UncertaintySet, dual_counterpart


class InstanceError(ValueError):
    """Schema or invariant violation; the message starts with the field path."""


@dataclass(frozen=True)
class Feed:
    name: str
    cost: float
    availability: float
    quality: dict[str, float]
    perturbation: dict[str, float] | None = None


@dataclass(frozen=True)
class Pool:
    name: str
    capacity: float


@dataclass(frozen=True)
class Product:
    name: str
    price: float
    demand: float
    quality_lower: dict[str, float]
    quality_upper: dict[str, float]


@dataclass(frozen=True)
class PoolingInstance:
    name: str
    feeds: tuple[Feed, ...]
    pools: tuple[Pool, ...]
    products: tuple[Product, ...]
    qualities: tuple[str, ...]
    feed_pool: tuple[tuple[int, int], ...]
    pool_product: tuple[tuple[int, int], ...]
    feed_product: tuple[tuple[int, int], ...]

    @property
    def counts(self) -> tuple[int, int, int, int]:
        """(feeds, pools, products, qualities)."""
        return len(self.feeds), len(self.pools), len(self.products), len(self.qualities)

    def chat(self, i: int, k: str, mode: str = "equal") -> float:
        if mode == "equal":
            return self.feeds[i].quality[k]
        if mode == "file":
            pert = self.feeds[i].perturbation or {}
            return pert.get(k, 0.0)
        raise ValueError(f"unknown perturbation mode {mode!r}")


# -- parsing -------------------------------------------------------------------

def _req(obj: dict, key: str, path: str) -> Any:
    if not isinstance(obj, dict):
        raise InstanceError(f"{path}: expected an object")
    if key not in obj:
        raise InstanceError(f"{path}.{key}: missing required field")
    return obj[key]


def _num(obj: dict, key: str, path: str, nonneg: bool = False) -> float:
    v = _req(obj, key, path)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InstanceError(f"{path}.{key}: expected a number, got {v!r}")
    if nonneg and v < 0:
        raise InstanceError(f"{path}.{key}: must be >= 0, got {v}")
    return float(v)


def _qmap(v: Any, path: str, nonneg: bool = False) -> dict[str, float]:
    if not isinstance(v, dict):
        raise InstanceError(f"{path}: expected an object of quality values")
    out = {}
    for k, x in v.items():
        if isinstance(x, bool) or not isinstance(x, (int, float)):
            raise InstanceError(f"{path}.{k}: expected a number, got {x!r}")
        if nonneg and x < 0:
            raise InstanceError(f"{path}.{k}: must be >= 0, got {x}")
        out[str(k)] = float(x)
    return out


def _arcs(raw: dict, key: str, left: dict[str, int], right: dict[str, int]) -> tuple[tuple[int, int], ...]:
    if key not in raw:
        return tuple((a, b) for a in left.values() for b in right.values())
    out = []
    for n, arc in enumerate(raw[key]):
        path = f"arcs.{key}[{n}]"
        if not isinstance(arc, (list, tuple)) or len(arc) != 2:
            raise InstanceError(f"{path}: expected a [from, to] pair")
        a, b = arc
        if a not in left or b not in right:
            raise InstanceError(f"{path}: unknown endpoint in {arc!r}")
        out.append((left[a], right[b]))
    return tuple(sorted(set(out)))


def parse_instance(text: str | dict, name: str | None = None) -> PoolingInstance:
    """Parse and validate an instance from JSON text (or an already-decoded dict)."""
    try:
        data = json.loads(text) if isinstance(text, str) else text
    except json.JSONDecodeError as exc:
        raise InstanceError(f"<root>: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise InstanceError("<root>: expected a JSON object")
    feeds_raw = _req(data, "feeds", "<root>")
    pools_raw = data.get("pools", [])
    products_raw = _req(data, "products", "<root>")
    if not feeds_raw:
        raise InstanceError("feeds: no feeds")
    if not products_raw:
        raise InstanceError("products: no products")

    feeds = []
    for n, f in enumerate(feeds_raw):
        p = f"feeds[{n}]"
        pert = f.get("perturbation") if isinstance(f, dict) else None
        feeds.append(Feed(str(_req(f, "name", p)), _num(f, "cost", p), _num(f, "availability", p, True),
                          _qmap(_req(f, "quality", p), p + ".quality"),
                          None if pert is None else _qmap(pert, p + ".perturbation", nonneg=True)))
    pools = [Pool(str(_req(q, "name", f"pools[{n}]")), _num(q, "capacity", f"pools[{n}]", True))
             for n, q in enumerate(pools_raw)]
    products = []
    for n, d in enumerate(products_raw):
        p = f"products[{n}]"
        products.append(Product(str(_req(d, "name", p)), _num(d, "price", p), _num(d, "demand", p, True),
                                _qmap(d.get("quality_lower", {}), p + ".quality_lower"),
                                _qmap(_req(d, "quality_upper", p), p + ".quality_upper")))

    for kind, items in (("feeds", feeds), ("pools", pools), ("products", products)):
        names = [x.name for x in items]
        if len(set(names)) != len(names):
            raise InstanceError(f"{kind}: duplicate names")

    qualities: list[str] = []
    for d in products:
        for k in (*d.quality_upper, *d.quality_lower):
            if k not in qualities:
                qualities.append(k)
    for n, d in enumerate(products):
        for k, lo in d.quality_lower.items():
            hi = d.quality_upper.get(k)
            if hi is not None and lo > hi:
                raise InstanceError(f"products[{n}].quality_lower.{k}: {lo} exceeds upper bound {hi}")
    for n, f in enumerate(feeds):
        for k in qualities:
            if k not in f.quality:
                raise InstanceError(f"feeds[{n}].quality.{k}: missing required field")

    fi = {f.name: i for i, f in enumerate(feeds)}
    li = {q.name: i for i, q in enumerate(pools)}
    ji = {d.name: i for i, d in enumerate(products)}
    arcs = data.get("arcs", {})
    if not isinstance(arcs, dict):
        raise InstanceError("arcs: expected an object")
    return PoolingInstance(str(data.get("name", name or "instance")), tuple(feeds), tuple(pools),
                           tuple(products), tuple(qualities), _arcs(arcs, "feed_pool", fi, li),
                           _arcs(arcs, "pool_product", li, ji), _arcs(arcs, "feed_product", fi, ji))


def load_instance(path) -> PoolingInstance:
    with open(path) as fh:
        return parse_instance(fh.read(), name=str(path))


# -- model -------------------------------------------------------------------

@dataclass
class PoolingVariables:
    q: dict[tuple[int, int], int] = field(default_factory=dict)
    y: dict[tuple[int, int], int] = field(default_factory=dict)
    z: dict[tuple[int, int], int] = field(default_factory=dict)
    f: dict[int, int] = field(default_factory=dict)
    v: dict[tuple[int, int, int], int] = field(default_factory=dict)


@dataclass(frozen=True)
class ModelStats:
    variables: int
    qp_equations: int
    lp_equations: int
    bilinear_pairs: int


def _lin(terms: dict[int, float], const: float = 0.0) -> QuadExpr:
    return QuadExpr.build(const, terms)


def _add(terms: dict[int, float], var: int, coef: float) -> None:
    terms[var] = terms.get(var, 0.0) + coef


def build_pq(inst: PoolingInstance, chat_mode: str = "equal") -> tuple[QcqpProblem, PoolingVariables]:
    """The pq-formulation with quality rows as uncertain constraints.

    Quality rows get one perturbation component per feed, scaled by the
    feed's perturbation magnitude ``chat`` (``"equal"`` uses the nominal
    quality, ``"file"`` the instance's ``perturbation`` block).
    """
    pb = ProblemBuilder()
    V = PoolingVariables()
    F, P, J = inst.feeds, inst.pools, inst.products
    for i, l in inst.feed_pool:
        V.q[i, l] = pb.var(f"q[{F[i].name},{P[l].name}]", 0.0, 1.0)
    for l, j in inst.pool_product:
        V.y[l, j] = pb.var(f"y[{P[l].name},{J[j].name}]", 0.0, min(P[l].capacity, J[j].demand))
    for i, j in inst.feed_product:
        V.z[i, j] = pb.var(f"z[{F[i].name},{J[j].name}]", 0.0, min(F[i].availability, J[j].demand))
    for (i, l) in inst.feed_pool:
        for (l2, j) in inst.pool_product:
            if l2 == l:
                cap = min(F[i].availability, P[l].capacity, J[j].demand)
                V.v[i, l, j] = pb.var(f"v[{F[i].name},{P[l].name},{J[j].name}]", 0.0, cap)
    for j, d in enumerate(J):
        V.f[j] = pb.var(f"f[{d.name}]", 0.0, d.demand)

    # flow of feed i into product j, through pools and direct
    def feed_to_product(i: int, j: int) -> dict[int, float]:
        t: dict[int, float] = {}
        for (i2, l, j2), col in V.v.items():
            if i2 == i and j2 == j:
                _add(t, col, 1.0)
        if (i, j) in V.z:
            _add(t, V.z[i, j], 1.0)
        return t

    obj: dict[int, float] = {}
    for (i, _, _), col in V.v.items():
        _add(obj, col, F[i].cost)
    for (i, _), col in V.z.items():
        _add(obj, col, F[i].cost)
    for j, col in V.f.items():
        _add(obj, col, -J[j].price)
    pb.objective = _lin(obj)

    for i, feed in enumerate(F):
        t: dict[int, float] = {}
        for j in range(len(J)):
            for col, a in feed_to_product(i, j).items():
                _add(t, col, a)
        if t:
            pb.leq(_lin(t, -feed.availability))
    for l, pool in enumerate(P):
        t = {col: 1.0 for (l2, _), col in V.y.items() if l2 == l}
        if t:
            pb.leq(_lin(t, -pool.capacity))
    for j, prod in enumerate(J):
        t = {col: 1.0 for (_, j2), col in V.y.items() if j2 == j}
        t.update({col: 1.0 for (_, j2), col in V.z.items() if j2 == j})
        pb.leq(_lin(t, -prod.demand))
    for (l, j), ycol in V.y.items():
        t = {col: 1.0 for (_, l2, j2), col in V.v.items() if (l2, j2) == (l, j)}
        t[ycol] = -1.0
        pb.eq(_lin(t), f"balance[{l},{j}]")
    for j, fcol in V.f.items():
        t = {col: -1.0 for (_, j2), col in V.y.items() if j2 == j}
        t.update({col: -1.0 for (_, j2), col in V.z.items() if j2 == j})
        t[fcol] = 1.0
        pb.eq(_lin(t), f"total[{j}]")
    for (i, l, j), vcol in V.v.items():
        pb.eq(QuadExpr.build(0.0, {vcol: 1.0}, {(V.q[i, l], V.y[l, j]): -1.0}), f"vdef[{i},{l},{j}]")
    for l in range(len(P)):
        t = {col: 1.0 for (_, l2), col in V.q.items() if l2 == l}
        if t:
            pb.eq(_lin(t, -1.0), f"proportion[{l}]")
    for (i, l), qcol in V.q.items():
        t = {col: 1.0 for (i2, l2, _), col in V.v.items() if (i2, l2) == (i, l)}
        if t:
            t[qcol] = -P[l].capacity
            pb.leq(_lin(t))

    n_feeds = len(F)
    for j, prod in enumerate(J):
        for k in inst.qualities:
            sides = []
            if k in prod.quality_upper:
                sides.append(("upper", 1.0, prod.quality_upper[k]))
            if k in prod.quality_lower:
                sides.append(("lower", -1.0, prod.quality_lower[k]))
            for side, sgn, bound in sides:
                base: dict[int, float] = {V.f[j]: -sgn * bound}
                perts = []
                for i in range(n_feeds):
                    flow = feed_to_product(i, j)
                    for col, a in flow.items():
                        _add(base, col, sgn * F[i].quality[k] * a)
                    ch = inst.chat(i, k, chat_mode)
                    if flow and ch:
                        perts.append((i, _lin({c: sgn * ch * a for c, a in flow.items()})))
                pb.add_uncertain(UncertainConstraint(_lin(base), tuple(perts), group=f"C[{k}]",
                                                     dim=n_feeds, name=f"quality_{side}[{prod.name},{k}]"))
    return pb.build(), V


def build_dual_counterpart(inst: PoolingInstance, uset: UncertaintySet, chat_mode: str = "equal") -> QcqpProblem:
    problem, _ = build_pq(inst, chat_mode)
    return dual_counterpart(problem, uset)


def model_stats(inst: PoolingInstance) -> ModelStats:
    """Sizes counted the way benchmark tables report them.

    Variables are the q, y, z and v columns (the total-flow columns are a
    modelling convenience and left out).  QP equations count availability,
    capacity, demand, balance, total-flow, quality, product-definition and
    proportion rows; the LP count swaps each product definition for its four
    envelope rows.
    """
    problem, V = build_pq(inst)
    n_vars = len(V.q) + len(V.y) + len(V.z) + len(V.v)
    avail = sum(1 for i in range(len(inst.feeds))
                if any(a == i for a, _ in inst.feed_pool) or any(a == i for a, _ in inst.feed_product))
    cap = sum(1 for l in range(len(inst.pools)) if any(a == l for a, _ in inst.pool_product))
    qp = (avail + cap + len(inst.products) + len(V.y) + len(V.f) + len(problem.uncertain)
          + len(V.v) + sum(1 for l in range(len(inst.pools)) if any(b == l for _, b in inst.feed_pool)))
    pairs = len(problem.pairs)
    return ModelStats(n_vars, qp, qp - len(V.v) + 4 * pairs, pairs)


def flows_from_point(inst: PoolingInstance, V: PoolingVariables, x) -> dict[str, dict]:
    """Readable flows from a solution vector."""
    F, P, J = inst.feeds, inst.pools, inst.products
    return {
        "q": {f"{F[i].name}->{P[l].name}": float(x[c]) for (i, l), c in V.q.items()},
        "y": {f"{P[l].name}->{J[j].name}": float(x[c]) for (l, j), c in V.y.items()},
        "z": {f"{F[i].name}->{J[j].name}": float(x[c]) for (i, j), c in V.z.items()},
    }
