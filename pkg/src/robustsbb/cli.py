"""Command-line front end.

    robustsbb solve --instance haverly1 --set box --size 0.15 --method rsbb --out runs/
    robustsbb sweep --instances haverly1,haverly2 --out sweep/

Exit codes: 0 optimal, 1 bad arguments or missing data, 2 time/node limit,
3 robust infeasible.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

from . import instances
from .bnb import RobustSolution, SolveConfig, Termination, solve_rsbb
from .cutting import CutRoundLimit, RobustInfeasible, robust_cutting_set
from .pooling import InstanceError, build_pq
from .toy import toy_problem
from .trace import ConvergenceTrace, TraceEvent
from .uncertainty import EllipsoidalNotRepresentable, SetKind, UncertaintySet, dual_counterpart

EXIT_OK, EXIT_USAGE, EXIT_LIMIT, EXIT_INFEASIBLE = 0, 1, 2, 3
SWEEP_SIZES = (0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3)
METHODS = ("rsbb", "cutting", "dual")


@dataclass
class RunResult:
    instance: str
    method: str
    set_kind: str
    size: float
    objective: float
    lb: float
    gap: float
    nodes_explored: int
    cut_rounds: int
    samples_added: int
    wall_ms: float
    termination: str
    point: list[float] | None = None

    def to_json(self) -> str:
        d = asdict(self)
        for k in ("objective", "lb", "gap"):
            if not math.isfinite(d[k]):
                d[k] = None
        return json.dumps(d, indent=2, sort_keys=True)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_problem(name: str):
    if name == "toy":
        return toy_problem()
    return build_pq(instances.load(name))[0]


def _config(args) -> SolveConfig:
    return SolveConfig(tol=args.tol, epsilon=args.epsilon, delta=args.delta,
                       time_limit=args.time_limit, max_nodes=args.max_nodes)


def run(instance: str, method: str, kind: str, size: float, cfg: SolveConfig) -> tuple[RunResult, ConvergenceTrace]:
    """One solve; raises on bad input, never on solver outcomes."""
    problem = load_problem(instance)
    uset = UncertaintySet(kind, size) if size > 0 else None
    t0 = time.perf_counter()
    if method == "rsbb":
        sol = solve_rsbb(problem, uset, cfg)
        return _from_solution(instance, method, kind, size, sol), sol.trace
    if method == "dual":
        target = dual_counterpart(problem, uset) if uset is not None else problem
        sol = solve_rsbb(target, None, cfg)
        res = _from_solution(instance, method, kind, size, sol)
        if res.point is not None:
            res.point = res.point[:problem.n_vars]
        return res, sol.trace
    if method == "cutting":
        trace = ConvergenceTrace()
        if uset is None:
            sol = solve_rsbb(problem, None, cfg)
            return _from_solution(instance, method, kind, size, sol), sol.trace
        try:
            out = robust_cutting_set(problem, uset, cfg.delta, use_global=True, config=cfg,
                                     max_rounds=cfg.max_cut_rounds)
        except (RobustInfeasible, CutRoundLimit) as exc:
            term = Termination.ROBUST_INFEASIBLE if isinstance(exc, RobustInfeasible) else Termination.NODE_LIMIT
            ms = (time.perf_counter() - t0) * 1000
            return RunResult(instance, method, kind, size, math.inf, -math.inf, math.inf, 0, 0, 0, ms,
                             term.value), trace
        for r in out.rounds:
            trace.log(TraceEvent.CUT_ADDED, math.inf, r.objective_before, -1, r.round, r.objective_after)
        trace.log(TraceEvent.INCUMBENT_UPDATED, out.objective, out.objective, -1, len(out.rounds), out.objective)
        ms = (time.perf_counter() - t0) * 1000
        return RunResult(instance, method, kind, size, out.objective, out.objective, 0.0, out.inner_nodes or out.inner_solves,
                         len(out.rounds), out.store.size() - len(problem.uncertain), ms,
                         Termination.OPTIMAL.value, [float(v) for v in out.point]), trace
    raise ValueError(f"unknown method {method!r}")


def _from_solution(instance, method, kind, size, sol: RobustSolution) -> RunResult:
    return RunResult(instance, method, kind, size, sol.objective, sol.lb, sol.gap, sol.nodes_explored,
                     sol.cut_rounds, sol.samples_added, sol.wall_ms, sol.termination.value,
                     None if sol.point is None else [float(v) for v in sol.point])


def exit_code(termination: str) -> int:
    if termination == Termination.OPTIMAL.value:
        return EXIT_OK
    if termination == Termination.ROBUST_INFEASIBLE.value:
        return EXIT_INFEASIBLE
    return EXIT_LIMIT


def _stem(instance: str, method: str, kind: str, size: float) -> str:
    return f"{Path(instance).stem}_{method}_{kind}_{size:g}"


def cmd_solve(args) -> int:
    try:
        res, trace = run(args.instance, args.method, args.set, args.size, _config(args))
    except (instances.InstanceNotFound, InstanceError, EllipsoidalNotRepresentable, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = res.to_json()
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        stem = _stem(args.instance, args.method, args.set, args.size)
        (out / f"{stem}.json").write_text(text + "\n")
        trace.write(out / f"{stem}_trace.csv")
    print(text)
    return exit_code(res.termination)


def _cell(job):
    instance, method, kind, size, cfg = job
    try:
        return run(instance, method, kind, size, cfg)[0]
    except Exception as exc:  # recorded per cell, the sweep goes on
        return RunResult(instance, method, kind, size, math.inf, -math.inf, math.inf, 0, 0, 0, 0.0,
                         f"Error: {exc}")


def sweep(instance_names, kinds, sizes, method, cfg, jobs=1) -> list[RunResult]:
    cells = [(i, method, k, s, cfg) for i in instance_names for k in kinds for s in sizes]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_cell, cells))
    return [_cell(c) for c in cells]


def increase_table(results: list[RunResult]) -> list[dict]:
    """Percent objective increase relative to the size-0 cell of the same instance/set."""
    base = {(r.instance, r.set_kind): r.objective for r in results if r.size == 0}
    rows = []
    for r in results:
        nom = base.get((r.instance, r.set_kind), math.nan)
        if math.isfinite(r.objective) and math.isfinite(nom) and nom != 0:
            pct = 100.0 * (r.objective - nom) / abs(nom)
        else:
            pct = math.nan
        rows.append({"instance": r.instance, "set": r.set_kind, "size": r.size, "increase_pct": pct})
    return rows


def _write_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        path.write_text("")
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def cmd_sweep(args) -> int:
    names = [s for s in args.instances.split(",") if s]
    kinds = [s for s in args.sets.split(",") if s]
    sizes = [float(s) for s in args.sizes.split(",") if s]
    for k in kinds:
        SetKind(k)
    results = sweep(names, kinds, sizes, args.method, _config(args), args.jobs)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    cells = [{k: v for k, v in asdict(r).items() if k != "point"} for r in results]
    _write_csv(out / "sweep_results.csv", cells)
    nodes = []
    for name in names:
        for s in sizes:
            row = {"instance": name, "size": s}
            for k in kinds:
                hit = [r for r in results if (r.instance, r.set_kind, r.size) == (name, k, s)]
                row[k] = hit[0].nodes_explored if hit else ""
            nodes.append(row)
    _write_csv(out / "table_nodes.csv", nodes)
    _write_csv(out / "objective_increase.csv", increase_table(results))
    for r in results:
        print(f"{r.instance:>10} {r.set_kind:>11} {r.size:5.2f} {r.termination:>16} {r.objective}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="robustsbb", description="Robust spatial branch-and-bound for bilinear programs")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--method", choices=METHODS, default="rsbb")
        sp.add_argument("--delta", type=float, default=1e-6, help="robust feasibility tolerance")
        sp.add_argument("--epsilon", type=float, default=1e-4, help="relative fathoming tolerance")
        sp.add_argument("--tol", type=float, default=1e-6, help="node selection band")
        sp.add_argument("--time-limit", type=float, default=3600.0, help="seconds")
        sp.add_argument("--max-nodes", type=int, default=100_000)
        sp.add_argument("--out", default=None, help="output directory")

    s = sub.add_parser("solve", help="solve one instance")
    s.add_argument("--instance", required=True, help="toy, a shipped instance name, or a JSON path")
    s.add_argument("--set", choices=[k.value for k in SetKind], default="box")
    s.add_argument("--size", type=float, default=0.0, help="set radius; 0 solves the nominal problem")
    common(s)
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="solve a grid of set kinds and sizes")
    w.add_argument("--instances", required=True, help="comma-separated names or paths")
    w.add_argument("--sets", default="box,ellipsoidal,polyhedral")
    w.add_argument("--sizes", default=",".join(f"{v:g}" for v in SWEEP_SIZES))
    w.add_argument("--jobs", type=int, default=1)
    common(w)
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "size", 0.0) < 0:
        parser.error("--size must be >= 0")
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
