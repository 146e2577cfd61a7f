"""Command-line front end.

Exit codes: 0 optimal / success, 1 internal error, 2 usage or parse error,
3 infeasible, 4 heuristic or budget-truncated result.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .feasibility import validate
from .milp import MilpBuildError, build_milp, write_lp
from .model import SchemaError, load_instance, load_solution, load_state, save_instance, save_solution, save_state
from .scenarios import SIZES, ConstructionError, generate_scenario, initial_state
from .solver import SOLVERS, SolverOptions, solve
from .sweep import DEFAULT_GRID, GridError, fmt, run_sweep
from .topology import DEFAULT_K_PATHS

OUT_ENV = "SFC_RECONFIG_OUT"

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_TRUNCATED = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def out_dir() -> Path:
    return Path(os.environ.get(OUT_ENV, "."))


def _target(arg: str | None, default: str) -> Path:
    return Path(arg) if arg else out_dir() / default


def _write(path: Path, text: str, force: bool) -> None:
    if path.exists() and not force:
        raise UsageError(f"{path} exists; pass --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load_pair(args):
    inst = load_instance(_read(args.instance))
    state = load_state(_read(args.state), inst)
    return inst, state


def _alpha(text: str) -> float:
    try:
        a = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= a <= 1.0:
        raise argparse.ArgumentTypeError("alpha must lie in [0, 1]")
    return a


def _positive(kind):
    def conv(text: str):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if v <= 0:
            raise argparse.ArgumentTypeError("must be positive")
        return v
    return conv


def _options(args, alpha: float = 0.5) -> SolverOptions:
    return SolverOptions(alpha=alpha, k_paths=args.k_paths, budget_s=args.budget_s, seed=args.seed,
                         prune=not getattr(args, "no_prune", False))


# ---------------------------------------------------------------- commands

def cmd_generate(args) -> int:
    try:
        inst = generate_scenario(args.size, args.seed)
    except ConstructionError as exc:
        raise UsageError(str(exc)) from None
    folder = Path(args.output) if args.output else out_dir() / f"{args.size}-{args.seed}"
    files = {folder / "instance.json": save_instance(inst), folder / "state.json": save_state(initial_state(inst))}
    if not args.force:
        for p in files:
            if p.exists():
                raise UsageError(f"{p} exists; pass --force to overwrite")
    for p, text in files.items():
        _write(p, text, True)
        print(p)
    return EXIT_OK


def _status_code(status: str) -> int:
    return {"optimal": EXIT_OK, "heuristic": EXIT_TRUNCATED, "infeasible": EXIT_INFEASIBLE}[status]


def cmd_solve(args) -> int:
    inst, state = _load_pair(args)
    res = solve(inst, state, args.solver, _options(args, args.alpha))
    if res.solution is None:
        print(f"infeasible: no feasible placement/routing within k={args.k_paths} candidate paths", file=sys.stderr)
        return EXIT_INFEASIBLE
    report = validate(inst, res.solution, state)
    print(res.costs.table())
    print(f"solver={res.method} status={res.status} nodes={res.nodes} wall={res.wall_time:.2f}s")
    if not report.feasible:
        print(report.render(), file=sys.stderr)
        return EXIT_INFEASIBLE
    extra = {"solver": {"method": res.method, "status": res.status, "nodes": res.nodes,
                        "stats": res.stats, "options": vars(_options(args, args.alpha))}}
    path = _target(args.output, f"solution-{inst.name}-a{fmt(args.alpha)}.json")
    _write(path, save_solution(res.solution, extra), True)
    print(path)
    return _status_code(res.status)


def cmd_sweep(args) -> int:
    inst, state = _load_pair(args)
    try:
        result = run_sweep(inst, state, args.grid, args.solver, _options(args), args.jobs, not args.independent)
    except GridError as exc:
        raise UsageError(str(exc)) from None
    path = _target(args.output, f"sweep-{inst.name}.csv")
    _write(path, result.to_csv(), True)
    _write(path.with_suffix(".deltas.csv"), result.delta_csv(), True)
    _write(path.with_suffix(".meta.json"), json.dumps(result.metadata, indent=1) + "\n", True)
    for row in result.rows:
        c = row.costs
        body = "infeasible" if c is None else f"NP={c.cost_np:.6f} REC={c.cost_rec:.6f} migrations={c.migrations}"
        print(f"alpha={row.alpha:.2f} {row.status:<10} {body}")
    print()
    print(result.delta_table())
    print(path)
    if any(r.flagged for r in result.rows):
        return EXIT_INFEASIBLE
    return EXIT_OK if result.all_optimal else EXIT_TRUNCATED


def cmd_export_lp(args) -> int:
    inst, state = _load_pair(args)
    try:
        model = build_milp(inst, state, args.alpha, args.k_paths)
    except MilpBuildError as exc:
        print(f"cannot linearize: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    path = _target(args.output, f"{inst.name}-a{fmt(args.alpha)}.lp")
    path.parent.mkdir(parents=True, exist_ok=True)
    lp, sidecar = write_lp(model, str(path))
    print(lp)
    print(sidecar)
    return EXIT_OK


def cmd_validate(args) -> int:
    inst = load_instance(_read(args.instance))
    sol = load_solution(_read(args.solution), inst)
    ref = load_state(_read(args.reference), inst) if args.reference else None
    report = validate(inst, sol, ref)
    print(report.render())
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sfc-reconfig", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def solver_flags(sp, alpha: bool):
        sp.add_argument("instance")
        sp.add_argument("state")
        if alpha:
            sp.add_argument("--alpha", type=_alpha, default=0.5)
        sp.add_argument("--solver", choices=sorted(SOLVERS), default="exact")
        sp.add_argument("--k-paths", type=_positive(int), default=DEFAULT_K_PATHS)
        sp.add_argument("--budget-s", type=_positive(float), default=None)
        sp.add_argument("--seed", type=int, default=0, help="annealing seed")
        sp.add_argument("--no-prune", action="store_true", help="disable bound pruning in the exact search")
        sp.add_argument("-o", "--output")

    g = sub.add_parser("generate", help="write a random scenario and its initial state")
    g.add_argument("--size", choices=SIZES, type=str.lower, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--force", action="store_true")
    g.add_argument("-o", "--output", help="output folder")
    g.set_defaults(fn=cmd_generate)

    s = sub.add_parser("solve", help="optimize one alpha")
    solver_flags(s, True)
    s.set_defaults(fn=cmd_solve)

    w = sub.add_parser("sweep", help="solve every alpha of a grid")
    solver_flags(w, False)
    w.add_argument("--grid", default=DEFAULT_GRID, help="start:stop:step (default %(default)s)")
    w.add_argument("--jobs", type=_positive(int), default=1)
    w.add_argument("--independent", action="store_true",
                   help="report each alpha's own result without adopting placements found at other alphas")
    w.set_defaults(fn=cmd_sweep)

    e = sub.add_parser("export-lp", help="write the linearized model in LP format")
    e.add_argument("instance")
    e.add_argument("state")
    e.add_argument("--alpha", type=_alpha, default=0.5)
    e.add_argument("--k-paths", type=_positive(int), default=DEFAULT_K_PATHS)
    e.add_argument("-o", "--output")
    e.set_defaults(fn=cmd_export_lp)

    v = sub.add_parser("validate", help="check a solution against every constraint")
    v.add_argument("instance")
    v.add_argument("solution")
    v.add_argument("--reference", help="state the solution migrates from (enables migration-bandwidth checks)")
    v.set_defaults(fn=cmd_validate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (UsageError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
