"""Solve the linearized model with HiGHS and compare with the internal exact search."""

import argparse
import time

from sfc_reconfig.costs import total_cost
from sfc_reconfig.milp import build_milp, decode_solution, solve_with_highs
from sfc_reconfig.scenarios import generate_scenario, initial_state, random_micro
from sfc_reconfig.solver import SolverOptions, solve_exact


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--micros", type=int, default=10)
    ap.add_argument("--size", help="also try one generated scenario of this size")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--time-limit", type=float, default=300.0)
    args = ap.parse_args()

    cases = [(f"micro-{s}", *random_micro(s), 2) for s in range(args.micros)]
    if args.size:
        inst = generate_scenario(args.size, args.seed)
        cases.append((inst.name, inst, initial_state(inst), 4))
    for label, inst, state, k in cases:
        t = time.perf_counter()
        model = build_milp(inst, state, args.alpha, k)
        status, obj, values = solve_with_highs(model, time_limit=args.time_limit)
        th = time.perf_counter() - t
        ex = solve_exact(inst, state, SolverOptions(alpha=args.alpha, k_paths=k, budget_s=args.time_limit))
        line = f"{label}: highs {status} {obj} ({th:.1f}s), exact {ex.status} {ex.objective}"
        if values is not None:
            sol = decode_solution(model, inst, values)
            line += f", decoded joint {total_cost(state, sol, inst, args.alpha, k).joint:.9f}"
        print(line)


if __name__ == "__main__":
    main()
