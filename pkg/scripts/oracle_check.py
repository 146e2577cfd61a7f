"""Exact search against exhaustive enumeration, on random micros and a truncated Small scenario."""

import argparse
import time

from sfc_reconfig.scenarios import generate_scenario, initial_state, random_micro
from sfc_reconfig.solver import SolverOptions, brute_force, solve_exact


def compare(label, inst, state, alphas, k):
    for a in alphas:
        opts = SolverOptions(alpha=a, k_paths=k)
        t = time.perf_counter()
        ex = solve_exact(inst, state, opts)
        te = time.perf_counter() - t
        bf = brute_force(inst, state, opts)
        tb = time.perf_counter() - t - te
        if bf.solution is None:
            same = ex.solution is None
            print(f"{label} alpha={a:.2f} infeasible both={same}")
            continue
        same = abs(ex.objective - bf.objective) <= 1e-9 and ex.solution.hosts() == bf.solution.hosts()
        print(f"{label} alpha={a:.2f} exact={ex.objective:.9f} ({ex.nodes} leaves, {te:.2f}s) "
              f"brute={bf.objective:.9f} ({bf.nodes} placements, {tb:.2f}s) {'same' if same else 'DIFFERENT'}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--micros", type=int, default=20)
    ap.add_argument("--skip-small", action="store_true")
    ap.add_argument("--small-alphas", nargs="+", type=float, default=[0.5],
                    help="the truncated Small enumeration has 4^9 placements, about 25 minutes per alpha on one core")
    args = ap.parse_args()
    alphas = (0.0, 0.3, 0.7, 1.0)
    for seed in range(args.micros):
        inst, state = random_micro(seed)
        compare(f"micro-{seed}", inst, state, alphas, 2)
    if not args.skip_small:
        inst = generate_scenario("small", 0, {"n_sfcs": 3, "n_servers": 4, "n_leaf": 4, "n_flows": 3})
        compare("small-0 (3 SFCs, 4 servers)", inst, initial_state(inst), args.small_alphas, 4)


if __name__ == "__main__":
    main()
