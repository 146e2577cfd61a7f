"""Energy/reconfiguration trade-off at alpha = 0.5 relative to the two extremes, per size.

Energy share: (NP(1) - NP(0.5)) / (NP(1) - NP(0)).  REC share: REC(0.5) / REC(0).
"""

import argparse
import os
import statistics

from sfc_reconfig.scenarios import generate_scenario, initial_state
from sfc_reconfig.solver import SolverOptions
from sfc_reconfig.sweep import run_sweep

REFERENCE = {"energy": 0.73, "rec": 0.42}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", nargs="+", default=["small", "medium", "large"])
    ap.add_argument("--seeds", nargs="+", type=int, default=list(range(5)))
    ap.add_argument("--exact-sizes", nargs="*", default=["small"], help="sizes solved exactly; others anneal")
    ap.add_argument("--budget-s", type=float, default=None)
    ap.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()

    print(f"{'size':<8}{'seed':>5}{'method':>8}{'NP(1)':>9}{'NP(.5)':>9}{'NP(0)':>9}"
          f"{'REC(.5)':>9}{'REC(0)':>9}{'energy':>8}{'REC':>7}")
    for size in args.sizes:
        method = "exact" if size in args.exact_sizes else "anneal"
        es, rs = [], []
        for seed in args.seeds:
            inst = generate_scenario(size, seed)
            opts = SolverOptions(seed=seed, budget_s=args.budget_s)
            one, half, zero = (r.costs for r in run_sweep(inst, initial_state(inst), [1.0, 0.5, 0.0], method,
                                                           opts, args.jobs).rows)
            e = (one.cost_np - half.cost_np) / (one.cost_np - zero.cost_np)
            r = half.cost_rec / zero.cost_rec
            es.append(e)
            rs.append(r)
            print(f"{size:<8}{seed:>5}{method:>8}{one.cost_np:>9.4f}{half.cost_np:>9.4f}{zero.cost_np:>9.4f}"
                  f"{half.cost_rec:>9.4f}{zero.cost_rec:>9.4f}{100 * e:>7.0f}%{100 * r:>6.0f}%")
        print(f"{size:<8} mean energy share {100 * statistics.mean(es):.0f}% "
              f"(reference {100 * REFERENCE['energy']:.0f}%), mean REC share {100 * statistics.mean(rs):.0f}% "
              f"(reference {100 * REFERENCE['rec']:.0f}%)")


if __name__ == "__main__":
    main()
