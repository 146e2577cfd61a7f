"""Alpha sweeps: one solve per grid point, tabulated as CSV.

Rows come out in descending alpha whatever the completion order of the workers, and
every column is a deterministic function of the inputs. Wall-clock times live only
in the metadata, so the CSV itself is byte-stable across runs and job counts.

A placement found at one alpha is a valid candidate at every other alpha. After the
independent solves, each row adopts the best of all found placements (re-routed and
re-scored at its own alpha) when that beats its own result. Rows proven optimal
never change; budget-truncated rows can only improve, and the reported points become
a weighted-sum envelope of one common candidate set.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

from .costs import TERMS, CostBreakdown
from .model import Instance, NetworkState, load_instance, load_state, save_instance, save_state
from .exact import better
from .solver import SolverOptions, evaluate_placement, solve

SWEEP_SCHEMA = 1
DEFAULT_GRID = "1.0:0.0:0.1"

CSV_COLUMNS = (
    ("alpha", "status", "cost_np", "cost_rec", "joint")
    + tuple(f"{t}_norm" for t in TERMS)
    + tuple(f"{t}_raw" for t in TERMS)
    + ("energy_w", "migrations", "rule_changes", "solver", "nodes", "dfs_nodes", "truncated", "adopted_from")
)
DELTA_COLUMNS = ("alpha_from", "alpha_to", "energy_step_pct", "rec_step_pct", "energy_vs_first_pct",
                 "rec_vs_last_pct")


class GridError(ValueError):
    pass


def parse_grid(spec: str) -> list[float]:
    """``start:stop:step`` to a list of alphas in descending order, endpoints included."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise GridError(f"grid must look like start:stop:step, got {spec!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise GridError(f"grid values must be numbers, got {spec!r}") from None
    for v in (start, stop):
        if not 0.0 <= v <= 1.0:
            raise GridError(f"grid endpoints must lie in [0, 1], got {v}")
    if not step > 0:
        raise GridError("grid step must be positive")
    span = abs(start - stop)
    count = span / step
    n = round(count)
    if abs(count - n) > 1e-9:
        raise GridError(f"step {step} does not divide the interval {start}..{stop}")
    sign = -1.0 if stop < start else 1.0
    points = [round(start + sign * k * step, 12) for k in range(n + 1)]
    return sorted(set(points), reverse=True)


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


@dataclass
class SweepRow:
    alpha: float
    status: str
    costs: CostBreakdown | None
    solver: str
    nodes: int
    stats: dict = field(default_factory=dict)
    wall_time: float = 0.0
    hosts: dict | None = None  # (sfc, vnf) -> server of the reported solution
    key: tuple | None = None  # tie-break key at this row's alpha
    adopted_from: float | None = None

    @property
    def flagged(self) -> bool:
        return self.status == "infeasible"

    def values(self) -> dict:
        c = self.costs
        out = {"alpha": self.alpha, "status": self.status, "solver": self.solver, "nodes": self.nodes,
               "dfs_nodes": self.stats.get("dfs_nodes", ""), "truncated": bool(self.stats.get("timed_out", False)),
               "adopted_from": "" if self.adopted_from is None else self.adopted_from}
        if c is None:
            return out
        out.update(cost_np=c.cost_np, cost_rec=c.cost_rec, joint=c.joint, energy_w=c.energy,
                   migrations=c.migrations, rule_changes=int(round(c.u)))
        for t in TERMS:
            out[f"{t}_norm"] = getattr(c, f"{t}_norm")
            out[f"{t}_raw"] = getattr(c, t)
        return out


@dataclass
class SweepResult:
    rows: list[SweepRow]
    metadata: dict

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows:
            vals = row.values()
            w.writerow([fmt(vals.get(c)) for c in CSV_COLUMNS])
        return buf.getvalue()

    def deltas(self) -> list[dict]:
        """Per-step change of energy and reconfiguration cost, each relative to the previous step.

        Also reports energy relative to the first row and reconfiguration cost relative
        to the last, the two reference levels of a descending sweep.
        """
        ok = [r for r in self.rows if r.costs is not None]
        if not ok:
            return []
        first_np = ok[0].costs.cost_np
        last_rec = ok[-1].costs.cost_rec
        out = []
        for a, b in zip(ok, ok[1:]):
            out.append({
                "alpha_from": a.alpha, "alpha_to": b.alpha,
                "energy_step_pct": _pct(b.costs.cost_np - a.costs.cost_np, a.costs.cost_np),
                "rec_step_pct": _pct(b.costs.cost_rec - a.costs.cost_rec, a.costs.cost_rec),
                "energy_vs_first_pct": _pct(b.costs.cost_np - first_np, first_np),
                "rec_vs_last_pct": _pct(b.costs.cost_rec, last_rec),
            })
        return out

    def delta_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(DELTA_COLUMNS)
        for d in self.deltas():
            w.writerow([fmt(d[c]) for c in DELTA_COLUMNS])
        return buf.getvalue()

    def delta_table(self) -> str:
        lines = [f"{'alpha':>11}  {'energy step %':>14}  {'REC step %':>12}  {'energy vs a0 %':>15}  {'REC / final %':>14}"]
        for d in self.deltas():
            lines.append(f"{d['alpha_from']:>4.2f}->{d['alpha_to']:<4.2f}  {_show(d['energy_step_pct']):>14}  "
                         f"{_show(d['rec_step_pct']):>12}  {_show(d['energy_vs_first_pct']):>15}  "
                         f"{_show(d['rec_vs_last_pct']):>14}")
        return "\n".join(lines)

    def monotonicity_violations(self, tol: float = 1e-9) -> list[str]:
        """Steps where Cost_NP rises or Cost_REC falls as alpha decreases."""
        ok = [r for r in self.rows if r.costs is not None]
        bad = []
        for a, b in zip(ok, ok[1:]):
            if b.costs.cost_np > a.costs.cost_np + tol:
                bad.append(f"Cost_NP rises {a.costs.cost_np!r} -> {b.costs.cost_np!r} at alpha {a.alpha}->{b.alpha}")
            if b.costs.cost_rec < a.costs.cost_rec - tol:
                bad.append(f"Cost_REC falls {a.costs.cost_rec!r} -> {b.costs.cost_rec!r} at alpha {a.alpha}->{b.alpha}")
        return bad

    @property
    def all_optimal(self) -> bool:
        return all(r.status == "optimal" for r in self.rows)


def _pct(delta: float, base: float) -> float | None:
    if base == 0:
        return None if delta == 0 else math.copysign(math.inf, delta)
    return 100.0 * delta / base


def _show(v) -> str:
    return "n/a" if v is None else f"{v:+.1f}"


def _point(job: tuple) -> SweepRow:
    inst_text, state_text, method, opts = job
    inst = load_instance(inst_text)
    state = load_state(state_text, inst)
    options = SolverOptions(**opts)
    res = solve(inst, state, method, options)
    row = SweepRow(res.alpha, res.status, res.costs, method, res.nodes, dict(res.stats), res.wall_time)
    if res.solution is not None:
        row.hosts = res.solution.hosts()
        row.key = evaluate_placement(inst, state, row.hosts, options)[0]
    return row


def _share(instance: Instance, state: NetworkState, rows: list[SweepRow], options: SolverOptions) -> None:
    """Let every row adopt a better placement found at another alpha."""
    pool = []
    for r in rows:
        if r.hosts is not None and r.hosts not in [h for _, h in pool]:
            pool.append((r.alpha, r.hosts))
    for r in rows:
        if r.status == "optimal":
            continue
        for src, hosts in pool:
            if src == r.alpha:
                continue
            hit = evaluate_placement(instance, state, hosts, replace(options, alpha=r.alpha))
            if hit is None or not better(hit[0], r.key):
                continue
            key, res = hit
            r.key, r.costs, r.hosts, r.adopted_from = key, res.costs, hosts, src
            if r.status == "infeasible":
                r.status = "heuristic"


def run_sweep(instance: Instance, state: NetworkState, grid: str | list[float] = DEFAULT_GRID,
              method: str = "exact", options: SolverOptions = SolverOptions(), jobs: int = 1,
              share: bool = True) -> SweepResult:
    """Solve every alpha of the grid; rows sorted by descending alpha.

    With ``share`` (default) rows adopt better placements found at other alphas.
    """
    alphas = parse_grid(grid) if isinstance(grid, str) else sorted(set(grid), reverse=True)
    inst_text, state_text = save_instance(instance), save_state(state)
    base = asdict(options)
    work = [(inst_text, state_text, method, {**base, "alpha": a}) for a in alphas]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_point, work))
    else:
        rows = [_point(j) for j in work]
    rows.sort(key=lambda r: -r.alpha)
    if share:
        _share(instance, state, rows, options)
    opts = {k: v for k, v in base.items() if k != "alpha"}
    meta = {
        "schema": SWEEP_SCHEMA,
        "instance": instance.name,
        "instance_sha256": hashlib.sha256(inst_text.encode()).hexdigest(),
        "state_sha256": hashlib.sha256(state_text.encode()).hexdigest(),
        "solver": method,
        "options": opts,
        "alphas": alphas,
        "shared": share,
        "columns": list(CSV_COLUMNS),
        "wall_time_s": {fmt(r.alpha): r.wall_time for r in rows},
    }
    return SweepResult(rows, meta)
