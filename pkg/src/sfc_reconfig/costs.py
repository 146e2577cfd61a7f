"""Reconfiguration cost terms, server energy, normalization and the weighted objective.

Raw terms, all evaluated between the current state (U, M) and a candidate (W, R):

    rules     number of directed switch-link routing entries that change
    size      GB of VNF state moved
    time      seconds until the slowest migration finishes
    downtime  $ of revenue lost while migrated SFCs stop-and-copy
    qos       utilization-weighted migration penalty
    overhead  per-server migration stress

Each is divided by an instance-level upper bound so it lands in [0, 1]; the
reconfiguration cost is their mean.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Iterable, Mapping

from .model import Instance, InstanceKey, NetworkState, Server, VnfType
from .topology import DEFAULT_K_PATHS, Topology, candidate_paths, compute_k_matrix

GB_TO_GBIT = 8.0
TERMS = ("u", "v", "w", "x", "y", "z")


@dataclass(frozen=True)
class Migration:
    sfc: str
    vnf: str
    src: str
    dst: str

    @property
    def pair(self) -> frozenset:
        return frozenset((self.src, self.dst))


@dataclass(frozen=True)
class MigrationSet:
    migrations: tuple[Migration, ...]
    eta_server: Mapping[str, int]
    eta_pair: Mapping[frozenset, int]  # per unordered pair touched by a migration

    def concurrency(self, m: Migration) -> int:
        return max(self.eta_server[m.dst], self.eta_pair[m.pair], self.eta_server[m.src])

    def __len__(self) -> int:
        return len(self.migrations)


@dataclass(frozen=True)
class NormBounds:
    u: float
    v: float
    w: float
    x: float
    y: float
    z: float
    power: float


@dataclass(frozen=True)
class CostBreakdown:
    alpha: float
    cost_np: float
    cost_rec: float
    joint: float
    u: float
    v: float
    w: float
    x: float
    y: float
    z: float
    u_norm: float
    v_norm: float
    w_norm: float
    x_norm: float
    y_norm: float
    z_norm: float
    energy: float
    migrations: int

    CSV_COLUMNS = ("alpha", "cost_np", "cost_rec", "u", "v", "w", "x", "y", "z",
                   "u_norm", "v_norm", "w_norm", "x_norm", "y_norm", "z_norm")

    def csv_row(self) -> list[float]:
        return [getattr(self, c) for c in self.CSV_COLUMNS]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "CostBreakdown":
        return cls(**{f.name: doc[f.name] for f in fields(cls)})

    def table(self) -> str:
        names = {"u": "rule changes", "v": "migration size (GB)", "w": "migration time (s)",
                 "x": "downtime loss ($)", "y": "QoS penalty", "z": "server overhead"}
        lines = [f"{'term':<22}{'raw':>14}{'normalized':>12}"]
        for t in TERMS:
            lines.append(f"{names[t]:<22}{getattr(self, t):>14.6g}{getattr(self, t + '_norm'):>12.6f}")
        lines.append(f"{'energy (W)':<22}{self.energy:>14.6g}{self.cost_np:>12.6f}")
        lines.append(f"Cost_REC={self.cost_rec:.6f}  Cost_NP={self.cost_np:.6f}  "
                     f"alpha={self.alpha:g}  objective={self.joint:.9f}  migrations={self.migrations}")
        return "\n".join(lines)


def _vnf_map(vnf_types) -> Mapping[str, VnfType]:
    if isinstance(vnf_types, Instance):
        return vnf_types._index["vnf"]
    if isinstance(vnf_types, Mapping):
        return vnf_types
    return {v.id: v for v in vnf_types}


def _server_map(servers) -> Mapping[str, Server]:
    if isinstance(servers, Instance):
        return servers._index["server"]
    if isinstance(servers, Mapping):
        return servers
    return {x.id: x for x in servers}


def _moves(state: NetworkState, solution: NetworkState) -> list[tuple[InstanceKey, str, str]]:
    before = state.hosts()
    after = solution.hosts()
    if before.keys() != after.keys():
        raise ValueError("state and solution place different instance sets")
    return [(k, before[k], after[k]) for k in sorted(after) if before[k] != after[k]]


def rule_change_count(state: NetworkState, solution: NetworkState) -> int:
    flows = set(state.routing) | set(solution.routing)
    return sum(len(state.route(f) ^ solution.route(f)) for f in flows)


def migration_set(state: NetworkState, solution: NetworkState, topology: Topology) -> MigrationSet:
    """Migrations with per-server degree and per-pair shared-link load.

    The pair load of {x, y} counts migrations on that pair in either direction plus
    migrations on every other pair whose path shares a link with it.
    """
    moves = _moves(state, solution)
    migs = tuple(Migration(s, v, src, dst) for (s, v), src, dst in moves)
    eta = {x: 0 for x in topology.servers}
    per_pair: dict[frozenset, int] = {}
    for m in migs:
        eta[m.src] += 1
        eta[m.dst] += 1
        per_pair[m.pair] = per_pair.get(m.pair, 0) + 1
    km = compute_k_matrix(topology)
    eta_pair = {}
    for p in per_pair:
        eta_pair[p] = per_pair[p] + sum(per_pair.get(q, 0) for q in km.sharing(*p))
    return MigrationSet(migs, eta, eta_pair)


def migration_size(state: NetworkState, solution: NetworkState, vnf_types) -> float:
    vnfs = _vnf_map(vnf_types)
    return sum(vnfs[v].size for (s, v), _, _ in _moves(state, solution))


def migration_time(mset: MigrationSet, vnf_types, bw: float) -> tuple[float, dict[Migration, float]]:
    """(longest migration time, per-migration times) in seconds; bandwidth split statically."""
    if bw <= 0:
        raise ValueError("bw must be > 0")
    vnfs = _vnf_map(vnf_types)
    times = {m: GB_TO_GBIT * vnfs[m.vnf].size * mset.concurrency(m) / bw for m in mset.migrations}
    return max(times.values(), default=0.0), times


def downtime_loss(state: NetworkState, solution: NetworkState, instance: Instance) -> float:
    migrated = {s for (s, v), _, _ in _moves(state, solution)}
    return sum(instance.sfc(s).revenue_rate * instance.sfc_rate_gbps(s) * instance.rho
               for s in sorted(migrated))


def utilization(state: NetworkState, instance: Instance) -> dict[InstanceKey, float]:
    """Per-instance CPU utilization at its current host."""
    util = {k: 0.0 for k in instance.instance_keys}
    for x, f, v, s in sorted(state.flow_assignment):
        util[(s, v)] += instance.flow(f).rate * instance.vnf(v).cpu_per_unit / instance.server(x).cpu
    return util


def qos_cost(state: NetworkState, solution: NetworkState, instance: Instance) -> float:
    util = utilization(state, instance)
    return sum(util[k] * instance.vnf(k[1]).penalty for k, _, _ in _moves(state, solution))


def server_overhead(state: NetworkState, solution: NetworkState, servers) -> float:
    srv = _server_map(servers)
    diff = state.placement ^ solution.placement
    return sum(srv[x].overhead for x, _, _ in sorted(diff))


def energy_cost(solution: NetworkState, servers) -> tuple[float, float]:
    """(raw W, normalized) for on/off server power."""
    srv = _server_map(servers)
    on = {x for x, _, _ in solution.placement}
    raw = sum(srv[x].power for x in sorted(on))
    total = sum(s.power for s in srv.values())
    return raw, (raw / total if total > 0 else 0.0)


def _switch_hops(topo: Topology, path) -> int:
    return sum(1 for a, b in path.links if topo.is_switch(a) and topo.is_switch(b))


def route_rule_bound(instance: Instance, k_paths: int = DEFAULT_K_PATHS) -> dict[str, int]:
    """Per flow: max switch-link entries any candidate routing could install."""
    topo = instance.topology
    servers = [x.id for x in instance.servers]

    def longest(a: str, b: str) -> int:
        return max(_switch_hops(topo, p) for p in candidate_paths(topo, a, b, k_paths))

    mid = max((longest(a, b) for a in servers for b in servers), default=0)
    out = {}
    for f in instance.flows:
        k = len(instance.sfc(f.sfc).chain)
        first = max(longest(f.ingress, x) for x in servers)
        last = max(longest(x, f.egress) for x in servers)
        out[f.id] = first + (k - 1) * mid + last
    return out


def normalization_bounds(instance: Instance, state: NetworkState, k_paths: int = DEFAULT_K_PATHS) -> NormBounds:
    keys = instance.instance_keys
    n = len(keys)
    util = utilization(state, instance)
    sizes = [instance.vnf(v).size for _, v in keys]
    rules = route_rule_bound(instance, k_paths)
    return NormBounds(
        u=float(sum(len(state.route(f.id)) + rules[f.id] for f in instance.flows)),
        v=sum(sizes),
        w=GB_TO_GBIT * max(sizes, default=0.0) * n / instance.migration_bw,
        x=instance.rho * sum(s.revenue_rate * instance.sfc_rate_gbps(s.id) for s in instance.sfcs),
        y=sum(util[k] * instance.vnf(k[1]).penalty for k in keys),
        z=2.0 * n * max((x.overhead for x in instance.servers), default=0.0),
        power=sum(x.power for x in instance.servers),
    )


def _norm(raw: float, bound: float) -> float:
    return raw / bound if bound > 0 else 0.0


def total_cost(state: NetworkState, solution: NetworkState, instance: Instance, alpha: float,
               k_paths: int = DEFAULT_K_PATHS, bounds: NormBounds | None = None) -> CostBreakdown:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if bounds is None:
        bounds = normalization_bounds(instance, state, k_paths)
    mset = migration_set(state, solution, instance.topology)
    raw = {
        "u": float(rule_change_count(state, solution)),
        "v": migration_size(state, solution, instance),
        "w": migration_time(mset, instance, instance.migration_bw)[0],
        "x": downtime_loss(state, solution, instance),
        "y": qos_cost(state, solution, instance),
        "z": server_overhead(state, solution, instance),
    }
    norm = {t: _norm(raw[t], getattr(bounds, t)) for t in TERMS}
    cost_rec = sum(norm[t] for t in TERMS) / len(TERMS)
    energy, cost_np = energy_cost(solution, instance)
    return CostBreakdown(
        alpha=alpha, cost_np=cost_np, cost_rec=cost_rec,
        joint=(1.0 - alpha) * cost_np + alpha * cost_rec,
        **raw, **{f"{t}_norm": norm[t] for t in TERMS},
        energy=energy, migrations=len(mset),
    )


# ---------------------------------------------------------------- literal audit mode

def literal_migration_time(state: NetworkState, solution: NetworkState, instance: Instance) -> float:
    """Migration time with the printed formulas taken verbatim, for audit only.

    Uses W_x (1 - U_y) pair counts over ordered pairs, T = W_x U_y * A_v * max(...) / BW over all
    (x, y) including x = y, and no GB->Gbit conversion. Not used by any solver.
    """
    topo = instance.topology
    km = compute_k_matrix(topo)
    servers = [x.id for x in instance.servers]
    keys = instance.instance_keys
    U = {(x, s, v) for x, v, s in state.placement}
    W = {(x, s, v) for x, v, s in solution.placement}
    eta = {x: sum(((x, s, v) in W) != ((x, s, v) in U) for s, v in keys) for x in servers}

    def direct(x, y):
        return sum((x, s, v) in W and (y, s, v) not in U for s, v in keys)

    eta_xy = {}
    for x in servers:
        for y in servers:
            eta_xy[(x, y)] = direct(x, y) + sum(km(x, y, z, w) * direct(z, w) for z in servers for w in servers)
    worst = 0.0
    for s, v in keys:
        for x in servers:
            for y in servers:
                if (x, s, v) in W and (y, s, v) in U:
                    share = max(eta[x], eta_xy[(x, y)], eta[y])
                    t = instance.vnf(v).size * share / instance.migration_bw
                    worst = max(worst, t)
    return worst
