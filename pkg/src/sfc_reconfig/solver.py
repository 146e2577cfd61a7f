"""Exact branch-and-bound, simulated annealing and brute-force reference solvers.

All three minimize (1 - alpha) * Cost_NP + alpha * Cost_REC over placements and
candidate-path routings. Ties (objectives within ``TIE_TOL``) go to fewer
migrations, then to the lexicographically smallest placement vector, where each
instance's servers are ranked "stay" first and then by ascending power.
"""

from __future__ import annotations

import itertools
import math
import random
import time
from collections.abc import Iterator
from dataclasses import dataclass, field

from .costs import (CostBreakdown, energy_cost, migration_set, migration_size, migration_time,
                    downtime_loss, normalization_bounds, qos_cost, server_overhead, total_cost)
from .feasibility import validate
from .model import Instance, NetworkState, ReconfigSolution, make_state
from .exact import BranchAndBound, better
from .search import CAP_TOL, SearchContext
from .topology import DEFAULT_K_PATHS, candidate_paths, pair_path

BRUTE_LIMIT = 10_000_000


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverOptions:
    alpha: float = 0.5
    k_paths: int = DEFAULT_K_PATHS
    budget_s: float | None = None
    prune: bool = True
    seed: int = 0
    iterations: int = 20_000
    t0: float = 1.0
    cooling: float = 0.995
    level: int = 10  # anneal moves tried per temperature step


@dataclass
class SolveResult:
    solution: ReconfigSolution | None
    objective: float
    status: str  # optimal | heuristic | infeasible
    method: str
    alpha: float
    nodes: int  # complete placements evaluated
    wall_time: float
    stats: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    @property
    def costs(self) -> CostBreakdown | None:
        return None if self.solution is None else self.solution.costs


def _finish(ctx: SearchContext, assign, routes, key_obj: float) -> ReconfigSolution:
    sol = ctx.to_solution(assign, routes)
    costs = total_cost(ctx.state, sol, ctx.instance, ctx.alpha, ctx.k, bounds=ctx.bounds)
    if abs(costs.joint - key_obj) > 1e-9:
        raise SolverError(f"search objective {key_obj!r} disagrees with cost engine {costs.joint!r}")
    report = validate(ctx.instance, sol, ctx.state)
    if not report.feasible:
        raise SolverError("solver produced an infeasible solution:\n" + report.render())
    return ReconfigSolution.from_state(sol, costs)


def _result(ctx, best, status, method, nodes, t0, stats) -> SolveResult:
    wall = time.perf_counter() - t0
    if best is None:
        return SolveResult(None, math.inf, "infeasible", method, ctx.alpha, nodes, wall, stats)
    key, assign, routes = best
    sol = _finish(ctx, assign, routes, key[0])
    return SolveResult(sol, sol.costs.joint, status, method, ctx.alpha, nodes, wall, stats)


# ---------------------------------------------------------------- exact

def solve_exact(instance: Instance, state: NetworkState, options: SolverOptions = SolverOptions()) -> SolveResult:
    """Branch-and-bound over powered-server sets, then placements in SFC-major order.

    With ``prune=False`` the search is a plain depth-first enumeration with no bound
    or partial-capacity pruning, so every placement is reached (useful for
    cross-checking against brute force).
    """
    t0 = time.perf_counter()
    ctx = SearchContext(instance, state, options.alpha, options.k_paths)
    deadline = None if options.budget_s is None else t0 + options.budget_s
    bb = BranchAndBound(ctx, options.prune, deadline)
    if options.prune:
        bb.best = _descent(ctx)
    bb.run()
    status = "optimal" if not bb.timed_out else "heuristic"
    stats = {"dfs_nodes": bb.dfs_nodes, "pruned": bb.pruned, "subsets": bb.subsets, "timed_out": bb.timed_out}
    return _result(ctx, bb.best, status, "exact", bb.leaves, t0, stats)


def _descent(ctx: SearchContext, start=None):
    """Deterministic first-improvement local search from ``start`` (default: the current placement).

    Moves: empty a whole server onto powered ones, or relocate a single instance.
    Seeds the branch-and-bound incumbent and polishes the annealing result.
    """
    cur = list(ctx.h0 if start is None else start)
    ev = ctx.evaluate(cur)
    if ev is None:
        return None
    best = ((ev[0], ev[1], ctx.rank_vector(cur)), cur, ev[2])

    def try_move(cand) -> bool:
        nonlocal best
        ev = ctx.evaluate(cand)
        if ev is None:
            return False
        key = (ev[0], ev[1], ctx.rank_vector(cand))
        if better(key, best[0]):
            best = (key, cand, ev[2])
            return True
        return False

    improved = True
    while improved:
        improved = False
        cur = best[1]
        used = sorted(set(cur), key=lambda y: (-ctx.power[y], y))
        for y in used:
            cand = list(cur)
            cores = [0] * ctx.X
            mem = [0.0] * ctx.X
            for i, x in enumerate(cand):
                cores[x] += ctx.cores[i]
                mem[x] += ctx.mem[i]
            ok = True
            for i in [i for i, x in enumerate(cand) if x == y]:
                dests = [x for x in range(ctx.X) if x != y and cores[x] and cores[x] + ctx.cores[i] <= ctx.cap_cores[x]
                         and mem[x] + ctx.mem[i] <= ctx.cap_mem[x]]
                if not dests:
                    ok = False
                    break
                x = min(dests, key=lambda x: (ctx.sep[i][x], x))
                cand[i] = x
                cores[x] += ctx.cores[i]
                mem[x] += ctx.mem[i]
            if ok and try_move(cand):
                improved = True
                break
        if improved:
            continue
        for i in range(ctx.n):
            for x in range(ctx.X):
                if x != cur[i]:
                    cand = list(cur)
                    cand[i] = x
                    if try_move(cand):
                        improved = True
                        break
            if improved:
                break
    return best


def evaluate_placement(instance: Instance, state: NetworkState, hosts: dict,
                       options: SolverOptions = SolverOptions()) -> tuple[tuple, SolveResult] | None:
    """Score a fixed placement at ``options.alpha`` with its best routing.

    Returns (tie-break key, result) or None when the placement is infeasible. The key
    orders solutions the way every solver here does: objective, migrations, rank vector.
    """
    t0 = time.perf_counter()
    ctx = SearchContext(instance, state, options.alpha, options.k_paths)
    sidx = {x: i for i, x in enumerate(ctx.servers)}
    assign = [sidx[hosts[k]] for k in ctx.keys]
    ev = ctx.evaluate(assign)
    if ev is None:
        return None
    key = (ev[0], ev[1], ctx.rank_vector(assign))
    return key, _result(ctx, (key, assign, ev[2]), "heuristic", "rescore", 1, t0, {})


# ---------------------------------------------------------------- annealing

def solve_anneal(instance: Instance, state: NetworkState, options: SolverOptions = SolverOptions()) -> SolveResult:
    """Simulated annealing from the current placement with relocate/swap moves.

    The temperature drops by ``cooling`` every ``level`` moves. Relocations only
    target servers with spare cores and memory. The best placement visited is
    finished with a deterministic descent. Deterministic for a given seed.
    """
    if not 0.0 < options.cooling < 1.0:
        raise ValueError("cooling must lie in (0, 1)")
    t0 = time.perf_counter()
    ctx = SearchContext(instance, state, options.alpha, options.k_paths)
    rng = random.Random(options.seed)
    cur = list(ctx.h0)
    ev = ctx.evaluate(cur)
    if ev is None:
        return _result(ctx, None, "infeasible", "anneal", 0, t0, {})
    cur_obj = ev[0]
    best = ((ev[0], ev[1], ctx.rank_vector(cur)), list(cur), ev[2])
    cores = [0] * ctx.X
    mem = [0.0] * ctx.X
    for i, x in enumerate(cur):
        cores[x] += ctx.cores[i]
        mem[x] += ctx.mem[i]
    temp = options.t0
    evaluated = 1
    accepted = 0
    timed_out = False
    for it in range(options.iterations):
        if it and it % options.level == 0:
            temp *= options.cooling
        if options.budget_s is not None and it % 64 == 0 and time.perf_counter() - t0 > options.budget_s:
            timed_out = True
            break
        cand = list(cur)
        if ctx.n > 1 and rng.random() < 0.3:
            i, j = rng.sample(range(ctx.n), 2)
            if cand[i] == cand[j]:
                continue
            cand[i], cand[j] = cand[j], cand[i]
        else:
            i = rng.randrange(ctx.n)
            dests = [x for x in range(ctx.X) if x != cur[i] and cores[x] + ctx.cores[i] <= ctx.cap_cores[x]
                     and mem[x] + ctx.mem[i] <= ctx.cap_mem[x] + CAP_TOL]
            if not dests:
                continue
            cand[i] = rng.choice(dests)
        ev = ctx.evaluate(cand)
        evaluated += 1
        if ev is None:
            continue
        delta = ev[0] - cur_obj
        if delta <= 0 or rng.random() < math.exp(-delta / temp):
            for k, (a, b) in enumerate(zip(cur, cand)):
                if a != b:
                    cores[a] -= ctx.cores[k]
                    mem[a] -= ctx.mem[k]
                    cores[b] += ctx.cores[k]
                    mem[b] += ctx.mem[k]
            cur, cur_obj = cand, ev[0]
            accepted += 1
            key = (ev[0], ev[1], ctx.rank_vector(cand))
            if better(key, best[0]):
                best = (key, list(cand), ev[2])
    polished = _descent(ctx, best[1])
    if better(polished[0], best[0]):
        best = polished
    stats = {"evaluated": evaluated, "accepted": accepted, "timed_out": timed_out, "seed": options.seed,
             "final_temp": temp}
    return _result(ctx, best, "heuristic", "anneal", evaluated, t0, stats)


# ---------------------------------------------------------------- brute force

def _flow_options(instance: Instance, state: NetworkState, hosts: dict, k: int) -> list[list[tuple]]:
    """Per flow: every delay-feasible (rule changes, links, segments) routing."""
    topo = instance.topology
    out = []
    for f in instance.flows:
        ends = [f.ingress] + [hosts[(f.sfc, v)] for v in instance.sfc(f.sfc).chain] + [f.egress]
        segs = [candidate_paths(topo, a, b, k) for a, b in zip(ends, ends[1:])]
        M = state.route(f.id)
        opts = []
        for combo in itertools.product(*segs):
            if sum(p.latency for p in combo) > f.delay_threshold + CAP_TOL:
                continue
            links = {l for p in combo for l in p.links}
            R = {(a, b) for a, b in links if topo.is_switch(a) and topo.is_switch(b)}
            opts.append((len(R ^ M), links, combo))
        out.append(opts)
    return out


def brute_force(instance: Instance, state: NetworkState, options: SolverOptions = SolverOptions(),
                limit: int = BRUTE_LIMIT) -> SolveResult:
    """Enumerate every placement and every routing combination; reference oracle for tiny instances.

    Placement terms come straight from the cost-engine functions. Raises when the
    number of (placement, routing) assignments would exceed ``limit``.
    """
    t0 = time.perf_counter()
    alpha, k = options.alpha, options.k_paths
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    keys = list(instance.instance_keys)
    servers = [x.id for x in instance.servers]
    if len(servers) ** len(keys) > limit:
        raise SolverError(f"{len(servers)}^{len(keys)} placements exceed the enumeration limit {limit}")
    topo = instance.topology
    bounds = normalization_bounds(instance, state, k)
    before = state.hosts()
    by_power = sorted(servers, key=lambda x: (instance.server(x).power, servers.index(x)))
    order = {k_: [before[k_]] + [x for x in by_power if x != before[k_]] for k_ in keys}

    def norm(raw, b):
        return raw / b if b > 0 else 0.0

    best = None
    placements = 0
    assignments = 0
    for combo in itertools.product(servers, repeat=len(keys)):
        placements += 1
        hosts = dict(zip(keys, combo))
        pl = NetworkState(frozenset((hosts[(s, v)], v, s) for s, v in keys),
                          frozenset((hosts[(f.sfc, v)], f.id, v, f.sfc) for f in instance.flows
                                    for v in instance.sfc(f.sfc).chain),
                          {}, {})
        # server capacities
        if not _servers_fit(instance, hosts):
            continue
        mset = migration_set(state, pl, topo)
        rec_place = (norm(migration_size(state, pl, instance), bounds.v)
                     + norm(migration_time(mset, instance, instance.migration_bw)[0], bounds.w)
                     + norm(downtime_loss(state, pl, instance), bounds.x)
                     + norm(qos_cost(state, pl, instance), bounds.y)
                     + norm(server_overhead(state, pl, instance), bounds.z))
        np_cost = energy_cost(pl, instance)[1]
        reserved = set()
        for m in mset.migrations:
            a, b = sorted((m.src, m.dst), key=topo.rank)
            for u, v in pair_path(topo, a, b).links:
                reserved |= {(u, v), (v, u)}
        opts = _flow_options(instance, state, hosts, k)

        def fits(routing) -> bool:
            load: dict = {}
            for f, (_, links, _) in zip(instance.flows, routing):
                for l in links:
                    load[l] = load.get(l, 0.0) + f.gbps
            return all(v <= topo.link(*l).bandwidth - (instance.migration_bw if l in reserved else 0.0) + CAP_TOL
                       for l, v in load.items())

        best_u = None
        # each flow at its own minimum is optimal whenever the combination fits the links
        if all(opts):
            own = tuple(min(o, key=lambda r: r[0]) for o in opts)
            assignments += 1
            if fits(own):
                best_u = (sum(r[0] for r in own), own)
        if best_u is None:
            for routing in itertools.product(*opts):
                assignments += 1
                if assignments > limit:
                    raise SolverError(f"more than {limit} assignments")
                if not fits(routing):
                    continue
                u = sum(r[0] for r in routing)
                if best_u is None or u < best_u[0]:
                    best_u = (u, routing)
        if best_u is None:
            continue
        rec = (rec_place + norm(best_u[0], bounds.u)) / 6.0
        obj = (1.0 - alpha) * np_cost + alpha * rec
        vec = tuple(order[k_].index(hosts[k_]) for k_ in keys)
        key = (obj, len(mset), vec)
        if better(key, best[0] if best else None):
            best = (key, hosts, best_u[1])
    wall = time.perf_counter() - t0
    stats = {"assignments": assignments}
    if best is None:
        return SolveResult(None, math.inf, "infeasible", "brute", alpha, placements, wall, stats)
    key, hosts, routing = best
    segments = {f.id: r[2] for f, r in zip(instance.flows, routing)}
    sol = make_state(instance, hosts, segments, cls=ReconfigSolution)
    costs = total_cost(state, sol, instance, alpha, k, bounds=bounds)
    sol = ReconfigSolution.from_state(sol, costs)
    return SolveResult(sol, costs.joint, "optimal", "brute", alpha, placements, wall, stats)


def enumerate_solutions(instance: Instance, state: NetworkState, k_paths: int = DEFAULT_K_PATHS,
                        limit: int = BRUTE_LIMIT) -> Iterator[ReconfigSolution]:
    """Every placement combined with every per-segment candidate path choice, feasible or not."""
    keys = list(instance.instance_keys)
    servers = [x.id for x in instance.servers]
    topo = instance.topology
    count = 0
    for combo in itertools.product(servers, repeat=len(keys)):
        hosts = dict(zip(keys, combo))
        per_flow = []
        for f in instance.flows:
            ends = [f.ingress] + [hosts[(f.sfc, v)] for v in instance.sfc(f.sfc).chain] + [f.egress]
            per_flow.append(list(itertools.product(*(candidate_paths(topo, a, b, k_paths)
                                                     for a, b in zip(ends, ends[1:])))))
        for routing in itertools.product(*per_flow):
            count += 1
            if count > limit:
                raise SolverError(f"more than {limit} assignments")
            segments = {f.id: r for f, r in zip(instance.flows, routing)}
            yield make_state(instance, hosts, segments, cls=ReconfigSolution)


def _servers_fit(instance: Instance, hosts: dict) -> bool:
    from .scenarios import instance_load

    use: dict = {}
    for key, x in hosts.items():
        c, m, u = instance_load(instance, key)
        a = use.setdefault(x, [0, 0.0, 0.0])
        a[0] += c
        a[1] += m
        a[2] += u
    for x, (c, m, u) in use.items():
        srv = instance.server(x)
        if c > srv.cores or m > srv.memory + CAP_TOL or u > srv.cpu * (1 + CAP_TOL):
            return False
    return True


SOLVERS = {"exact": solve_exact, "anneal": solve_anneal, "brute": brute_force}


def solve(instance: Instance, state: NetworkState, method: str = "exact",
          options: SolverOptions = SolverOptions()) -> SolveResult:
    try:
        fn = SOLVERS[method]
    except KeyError:
        raise ValueError(f"unknown solver {method!r}; expected one of {sorted(SOLVERS)}") from None
    return fn(instance, state, options)
