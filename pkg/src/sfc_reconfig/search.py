"""Integer-indexed view of one (instance, state, alpha, k) problem used by the solvers.

Everything the exact and annealing searches need is precomputed here: per-instance
migration cost coefficients, shared-link pair structure, and cached per-flow
routing. ``evaluate`` computes the joint objective of a full placement without
going through the model types; solvers cross-check it against ``costs.total_cost``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .costs import GB_TO_GBIT, normalization_bounds, utilization
from .model import Instance, NetworkState, ReconfigSolution, make_state
from .scenarios import instance_load
from .topology import candidate_paths, compute_k_matrix, pair_path

TIE_TOL = 1e-12
CAP_TOL = 1e-9


@dataclass(frozen=True)
class RouteOption:
    choice: tuple[int, ...]  # candidate index per segment
    cost: int  # directed switch-link entries differing from the current routing
    switch_links: frozenset
    links: frozenset  # every directed link, server attachments included
    latency: float


class SearchContext:
    def __init__(self, instance: Instance, state: NetworkState, alpha: float, k_paths: int):
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
        if k_paths < 1:
            raise ValueError("k_paths must be >= 1")
        self.instance = instance
        self.state = state
        self.alpha = alpha
        self.k = k_paths
        topo = instance.topology
        self.topo = topo

        self.keys = list(instance.instance_keys)
        self.n = len(self.keys)
        self.servers = [x.id for x in instance.servers]
        self.X = len(self.servers)
        sidx = {x: j for j, x in enumerate(self.servers)}
        self.sidx = sidx
        hosts = state.hosts()
        self.h0 = [sidx[hosts[k]] for k in self.keys]

        srv = instance.servers
        self.power = [x.power for x in srv]
        self.psi = [x.overhead for x in srv]
        self.cap_cores = [x.cores for x in srv]
        self.cap_mem = [x.memory for x in srv]
        self.cap_cpu = [x.cpu for x in srv]
        loads = [instance_load(instance, k) for k in self.keys]
        self.cores = [l[0] for l in loads]
        self.mem = [l[1] for l in loads]
        self.cpu = [l[2] for l in loads]
        self.size = [instance.vnf(v).size for _, v in self.keys]

        sfc_ids = [s.id for s in instance.sfcs]
        self.sfc_of = [sfc_ids.index(s) for s, _ in self.keys]
        self.sfc_members = [[i for i, k in enumerate(self.keys) if k[0] == sid] for sid in sfc_ids]
        self.sfc_last = [m[-1] for m in self.sfc_members]

        b = normalization_bounds(instance, state, k_paths)
        self.bounds = b
        wrec = alpha / 6.0

        def coef(bound: float) -> float:
            return wrec / bound if bound > 0 else 0.0

        self.wnp = (1.0 - alpha) / b.power if b.power > 0 else 0.0
        self.cu, cv, self.cw, cx, cy, cz = (coef(b.u), coef(b.v), coef(b.w), coef(b.x), coef(b.y), coef(b.z))
        util = utilization(state, instance)
        self.sep = []
        for i, (s, v) in enumerate(self.keys):
            h = self.h0[i]
            base = cv * self.size[i] + cy * util[(s, v)] * instance.vnf(v).penalty
            self.sep.append([0.0 if x == h else base + cz * (self.psi[h] + self.psi[x]) for x in range(self.X)])
        self.minsep = [min((c for x, c in enumerate(row) if x != self.h0[i]), default=0.0)
                       for i, row in enumerate(self.sep)]
        self.xs = [cx * instance.rho * s.revenue_rate * instance.sfc_rate_gbps(s.id) for s in instance.sfcs]
        self.xshare = [self.xs[self.sfc_of[i]] / len(self.sfc_members[self.sfc_of[i]]) for i in range(self.n)]
        self.tw = [self.cw * GB_TO_GBIT * a / instance.migration_bw for a in self.size]

        # unordered server pairs and which pairs share a migration link
        self.pid = [[-1] * self.X for _ in range(self.X)]
        pairs = list(itertools.combinations(range(self.X), 2))
        for p, (a, c) in enumerate(pairs):
            self.pid[a][c] = self.pid[c][a] = p
        km = compute_k_matrix(topo)
        self.pair_conf = []
        self.pair_links = []
        for a, c in pairs:
            xa, xc = self.servers[a], self.servers[c]
            conf = [p for p, (d, e) in enumerate(pairs) if km(xa, xc, self.servers[d], self.servers[e])]
            self.pair_conf.append(conf)
            path = pair_path(topo, *sorted((xa, xc), key=topo.rank))
            self.pair_links.append(frozenset(path.links) | frozenset((q, p) for p, q in path.links))
        self.n_pairs = len(pairs)

        # flows
        self.flows = list(instance.flows)
        self.flow_chain = [[self.keys.index((f.sfc, v)) for v in instance.sfc(f.sfc).chain] for f in self.flows]
        self.flow_M = [state.route(f.id) for f in self.flows]
        self.flows_of_sfc = [[j for j, f in enumerate(self.flows) if f.sfc == sid] for sid in sfc_ids]
        self._cand: dict = {}
        self._best: dict = {}
        self._all: dict = {}
        self.link_cap = {}
        for l in topo.links:
            self.link_cap[(l.a, l.b)] = l.bandwidth
            self.link_cap[(l.b, l.a)] = l.bandwidth

    # ------------------------------------------------------------ routing

    def candidates(self, a: str, b: str) -> list:
        hit = self._cand.get((a, b))
        if hit is None:
            topo = self.topo
            hit = []
            for p in candidate_paths(topo, a, b, self.k):
                sw = frozenset(l for l in p.links if topo.is_switch(l[0]) and topo.is_switch(l[1]))
                hit.append((p, sw, frozenset(p.links), p.latency))
            self._cand[(a, b)] = hit
        return hit

    def endpoints(self, j: int, assign) -> list[str]:
        f = self.flows[j]
        return [f.ingress] + [self.servers[assign[i]] for i in self.flow_chain[j]] + [f.egress]

    def _hosts_key(self, j: int, assign) -> tuple:
        return tuple(assign[i] for i in self.flow_chain[j])

    def best_route(self, j: int, assign) -> RouteOption | None:
        """Cheapest delay-feasible routing of flow j (ties: smallest candidate indices)."""
        key = (j, self._hosts_key(j, assign))
        if key in self._best:
            return self._best[key]
        ends = self.endpoints(j, assign)
        segs = [self.candidates(a, b) for a, b in zip(ends, ends[1:])]
        M = self.flow_M[j]
        limit = self.flows[j].delay_threshold + CAP_TOL
        # M links still coverable by segments d.. ; a link of M left uncovered costs one rule
        reach = [frozenset()] * (len(segs) + 1)
        for d in range(len(segs) - 1, -1, -1):
            reach[d] = reach[d + 1].union(*(sw & M for _, sw, _, _ in segs[d]))
        order = [sorted(range(len(seg)), key=lambda c: (len(seg[c][1] - M), c)) for seg in segs]
        best = [None, None]
        counts: dict = {}
        extra = [0]  # distinct links in R not in M
        choice = []

        def rec(d: int, latency: float) -> None:
            if best[0] is not None:
                lb = extra[0] + sum(1 for l in M if not counts.get(l) and l not in reach[d])
                if lb > best[0]:
                    return
            if d == len(segs):
                covered = sum(1 for l in M if counts.get(l))
                cost = extra[0] + len(M) - covered
                if best[0] is None or (cost, choice) < (best[0], list(best[1])):
                    best[0], best[1] = cost, tuple(choice)
                return
            for c in order[d]:
                _, sw, _, lat = segs[d][c]
                if latency + lat > limit:
                    continue
                for l in sw:
                    counts[l] = counts.get(l, 0) + 1
                    if counts[l] == 1 and l not in M:
                        extra[0] += 1
                choice.append(c)
                rec(d + 1, latency + lat)
                choice.pop()
                for l in sw:
                    counts[l] -= 1
                    if counts[l] == 0 and l not in M:
                        extra[0] -= 1

        rec(0, 0.0)
        opt = None if best[0] is None else self._option(segs, best[1], best[0])
        self._best[key] = opt
        return opt

    def _option(self, segs, choice, cost) -> RouteOption:
        sw = frozenset().union(*(segs[d][c][1] for d, c in enumerate(choice)))
        links = frozenset().union(*(segs[d][c][2] for d, c in enumerate(choice)))
        lat = sum(segs[d][c][3] for d, c in enumerate(choice))
        return RouteOption(tuple(choice), cost, sw, links, lat)

    def route_options(self, j: int, assign) -> list[RouteOption]:
        """Every delay-feasible routing of flow j, sorted by (cost, choice)."""
        key = (j, self._hosts_key(j, assign))
        if key in self._all:
            return self._all[key]
        ends = self.endpoints(j, assign)
        segs = [self.candidates(a, b) for a, b in zip(ends, ends[1:])]
        M = self.flow_M[j]
        out = []
        for choice in itertools.product(*(range(len(s)) for s in segs)):
            lat = sum(segs[d][c][3] for d, c in enumerate(choice))
            if lat > self.flows[j].delay_threshold + CAP_TOL:
                continue
            sw = frozenset().union(*(segs[d][c][1] for d, c in enumerate(choice)))
            out.append(self._option(segs, choice, len(sw ^ M)))
        out.sort(key=lambda o: (o.cost, o.choice))
        self._all[key] = out
        return out

    def reserved_links(self, assign) -> set:
        res = set()
        for i, x in enumerate(assign):
            h = self.h0[i]
            if x != h:
                res |= self.pair_links[self.pid[x][h]]
        return res

    def _fits(self, routes, reserved) -> bool:
        load: dict = {}
        for j, opt in enumerate(routes):
            g = self.flows[j].gbps
            for l in opt.links:
                load[l] = load.get(l, 0.0) + g
        bw = self.instance.migration_bw
        for l, v in load.items():
            cap = self.link_cap[l] - (bw if l in reserved else 0.0)
            if v > cap + CAP_TOL:
                return False
        return True

    def route_all(self, assign) -> list[RouteOption] | None:
        """Minimum total rule-change routing meeting delay and link capacity, or None."""
        best = []
        for j in range(len(self.flows)):
            opt = self.best_route(j, assign)
            if opt is None:
                return None
            best.append(opt)
        reserved = self.reserved_links(assign)
        if self._fits(best, reserved):
            return best
        return self._route_search(assign, reserved)

    def _route_search(self, assign, reserved) -> list[RouteOption] | None:
        opts = [self.route_options(j, assign) for j in range(len(self.flows))]
        if any(not o for o in opts):
            return None
        floor = [o[0].cost for o in opts]
        suffix = [0] * (len(opts) + 1)
        for j in range(len(opts) - 1, -1, -1):
            suffix[j] = suffix[j + 1] + floor[j]
        bw = self.instance.migration_bw
        best = [None, None]
        load: dict = {}
        chosen = []

        def rec(j: int, cost: int) -> None:
            if best[0] is not None and cost + suffix[j] >= best[0]:
                return
            if j == len(opts):
                best[0], best[1] = cost, list(chosen)
                return
            g = self.flows[j].gbps
            for opt in opts[j]:
                if best[0] is not None and cost + opt.cost + suffix[j + 1] >= best[0]:
                    break
                ok = True
                for l in opt.links:
                    cap = self.link_cap[l] - (bw if l in reserved else 0.0)
                    if load.get(l, 0.0) + g > cap + CAP_TOL:
                        ok = False
                        break
                if not ok:
                    continue
                for l in opt.links:
                    load[l] = load.get(l, 0.0) + g
                chosen.append(opt)
                rec(j + 1, cost + opt.cost)
                chosen.pop()
                for l in opt.links:
                    load[l] -= g

        rec(0, 0)
        return best[1]

    # ------------------------------------------------------------ evaluation

    def capacity_ok(self, assign) -> bool:
        cores = [0] * self.X
        mem = [0.0] * self.X
        cpu = [0.0] * self.X
        for i, x in enumerate(assign):
            cores[x] += self.cores[i]
            mem[x] += self.mem[i]
            cpu[x] += self.cpu[i]
        return all(cores[x] <= self.cap_cores[x] and mem[x] <= self.cap_mem[x] + CAP_TOL
                   and cpu[x] <= self.cap_cpu[x] * (1 + CAP_TOL) for x in range(self.X))

    def placement_terms(self, assign) -> tuple[float, int]:
        """Objective contribution of everything except rule changes; and migration count."""
        used = sorted(set(assign))
        total = self.wnp * sum(self.power[x] for x in used)
        eta = [0] * self.X
        pair_cnt = [0] * self.n_pairs
        migs = []
        charged = set()
        sep = 0.0
        for i, x in enumerate(assign):
            h = self.h0[i]
            if x != h:
                eta[x] += 1
                eta[h] += 1
                p = self.pid[x][h]
                pair_cnt[p] += 1
                migs.append((i, x, h, p))
                sep += self.sep[i][x]
                charged.add(self.sfc_of[i])
        w = 0.0
        for i, x, h, p in migs:
            c = max(eta[x], eta[h], pair_cnt[p] + sum(pair_cnt[q] for q in self.pair_conf[p]))
            w = max(w, self.tw[i] * c)
        total += sep + sum(self.xs[s] for s in sorted(charged)) + w
        return total, len(migs)

    def evaluate(self, assign) -> tuple[float, int, list[RouteOption]] | None:
        """(objective, migrations, routing) or None when infeasible."""
        if not self.capacity_ok(assign):
            return None
        routes = self.route_all(assign)
        if routes is None:
            return None
        base, migs = self.placement_terms(assign)
        return base + self.cu * sum(r.cost for r in routes), migs, routes

    def rank_vector(self, assign) -> tuple[int, ...]:
        """Tie-break vector: per instance, 0 for staying, else 1 + rank of server by (power, index)."""
        order = self.value_order()
        return tuple(order[i].index(x) for i, x in enumerate(assign))

    def value_order(self) -> list[list[int]]:
        if not hasattr(self, "_order"):
            by_power = sorted(range(self.X), key=lambda x: (self.power[x], x))
            self._order = [[self.h0[i]] + [x for x in by_power if x != self.h0[i]] for i in range(self.n)]
        return self._order

    def to_solution(self, assign, routes) -> ReconfigSolution:
        hosts = {k: self.servers[x] for k, x in zip(self.keys, assign)}
        segments = {}
        for j, opt in enumerate(routes):
            ends = self.endpoints(j, assign)
            segments[self.flows[j].id] = tuple(self.candidates(a, b)[c][0]
                                               for (a, b), c in zip(zip(ends, ends[1:]), opt.choice))
        return make_state(self.instance, hosts, segments, cls=ReconfigSolution)
