"""Branch-and-bound internals for the exact solver.

The pruned search first fixes the set S of powered servers. Every placement uses
exactly one S, so the S-subproblems partition the space. Fixing S pins the energy
term and forces every instance living outside S to migrate.

Inside one S the search branches over whole SFCs. An SFC option is a host tuple
for its chain together with its exact local cost: separable migration terms,
downtime loss and the rule changes of its flows. Only the migration-time term,
server capacities and link capacities couple SFCs, so the sum of per-SFC minima
is a tight bound and options can be visited cheapest first.

With pruning off, a plain instance-by-instance enumeration reaches every placement.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

from .search import CAP_TOL, TIE_TOL, SearchContext

CHECK_EVERY = 256
LAGRANGE_ITERS = 60


def _project(v: list[float]) -> list[float]:
    """Euclidean projection onto {lam >= 0, sum(lam) <= 1}."""
    w = [max(0.0, a) for a in v]
    if sum(w) <= 1.0:
        return w
    u = sorted(v, reverse=True)
    acc = 0.0
    tau = 0.0
    for k, a in enumerate(u, 1):
        acc += a
        t = (acc - 1.0) / k
        if a - t > 0:
            tau = t
    return [max(0.0, a - tau) for a in v]


def group_bound(tws: list[float], m: int) -> float:
    """Least possible max over m groups of (group size x largest member), tws sorted descending.

    Contiguous groups in descending order are optimal, so a greedy pass decides feasibility.
    """
    if not tws or m <= 0:
        return 0.0
    n = len(tws)

    def feasible(w: float) -> bool:
        k = 0
        for _ in range(m):
            if k >= n:
                return True
            k += max(1, int(w / tws[k] * (1 + 1e-12)))
        return k >= n

    cands = sorted({s * t for t in set(tws) for s in range(1, n + 1)})
    lo, hi = 0, len(cands) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(cands[mid]):
            hi = mid
        else:
            lo = mid + 1
    return cands[lo]


def waterfill(levels: list[int], extra: int) -> int:
    """Smallest L with sum(max(0, L - e)) >= extra over the given levels, at least min+1."""
    if extra <= 0:
        return 0
    lv = sorted(levels)
    total = extra
    k = 0
    level = lv[0]
    while True:
        while k < len(lv) and lv[k] <= level:
            k += 1
        nxt = lv[k] if k < len(lv) else None
        room = k * ((nxt - level) if nxt is not None else total)
        if nxt is None or room >= total:
            return level + -(-total // k)
        total -= room
        level = nxt


def better(a: tuple, b: tuple | None) -> bool:
    """Compare (objective, migrations, vector) keys with a tolerance on the objective."""
    if b is None:
        return True
    if a[0] < b[0] - TIE_TOL:
        return True
    if a[0] > b[0] + TIE_TOL:
        return False
    return a[1:] < b[1:]


@dataclass(frozen=True)
class SfcOption:
    cost: float  # local objective contribution, everything except energy and migration time
    vec: tuple[int, ...]
    hosts: tuple[int, ...]
    migs: tuple[tuple[int, int, int, int], ...]  # (instance, dst, src, pair)


class BranchAndBound:
    def __init__(self, ctx: SearchContext, prune: bool = True, deadline: float | None = None):
        self.ctx = ctx
        self.prune = prune
        self.deadline = deadline
        self.best = None  # ((obj, migs, vec), assign, routes)
        self.leaves = 0
        self.dfs_nodes = 0
        self.pruned = 0
        self.subsets = 0
        self.timed_out = False

        n, X = ctx.n, ctx.X
        self.assign = [-1] * n
        self.vec = [0] * n
        self.used = [0] * X
        self.cores = [0] * X
        self.mem = [0.0] * X
        self.cpu = [0.0] * X
        self.eta = [0] * X
        self.pair_eta = [0] * ctx.n_pairs  # migrations on the pair or on any pair sharing a link with it
        self.migs = []
        self.pair_nb = [[p] + ctx.pair_conf[p] for p in range(ctx.n_pairs)]
        order = ctx.value_order()
        self.rank = [{x: r for r, x in enumerate(order[i])} for i in range(n)]
        self.home_count = [ctx.h0.count(y) for y in range(X)]
        self.at = [[i for i in range(n) if ctx.h0[i] == y] for y in range(X)]
        self.total = (sum(ctx.cores), sum(ctx.mem), sum(ctx.cpu))
        self.n_sfc = len(ctx.sfc_members)
        # first instance index of each SFC, and of "after the last SFC"
        self.start = [m[0] for m in ctx.sfc_members] + [n]
        # suffix sums over instances not yet placed, indexed by instance position
        self.cores_rest = [sum(ctx.cores[d:]) for d in range(n + 1)]
        self.mem_rest = [sum(ctx.mem[d:]) for d in range(n + 1)]
        self.cores_big = [max(ctx.cores[d:], default=0) for d in range(n + 1)]
        self.mem_big = [max(ctx.mem[d:], default=0.0) for d in range(n + 1)]
        self.home_rest = [[sum(1 for i in range(d, n) if ctx.h0[i] == y) for y in range(X)] for d in range(n + 1)]
        self.home_cores = [[sum(ctx.cores[i] for i in range(d, n) if ctx.h0[i] == y) for y in range(X)]
                           for d in range(n + 1)]
        self.home_mem = [[sum(ctx.mem[i] for i in range(d, n) if ctx.h0[i] == y) for y in range(X)]
                         for d in range(n + 1)]

    def _tick(self) -> bool:
        self.dfs_nodes += 1
        if self.deadline is not None and self.dfs_nodes % CHECK_EVERY == 0 and time.perf_counter() > self.deadline:
            self.timed_out = True
        return self.timed_out

    # ------------------------------------------------------------ driver

    def run(self) -> None:
        if not self.prune:
            self._plain(0)
            return
        ctx = self.ctx
        plans = []
        for mask in range(1, 1 << ctx.X):
            plan = self._plan(mask)
            if plan is not None:
                plans.append(plan)
        plans.sort(key=lambda p: (p["lb"], p["mask"]))
        for plan in plans:
            if self._skip(plan["lb"], plan["forced"]):
                if plan["lb"] > self.best[0][0] + TIE_TOL:
                    break
                continue
            if not self._expand(plan) or self._skip(plan["lb"], plan["forced"]):
                self.pruned += 1
                continue
            self.subsets += 1
            self._load(plan)
            self._sfc_dfs(0, 0.0, 0.0)
            if self.timed_out:
                return

    def _skip(self, lb: float, migs_lb: int) -> bool:
        if self.best is None:
            return False
        bobj, bmigs, _ = self.best[0]
        return lb > bobj + TIE_TOL or (lb >= bobj - TIE_TOL and migs_lb > bmigs)

    def _plan(self, mask: int) -> dict | None:
        """Cheap bound for the subproblem "exactly the servers in mask are powered"."""
        ctx = self.ctx
        in_s = [bool(mask >> x & 1) for x in range(ctx.X)]
        S = [x for x in range(ctx.X) if in_s[x]]
        if len(S) > ctx.n:
            return None
        tc, tm, tu = self.total
        if (sum(ctx.cap_cores[x] for x in S) < tc or sum(ctx.cap_mem[x] for x in S) < tm - CAP_TOL
                or sum(ctx.cap_cpu[x] for x in S) * (1 + CAP_TOL) < tu):
            return None
        forced = [not in_s[ctx.h0[i]] for i in range(ctx.n)]
        w_forced = 0.0
        for y in range(ctx.X):
            if not in_s[y] and self.home_count[y]:
                w_forced = max(w_forced, max(ctx.tw[i] for i in self.at[y]) * self.home_count[y])
        tws = sorted((ctx.tw[i] for i in range(ctx.n) if forced[i]), reverse=True)
        w_forced = max(w_forced, group_bound(tws, len(S)))
        energy = ctx.wnp * sum(ctx.power[x] for x in S)
        lb = energy + w_forced
        for s, members in enumerate(ctx.sfc_members):
            f = [i for i in members if forced[i]]
            if f:
                lb += ctx.xs[s] + sum(min(ctx.sep[i][x] for x in S) for i in f)
        tmin_rest = [math.inf] * (self.n_sfc + 1)
        tmax_rest = [0.0] * (self.n_sfc + 1)
        for t in range(self.n_sfc - 1, -1, -1):
            tws_t = [ctx.tw[i] for i in ctx.sfc_members[t] if forced[i]]
            tmin_rest[t] = min([tmin_rest[t + 1]] + tws_t)
            tmax_rest[t] = max([tmax_rest[t + 1]] + tws_t)
        if tmax_rest[0] > 0:
            free = [(ctx.cap_cores[x], ctx.cap_mem[x]) for x in S]
            w_forced = max(w_forced, tmax_rest[0] * self._landing(S, free, [0] * ctx.X, 0))
        return {"mask": mask, "in_s": in_s, "S": S, "energy": energy, "w_forced": w_forced,
                "tmin_rest": tmin_rest, "tmax_rest": tmax_rest,
                "forced_per_sfc": [sum(forced[i] for i in m) for m in ctx.sfc_members],
                "forced": sum(forced), "lb": lb}

    def _expand(self, plan: dict) -> bool:
        """Exact per-SFC minima, then every option within the remaining slack."""
        mins = []
        for s in range(self.n_sfc):
            opts = self._sfc_options(s, plan, math.inf, minimum=True)
            if not opts:
                return False
            mins.append(opts[0].cost)
        energy_w = plan["energy"] + plan["w_forced"]
        plan["lb"] = energy_w + sum(mins)
        if self._skip(plan["lb"], plan["forced"]):
            return True
        slack = math.inf if self.best is None else self.best[0][0] + TIE_TOL - plan["lb"]
        options = [self._sfc_options(s, plan, mins[s] + slack) for s in range(self.n_sfc)]
        lcosts, lmins = self._lagrange(options, plan)
        plan["lb"] = max(plan["lb"], plan["energy"] + sum(lmins))
        if self._skip(plan["lb"], plan["forced"]):
            return True
        lslack = math.inf if self.best is None else self.best[0][0] + TIE_TOL - plan["energy"] - sum(lmins)
        plan["options"] = [
            sorted(((lc, o) for lc, o in zip(lcosts[s], options[s]) if lc <= lmins[s] + lslack),
                   key=lambda e: (e[0], e[1].vec))
            for s in range(self.n_sfc)]
        rest = [0.0] * (self.n_sfc + 1)
        lrest = [0.0] * (self.n_sfc + 1)
        forced_rest = [0] * (self.n_sfc + 1)
        for s in range(self.n_sfc - 1, -1, -1):
            rest[s] = rest[s + 1] + mins[s]
            lrest[s] = lrest[s + 1] + lmins[s]
            forced_rest[s] = forced_rest[s + 1] + plan["forced_per_sfc"][s]
        plan["rest"] = rest
        plan["lrest"] = lrest
        plan["forced_rest"] = forced_rest
        return True

    def _lagrange(self, options: list[list[SfcOption]], plan: dict) -> tuple[list[list[float]], list[float]]:
        """Separable bound on local cost plus migration time.

        For weights lam >= 0 with sum(lam) <= 1 the migration-time term is at least
        sum_x lam_x * (sum of tw over migrations touching x), because every server's
        concurrency times its slowest migrant dominates that sum. Charging each option
        its share makes the bound separable per SFC; a subgradient ascent tunes lam.
        Returns the charged cost of every option and the per-SFC minima.
        """
        ctx = self.ctx
        X = ctx.X
        touch = [[[(x, ctx.tw[i]), (h, ctx.tw[i])] for i, x, h, _ in o.migs] for opts in options for o in opts]
        flat = [o for opts in options for o in opts]
        touch = [[e for pair in t for e in pair] for t in touch]
        bounds = [0]
        for opts in options:
            bounds.append(bounds[-1] + len(opts))
        target = None if self.best is None else self.best[0][0] - plan["energy"]
        lam = [0.0] * X
        best_val, best_lam = -math.inf, lam
        theta = 1.0
        stall = 0
        for _ in range(LAGRANGE_ITERS):
            val = 0.0
            g = [0.0] * X
            for s in range(len(options)):
                bi, bv = -1, math.inf
                for k in range(bounds[s], bounds[s + 1]):
                    v = flat[k].cost
                    for x, t in touch[k]:
                        v += lam[x] * t
                    if v < bv:
                        bi, bv = k, v
                val += bv
                for x, t in touch[bi]:
                    g[x] += t
            if val > best_val + 1e-15:
                best_val, best_lam = val, lam
                stall = 0
            else:
                stall += 1
                if stall >= 4:
                    theta /= 2
                    stall = 0
            if target is not None and val > target:
                break
            norm = sum(v * v for v in g)
            if norm == 0.0 or theta < 1e-4:
                break
            gap = (target - val) if target is not None else 0.1 * max(val, 1e-3)
            step = theta * max(gap, 1e-9) / norm
            lam = _project([l + step * v for l, v in zip(lam, g)])
        lam = best_lam
        lcosts, lmins = [], []
        for s in range(len(options)):
            row = []
            for k in range(bounds[s], bounds[s + 1]):
                row.append(flat[k].cost + sum(lam[x] * t for x, t in touch[k]))
            lcosts.append(row)
            lmins.append(min(row))
        return lcosts, lmins

    def _sfc_options(self, s: int, plan: dict, cap: float, minimum: bool = False) -> list[SfcOption]:
        """Host tuples for SFC s inside S with local cost <= cap, sorted by (cost, vec).

        With ``minimum`` only the cheapest tuple is returned (branch-and-bound on cost).
        """
        ctx = self.ctx
        members = ctx.sfc_members[s]
        S = plan["S"]
        in_s = plan["in_s"]
        flows = ctx.flows_of_sfc[s]
        assign = self.assign
        values = []
        tail = [0.0] * (len(members) + 1)
        for k in range(len(members) - 1, -1, -1):
            i = members[k]
            h = ctx.h0[i]
            vals = ([h] if in_s[h] else []) + sorted((x for x in S if x != h), key=lambda x: (ctx.sep[i][x], x))
            values.append(vals)
            tail[k] = tail[k + 1] + (0.0 if in_s[h] else min(ctx.sep[i][x] for x in S))
        values.reverse()
        forced_tail = [any(not in_s[ctx.h0[i]] for i in members[k:]) for k in range(len(members))] + [False]
        out: list[SfcOption] = []
        best = [cap]
        chosen = []

        def rec(k: int, sep: float, moved: bool) -> None:
            lb = sep + tail[k] + (ctx.xs[s] if moved or forced_tail[k] else 0.0)
            if lb > best[0] + TIE_TOL:
                return
            if k == len(members):
                u = 0.0
                for j in flows:
                    r = ctx.best_route(j, assign)
                    if r is None:
                        return
                    u += ctx.cu * r.cost
                cost = lb + u
                if cost > best[0] + TIE_TOL:
                    return
                migs = tuple((i, x, ctx.h0[i], ctx.pid[x][ctx.h0[i]])
                             for i, x in zip(members, chosen) if x != ctx.h0[i])
                opt = SfcOption(cost, tuple(self.rank[i][x] for i, x in zip(members, chosen)),
                                tuple(chosen), migs)
                if minimum:
                    if not out or (cost, opt.vec) < (out[0].cost, out[0].vec):
                        out[:] = [opt]
                        best[0] = cost
                else:
                    out.append(opt)
                return
            i = members[k]
            for x in values[k]:
                assign[i] = x
                chosen.append(x)
                stay = x == ctx.h0[i]
                rec(k + 1, sep + ctx.sep[i][x], moved or not stay)
                chosen.pop()
            assign[i] = -1

        rec(0, 0.0, False)
        out.sort(key=lambda o: (o.cost, o.vec))
        return out

    def _load(self, plan: dict) -> None:
        self.plan = plan
        self.S = plan["S"]
        self.energy = plan["energy"]
        self.w_forced = plan["w_forced"]
        self.options = plan["options"]
        self.rest = plan["rest"]
        self.forced_rest = plan["forced_rest"]
        self.tmin_rest = plan["tmin_rest"]
        self.tmax_rest = plan["tmax_rest"]
        self.lrest = plan["lrest"]

    # ------------------------------------------------------------ pruned search

    def _landing(self, S, free, eta, d: int) -> int:
        """Least concurrency at whichever server of S receives the next migrant.

        Capacity left on the other servers forces a minimum number of the unplaced
        instances (from position d on) onto each server; those not at home there migrate.
        """
        ctx = self.ctx
        rc, rm = self.cores_rest[d], self.mem_rest[d]
        bc, bm = self.cores_big[d], self.mem_big[d]
        fc = sum(f[0] for f in free)
        fm = sum(f[1] for f in free)
        home = self.home_rest[d]
        low = math.inf
        for x, (c, m) in zip(S, free):
            need = 0
            if bc:
                need = max(need, -(-(rc - (fc - c)) // bc))
            if bm > 0:
                need = max(need, math.ceil((rm - (fm - m)) / bm - 1e-9))
            arrive = max(1, need - home[x])
            low = min(low, eta[x] + arrive)
        return low

    def _w_partial(self) -> float:
        ctx = self.ctx
        w = self.w_forced
        eta, pe = self.eta, self.pair_eta
        for i, x, h, p in self.migs:
            c = eta[x] if eta[x] > eta[h] else eta[h]
            if pe[p] > c:
                c = pe[p]
            t = ctx.tw[i] * c
            if t > w:
                w = t
        return w

    def _fits(self, opt: SfcOption, members) -> bool:
        ctx = self.ctx
        add: dict[int, list] = {}
        for i, x in zip(members, opt.hosts):
            a = add.setdefault(x, [0, 0.0, 0.0])
            a[0] += ctx.cores[i]
            a[1] += ctx.mem[i]
            a[2] += ctx.cpu[i]
        for x, (c, m, u) in add.items():
            if (self.cores[x] + c > ctx.cap_cores[x] or self.mem[x] + m > ctx.cap_mem[x] + CAP_TOL
                    or self.cpu[x] + u > ctx.cap_cpu[x] * (1 + CAP_TOL)):
                return False
        return True

    def _evicted(self, d: int) -> int:
        """Unplaced instances that cannot stay home because their powered server is too full."""
        ctx = self.ctx
        bc, bm = self.cores_big[d], self.mem_big[d]
        hc, hm = self.home_cores[d], self.home_mem[d]
        out = 0
        for x in self.S:
            need = 0
            over = hc[x] - (ctx.cap_cores[x] - self.cores[x])
            if over > 0 and bc:
                need = -(-over // bc)
            over = hm[x] - (ctx.cap_mem[x] - self.mem[x])
            if over > CAP_TOL and bm > 0:
                need = max(need, math.ceil(over / bm - 1e-9))
            out += min(need, self.home_rest[d][x])
        return out

    def _prune_at(self, t: int, local: float, llocal: float) -> bool:
        """Bound check after SFCs 0..t-1 are placed."""
        ctx = self.ctx
        S = self.S
        d = self.start[t]
        if sum(1 for x in S if not self.used[x]) > ctx.n - d:
            return True
        if d < ctx.n:
            rc = sum(ctx.cores[d:])
            if rc > sum(ctx.cap_cores[x] - self.cores[x] for x in S):
                return True
        if self.best is None:
            return False
        w = self._w_partial()
        fr = self.forced_rest[t]
        if fr:
            w = max(w, self.tmin_rest[t] * waterfill([self.eta[x] for x in S], fr))
            free = [(ctx.cap_cores[x] - self.cores[x], ctx.cap_mem[x] - self.mem[x]) for x in S]
            w = max(w, self.tmax_rest[t] * self._landing(S, free, self.eta, d))
        lb = self.energy + max(local + self.rest[t] + w, llocal + self.lrest[t])
        bobj, bmigs, bvec = self.best[0]
        if lb > bobj + TIE_TOL:
            return True
        if lb >= bobj - TIE_TOL:
            m = len(self.migs) + self.forced_rest[t]
            if m >= bmigs and d < ctx.n:
                m += self._evicted(d)
            if m > bmigs or (m == bmigs and tuple(self.vec[:d]) > bvec[:d]):
                return True
        return False

    def _sfc_dfs(self, t: int, local: float, llocal: float) -> None:
        if self._tick():
            return
        if t == self.n_sfc:
            if all(self.used[x] for x in self.S):
                self.leaves += 1
                self._evaluate_leaf()
            return
        members = self.ctx.sfc_members[t]
        floor = self.energy + local + self.rest[t + 1] + self.w_forced
        lfloor = self.energy + llocal + self.lrest[t + 1]
        for lc, opt in self.options[t]:
            if self.best is not None:
                cut = self.best[0][0] + TIE_TOL
                if lfloor + lc > cut:
                    break
                if floor + opt.cost > cut:
                    continue
            if not self._fits(opt, members):
                continue
            self._apply(opt, members, +1)
            if self._prune_at(t + 1, local + opt.cost, llocal + lc):
                self.pruned += 1
            else:
                self._sfc_dfs(t + 1, local + opt.cost, llocal + lc)
            self._apply(opt, members, -1)
            if self.timed_out:
                return

    def _apply(self, opt: SfcOption, members, sign: int) -> None:
        ctx = self.ctx
        for i, x, r in zip(members, opt.hosts, opt.vec):
            self.assign[i] = x if sign > 0 else -1
            self.vec[i] = r if sign > 0 else 0
            self.used[x] += sign
            self.cores[x] += sign * ctx.cores[i]
            self.mem[x] += sign * ctx.mem[i]
            self.cpu[x] += sign * ctx.cpu[i]
        for m in opt.migs:
            _, x, h, p = m
            self.eta[x] += sign
            self.eta[h] += sign
            for q in self.pair_nb[p]:
                self.pair_eta[q] += sign
        if sign > 0:
            self.migs.extend(opt.migs)
        elif opt.migs:
            del self.migs[-len(opt.migs):]

    def _evaluate_leaf(self) -> None:
        ctx = self.ctx
        assign = self.assign
        routes = ctx.route_all(assign)
        if routes is None:
            return
        base, migs = ctx.placement_terms(assign)
        obj = base + ctx.cu * sum(r.cost for r in routes)
        key = (obj, migs, tuple(self.vec))
        if better(key, self.best[0] if self.best else None):
            self.best = (key, list(assign), routes)

    # ------------------------------------------------------------ plain enumeration

    def _plain(self, d: int) -> None:
        if self._tick():
            return
        ctx = self.ctx
        if d == ctx.n:
            self.leaves += 1
            if ctx.capacity_ok(self.assign):
                self._evaluate_leaf()
            return
        for r, x in enumerate(ctx.value_order()[d]):
            self.assign[d] = x
            self.vec[d] = r
            self._plain(d + 1)
            if self.timed_out:
                break
        self.assign[d] = -1
