"""Mixed-integer linear form of the reconfiguration problem.

Absolute differences against the current state collapse to linear expressions,
binary products get the usual three-inequality encoding, and max operators become
a continuous variable bounded below by each (optionally big-M gated) term. The
model can be evaluated at a full variable assignment, exported as CPLEX LP text,
parsed back, or handed to HiGHS through scipy.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .costs import GB_TO_GBIT, normalization_bounds, utilization
from .model import Instance, NetworkState, ReconfigSolution, make_state
from .scenarios import instance_load
from .topology import DEFAULT_K_PATHS, candidate_paths, compute_k_matrix, pair_path

KINDS = ("binary", "integer", "continuous")
SENSES = ("<=", ">=", "=")
EVAL_TOL = 1e-9
ONE = "ONE"


class MilpBuildError(ValueError):
    pass


class LpFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Var:
    name: str
    kind: str
    lb: float
    ub: float


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: tuple[tuple[str, float], ...]
    sense: str
    rhs: float


@dataclass(frozen=True)
class MilpModel:
    name: str
    variables: tuple[Var, ...]
    constraints: tuple[Constraint, ...]
    objective: tuple[tuple[str, float], ...]
    obj_constant: float = 0.0
    registry: Mapping[str, tuple] = field(default_factory=dict)

    def var(self, name: str) -> Var:
        if not hasattr(self, "_vars"):
            object.__setattr__(self, "_vars", {v.name: v for v in self.variables})
        return self._vars[name]

    def names(self, kind: str) -> list[str]:
        """Variable names whose registry entry starts with ``kind`` (declaration order)."""
        return [v.name for v in self.variables if self.registry.get(v.name, ("",))[0] == kind]

    def summary(self) -> dict:
        counts = {k: sum(1 for v in self.variables if v.kind == k) for k in KINDS}
        return {"variables": len(self.variables), **counts, "constraints": len(self.constraints)}


class LinExpr:
    """Sparse linear expression: {variable: coefficient} plus a constant."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs: Mapping[str, float] | None = None, const: float = 0.0):
        self.coeffs = dict(coeffs or {})
        self.const = float(const)

    @classmethod
    def var(cls, name: str) -> "LinExpr":
        return cls({name: 1.0})

    @staticmethod
    def _lift(other) -> "LinExpr":
        return other if isinstance(other, LinExpr) else LinExpr(const=other)

    def __add__(self, other) -> "LinExpr":
        other = self._lift(other)
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0.0) + c
        return LinExpr(out, self.const + other.const)

    __radd__ = __add__

    def __mul__(self, k: float) -> "LinExpr":
        return LinExpr({n: c * k for n, c in self.coeffs.items()}, self.const * k)

    __rmul__ = __mul__

    def __neg__(self) -> "LinExpr":
        return self * -1.0

    def __sub__(self, other) -> "LinExpr":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "LinExpr":
        return self._lift(other) - self

    def value(self, assignment: Mapping[str, float]) -> float:
        return self.const + sum(c * assignment[n] for n, c in self.coeffs.items())

    def __repr__(self) -> str:
        terms = " + ".join(f"{c:g}*{n}" for n, c in self.coeffs.items())
        return f"LinExpr({terms or '0'} + {self.const:g})"


def lin_sum(exprs: Iterable) -> LinExpr:
    out = LinExpr()
    for e in exprs:
        out = out + e
    return out


class MilpBuilder:
    """Single-use accumulator for a MilpModel."""

    def __init__(self, name: str = "model"):
        self.name = name
        self._vars: dict[str, Var] = {}
        self._cons: list[Constraint] = []
        self._con_names: set[str] = set()
        self._registry: dict[str, tuple] = {}
        self._objective = LinExpr()
        self._done = False

    def add_var(self, name: str, kind: str = "continuous", lb: float = 0.0, ub: float = math.inf,
                meaning: tuple = ()) -> LinExpr:
        if self._done:
            raise MilpBuildError("builder already finished")
        if kind not in KINDS:
            raise MilpBuildError(f"unknown variable kind {kind!r}")
        if name in self._vars:
            raise MilpBuildError(f"duplicate variable {name!r}")
        if kind == "binary":
            lb, ub = 0.0, 1.0
        self._vars[name] = Var(name, kind, float(lb), float(ub))
        self._registry[name] = tuple(meaning) or ("aux", name)
        return LinExpr.var(name)

    def has_var(self, name: str) -> bool:
        return name in self._vars

    def add_constraint(self, name: str, lhs, sense: str, rhs=0.0) -> None:
        if sense not in SENSES:
            raise MilpBuildError(f"unknown sense {sense!r}")
        if name in self._con_names:
            raise MilpBuildError(f"duplicate constraint {name!r}")
        expr = LinExpr._lift(lhs) - LinExpr._lift(rhs)
        for n in expr.coeffs:
            if n not in self._vars:
                raise MilpBuildError(f"constraint {name!r} references undeclared variable {n!r}")
        coeffs = tuple((n, c) for n, c in expr.coeffs.items() if c != 0.0)
        self._con_names.add(name)
        self._cons.append(Constraint(name, coeffs, sense, -expr.const))

    def set_objective(self, expr: LinExpr) -> None:
        for n in expr.coeffs:
            if n not in self._vars:
                raise MilpBuildError(f"objective references undeclared variable {n!r}")
        self._objective = expr

    def build(self) -> MilpModel:
        self._done = True
        obj = tuple((n, c) for n, c in self._objective.coeffs.items() if c != 0.0)
        return MilpModel(self.name, tuple(self._vars.values()), tuple(self._cons), obj,
                         self._objective.const, dict(self._registry))


# ---------------------------------------------------------------- linearization primitives

def lin_abs_diff(builder: MilpBuilder, a: LinExpr, b: int) -> LinExpr:
    """|a - b| for a binary expression a and a constant b in {0, 1}."""
    if b not in (0, 1):
        raise MilpBuildError(f"constant operand must be 0 or 1, got {b!r}")
    return LinExpr._lift(a) if b == 0 else 1.0 - LinExpr._lift(a)


def lin_product(builder: MilpBuilder, a: LinExpr, b: LinExpr, name: str, meaning: tuple = ()) -> LinExpr:
    """Binary z with z <= a, z <= b, z >= a + b - 1, so z = a*b for binary a, b."""
    z = builder.add_var(name, "binary", meaning=meaning or ("product", name))
    builder.add_constraint(f"{name}:le_a", z - a, "<=")
    builder.add_constraint(f"{name}:le_b", z - b, "<=")
    builder.add_constraint(f"{name}:ge_ab", z - a - b, ">=", -1.0)
    return z


def lin_max(builder: MilpBuilder, terms: list, name: str, activation: list | None = None,
            big_m=None, meaning: tuple = (), kind: str = "continuous") -> LinExpr:
    """Variable t >= 0 with t >= term (or t >= term - M (1 - act) when gated).

    Under minimization with positive weight on t, t equals the largest active term
    (or 0 when none is active).
    """
    if activation is not None:
        if len(activation) != len(terms):
            raise MilpBuildError("one activation per term required")
        if big_m is None:
            raise MilpBuildError(f"lin_max {name!r}: gated terms need a big-M bound")
        ms = list(big_m) if isinstance(big_m, (list, tuple)) else [big_m] * len(terms)
        if len(ms) != len(terms) or any(m is None or not math.isfinite(m) for m in ms):
            raise MilpBuildError(f"lin_max {name!r}: big-M must be finite for every term")
    t = builder.add_var(name, kind, 0.0, math.inf, meaning=meaning or ("max", name))
    for k, term in enumerate(terms):
        if activation is None:
            builder.add_constraint(f"{name}:ge{k}", t - term, ">=")
        else:
            builder.add_constraint(f"{name}:ge{k}", t - term - ms[k] * activation[k], ">=", -ms[k])
    return t


# ---------------------------------------------------------------- the reconfiguration model

def _n(*parts) -> str:
    return "_".join(str(p) for p in parts)


def build_milp(instance: Instance, state: NetworkState, alpha: float, k_paths: int = DEFAULT_K_PATHS) -> MilpModel:
    """Linear model over placement W, per-segment path choice p and derived routing R.

    Variable names carry their meaning; ``model.registry`` maps each to a tuple:
    ("W", server, vnf, sfc), ("on", server), ("z", sfc, seg, x, y), ("p", flow, seg, a, b, cand),
    ("R", i, j, flow), ("res", i, j), ("mig_sfc", sfc), ("eta_server", x), ("eta_pair", x, y),
    ("conc", sfc, vnf, x), ("time",), ("const",).
    """
    if not 0.0 <= alpha <= 1.0:
        raise MilpBuildError(f"alpha must lie in [0, 1], got {alpha}")
    if k_paths < 1:
        raise MilpBuildError("k_paths must be >= 1")
    topo = instance.topology
    b = MilpBuilder(instance.name or "reconfig")
    keys = list(instance.instance_keys)
    servers = [x.id for x in instance.servers]
    hosts = state.hosts()
    bounds = normalization_bounds(instance, state, k_paths)
    util = utilization(state, instance)
    b.add_var(ONE, "continuous", 1.0, 1.0, meaning=("const",))

    W = {}
    for s, v in keys:
        for x in servers:
            W[(x, s, v)] = b.add_var(_n("W", x, v, s), "binary", meaning=("W", x, v, s))
    # (a) exactly one host per chain element
    for s, v in keys:
        b.add_constraint(_n("assign", v, s), lin_sum(W[(x, s, v)] for x in servers), "=", 1.0)
    on = {}
    for x in servers:
        on[x] = b.add_var(_n("on", x), "binary", meaning=("on", x))
        for s, v in keys:
            b.add_constraint(_n("on", x, v, s), on[x] - W[(x, s, v)], ">=")
        b.add_constraint(_n("on_used", x), on[x] - lin_sum(W[(x, s, v)] for s, v in keys), "<=")

    # (c) server resources
    for srv in instance.servers:
        x = srv.id
        load = [instance_load(instance, k) for k in keys]
        b.add_constraint(_n("cores", x), lin_sum(l[0] * W[(x, s, v)] for l, (s, v) in zip(load, keys)),
                         "<=", srv.cores)
        b.add_constraint(_n("mem", x), lin_sum(l[1] * W[(x, s, v)] for l, (s, v) in zip(load, keys)),
                         "<=", srv.memory)
        b.add_constraint(_n("cpu", x), lin_sum(l[2] * W[(x, s, v)] for l, (s, v) in zip(load, keys)),
                         "<=", srv.cpu)

    # consecutive-host products, shared by every flow of an SFC
    Z = {}
    for sfc in instance.sfcs:
        chain = sfc.chain
        for t in range(1, len(chain)):
            for x in servers:
                for y in servers:
                    Z[(sfc.id, t, x, y)] = lin_product(b, W[(x, sfc.id, chain[t - 1])], W[(y, sfc.id, chain[t])],
                                                       _n("z", sfc.id, t, x, y), ("z", sfc.id, t, x, y))

    # (e) path choice per segment, (f) delay; link usage per flow
    by_link: dict[str, dict[tuple, list]] = {}  # flow -> link -> every p using it
    by_seg: dict[str, dict[tuple, LinExpr]] = {}  # flow -> (segment, link) -> sum of p in that segment
    for f in instance.flows:
        chain = instance.sfc(f.sfc).chain
        k = len(chain)
        links_f = by_link.setdefault(f.id, {})
        segs_f = by_seg.setdefault(f.id, {})
        delay = LinExpr()
        for t in range(k + 1):
            if t == 0:
                options = [((f.ingress, x), W[(x, f.sfc, chain[0])]) for x in servers]
            elif t == k:
                options = [((x, f.egress), W[(x, f.sfc, chain[-1])]) for x in servers]
            else:
                options = [((x, y), Z[(f.sfc, t, x, y)]) for x in servers for y in servers]
            for (a, c_end), gate in options:
                paths = candidate_paths(topo, a, c_end, k_paths)
                if not paths:
                    raise MilpBuildError(f"no candidate path {a}->{c_end}")
                ps = []
                for ci, path in enumerate(paths):
                    p = b.add_var(_n("p", f.id, t, a, c_end, ci), "binary", meaning=("p", f.id, t, a, c_end, ci))
                    ps.append(p)
                    delay = delay + path.latency * p
                    for l in path.links:
                        segs_f[(t, l)] = segs_f.get((t, l), LinExpr()) + p
                        links_f.setdefault(l, []).append(p)
                b.add_constraint(_n("choose", f.id, t, a, c_end), lin_sum(ps) - gate, "=")
        b.add_constraint(_n("delay", f.id), delay, "<=", f.delay_threshold)

    R = {}
    u_expr = LinExpr()
    for f in instance.flows:
        M = state.route(f.id)
        links_f = by_link[f.id]
        seg_of_link: dict[tuple, list] = {}
        for (t, l), e in by_seg[f.id].items():
            seg_of_link.setdefault(l, []).append((t, e))
        for l in sorted(links_f, key=lambda l: (topo.rank(l[0]), topo.rank(l[1]))):
            r = b.add_var(_n("R", l[0], l[1], f.id), "binary", meaning=("R", l[0], l[1], f.id))
            R[(f.id, l)] = r
            # at most one candidate per segment is active, so each segment sum is an OR
            for t, e in seg_of_link[l]:
                b.add_constraint(_n("R_ge", l[0], l[1], f.id, t), r - e, ">=")
            b.add_constraint(_n("R_le", l[0], l[1], f.id), r - lin_sum(links_f[l]), "<=")
            if topo.is_switch(l[0]) and topo.is_switch(l[1]):
                u_expr = u_expr + lin_abs_diff(b, r, int(l in M))
        u_expr = u_expr + sum(1 for l in M if l not in links_f)

    # migration indicators m_i = 1 - W[h_i]; moves to x are W[x] for x != h_i
    mig = {k: lin_abs_diff(b, W[(hosts[k], *k)], 1) for k in keys}
    moves = [(k, x) for k in keys for x in servers if x != hosts[k]]

    # (d) link capacity minus migration reservation
    reserve: dict[tuple, list] = {}
    for k, x in moves:
        a, c_end = sorted((x, hosts[k]), key=topo.rank)
        for u, v in pair_path(topo, a, c_end).links:
            for l in ((u, v), (v, u)):
                reserve.setdefault(l, []).append(W[(x, *k)])
    for l in topo.directed_links():
        flows = [(f, R[(f.id, l)]) for f in instance.flows if (f.id, l) in R]
        if not flows and l not in reserve:
            continue
        lhs = lin_sum(f.gbps * r for f, r in flows)
        if l in reserve:
            res = b.add_var(_n("res", *l), "binary", meaning=("res", *l))
            for q, w in enumerate(reserve[l]):
                b.add_constraint(_n("res", *l, q), res - w, ">=")
            lhs = lhs + instance.migration_bw * res
        b.add_constraint(_n("linkcap", *l), lhs, "<=", topo.link(*l).bandwidth)

    # cost terms
    v_expr = lin_sum(instance.vnf(v).size * mig[(s, v)] for s, v in keys)
    y_expr = lin_sum(util[(s, v)] * instance.vnf(v).penalty * mig[(s, v)] for s, v in keys)
    z_expr = lin_sum(instance.server(x).overhead * lin_abs_diff(b, W[(x, s, v)], int(hosts[(s, v)] == x))
                     for s, v in keys for x in servers)
    x_expr = LinExpr()
    for sfc in instance.sfcs:
        d = b.add_var(_n("d", sfc.id), "binary", meaning=("mig_sfc", sfc.id))
        for v in sfc.chain:
            b.add_constraint(_n("d", sfc.id, v), d - mig[(sfc.id, v)], ">=")
        x_expr = x_expr + instance.rho * sfc.revenue_rate * instance.sfc_rate_gbps(sfc.id) * d

    # concurrency counts
    eta = {}
    for x in servers:
        expr = lin_sum(W[(x, *k)] for k in keys if hosts[k] != x) + lin_sum(mig[k] for k in keys if hosts[k] == x)
        eta[x] = b.add_var(_n("nsrv", x), "integer", 0, len(keys), meaning=("eta_server", x))
        b.add_constraint(_n("nsrv", x), eta[x] - expr, "=")
    km = compute_k_matrix(topo)
    pairs = [(x, y) for i, x in enumerate(servers) for y in servers[i + 1:]]
    direct = {}
    for x, y in pairs:
        direct[frozenset((x, y))] = (lin_sum(W[(y, *k)] for k in keys if hosts[k] == x)
                                     + lin_sum(W[(x, *k)] for k in keys if hosts[k] == y))
    eta_pair = {}
    for x, y in pairs:
        p = frozenset((x, y))
        expr = direct[p] + lin_sum(direct[q] for q in km.sharing(x, y))
        eta_pair[p] = b.add_var(_n("npair", x, y), "integer", 0, len(keys) * len(pairs), meaning=("eta_pair", x, y))
        b.add_constraint(_n("npair", x, y), eta_pair[p] - expr, "=")

    w_max = bounds.w
    time_terms, acts = [], []
    for k, x in moves:
        s, v = k
        h = hosts[k]
        c = lin_max(b, [eta[x], eta_pair[frozenset((x, h))], eta[h]], _n("conc", v, s, x),
                    meaning=("conc", s, v, x))
        time_terms.append(GB_TO_GBIT * instance.vnf(v).size / instance.migration_bw * c)
        acts.append(W[(x, s, v)])
    if time_terms:
        t_var = lin_max(b, time_terms, "Tmax", activation=acts, big_m=w_max, meaning=("time",))
    else:
        t_var = b.add_var("Tmax", "continuous", 0.0, math.inf, meaning=("time",))

    def norm(expr: LinExpr, bound: float) -> LinExpr:
        return expr * (1.0 / bound) if bound > 0 else LinExpr()

    rec = (norm(u_expr, bounds.u) + norm(v_expr, bounds.v) + norm(t_var, bounds.w)
           + norm(x_expr, bounds.x) + norm(y_expr, bounds.y) + norm(z_expr, bounds.z)) * (1.0 / 6.0)
    energy = lin_sum(instance.server(x).power * on[x] for x in servers)
    # the constant is exported through the fixed ONE variable
    b.set_objective(norm(energy, bounds.power) * (1.0 - alpha) + rec * alpha)
    return b.build()


# ---------------------------------------------------------------- evaluation

def evaluate_assignment(model: MilpModel, assignment: Mapping[str, float]) -> tuple[float, bool, list[str]]:
    """(objective, all constraints/bounds/integrality satisfied, names of violated rows)."""
    missing = [v.name for v in model.variables if v.name not in assignment]
    if missing:
        raise ValueError(f"assignment lacks {len(missing)} variable(s), e.g. {missing[:3]}")
    bad = []
    for v in model.variables:
        val = assignment[v.name]
        if val < v.lb - EVAL_TOL or val > v.ub + EVAL_TOL:
            bad.append(f"bound:{v.name}")
        elif v.kind != "continuous" and abs(val - round(val)) > EVAL_TOL:
            bad.append(f"integrality:{v.name}")
    for c in model.constraints:
        lhs = sum(coef * assignment[n] for n, coef in c.coeffs)
        scale = max(1.0, abs(c.rhs))
        if c.sense == "<=" and lhs > c.rhs + EVAL_TOL * scale:
            bad.append(c.name)
        elif c.sense == ">=" and lhs < c.rhs - EVAL_TOL * scale:
            bad.append(c.name)
        elif c.sense == "=" and abs(lhs - c.rhs) > EVAL_TOL * scale:
            bad.append(c.name)
    obj = model.obj_constant + sum(coef * assignment[n] for n, coef in model.objective)
    return obj, not bad, bad


def assignment_from_solution(model: MilpModel, instance: Instance, state: NetworkState,
                             solution: NetworkState, k_paths: int = DEFAULT_K_PATHS) -> dict[str, float]:
    """Full variable assignment for a (placement, per-segment candidate path) solution.

    Auxiliaries take the values a minimizing solver would give them: products and
    ORs exact, max variables equal to their largest active term.
    """
    from .feasibility import segment_decompose

    topo = instance.topology
    before = state.hosts()
    after = solution.hosts()
    placed = set(solution.placement)  # (server, vnf, sfc), same order as the W registry entries
    chosen = set()
    used: dict[str, set] = {}
    for f in instance.flows:
        paths = segment_decompose(instance, solution, f, after)
        ends = [f.ingress] + [after[(f.sfc, v)] for v in instance.sfc(f.sfc).chain] + [f.egress]
        links = set()
        for t, (p, a, c_end) in enumerate(zip(paths, ends, ends[1:])):
            cands = candidate_paths(topo, a, c_end, k_paths)
            match = [i for i, q in enumerate(cands) if q.nodes == p.nodes]
            if not match:
                raise ValueError(f"flow {f.id} segment {t} is not among the {k_paths} candidates")
            chosen.add((f.id, t, a, c_end, match[0]))
            links |= set(p.links)
        used[f.id] = links
    migs = {k for k in after if after[k] != before[k]}
    eta = {x.id: 0 for x in instance.servers}
    direct: dict[frozenset, int] = {}
    for k in migs:
        eta[after[k]] += 1
        eta[before[k]] += 1
        p = frozenset((after[k], before[k]))
        direct[p] = direct.get(p, 0) + 1
    km = compute_k_matrix(topo)

    def pair_load(x, y):
        return direct.get(frozenset((x, y)), 0) + sum(direct.get(q, 0) for q in km.sharing(x, y))

    reserved = set()
    for k in migs:
        a, c_end = sorted((after[k], before[k]), key=topo.rank)
        for u, v in pair_path(topo, a, c_end).links:
            reserved |= {(u, v), (v, u)}

    def conc(s, v, x):
        h = before[(s, v)]
        return max(eta[x], pair_load(x, h), eta[h])

    out = {}
    for var in model.variables:
        m = model.registry.get(var.name, ("aux",))
        tag = m[0]
        if tag == "const":
            val = 1.0
        elif tag == "W":
            val = float(m[1:] in placed)
        elif tag == "on":
            val = float(any(x == m[1] for x, _, _ in placed))
        elif tag == "z":
            _, s, t, x, y = m
            chain = instance.sfc(s).chain
            val = float(after[(s, chain[t - 1])] == x and after[(s, chain[t])] == y)
        elif tag == "p":
            val = float(m[1:] in chosen)
        elif tag == "R":
            val = float((m[1], m[2]) in used[m[3]])
        elif tag == "res":
            val = float((m[1], m[2]) in reserved)
        elif tag == "mig_sfc":
            val = float(any(k[0] == m[1] for k in migs))
        elif tag == "eta_server":
            val = float(eta[m[1]])
        elif tag == "eta_pair":
            val = float(pair_load(m[1], m[2]))
        elif tag == "conc":
            val = float(conc(m[1], m[2], m[3]))
        elif tag == "time":
            val = max((GB_TO_GBIT * instance.vnf(v).size * conc(s, v, after[(s, v)]) / instance.migration_bw
                       for s, v in migs), default=0.0)
        else:
            raise ValueError(f"cannot derive a value for {var.name!r} ({tag})")
        out[var.name] = val
    return out


def decode_solution(model: MilpModel, instance: Instance, values: Mapping[str, float]) -> ReconfigSolution:
    """Placement and segments from a solver's variable values."""
    topo = instance.topology
    hosts = {}
    for name in model.names("W"):
        if values[name] > 0.5:
            _, x, v, s = model.registry[name]
            hosts[(s, v)] = x
    segs: dict[str, dict[int, tuple]] = {}
    for name in model.names("p"):
        if values[name] > 0.5:
            _, f, t, a, c_end, ci = model.registry[name]
            segs.setdefault(f, {})[t] = (a, c_end, ci)
    k = _k_of(model)
    segments = {}
    for f, parts in segs.items():
        segments[f] = tuple(candidate_paths(topo, a, c_end, k)[ci] for _, (a, c_end, ci) in sorted(parts.items()))
    return make_state(instance, hosts, segments, cls=ReconfigSolution)


def _k_of(model: MilpModel) -> int:
    return 1 + max((model.registry[n][5] for n in model.names("p")), default=0)


# ---------------------------------------------------------------- LP text format

_LP_OK = re.compile(r"[^A-Za-z0-9_.\[\]{}()#$%&~@!|]")


def _sanitize(name: str) -> str:
    out = _LP_OK.sub("_", name)
    if not out or out[0].isdigit() or out[0] in "eE.":
        out = "x" + out
    return out


def _num(c: float) -> str:
    r = repr(float(c))
    return r[:-2] if r.endswith(".0") else r


def _expr(terms, width: int = 240) -> str:
    parts = []
    for n, c in terms:
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        parts.append(f"{sign} {n}" if mag == 1.0 else f"{sign} {_num(mag)} {n}")
    if not parts:
        return "0 " + ONE  # never emitted for our models, kept for well-formedness
    lines, cur = [], ""
    for p in parts:
        if cur and len(cur) + len(p) + 1 > width:
            lines.append(cur)
            cur = p
        else:
            cur = f"{cur} {p}" if cur else p
    lines.append(cur)
    return "\n    ".join(lines)


def export_lp(model: MilpModel) -> str:
    """CPLEX LP text with every variable listed in Bounds in declaration order."""
    mapping = {}
    seen = {}
    for v in model.variables:
        s = _sanitize(v.name)
        if s in seen:
            raise LpFormatError(f"variables {seen[s]!r} and {v.name!r} collide as {s!r}")
        seen[s] = v.name
        mapping[v.name] = s
    cseen = {}
    for c in model.constraints:
        s = _sanitize(c.name)
        if s in cseen:
            raise LpFormatError(f"constraints {cseen[s]!r} and {c.name!r} collide as {s!r}")
        cseen[s] = c.name
    obj = [(mapping[n], c) for n, c in model.objective]
    if model.obj_constant:
        if ONE not in mapping:
            raise LpFormatError("objective constant needs the fixed ONE variable")
        obj = obj + [(mapping[ONE], model.obj_constant)]
    out = [f"\\ {model.name}", "Minimize", f" obj: {_expr(obj)}", "Subject To"]
    for c in model.constraints:
        lhs = _expr([(mapping[n], k) for n, k in c.coeffs])
        out.append(f" {_sanitize(c.name)}: {lhs} {c.sense} {_num(c.rhs)}")
    out.append("Bounds")
    for v in model.variables:
        n = mapping[v.name]
        if v.lb == v.ub:
            out.append(f" {n} = {_num(v.lb)}")
        elif v.lb == -math.inf and v.ub == math.inf:
            out.append(f" {n} free")
        else:
            lo = "-inf" if v.lb == -math.inf else _num(v.lb)
            hi = "+inf" if v.ub == math.inf else _num(v.ub)
            out.append(f" {lo} <= {n} <= {hi}")
    for section, kind in (("Binaries", "binary"), ("Generals", "integer")):
        names = [mapping[v.name] for v in model.variables if v.kind == kind]
        if names:
            out.append(section)
            out.extend(f" {n}" for n in names)
    out.append("End")
    return "\n".join(out) + "\n"


def _parse_expr(text: str) -> list[tuple[str, float]]:
    tokens = text.replace("\n", " ").split()
    terms = []
    sign = 1.0
    coef = None
    for tok in tokens:
        if tok in "+-":
            sign = -1.0 if tok == "-" else 1.0
            continue
        try:
            coef = float(tok)
            continue
        except ValueError:
            pass
        terms.append((tok, sign * (1.0 if coef is None else coef)))
        sign, coef = 1.0, None
    return terms


def parse_lp(text: str, registry: Mapping[str, tuple] | None = None) -> MilpModel:
    """Parse LP text as written by ``export_lp``; the fixed ONE term becomes the objective constant."""
    section = None
    name = "model"
    stmts: dict[str, list[str]] = {"obj": [], "st": [], "bounds": [], "bin": [], "gen": []}
    heads = {"minimize": "obj", "subject to": "st", "bounds": "bounds", "binaries": "bin", "generals": "gen"}
    for raw in text.splitlines():
        line = raw.rstrip()
        if not line:
            continue
        if line.startswith("\\"):
            name = line[1:].strip() or name
            continue
        low = line.strip().lower()
        if low in heads:
            section = heads[low]
            continue
        if low == "end":
            break
        if section is None:
            raise LpFormatError(f"content before any section: {line!r}")
        if line.startswith("    ") and stmts[section]:
            stmts[section][-1] += " " + line.strip()
        else:
            stmts[section].append(line.strip())
    if not stmts["obj"]:
        raise LpFormatError("missing objective")
    # variables in Bounds order
    variables: dict[str, list] = {}
    for st in stmts["bounds"]:
        parts = st.split()
        if len(parts) == 3 and parts[1] == "=":
            variables[parts[0]] = [float(parts[2]), float(parts[2])]
        elif len(parts) == 2 and parts[1] == "free":
            variables[parts[0]] = [-math.inf, math.inf]
        elif len(parts) == 5 and parts[1] == "<=" and parts[3] == "<=":
            variables[parts[2]] = [float(parts[0]), float(parts[4])]
        else:
            raise LpFormatError(f"unsupported bound: {st!r}")
    kinds = {n: "continuous" for n in variables}
    for sec, kind in (("bin", "binary"), ("gen", "integer")):
        for n in stmts[sec]:
            if n not in kinds:
                raise LpFormatError(f"{kind} variable {n!r} has no bound line")
            kinds[n] = kind
    obj_text = stmts["obj"][0]
    if ":" not in obj_text:
        raise LpFormatError("objective must be named")
    objective = _parse_expr(obj_text.split(":", 1)[1])
    const = 0.0
    if ONE in variables and variables[ONE] == [1.0, 1.0]:
        keep = []
        for n, c in objective:
            if n == ONE:
                const += c
            else:
                keep.append((n, c))
        objective = keep
    cons = []
    for st in stmts["st"]:
        if ":" not in st:
            raise LpFormatError(f"unnamed constraint: {st!r}")
        cname, body = st.split(":", 1)
        m = re.match(r"(.*)\s(<=|>=|=)\s*(\S+)\s*$", body)
        if not m:
            raise LpFormatError(f"constraint {cname!r} lacks a sense/rhs")
        terms = _parse_expr(m.group(1))
        for n, _ in terms:
            if n not in variables:
                raise LpFormatError(f"constraint {cname!r} references undeclared variable {n!r}")
        cons.append(Constraint(cname.strip(), tuple(terms), m.group(2), float(m.group(3))))
    for n, _ in objective:
        if n not in variables:
            raise LpFormatError(f"objective references undeclared variable {n!r}")
    vars_ = tuple(Var(n, kinds[n], lb, ub) for n, (lb, ub) in variables.items())
    return MilpModel(name, vars_, tuple(cons), tuple(objective), const, dict(registry or {}))


def registry_doc(model: MilpModel) -> dict:
    """JSON sidecar: exported (sanitized) name -> semantic tuple."""
    return {"format": "sfc-reconfig/lp-registry", "version": 1, "model": model.name,
            "variables": {_sanitize(v.name): list(model.registry.get(v.name, ("aux", v.name)))
                          for v in model.variables}}


def write_lp(model: MilpModel, path: str) -> tuple[str, str]:
    """Write ``path`` and ``path + '.vars.json'``; returns both paths."""
    side = path + ".vars.json"
    with open(path, "w") as fh:
        fh.write(export_lp(model))
    with open(side, "w") as fh:
        json.dump(registry_doc(model), fh, indent=1, sort_keys=True)
    return path, side


# ---------------------------------------------------------------- external solver

def solve_with_highs(model: MilpModel, time_limit: float | None = None) -> tuple[str, float, dict[str, float]]:
    """Solve with HiGHS via scipy; returns (status, objective, values)."""
    import numpy as np
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import coo_matrix

    idx = {v.name: i for i, v in enumerate(model.variables)}
    c = np.zeros(len(idx))
    for n, k in model.objective:
        c[idx[n]] += k
    rows, cols, vals, lo, hi = [], [], [], [], []
    for r, con in enumerate(model.constraints):
        for n, k in con.coeffs:
            rows.append(r)
            cols.append(idx[n])
            vals.append(k)
        lo.append(-np.inf if con.sense == "<=" else con.rhs)
        hi.append(np.inf if con.sense == ">=" else con.rhs)
    integrality = np.array([0 if v.kind == "continuous" else 1 for v in model.variables])
    bounds = Bounds([v.lb for v in model.variables], [v.ub for v in model.variables])
    cons = []
    if model.constraints:
        A = coo_matrix((vals, (rows, cols)), shape=(len(model.constraints), len(idx))).tocsr()
        cons = [LinearConstraint(A, lo, hi)]
    opts = {"disp": False, "mip_rel_gap": 0.0}
    if time_limit is not None:
        opts["time_limit"] = time_limit
    res = milp(c, integrality=integrality, bounds=bounds, constraints=cons, options=opts)
    if res.x is None:
        return res.message, math.inf, {}
    values = {v.name: float(res.x[i]) for i, v in enumerate(model.variables)}
    return ("optimal" if res.status == 0 else res.message), float(res.fun) + model.obj_constant, values
