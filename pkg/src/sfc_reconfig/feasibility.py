"""Constraint checks for a placement + routing, reported as data rather than raised.

These are reconstructed SFC-embedding constraints: one placement per chain
element, consistent flow allocation, server cores/memory/CPU, directed link
capacity (minus the migration reservation), chain-connected routing and a per-flow
delay bound.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .model import Flow, Instance, InstanceKey, NetworkState, flow_endpoints
from .topology import Path, pair_path

KINDS = ("placement-cardinality", "assignment-consistency", "cpu-capacity", "core-capacity",
         "memory-capacity", "link-capacity", "chain-connectivity", "delay-bound")

TOL = 1e-9


class SegmentError(ValueError):
    pass


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: tuple
    measured: float
    limit: float

    def to_dict(self) -> dict:
        return {"kind": self.kind, "subject": list(self.subject), "measured": self.measured, "limit": self.limit}

    def __str__(self) -> str:
        return f"{self.kind:<22} {'/'.join(map(str, self.subject)):<30} measured={self.measured:g} limit={self.limit:g}"


@dataclass(frozen=True)
class ViolationReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.feasible

    def kinds(self) -> Counter:
        return Counter(v.kind for v in self.violations)

    def to_dict(self) -> dict:
        return {"feasible": self.feasible, "violations": [v.to_dict() for v in self.violations]}

    def render(self) -> str:
        if self.feasible:
            return "feasible: no violations"
        lines = [f"{len(self.violations)} violation(s):"]
        lines += [f"  {v}" for v in self.violations]
        return "\n".join(lines)


def _segments_ok(instance: Instance, flow: Flow, ends: list[str], paths: tuple[Path, ...]) -> str | None:
    topo = instance.topology
    if len(paths) != len(ends) - 1:
        return f"expected {len(ends) - 1} segments, got {len(paths)}"
    for (a, b), p in zip(zip(ends, ends[1:]), paths):
        if a == b:
            if p.nodes not in ((), (a,)):
                return f"segment {a}->{b} should be empty"
            continue
        if not p.nodes or p.nodes[0] != a or p.nodes[-1] != b:
            return f"segment does not run {a}->{b}"
        if len(set(p.nodes)) != len(p.nodes):
            return f"segment {a}->{b} is not loop-free"
        for u, v in p.links:
            if not topo.has_link(u, v):
                return f"segment {a}->{b} uses missing link {u}-{v}"
    return None


def _reconstruct(instance: Instance, route: frozenset, a: str, b: str) -> Path:
    """Min-hop path a->b using only the flow's switch links plus server attachment links."""
    topo = instance.topology
    if a == b:
        return Path(())
    from collections import deque

    prev = {a: None}
    queue = deque([a])
    while queue:
        u = queue.popleft()
        if u == b:
            break
        for v in topo.neighbors(u):
            if v in prev:
                continue
            if topo.is_switch(u) and topo.is_switch(v) and (u, v) not in route:
                continue
            prev[v] = u
            queue.append(v)
    if b not in prev:
        raise SegmentError(f"routing has no {a}->{b} segment")
    nodes = [b]
    while prev[nodes[-1]] is not None:
        nodes.append(prev[nodes[-1]])
    return topo.make_path(reversed(nodes))


def segment_decompose(instance: Instance, solution: NetworkState, flow: Flow,
                      hosts: Mapping[InstanceKey, str] | None = None) -> list[Path]:
    """Ordered segments ingress -> VNF hosts -> egress whose switch links make up R for the flow."""
    hosts = solution.hosts() if hosts is None else hosts
    ends = flow_endpoints(instance, flow, hosts)
    route = solution.route(flow.id)
    stored = solution.segments.get(flow.id)
    if stored is not None:
        problem = _segments_ok(instance, flow, ends, stored)
        if problem:
            raise SegmentError(problem)
        paths = list(stored)
    else:
        paths = [_reconstruct(instance, route, a, b) for a, b in zip(ends, ends[1:])]
    topo = instance.topology
    used = {(u, v) for p in paths for u, v in p.links if topo.is_switch(u) and topo.is_switch(v)}
    if used != set(route):
        extra = sorted(set(route) - used)
        missing = sorted(used - set(route))
        raise SegmentError(f"routing disagrees with segments (unexplained {extra}, missing {missing})")
    return paths


def migration_pairs(reference: NetworkState | None, solution: NetworkState) -> set[frozenset]:
    if reference is None:
        return set()
    before = reference.hosts()
    after = solution.hosts()
    return {frozenset((before[k], after[k])) for k in after if k in before and before[k] != after[k]}


def validate(instance: Instance, solution: NetworkState, reference: NetworkState | None = None) -> ViolationReport:
    """Check constraints (a)-(f). ``reference`` is the pre-reconfiguration state; when given,
    links on migration paths lose ``migration_bw`` of capacity."""
    out: list[Violation] = []
    keys = instance.instance_keys

    # (a) each chain element placed exactly once
    placed: dict[InstanceKey, list[str]] = {k: [] for k in keys}
    for x, v, s in sorted(solution.placement):
        placed.setdefault((s, v), []).append(x)
    hosts = {}
    for k in keys:
        xs = sorted(placed[k])
        if len(xs) != 1:
            out.append(Violation("placement-cardinality", k, len(xs), 1))
        if xs:
            hosts[k] = xs[0]

    # (b) flow allocation matches placement and chain membership
    alloc: dict[tuple[str, str], list[str]] = {}
    for x, f, v, s in sorted(solution.flow_assignment):
        alloc.setdefault((f, v), []).append(x)
        flow = instance._index["flow"].get(f)
        if flow is None or flow.sfc != s or v not in instance.sfc(s).chain:
            out.append(Violation("assignment-consistency", (x, f, v, s), 1, 0))
        elif hosts.get((s, v)) is not None and (s, v) in placed and x not in placed[(s, v)]:
            out.append(Violation("assignment-consistency", (x, f, v, s), 1, 0))
    for f in instance.flows:
        for v in instance.sfc(f.sfc).chain:
            n = len(alloc.get((f.id, v), ()))
            if n != 1:
                out.append(Violation("assignment-consistency", (f.id, v), n, 1))

    # (c) server resources
    cores = Counter()
    mem = Counter()
    cpu = Counter()
    for x, v, s in sorted(solution.placement):
        vt = instance.vnf(v)
        cores[x] += vt.cores
        mem[x] += vt.size
    for x, f, v, s in sorted(solution.flow_assignment):
        flow = instance._index["flow"].get(f)
        if flow is not None:
            cpu[x] += flow.rate * instance.vnf(v).cpu_per_unit
    for srv in instance.servers:
        if cores[srv.id] > srv.cores:
            out.append(Violation("core-capacity", (srv.id,), cores[srv.id], srv.cores))
        if mem[srv.id] > srv.memory + TOL:
            out.append(Violation("memory-capacity", (srv.id,), mem[srv.id], srv.memory))
        if cpu[srv.id] > srv.cpu * (1 + TOL):
            out.append(Violation("cpu-capacity", (srv.id,), cpu[srv.id], srv.cpu))

    # (e) routing decomposes into chain segments; (f) delay
    complete = all(len(placed[k]) == 1 for k in keys)
    link_sets: dict[str, set] = {}
    for f in instance.flows:
        chain_keys = [(f.sfc, v) for v in instance.sfc(f.sfc).chain]
        if not all(len(placed[k]) == 1 for k in chain_keys):
            continue
        try:
            paths = segment_decompose(instance, solution, f, hosts)
        except SegmentError as exc:
            out.append(Violation("chain-connectivity", (f.id, str(exc)), 1, 0))
            link_sets[f.id] = set(solution.route(f.id))
            continue
        link_sets[f.id] = {l for p in paths for l in p.links}
        latency = sum(p.latency for p in paths)
        if latency > f.delay_threshold + TOL:
            out.append(Violation("delay-bound", (f.id,), latency, f.delay_threshold))

    # (d) directed link capacity
    topo = instance.topology
    reserved: set[tuple[str, str]] = set()
    if complete:
        for pair in sorted(migration_pairs(reference, solution), key=lambda p: sorted(p)):
            x, y = sorted(pair, key=topo.rank)
            for a, b in pair_path(topo, x, y).links:
                reserved.add((a, b))
                reserved.add((b, a))
    load = Counter()
    for f in instance.flows:
        for l in link_sets.get(f.id, ()):
            load[l] += f.gbps
    for (a, b) in sorted(load):
        if not topo.has_link(a, b):
            continue
        cap = topo.link(a, b).bandwidth - (instance.migration_bw if (a, b) in reserved else 0.0)
        if load[(a, b)] > cap + TOL:
            out.append(Violation("link-capacity", (a, b), load[(a, b)], cap))

    order = {k: i for i, k in enumerate(KINDS)}
    out.sort(key=lambda v: order[v.kind])
    return ViolationReport(tuple(out))


def is_feasible(instance: Instance, solution: NetworkState, reference: NetworkState | None = None) -> bool:
    return validate(instance, solution, reference).feasible
