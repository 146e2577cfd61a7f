"""Problem instance, network state and reconfiguration solution types, plus JSON I/O.

Placement and flow assignment are stored as sets of index tuples mirroring the
binary matrices: ``(server, vnf, sfc)`` for U/W and ``(server, flow, vnf, sfc)``
for the per-flow allocation. Routing is stored per flow as the set of directed
switch-to-switch links it crosses, alongside the segment paths that produced it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .topology import Link, Path, Topology, TopologyError

SCHEMA_VERSION = 1
MBPS_PER_GBPS = 1000.0

InstanceKey = tuple[str, str]  # (sfc id, vnf type id)


class SchemaError(ValueError):
    """Document does not match the schema; ``pointer`` locates the offending field."""

    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


class IntegrityError(SchemaError):
    """Document is well-formed but references ids that do not exist."""


@dataclass(frozen=True)
class VnfType:
    id: str
    size: float  # GB of memory + state moved on migration
    cpu_per_unit: float  # Hz per flow unit
    cores: int = 1
    penalty: float = 1.0

    def __post_init__(self) -> None:
        if self.size <= 0:
            raise ValueError(f"vnf {self.id}: size must be > 0")
        if self.cpu_per_unit < 0 or self.penalty < 0 or self.cores < 0:
            raise ValueError(f"vnf {self.id}: negative parameter")


@dataclass(frozen=True)
class Sfc:
    id: str
    chain: tuple[str, ...]
    revenue_rate: float = 500.0  # $ per Gbit/s lost

    def __post_init__(self) -> None:
        object.__setattr__(self, "chain", tuple(self.chain))
        if not self.chain:
            raise ValueError(f"sfc {self.id}: empty chain")
        if len(set(self.chain)) != len(self.chain):
            raise ValueError(f"sfc {self.id}: repeated vnf type in chain")
        if self.revenue_rate < 0:
            raise ValueError(f"sfc {self.id}: revenue_rate must be >= 0")


@dataclass(frozen=True)
class Server:
    id: str
    switch: str
    cpu: float  # Hz
    memory: float  # GB
    cores: int
    power: float  # W
    overhead: float  # psi

    def __post_init__(self) -> None:
        if min(self.cpu, self.memory, self.cores, self.power) <= 0:
            raise ValueError(f"server {self.id}: capacities and power must be > 0")
        if self.overhead < 0:
            raise ValueError(f"server {self.id}: overhead must be >= 0")


@dataclass(frozen=True)
class Flow:
    id: str
    sfc: str
    rate: float  # flow units, 1 unit = 1 Mbps
    delay_threshold: float  # ms
    ingress: str
    egress: str

    def __post_init__(self) -> None:
        if self.rate <= 0 or self.delay_threshold <= 0:
            raise ValueError(f"flow {self.id}: rate and delay_threshold must be > 0")

    @property
    def gbps(self) -> float:
        return self.rate / MBPS_PER_GBPS


@dataclass(frozen=True)
class Instance:
    topology: Topology
    servers: tuple[Server, ...]
    vnf_types: tuple[VnfType, ...]
    sfcs: tuple[Sfc, ...]
    flows: tuple[Flow, ...]
    migration_bw: float = 1.0  # Gbps reserved for migration traffic
    rho: float = 0.05  # s, stop-and-copy downtime
    name: str = ""
    _index: dict = field(default_factory=dict, init=False, compare=False, repr=False, hash=False)

    def __post_init__(self) -> None:
        for attr in ("servers", "vnf_types", "sfcs", "flows"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        if self.migration_bw <= 0:
            raise ValueError("migration_bw must be > 0")
        if self.rho <= 0:
            raise ValueError("rho must be > 0")
        vnfs = {v.id: v for v in self.vnf_types}
        sfcs = {s.id: s for s in self.sfcs}
        servers = {x.id: x for x in self.servers}
        if len(vnfs) != len(self.vnf_types) or len(sfcs) != len(self.sfcs) or len(servers) != len(self.servers):
            raise ValueError("duplicate ids")
        attach = dict(self.topology.attachments)
        if set(attach) != set(servers):
            raise ValueError("servers do not match topology attachments")
        for x in self.servers:
            if attach[x.id] != x.switch:
                raise ValueError(f"server {x.id}: switch {x.switch} disagrees with topology")
        for s in self.sfcs:
            for v in s.chain:
                if v not in vnfs:
                    raise IntegrityError(f"/sfcs/{s.id}/chain", f"unknown vnf type {v!r}")
        switches = set(self.topology.switches)
        for f in self.flows:
            if f.sfc not in sfcs:
                raise IntegrityError(f"/flows/{f.id}/sfc", f"unknown sfc {f.sfc!r}")
            if f.ingress not in switches or f.egress not in switches:
                raise IntegrityError(f"/flows/{f.id}", "ingress/egress must be switches")
        flows_of: dict[str, list[Flow]] = {s.id: [] for s in self.sfcs}
        for f in self.flows:
            flows_of[f.sfc].append(f)
        self._index.update(
            vnf=vnfs, sfc=sfcs, server=servers, flow={f.id: f for f in self.flows},
            flows_of={k: tuple(v) for k, v in flows_of.items()},
            keys=tuple((s.id, v) for s in self.sfcs for v in s.chain),
        )

    def vnf(self, vid: str) -> VnfType:
        return self._index["vnf"][vid]

    def sfc(self, sid: str) -> Sfc:
        return self._index["sfc"][sid]

    def server(self, xid: str) -> Server:
        return self._index["server"][xid]

    def flow(self, fid: str) -> Flow:
        return self._index["flow"][fid]

    def flows_of(self, sid: str) -> tuple[Flow, ...]:
        return self._index["flows_of"][sid]

    @property
    def instance_keys(self) -> tuple[InstanceKey, ...]:
        """Every (sfc, vnf) instance, SFC-major then chain order."""
        return self._index["keys"]

    @property
    def counts(self) -> dict[str, int]:
        return {"N": len(self.topology.switches), "X": len(self.servers), "S": len(self.sfcs),
                "V": len(self.vnf_types), "F": len(self.flows)}

    def sfc_rate_gbps(self, sid: str) -> float:
        return sum(f.gbps for f in self.flows_of(sid))


@dataclass(frozen=True)
class NetworkState:
    placement: frozenset  # {(server, vnf, sfc)}
    flow_assignment: frozenset  # {(server, flow, vnf, sfc)}
    routing: Mapping[str, frozenset]  # flow -> {(i, j)} directed switch links
    segments: Mapping[str, tuple[Path, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "placement", frozenset(self.placement))
        object.__setattr__(self, "flow_assignment", frozenset(self.flow_assignment))
        object.__setattr__(self, "routing", {f: frozenset(r) for f, r in sorted(self.routing.items())})
        object.__setattr__(self, "segments", {f: tuple(p) for f, p in sorted(self.segments.items())})

    def hosts(self) -> dict[InstanceKey, str]:
        """(sfc, vnf) -> server. Raises if any instance is placed twice."""
        out: dict[InstanceKey, str] = {}
        for x, v, s in self.placement:
            if (s, v) in out and out[(s, v)] != x:
                raise ValueError(f"instance {(s, v)} placed on both {out[(s, v)]} and {x}")
            out[(s, v)] = x
        return out

    def route(self, flow_id: str) -> frozenset:
        return self.routing.get(flow_id, frozenset())


@dataclass(frozen=True)
class ReconfigSolution(NetworkState):
    costs: Any = None  # CostBreakdown, attached by solvers

    @classmethod
    def from_state(cls, state: NetworkState, costs: Any = None) -> "ReconfigSolution":
        return cls(state.placement, state.flow_assignment, state.routing, state.segments, costs)

    def as_state(self) -> NetworkState:
        return NetworkState(self.placement, self.flow_assignment, self.routing, self.segments)


def switch_links(topo: Topology, paths: Iterable[Path]) -> frozenset:
    """Directed switch-to-switch links used by a set of paths (server links excluded)."""
    return frozenset(
        (a, b) for p in paths for a, b in p.links if topo.is_switch(a) and topo.is_switch(b)
    )


def flow_endpoints(instance: Instance, flow: Flow, hosts: Mapping[InstanceKey, str]) -> list[str]:
    """ingress, host of each chain VNF in order, egress."""
    chain = instance.sfc(flow.sfc).chain
    return [flow.ingress] + [hosts[(flow.sfc, v)] for v in chain] + [flow.egress]


def make_state(instance: Instance, hosts: Mapping[InstanceKey, str],
               segments: Mapping[str, Iterable[Path]], cls=NetworkState):
    """Assemble a state from a host map and per-flow segment paths."""
    placement = frozenset((x, v, s) for (s, v), x in hosts.items())
    assignment = frozenset(
        (hosts[(f.sfc, v)], f.id, v, f.sfc) for f in instance.flows for v in instance.sfc(f.sfc).chain
    )
    segments = {f: tuple(p) for f, p in segments.items()}
    routing = {f: switch_links(instance.topology, p) for f, p in segments.items()}
    return cls(placement, assignment, routing, segments)


# ---------------------------------------------------------------- JSON

def _req(doc: Mapping, key: str, ptr: str, kind=None):
    if not isinstance(doc, Mapping):
        raise SchemaError(ptr, "expected an object")
    if key not in doc:
        raise SchemaError(f"{ptr}/{key}", "missing required field")
    val = doc[key]
    if kind is not None and (not isinstance(val, kind) or isinstance(val, bool)):
        raise SchemaError(f"{ptr}/{key}", f"expected {getattr(kind, '__name__', kind)}")
    return val


_NUM = (int, float)


def _header(kind: str) -> dict:
    return {"schema": f"sfc-reconfig/{kind}", "version": SCHEMA_VERSION}


def _check_header(doc: Any, kind: str) -> None:
    if not isinstance(doc, Mapping):
        raise SchemaError("", "expected an object")
    if doc.get("schema") != f"sfc-reconfig/{kind}":
        raise SchemaError("/schema", f"expected 'sfc-reconfig/{kind}'")
    if doc.get("version") != SCHEMA_VERSION:
        raise SchemaError("/version", f"unsupported version {doc.get('version')!r}")


def topology_to_doc(topo: Topology) -> dict:
    return {
        "switches": list(topo.switches),
        "servers": [{"id": s, "switch": sw} for s, sw in topo.attachments],
        "links": [{"a": l.a, "b": l.b, "bandwidth": l.bandwidth, "latency": l.latency} for l in topo.links],
    }


def topology_from_doc(doc: Any, ptr: str = "/topology") -> Topology:
    switches = _req(doc, "switches", ptr, list)
    servers = _req(doc, "servers", ptr, list)
    links = _req(doc, "links", ptr, list)
    attachments = [(_req(s, "id", f"{ptr}/servers/{i}", str), _req(s, "switch", f"{ptr}/servers/{i}", str))
                   for i, s in enumerate(servers)]
    parsed = [Link(_req(l, "a", f"{ptr}/links/{i}", str), _req(l, "b", f"{ptr}/links/{i}", str),
                   float(_req(l, "bandwidth", f"{ptr}/links/{i}", _NUM)),
                   float(_req(l, "latency", f"{ptr}/links/{i}", _NUM)))
              for i, l in enumerate(links)]
    try:
        return Topology(tuple(switches), tuple(attachments), tuple(parsed))
    except TopologyError as exc:
        raise SchemaError(ptr, str(exc)) from exc


def instance_to_doc(inst: Instance) -> dict:
    return {
        **_header("instance"),
        "name": inst.name,
        "migration_bw": inst.migration_bw,
        "rho": inst.rho,
        "topology": topology_to_doc(inst.topology),
        "servers": [{"id": x.id, "switch": x.switch, "cpu": x.cpu, "memory": x.memory, "cores": x.cores,
                     "power": x.power, "overhead": x.overhead} for x in inst.servers],
        "vnf_types": [{"id": v.id, "size": v.size, "cpu_per_unit": v.cpu_per_unit, "cores": v.cores,
                       "penalty": v.penalty} for v in inst.vnf_types],
        "sfcs": [{"id": s.id, "chain": list(s.chain), "revenue_rate": s.revenue_rate} for s in inst.sfcs],
        "flows": [{"id": f.id, "sfc": f.sfc, "rate": f.rate, "delay_threshold": f.delay_threshold,
                   "ingress": f.ingress, "egress": f.egress} for f in inst.flows],
    }


def instance_from_doc(doc: Any) -> Instance:
    _check_header(doc, "instance")
    bw = float(_req(doc, "migration_bw", "", _NUM))
    rho = float(_req(doc, "rho", "", _NUM))
    topo = topology_from_doc(_req(doc, "topology", "", dict))

    def items(key):
        return list(enumerate(_req(doc, key, "", list)))

    try:
        servers = [Server(_req(d, "id", f"/servers/{i}", str), _req(d, "switch", f"/servers/{i}", str),
                          float(_req(d, "cpu", f"/servers/{i}", _NUM)), float(_req(d, "memory", f"/servers/{i}", _NUM)),
                          int(_req(d, "cores", f"/servers/{i}", int)), float(_req(d, "power", f"/servers/{i}", _NUM)),
                          float(_req(d, "overhead", f"/servers/{i}", _NUM)))
                   for i, d in items("servers")]
        vnfs = [VnfType(_req(d, "id", f"/vnf_types/{i}", str), float(_req(d, "size", f"/vnf_types/{i}", _NUM)),
                        float(_req(d, "cpu_per_unit", f"/vnf_types/{i}", _NUM)), int(_req(d, "cores", f"/vnf_types/{i}", int)),
                        float(_req(d, "penalty", f"/vnf_types/{i}", _NUM)))
                for i, d in items("vnf_types")]
        sfcs = [Sfc(_req(d, "id", f"/sfcs/{i}", str), tuple(_req(d, "chain", f"/sfcs/{i}", list)),
                    float(_req(d, "revenue_rate", f"/sfcs/{i}", _NUM)))
                for i, d in items("sfcs")]
        flows = [Flow(_req(d, "id", f"/flows/{i}", str), _req(d, "sfc", f"/flows/{i}", str),
                      float(_req(d, "rate", f"/flows/{i}", _NUM)), float(_req(d, "delay_threshold", f"/flows/{i}", _NUM)),
                      _req(d, "ingress", f"/flows/{i}", str), _req(d, "egress", f"/flows/{i}", str))
                 for i, d in items("flows")]
        return Instance(topo, tuple(servers), tuple(vnfs), tuple(sfcs), tuple(flows), bw, rho,
                        str(doc.get("name", "")))
    except SchemaError:
        raise
    except ValueError as exc:
        raise SchemaError("", str(exc)) from exc


def state_to_doc(state: NetworkState, kind: str = "state") -> dict:
    doc = {
        **_header(kind),
        "placement": [{"server": x, "vnf": v, "sfc": s} for x, v, s in sorted(state.placement)],
        "flow_assignment": [{"server": x, "flow": f, "vnf": v, "sfc": s}
                            for x, f, v, s in sorted(state.flow_assignment)],
        "routing": {f: sorted([list(l) for l in links]) for f, links in state.routing.items()},
        "segments": {f: [{"nodes": list(p.nodes), "latency": p.latency} for p in paths]
                     for f, paths in state.segments.items()},
    }
    return doc


def _state_parts(doc: Any, kind: str):
    _check_header(doc, kind)
    placement = [(_req(d, "server", f"/placement/{i}", str), _req(d, "vnf", f"/placement/{i}", str),
                  _req(d, "sfc", f"/placement/{i}", str)) for i, d in enumerate(_req(doc, "placement", "", list))]
    assignment = [(_req(d, "server", f"/flow_assignment/{i}", str), _req(d, "flow", f"/flow_assignment/{i}", str),
                   _req(d, "vnf", f"/flow_assignment/{i}", str), _req(d, "sfc", f"/flow_assignment/{i}", str))
                  for i, d in enumerate(_req(doc, "flow_assignment", "", list))]
    routing = {}
    for f, links in _req(doc, "routing", "", dict).items():
        if not isinstance(links, list) or any(not isinstance(l, list) or len(l) != 2 for l in links):
            raise SchemaError(f"/routing/{f}", "expected a list of [i, j] pairs")
        routing[f] = frozenset(tuple(l) for l in links)
    segments = {}
    for f, paths in doc.get("segments", {}).items():
        if not isinstance(paths, list):
            raise SchemaError(f"/segments/{f}", "expected a list")
        segments[f] = tuple(Path(tuple(_req(p, "nodes", f"/segments/{f}/{i}", list)),
                                 float(_req(p, "latency", f"/segments/{f}/{i}", _NUM)))
                            for i, p in enumerate(paths))
    return placement, assignment, routing, segments


def check_references(instance: Instance, state: NetworkState) -> None:
    servers = {x.id for x in instance.servers}
    keys = set(instance.instance_keys)
    for x, v, s in state.placement:
        if x not in servers:
            raise IntegrityError("/placement", f"unknown server {x!r}")
        if (s, v) not in keys:
            raise IntegrityError("/placement", f"unknown instance ({s!r}, {v!r})")
    flows = {f.id for f in instance.flows}
    for x, f, v, s in state.flow_assignment:
        if x not in servers or f not in flows or (s, v) not in keys:
            raise IntegrityError("/flow_assignment", f"unknown reference in {(x, f, v, s)}")
    for f in state.routing:
        if f not in flows:
            raise IntegrityError(f"/routing/{f}", "unknown flow")


def state_from_doc(doc: Any, instance: Instance | None = None) -> NetworkState:
    state = NetworkState(*_state_parts(doc, "state"))
    if instance is not None:
        check_references(instance, state)
    return state


def solution_to_doc(sol: ReconfigSolution, extra: Mapping | None = None) -> dict:
    doc = state_to_doc(sol, "solution")
    if sol.costs is not None:
        doc["costs"] = sol.costs.to_dict()
    if extra:
        doc.update(extra)
    return doc


def solution_from_doc(doc: Any, instance: Instance | None = None) -> ReconfigSolution:
    from .costs import CostBreakdown

    parts = _state_parts(doc, "solution")
    costs = CostBreakdown.from_dict(doc["costs"]) if doc.get("costs") else None
    sol = ReconfigSolution(*parts, costs)
    if instance is not None:
        check_references(instance, sol)
    return sol


def dumps(doc: Mapping) -> str:
    return json.dumps(doc, indent=1, sort_keys=False) + "\n"


def save_instance(inst: Instance) -> str:
    return dumps(instance_to_doc(inst))


def load_instance(text: str) -> Instance:
    return instance_from_doc(_loads(text))


def save_state(state: NetworkState) -> str:
    return dumps(state_to_doc(state))


def load_state(text: str, instance: Instance | None = None) -> NetworkState:
    return state_from_doc(_loads(text), instance)


def save_solution(sol: ReconfigSolution, extra: Mapping | None = None) -> str:
    return dumps(solution_to_doc(sol, extra))


def load_solution(text: str, instance: Instance | None = None) -> ReconfigSolution:
    return solution_from_doc(_loads(text), instance)


def _loads(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"invalid JSON: {exc}") from exc
