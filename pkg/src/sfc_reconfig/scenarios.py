"""Scenario generation (Small/Medium/Large), micro fixtures and the spread-out initial state."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .model import (Flow, Instance, InstanceKey, NetworkState, Server, Sfc, VnfType, flow_endpoints,
                    make_state)
from .topology import Topology, build_leaf_spine, shortest_path


class ConstructionError(ValueError):
    """Instance cannot host a feasible initial state."""


@dataclass(frozen=True)
class ScenarioParams:
    n_sfcs: int
    vnfs_per_sfc: int
    n_flows: int
    n_spine: int = 5
    n_leaf: int = 10
    n_servers: int = 10
    link_bw: float = 10.0  # Gbps
    link_latency: float = 1.0  # ms
    extra_vnf_types: int = 2
    revenue_rate: float = 500.0
    vnf_cores: int = 1
    vnf_size: tuple[float, float] = (1.0, 2.0)  # GB
    cpu_per_unit: float = 100.0  # Hz per flow unit
    vnf_penalty: float = 1.0
    server_cpu: float = 2e9  # Hz
    server_memory: float = 50.0  # GB
    server_cores: int = 16
    server_power: tuple[float, float] = (20.0, 90.0)  # W
    server_overhead: tuple[float, float] = (20.0, 50.0)
    flow_rate: tuple[float, float] = (50.0, 100.0)  # Mbps units
    flow_delay: tuple[float, float] = (50.0, 100.0)  # ms
    migration_bw: float = 1.0  # Gbps
    rho: float = 0.05  # s

    def validate(self) -> None:
        for name in ("n_sfcs", "vnfs_per_sfc", "n_flows", "n_spine", "n_leaf", "n_servers", "server_cores"):
            val = getattr(self, name)
            if not isinstance(val, (int, np.integer)) or val < 1:
                raise ValueError(f"{name} must be a positive integer, got {val!r}")
        if not isinstance(self.extra_vnf_types, int) or self.extra_vnf_types < 0:
            raise ValueError("extra_vnf_types must be a non-negative integer")
        if not isinstance(self.vnf_cores, int) or self.vnf_cores < 0:
            raise ValueError("vnf_cores must be a non-negative integer")
        for name in ("link_bw", "server_cpu", "server_memory", "migration_bw", "rho"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("link_latency", "revenue_rate", "cpu_per_unit", "vnf_penalty"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")
        if self.migration_bw > self.link_bw:
            raise ValueError("migration_bw cannot exceed link_bw")
        for name in ("vnf_size", "server_power", "server_overhead", "flow_rate", "flow_delay"):
            lo, hi = getattr(self, name)
            ok = 0 <= lo <= hi if name == "server_overhead" else 0 < lo <= hi
            if not ok:
                raise ValueError(f"{name} must be a valid range, got {(lo, hi)}")


SIZES: dict[str, ScenarioParams] = {
    "small": ScenarioParams(n_sfcs=5, vnfs_per_sfc=3, n_flows=10),
    "medium": ScenarioParams(n_sfcs=10, vnfs_per_sfc=3, n_flows=15),
    "large": ScenarioParams(n_sfcs=15, vnfs_per_sfc=4, n_flows=20),
}


def scenario_params(size: str, overrides: Mapping | None = None) -> ScenarioParams:
    try:
        base = SIZES[size.lower()]
    except KeyError:
        raise ValueError(f"unknown scenario size {size!r}; expected one of {sorted(SIZES)}") from None
    if overrides:
        unknown = set(overrides) - {f.name for f in dataclasses.fields(ScenarioParams)}
        if unknown:
            raise ValueError(f"unknown override(s): {sorted(unknown)}")
        fixed = {k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()}
        base = dataclasses.replace(base, **fixed)
    base.validate()
    return base


def generate_scenario(size: str, seed: int, overrides: Mapping | None = None) -> Instance:
    """Random instance with the Small/Medium/Large shape; a pure function of its arguments."""
    p = scenario_params(size, overrides)
    rng = np.random.default_rng(seed)
    topo = build_leaf_spine(p.n_spine, p.n_leaf, p.n_servers, p.link_bw, p.link_latency)
    leaves = [sw for sw in topo.switches if sw.startswith("leaf")]

    n_types = p.vnfs_per_sfc + p.extra_vnf_types
    vnfs = tuple(
        VnfType(f"vnf{i}", float(rng.uniform(*p.vnf_size)), p.cpu_per_unit, p.vnf_cores, p.vnf_penalty)
        for i in range(n_types)
    )
    sfcs = tuple(
        Sfc(f"sfc{i}", tuple(f"vnf{j}" for j in rng.choice(n_types, p.vnfs_per_sfc, replace=False)),
            p.revenue_rate)
        for i in range(p.n_sfcs)
    )
    servers = tuple(
        Server(srv, sw, p.server_cpu, p.server_memory, p.server_cores,
               float(rng.uniform(*p.server_power)), float(rng.uniform(*p.server_overhead)))
        for srv, sw in topo.attachments
    )
    flows = []
    for i in range(p.n_flows):
        ing, egr = rng.choice(len(leaves), 2)
        flows.append(Flow(f"f{i}", sfcs[i % p.n_sfcs].id, float(rng.uniform(*p.flow_rate)),
                          float(rng.uniform(*p.flow_delay)), leaves[ing], leaves[egr]))
    return Instance(topo, servers, vnfs, sfcs, tuple(flows), p.migration_bw, p.rho, name=f"{size.lower()}-{seed}")


def instance_load(instance: Instance, key: InstanceKey) -> tuple[int, float, float]:
    """(cores, memory GB, cpu Hz) consumed by one VNF instance."""
    sid, vid = key
    v = instance.vnf(vid)
    cpu = sum(f.rate for f in instance.flows_of(sid)) * v.cpu_per_unit
    return v.cores, v.size, cpu


def initial_hosts(instance: Instance) -> dict[InstanceKey, str]:
    """Round-robin spread: each instance goes to the next server (cyclically) with room."""
    keys = instance.instance_keys
    servers = instance.servers
    demand = [instance_load(instance, k) for k in keys]
    for idx, name in enumerate(("cores", "memory", "cpu")):
        need = sum(d[idx] for d in demand)
        have = sum(getattr(x, name) for x in servers)
        if need > have:
            raise ConstructionError(f"aggregate {name} demand {need} exceeds capacity {have}")
    free = [[x.cores, x.memory, x.cpu] for x in servers]
    hosts = {}
    ptr = 0
    for key, (c, m, u) in zip(keys, demand):
        for off in range(len(servers)):
            j = (ptr + off) % len(servers)
            if free[j][0] >= c and free[j][1] >= m - 1e-12 and free[j][2] >= u - 1e-9:
                free[j][0] -= c
                free[j][1] -= m
                free[j][2] -= u
                hosts[key] = servers[j].id
                ptr = j + 1
                break
        else:
            raise ConstructionError(f"no server has room for instance {key} (cores/memory/cpu)")
    return hosts


def shortest_segments(instance: Instance, hosts: Mapping[InstanceKey, str]) -> dict:
    topo = instance.topology
    out = {}
    for f in instance.flows:
        ends = flow_endpoints(instance, f, hosts)
        out[f.id] = tuple(shortest_path(topo, a, b) for a, b in zip(ends, ends[1:]))
    return out


def initial_state(instance: Instance) -> NetworkState:
    """Anti-optimal but feasible start: every server powered on where possible."""
    from .feasibility import validate

    hosts = initial_hosts(instance)
    state = make_state(instance, hosts, shortest_segments(instance, hosts))
    report = validate(instance, state)
    if report.violations:
        v = report.violations[0]
        raise ConstructionError(f"initial state violates {v.kind} for {v.subject}: {v.measured} > {v.limit}")
    return state


# ---------------------------------------------------------------- fixtures

def micro_fixture() -> tuple[Instance, NetworkState]:
    """Two servers on separate leaves, one single-VNF SFC currently on the costly server.

    Migrating the VNF to the other server gives hand-checkable cost terms:
    size 2 GB, time 16 s at 1 Gbps, downtime loss 0.1 $, QoS 0.2, overhead 70.
    """
    topo = build_leaf_spine(1, 2, 2, 10.0, 1.0)
    (s0, l0), (s1, l1) = topo.attachments
    servers = (Server(s0, l0, 2000.0, 50.0, 16, 90.0, 50.0),
               Server(s1, l1, 2000.0, 50.0, 16, 20.0, 20.0))
    vnfs = (VnfType("vnf0", 2.0, 100.0, 1, 1.0),)
    sfcs = (Sfc("sfc0", ("vnf0",), 500.0),)
    flows = (Flow("f0", "sfc0", 4.0, 50.0, l0, l0),)
    inst = Instance(topo, servers, vnfs, sfcs, flows, 1.0, 0.05, name="micro")
    hosts = {("sfc0", "vnf0"): s0}
    return inst, make_state(inst, hosts, shortest_segments(inst, hosts))


def random_micro(seed: int, max_sfcs: int = 3, max_vnfs: int = 2, max_servers: int = 4,
                 max_flows_per_sfc: int = 1, tight: bool = True) -> tuple[Instance, NetworkState]:
    """Tiny random instance for exhaustive cross-checks.

    With ``tight`` the cores, delay thresholds and link bandwidth are scaled so that
    capacity, delay and reserved-bandwidth constraints actually bind for some placements.
    """
    rng = np.random.default_rng(seed)
    n_srv = int(rng.integers(2, max_servers + 1))
    n_sfc = int(rng.integers(1, max_sfcs + 1))
    chain_len = [int(rng.integers(1, max_vnfs + 1)) for _ in range(n_sfc)]
    link_bw = 1.15 if tight else 10.0
    topo = build_leaf_spine(2, 2, n_srv, link_bw, 1.0)
    n_inst = sum(chain_len)
    n_types = max(chain_len) + 1
    vnfs = tuple(VnfType(f"vnf{i}", float(rng.uniform(1, 2)), 100.0, 1, float(rng.choice([0.5, 1.0, 2.0])))
                 for i in range(n_types))
    sfcs = tuple(Sfc(f"sfc{i}", tuple(f"vnf{j}" for j in rng.choice(n_types, n, replace=False)),
                     float(rng.uniform(100, 500)))
                 for i, n in enumerate(chain_len))
    while True:
        cores = [int(rng.integers(1, 4)) if tight else 16 for _ in range(n_srv)]
        if sum(cores) >= n_inst:
            break
    servers = tuple(Server(srv, sw, 2e9, 50.0, cores[i], float(rng.uniform(20, 90)), float(rng.uniform(20, 50)))
                    for i, (srv, sw) in enumerate(topo.attachments))
    leaves = [sw for sw in topo.switches if sw.startswith("leaf")]
    flows = []
    for s in sfcs:
        for _ in range(int(rng.integers(1, max_flows_per_sfc + 1))):
            ing, egr = rng.choice(len(leaves), 2)
            delay = float(rng.uniform(4, 12)) if tight else float(rng.uniform(50, 100))
            flows.append(Flow(f"f{len(flows)}", s.id, float(rng.uniform(50, 100)), delay, leaves[ing], leaves[egr]))
    inst = Instance(topo, servers, vnfs, sfcs, tuple(flows), 1.0, 0.05, name=f"micro-{seed}")
    hosts = initial_hosts(inst)
    segs = shortest_segments(inst, hosts)
    # the starting configuration itself must meet each flow's delay bound
    fixed = []
    for f in inst.flows:
        lat = sum(p.latency for p in segs[f.id])
        fixed.append(dataclasses.replace(f, delay_threshold=max(f.delay_threshold, lat)))
    inst = dataclasses.replace(inst, flows=tuple(fixed))
    return inst, initial_state(inst)
