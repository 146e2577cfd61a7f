import dataclasses
import json

from hypothesis import given, settings
from hypothesis import strategies as st

from sfc_reconfig.feasibility import KINDS, segment_decompose, validate
from sfc_reconfig.model import (
    Flow,
    Instance,
    NetworkState,
    Server,
    Sfc,
    VnfType,
    load_state,
    make_state,
    save_state,
)
from sfc_reconfig.scenarios import random_micro, shortest_segments
from sfc_reconfig.topology import build_leaf_spine, candidate_paths, line_topology


def one_sfc(topo, chain, ingress, egress, delay=100.0, rate=50.0):
    servers = tuple(Server(x, sw, 2e9, 50, 16, 50, 30) for x, sw in topo.attachments)
    vnfs = tuple(VnfType(v, 1.0, 100.0) for v in chain)
    return Instance(topo, servers, vnfs, (Sfc("s", tuple(chain)),), (Flow("f", "s", rate, delay, ingress, egress),))


def state_for(inst, hosts):
    return make_state(inst, hosts, shortest_segments(inst, hosts))


def test_generated_initial_state_is_clean(small):
    inst, state = small
    report = validate(inst, state)
    assert report.feasible and report.violations == ()
    assert report.render() == "feasible: no violations"


def test_duplicate_placement():
    inst = one_sfc(build_leaf_spine(1, 2, 2), ["a"], "leaf00", "leaf01")
    state = state_for(inst, {("s", "a"): "srv00"})
    dup = dataclasses.replace(state, placement=state.placement | {("srv01", "a", "s")})
    report = validate(inst, dup)
    assert [v.kind for v in report.violations] == ["placement-cardinality"]
    assert report.violations[0].measured == 2


def test_delay_bound():
    switches = [f"sw{i:02d}" for i in range(59)]
    topo = line_topology(switches, attachments=[("A", "sw00")])
    inst = one_sfc(topo, ["a"], "sw00", "sw58", delay=50.0)
    report = validate(inst, state_for(inst, {("s", "a"): "A"}))
    assert [v.kind for v in report.violations] == ["delay-bound"]
    v = report.violations[0]
    assert (v.measured, v.limit) == (60.0, 50.0)


def test_core_memory_cpu_capacity():
    topo = build_leaf_spine(1, 1, 1)
    (srv, leaf), = topo.attachments
    inst = Instance(topo, (Server(srv, leaf, 1000.0, 1.5, 1, 50, 30),), (VnfType("a", 1.0, 100.0), VnfType("b", 1.0, 100.0)),
                    (Sfc("s", ("a", "b")),), (Flow("f", "s", 6.0, 100, leaf, leaf),))
    report = validate(inst, state_for(inst, {("s", "a"): srv, ("s", "b"): srv}))
    assert set(report.kinds()) == {"core-capacity", "memory-capacity", "cpu-capacity"}


def test_link_capacity_and_migration_reservation():
    topo = build_leaf_spine(1, 2, 2, link_bw=0.1)
    inst = one_sfc(topo, ["a"], "leaf00", "leaf00", rate=60.0)
    before = state_for(inst, {("s", "a"): "srv00"})
    after = state_for(inst, {("s", "a"): "srv01"})
    assert validate(inst, after).feasible
    # migrating reserves 1 Gbps on the srv00-srv01 path, more than the 0.1 Gbps links hold
    report = validate(inst, after, before)
    assert "link-capacity" in report.kinds()


def test_colocated_vnf_has_empty_route():
    topo = build_leaf_spine(1, 2, 2)
    inst = one_sfc(topo, ["a"], "leaf00", "leaf00")
    state = state_for(inst, {("s", "a"): "srv00"})
    segs = segment_decompose(inst, state, inst.flows[0])
    assert [p.hops for p in segs] == [1, 1]
    assert state.route("f") == frozenset()


def test_two_vnfs_on_different_leaves():
    topo = build_leaf_spine(2, 2, 2)
    inst = one_sfc(topo, ["a", "b"], "leaf00", "leaf01")
    state = state_for(inst, {("s", "a"): "srv00", ("s", "b"): "srv01"})
    segs = segment_decompose(inst, state, inst.flows[0])
    assert len(segs) == 3 and segs[1].hops == 4
    # same answer when the segments have to be rebuilt from R alone
    bare = NetworkState(state.placement, state.flow_assignment, state.routing)
    assert [p.nodes for p in segment_decompose(inst, bare, inst.flows[0])] == [p.nodes for p in segs]


def test_route_link_outside_segments():
    topo = build_leaf_spine(2, 2, 2)
    inst = one_sfc(topo, ["a"], "leaf00", "leaf01")
    state = state_for(inst, {("s", "a"): "srv00"})
    bad = dataclasses.replace(state, routing={"f": state.route("f") | {("spine01", "leaf00")}})
    assert "chain-connectivity" in validate(inst, bad).kinds()
    missing = dataclasses.replace(state, routing={"f": frozenset()}, segments={})
    assert "chain-connectivity" in validate(inst, missing).kinds()


def test_report_serializes():
    inst = one_sfc(build_leaf_spine(1, 2, 2), ["a"], "leaf00", "leaf01")
    state = state_for(inst, {("s", "a"): "srv00"})
    dup = dataclasses.replace(state, placement=state.placement | {("srv01", "a", "s")})
    doc = json.loads(json.dumps(validate(inst, dup).to_dict()))
    assert doc["violations"][0]["kind"] in KINDS


@st.composite
def tight_case(draw):
    inst, state = random_micro(draw(st.integers(0, 5000)), tight=True)
    servers = [x.id for x in inst.servers]
    hosts = {k: draw(st.sampled_from(servers)) for k in inst.instance_keys}
    segs = {}
    for f in inst.flows:
        ends = [f.ingress] + [hosts[(f.sfc, v)] for v in inst.sfc(f.sfc).chain] + [f.egress]
        segs[f.id] = tuple(draw(st.sampled_from(candidate_paths(inst.topology, a, b, 2)))
                           for a, b in zip(ends, ends[1:]))
    return inst, state, make_state(inst, hosts, segs)


def _subjects(report):
    return {(v.kind, v.subject) for v in report.violations}


@settings(max_examples=80)
@given(tight_case(), st.floats(1.0, 4.0))
def test_more_capacity_never_adds_violations(case, factor):
    inst, state, sol = case
    base = _subjects(validate(inst, sol, state))
    topo = inst.topology
    bigger_topo = dataclasses.replace(topo, links=tuple(dataclasses.replace(l, bandwidth=l.bandwidth * factor)
                                                        for l in topo.links))
    roomy = dataclasses.replace(
        inst, topology=bigger_topo,
        servers=tuple(dataclasses.replace(x, cores=int(x.cores * factor), memory=x.memory * factor, cpu=x.cpu * factor)
                      for x in inst.servers),
        flows=tuple(dataclasses.replace(f, delay_threshold=f.delay_threshold * factor) for f in inst.flows))
    assert _subjects(validate(roomy, sol, state)) <= base


@settings(max_examples=80)
@given(tight_case())
def test_feasible_survives_round_trip(case):
    inst, state, sol = case
    if validate(inst, sol, state).feasible:
        assert validate(inst, load_state(save_state(sol), inst), state).feasible
