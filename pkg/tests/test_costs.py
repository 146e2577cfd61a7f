import dataclasses
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfc_reconfig.costs import (
    TERMS,
    downtime_loss,
    energy_cost,
    migration_set,
    migration_size,
    migration_time,
    normalization_bounds,
    qos_cost,
    rule_change_count,
    server_overhead,
    total_cost,
)
from sfc_reconfig.feasibility import validate
from sfc_reconfig.model import Flow, Instance, NetworkState, Server, Sfc, VnfType, make_state
from sfc_reconfig.scenarios import random_micro, shortest_segments
from sfc_reconfig.topology import build_leaf_spine, candidate_paths, line_topology, pair_path, undirected_links


def placed(*triples):
    """State holding only a placement: triples of (server, vnf, sfc)."""
    return NetworkState(frozenset(triples), frozenset(), {})


def moved(micro_inst):
    hosts = {("sfc0", "vnf0"): "srv01"}
    return make_state(micro_inst, hosts, shortest_segments(micro_inst, hosts))


# ---------------------------------------------------------------- rule changes

def test_identity_has_no_rule_changes(small):
    _, state = small
    assert rule_change_count(state, state) == 0


def test_line_topology_migration_changes_four_rules():
    topo = line_topology(["sw1", "sw2", "sw3"], attachments=[("A", "sw1"), ("B", "sw3")])
    inst = Instance(topo, (Server("A", "sw1", 2e9, 50, 16, 50, 30), Server("B", "sw3", 2e9, 50, 16, 50, 30)),
                    (VnfType("v", 1.0, 100.0),), (Sfc("s", ("v",)),), (Flow("f", "s", 50, 100, "sw1", "sw1"),))
    before = make_state(inst, {("s", "v"): "A"}, shortest_segments(inst, {("s", "v"): "A"}))
    after = make_state(inst, {("s", "v"): "B"}, shortest_segments(inst, {("s", "v"): "B"}))
    assert before.route("f") == frozenset()
    assert after.route("f") == {("sw1", "sw2"), ("sw2", "sw3"), ("sw3", "sw2"), ("sw2", "sw1")}
    assert rule_change_count(before, after) == 4


def test_leaf_spine_reroute_changes_eight_rules():
    topo = build_leaf_spine(2, 2, 2)
    inst = Instance(topo, tuple(Server(x, sw, 2e9, 50, 16, 50, 30) for x, sw in topo.attachments),
                    (VnfType("v", 1.0, 100.0),), (Sfc("s", ("v",)),), (Flow("f", "s", 50, 100, "leaf00", "leaf00"),))
    hosts = {("s", "v"): "srv01"}
    out = candidate_paths(topo, "leaf00", "srv01", 2)
    back = candidate_paths(topo, "srv01", "leaf00", 2)
    via0 = make_state(inst, hosts, {"f": (out[0], back[0])})
    via1 = make_state(inst, hosts, {"f": (out[1], back[1])})
    assert len(via0.route("f")) == len(via1.route("f")) == 4
    assert not via0.route("f") & via1.route("f")
    assert rule_change_count(via0, via1) == 8


# ---------------------------------------------------------------- migration set

def test_no_migration_empty_set():
    topo = build_leaf_spine(1, 2, 2)
    s = placed(("srv00", "a", "s"))
    mset = migration_set(s, s, topo)
    assert len(mset) == 0 and set(mset.eta_server.values()) == {0} and not mset.eta_pair


def test_single_migration_loads():
    topo = build_leaf_spine(1, 2, 2)
    mset = migration_set(placed(("srv00", "a", "s")), placed(("srv01", "a", "s")), topo)
    assert mset.eta_server == {"srv00": 1, "srv01": 1}
    assert mset.eta_pair == {frozenset(("srv00", "srv01")): 1}


def test_three_parallel_migrations_pattern():
    # S1..S4 each on its own leaf; S1->S3 shares a leaf-spine link with both others
    topo = build_leaf_spine(1, 4, 4)
    s1, s2, s3, s4 = topo.servers
    before = placed((s1, "a", "s"), (s1, "b", "s"), (s2, "c", "s"))
    after = placed((s4, "a", "s"), (s3, "b", "s"), (s3, "c", "s"))
    mset = migration_set(before, after, topo)
    assert mset.eta_server[s1] == 2 and mset.eta_server[s3] == 2
    assert mset.eta_server[s2] == 1 and mset.eta_server[s4] == 1

    load = Counter()
    for m in mset.migrations:
        load.update(undirected_links(pair_path(topo, m.src, m.dst)))
    middle = {l: n for l, n in load.items() if all(not n_.startswith("srv") for n_ in l)}
    assert middle[frozenset(("leaf00", "spine00"))] == 2
    assert middle[frozenset(("leaf02", "spine00"))] == 2
    assert middle[frozenset(("leaf01", "spine00"))] == 1
    assert middle[frozenset(("leaf03", "spine00"))] == 1
    # the middle migration sees both others; the outer two are link-disjoint from each other
    assert mset.eta_pair[frozenset((s1, s3))] == 3
    assert mset.eta_pair[frozenset((s1, s4))] == 2
    assert mset.eta_pair[frozenset((s2, s3))] == 2


# ---------------------------------------------------------------- size and time

VNFS = {"a": VnfType("a", 2.0, 100.0), "b": VnfType("b", 1.5, 100.0), "c": VnfType("c", 1.0, 100.0)}


def test_migration_size():
    s = placed(("srv00", "a", "s"), ("srv00", "b", "s"))
    assert migration_size(s, s, VNFS) == 0
    assert migration_size(s, placed(("srv01", "a", "s"), ("srv00", "b", "s")), VNFS) == 2.0
    assert migration_size(s, placed(("srv01", "a", "s"), ("srv01", "b", "s")), VNFS) == 3.5


def test_single_migration_time():
    topo = build_leaf_spine(1, 2, 2)
    mset = migration_set(placed(("srv00", "a", "s")), placed(("srv01", "a", "s")), topo)
    assert migration_time(mset, VNFS, 1.0)[0] == 16.0
    assert migration_time(migration_set(placed(("srv00", "a", "s")), placed(("srv00", "a", "s")), topo),
                          VNFS, 1.0)[0] == 0.0


def test_shared_bottleneck_time():
    topo = build_leaf_spine(1, 2, 2)
    mset = migration_set(placed(("srv00", "a", "s"), ("srv00", "c", "s")),
                         placed(("srv01", "a", "s"), ("srv01", "c", "s")), topo)
    worst, per = migration_time(mset, VNFS, 1.0)
    assert sorted(per.values()) == [16.0, 32.0]
    assert worst == 32.0


def test_doubling_bandwidth_halves_times():
    topo = build_leaf_spine(1, 4, 4)
    mset = migration_set(placed(("srv00", "a", "s"), ("srv00", "b", "s"), ("srv01", "c", "s")),
                         placed(("srv03", "a", "s"), ("srv02", "b", "s"), ("srv02", "c", "s")), topo)
    w1, t1 = migration_time(mset, VNFS, 1.0)
    w2, t2 = migration_time(mset, VNFS, 2.0)
    assert w2 == w1 / 2
    assert all(t2[m] == t1[m] / 2 for m in t1)


# ---------------------------------------------------------------- downtime, qos, overhead, energy

def test_micro_downtime_qos_overhead(micro):
    inst, state = micro
    sol = moved(inst)
    assert downtime_loss(state, state, inst) == 0
    assert downtime_loss(state, sol, inst) == pytest.approx(0.1, abs=1e-15)
    assert qos_cost(state, state, inst) == 0
    assert qos_cost(state, sol, inst) == pytest.approx(0.2, abs=1e-15)
    assert server_overhead(state, state, inst) == 0
    assert server_overhead(state, sol, inst) == 70.0


def test_qos_is_linear_in_penalty(micro):
    inst, state = micro
    heavy = dataclasses.replace(inst, vnf_types=(dataclasses.replace(inst.vnf_types[0], penalty=3.0),))
    assert qos_cost(state, moved(heavy), heavy) == pytest.approx(0.6, abs=1e-15)


def test_downtime_counts_sfcs_not_vnfs():
    topo = build_leaf_spine(1, 2, 2)
    servers = tuple(Server(x, sw, 2e9, 50, 16, 50, 30) for x, sw in topo.attachments)
    inst = Instance(topo, servers, (VnfType("a", 1.0, 100.0), VnfType("b", 1.0, 100.0)),
                    (Sfc("s", ("a", "b"), 500.0),), (Flow("f", "s", 4.0, 100, "leaf00", "leaf01"),))
    before = placed(("srv00", "a", "s"), ("srv00", "b", "s"))
    one = placed(("srv01", "a", "s"), ("srv00", "b", "s"))
    two = placed(("srv01", "a", "s"), ("srv01", "b", "s"))
    assert downtime_loss(before, one, inst) == downtime_loss(before, two, inst) == pytest.approx(0.1)


def test_overhead_two_migrations_out_of_one_server():
    srv = {"p": Server("p", "l", 1, 1, 1, 1, 30.0), "q": Server("q", "l", 1, 1, 1, 1, 10.0),
           "r": Server("r", "l", 1, 1, 1, 1, 20.0)}
    before = placed(("p", "a", "s"), ("p", "b", "s"))
    after = placed(("q", "a", "s"), ("r", "b", "s"))
    assert server_overhead(before, after, srv) == 90.0


def test_energy(micro):
    inst, state = micro
    assert energy_cost(moved(inst), inst) == (20.0, pytest.approx(20 / 110))
    assert energy_cost(placed(), inst) == (0.0, 0.0)
    both = placed(("srv00", "vnf0", "sfc0"), ("srv01", "vnf0", "sfc1"))
    assert energy_cost(both, inst)[1] == 1.0


# ---------------------------------------------------------------- total cost

def test_identity_total(small):
    inst, state = small
    for alpha in (0.0, 0.3, 1.0):
        c = total_cost(state, state, inst, alpha)
        assert c.cost_rec == 0 and all(getattr(c, t) == 0 for t in TERMS)
        assert c.joint == (1 - alpha) * c.cost_np


def test_alpha_zero_is_energy_only(micro):
    inst, state = micro
    c = total_cost(state, moved(inst), inst, 0.0)
    assert c.joint == c.cost_np


def test_alpha_out_of_range(micro):
    inst, state = micro
    with pytest.raises(ValueError):
        total_cost(state, state, inst, 1.5)


def test_micro_hand_computation(micro):
    inst, state = micro
    sol = moved(inst)
    c = total_cost(state, sol, inst, 0.4)
    # raw terms
    assert (c.u, c.v, c.w, c.z) == (4.0, 2.0, 16.0, 70.0)
    assert c.x == pytest.approx(0.1, abs=1e-15) and c.y == pytest.approx(0.2, abs=1e-15)
    # bounds: one instance, 2 GB, 0.1 $, 0.2 utilization, overhead cap 2*1*50, rule cap 0 + 2 + 2
    b = normalization_bounds(inst, state)
    assert (b.u, b.v, b.w, b.z) == (4.0, 2.0, 16.0, 100.0)
    assert b.x == pytest.approx(0.1) and b.y == pytest.approx(0.2)
    rec = (1 + 1 + 1 + 1 + 1 + 0.7) / 6
    assert c.cost_rec == pytest.approx(rec, abs=1e-12)
    assert c.cost_np == pytest.approx(20 / 110, abs=1e-15)
    assert c.joint == pytest.approx(0.6 * 20 / 110 + 0.4 * rec, abs=1e-12)
    assert c.migrations == 1 and c.energy == 20.0


# ---------------------------------------------------------------- properties

@st.composite
def micro_and_solution(draw):
    inst, state = random_micro(draw(st.integers(0, 5000)), tight=False)
    servers = [x.id for x in inst.servers]
    hosts = {k: draw(st.sampled_from(servers)) for k in inst.instance_keys}
    segs = {}
    for f in inst.flows:
        chain = inst.sfc(f.sfc).chain
        ends = [f.ingress] + [hosts[(f.sfc, v)] for v in chain] + [f.egress]
        segs[f.id] = tuple(draw(st.sampled_from(candidate_paths(inst.topology, a, b, 2)))
                           for a, b in zip(ends, ends[1:]))
    return inst, state, make_state(inst, hosts, segs), hosts


@settings(max_examples=60)
@given(micro_and_solution(), st.floats(0, 1))
def test_terms_bounded_and_pure(case, alpha):
    inst, state, sol, _ = case
    c = total_cost(state, sol, inst, alpha, k_paths=2)
    assert c == total_cost(state, sol, inst, alpha, k_paths=2)
    for t in TERMS:
        assert getattr(c, t) >= 0
        if validate(inst, sol, state).feasible:
            assert 0 <= getattr(c, t + "_norm") <= 1 + 1e-12
    assert 0 <= c.cost_np <= 1


@settings(max_examples=60)
@given(micro_and_solution(), st.data())
def test_additive_and_max_based_terms(case, data):
    inst, state, sol, hosts = case
    before = state.hosts()
    moved_keys = [k for k in sorted(hosts) if hosts[k] != before[k]]
    part = set(data.draw(st.lists(st.sampled_from(moved_keys), unique=True))) if moved_keys else set()

    def partial(keys):
        h = {k: (hosts[k] if k in keys else before[k]) for k in before}
        return placed(*((x, v, s) for (s, v), x in h.items()))

    a, b, full = partial(part), partial(set(moved_keys) - part), partial(set(moved_keys))
    assert migration_size(state, full, inst) == pytest.approx(
        migration_size(state, a, inst) + migration_size(state, b, inst))
    assert server_overhead(state, full, inst) == pytest.approx(
        server_overhead(state, a, inst) + server_overhead(state, b, inst))
    w = lambda s: migration_time(migration_set(state, s, inst.topology), inst, inst.migration_bw)[0]
    assert w(full) >= max(w(a), w(b)) - 1e-12
    assert downtime_loss(state, full, inst) >= max(downtime_loss(state, a, inst), downtime_loss(state, b, inst))
    # downtime only depends on which SFCs moved
    sfcs = lambda keys: {s for s, _ in keys}
    if sfcs(part) == sfcs(moved_keys):
        assert downtime_loss(state, a, inst) == downtime_loss(state, full, inst)
