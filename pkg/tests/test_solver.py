import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfc_reconfig.costs import total_cost
from sfc_reconfig.feasibility import validate
from sfc_reconfig.model import Flow, Instance, Server, Sfc, VnfType, make_state
from sfc_reconfig.scenarios import generate_scenario, initial_state, random_micro, shortest_segments
from sfc_reconfig.solver import (
    SolverError,
    SolverOptions,
    brute_force,
    evaluate_placement,
    solve,
    solve_anneal,
    solve_exact,
)
from sfc_reconfig.topology import build_leaf_spine


def check(inst, state, res, k=4):
    """Returned solution is feasible and its stored costs match a fresh evaluation."""
    assert res.solution is not None
    assert validate(inst, res.solution, state).feasible
    again = total_cost(state, res.solution, inst, res.alpha, k)
    assert again.joint == pytest.approx(res.objective, abs=1e-9)
    assert res.costs == again


def test_alpha_one_is_identity(small):
    inst, state = small
    res = solve_exact(inst, state, SolverOptions(alpha=1.0))
    check(inst, state, res)
    assert res.status == "optimal"
    assert res.costs.cost_rec == 0 and res.costs.migrations == 0
    assert res.solution.as_state() == state


def test_alpha_zero_micro_matches_brute(micro):
    inst, state = micro
    ex = solve_exact(inst, state, SolverOptions(alpha=0.0))
    bf = brute_force(inst, state, SolverOptions(alpha=0.0))
    assert bf.nodes == 2
    assert ex.objective == bf.objective == pytest.approx(20 / 110)


def test_truncated_small_matches_brute():
    inst = generate_scenario("small", 0, {"n_sfcs": 2, "n_servers": 4, "n_leaf": 4, "n_flows": 2})
    state = initial_state(inst)
    for alpha in (0.2, 0.6):
        opts = SolverOptions(alpha=alpha)
        ex, bf = solve_exact(inst, state, opts), brute_force(inst, state, opts)
        assert ex.objective == pytest.approx(bf.objective, abs=1e-9)
        assert ex.solution.hosts() == bf.solution.hosts()


def test_brute_cardinality():
    topo = build_leaf_spine(1, 3, 3)
    servers = tuple(Server(x, sw, 2e9, 50, 16, 50 + i, 30) for i, (x, sw) in enumerate(topo.attachments))
    inst = Instance(topo, servers, (VnfType("a", 1.0, 100.0), VnfType("b", 1.0, 100.0)),
                    (Sfc("s", ("a", "b")),), (Flow("f", "s", 50, 100, "leaf00", "leaf00"),))
    hosts = {("s", "a"): "srv00", ("s", "b"): "srv01"}
    state = make_state(inst, hosts, shortest_segments(inst, hosts))
    res = brute_force(inst, state, SolverOptions(alpha=0.5))
    assert res.nodes == 9 and res.stats["assignments"] == 9


def test_brute_refuses_large_enumeration(small):
    inst, state = small
    with pytest.raises(SolverError):
        brute_force(inst, state, SolverOptions(alpha=0.5))


def test_unknown_solver(micro):
    inst, state = micro
    with pytest.raises(ValueError):
        solve(inst, state, "simplex")


def test_anneal_is_deterministic(small):
    inst, state = small
    opts = SolverOptions(alpha=0.5, iterations=1500, seed=3)
    a, b = solve_anneal(inst, state, opts), solve_anneal(inst, state, opts)
    assert a.objective == b.objective and a.solution == b.solution and a.nodes == b.nodes
    assert {k: v for k, v in a.stats.items()} == b.stats
    check(inst, state, a)


def test_anneal_alpha_one_returns_identity(small):
    inst, state = small
    res = solve_anneal(inst, state, SolverOptions(alpha=1.0, iterations=1000))
    assert res.objective == 0 and res.solution.as_state() == state


def test_anneal_rejects_bad_cooling(micro):
    inst, state = micro
    with pytest.raises(ValueError):
        solve_anneal(inst, state, SolverOptions(cooling=1.0))


def test_budget_truncation_is_reported(small):
    inst, state = small
    res = solve_exact(inst, state, SolverOptions(alpha=0.5, budget_s=1e-6))
    assert res.status == "heuristic" and res.stats["timed_out"]
    check(inst, state, res)


def test_evaluate_placement_round_trip(small):
    inst, state = small
    res = solve_exact(inst, state, SolverOptions(alpha=0.0))
    key, again = evaluate_placement(inst, state, res.solution.hosts(), SolverOptions(alpha=0.0))
    assert key[0] == pytest.approx(res.objective, abs=1e-12)
    assert again.solution.hosts() == res.solution.hosts()


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.sampled_from([0.0, 0.3, 0.7, 1.0]))
def test_exact_equals_brute_force(seed, alpha):
    inst, state = random_micro(seed)
    opts = SolverOptions(alpha=alpha, k_paths=2)
    ex, bf = solve_exact(inst, state, opts), brute_force(inst, state, opts)
    assert ex.status == bf.status
    if bf.solution is None:
        return
    assert ex.objective == pytest.approx(bf.objective, abs=1e-9)
    assert ex.solution.hosts() == bf.solution.hosts()
    check(inst, state, ex, 2)


@settings(max_examples=15)
@given(st.integers(0, 10_000))
def test_unpruned_search_visits_every_placement(seed):
    inst, state = random_micro(seed, max_sfcs=2, max_servers=3)
    opts = SolverOptions(alpha=0.5, k_paths=2)
    full = solve_exact(inst, state, dataclasses.replace(opts, prune=False))
    bf = brute_force(inst, state, opts)
    assert full.nodes == bf.nodes == len(inst.servers) ** len(inst.instance_keys)
    if bf.solution is not None:
        assert full.objective == pytest.approx(bf.objective, abs=1e-9)


@settings(max_examples=20)
@given(st.integers(0, 10_000), st.floats(0, 1), st.sampled_from(["exact", "anneal"]))
def test_outputs_are_feasible(seed, alpha, method):
    inst, state = random_micro(seed)
    res = solve(inst, state, method, SolverOptions(alpha=alpha, k_paths=2, iterations=300))
    check(inst, state, res, 2)


@settings(max_examples=20)
@given(st.integers(0, 10_000), st.floats(0, 1), st.floats(0, 1))
def test_weighted_sum_monotonicity(seed, a1, a2):
    inst, state = random_micro(seed)
    lo, hi = sorted((a1, a2))
    r_lo = solve_exact(inst, state, SolverOptions(alpha=lo, k_paths=2)).costs
    r_hi = solve_exact(inst, state, SolverOptions(alpha=hi, k_paths=2)).costs
    assert r_lo.cost_np <= r_hi.cost_np + 1e-9
    assert r_lo.cost_rec >= r_hi.cost_rec - 1e-9
