import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfc_reconfig.costs import total_cost
from sfc_reconfig.feasibility import validate
from sfc_reconfig.milp import (
    LinExpr,
    LpFormatError,
    MilpBuildError,
    MilpBuilder,
    assignment_from_solution,
    build_milp,
    decode_solution,
    evaluate_assignment,
    export_lp,
    lin_abs_diff,
    lin_max,
    lin_product,
    parse_lp,
    registry_doc,
    solve_with_highs,
)
from sfc_reconfig.scenarios import random_micro
from sfc_reconfig.solver import SolverOptions, brute_force, enumerate_solutions


def test_abs_diff_against_constants():
    b = MilpBuilder()
    a = b.add_var("a", "binary")
    assert lin_abs_diff(b, a, 0).coeffs == {"a": 1.0} and lin_abs_diff(b, a, 0).const == 0
    e = lin_abs_diff(b, a, 1)
    assert e.coeffs == {"a": -1.0} and e.const == 1.0
    assert e.value({"a": 1}) == 0 and e.value({"a": 0}) == 1
    with pytest.raises(MilpBuildError):
        lin_abs_diff(b, a, 2)


def test_product_truth_table():
    b = MilpBuilder()
    x, y = b.add_var("x", "binary"), b.add_var("y", "binary")
    lin_product(b, x, y, "z")
    model = b.build()
    for xv, yv, zv in itertools.product((0, 1), repeat=3):
        ok = evaluate_assignment(model, {"x": xv, "y": yv, "z": zv})[1]
        assert ok == (zv == xv * yv)


def test_product_violation_names_row():
    b = MilpBuilder()
    x, y = b.add_var("x", "binary"), b.add_var("y", "binary")
    lin_product(b, x, y, "z")
    _, ok, bad = evaluate_assignment(b.build(), {"x": 1, "y": 1, "z": 0})
    assert not ok and bad == ["z:ge_ab"]


def _max_model(consts, active):
    b = MilpBuilder()
    acts = []
    for i, on in enumerate(active):
        a = b.add_var(f"a{i}", "binary")
        b.add_constraint(f"fix{i}", a, "=", float(on))
        acts.append(a)
    t = lin_max(b, [LinExpr(const=c) for c in consts], "t", activation=acts, big_m=max(consts, default=0) + 1)
    b.set_objective(t)
    return b.build()


def test_max_of_constants():
    b = MilpBuilder()
    t = lin_max(b, [LinExpr(const=3), LinExpr(const=5)], "t")
    b.set_objective(t)
    status, obj, _ = solve_with_highs(b.build())
    assert status == "optimal" and obj == pytest.approx(5)
    assert solve_with_highs(_max_model([3, 5], [1, 1]))[1] == pytest.approx(5)
    assert solve_with_highs(_max_model([3, 5], [0, 0]))[1] == pytest.approx(0)


def test_gated_max_needs_big_m():
    b = MilpBuilder()
    a = b.add_var("a", "binary")
    with pytest.raises(MilpBuildError):
        lin_max(b, [LinExpr(const=1)], "t", activation=[a])
    with pytest.raises(MilpBuildError):
        lin_max(b, [LinExpr(const=1)], "t2", activation=[a], big_m=float("inf"))


def test_max_random_samples():
    rng = random.Random(7)
    for _ in range(100):
        n = rng.randint(1, 5)
        consts = [rng.uniform(0, 50) for _ in range(n)]
        active = [rng.random() < 0.6 for _ in range(n)]
        want = max((c for c, on in zip(consts, active) if on), default=0.0)
        assert solve_with_highs(_max_model(consts, active))[1] == pytest.approx(want, abs=1e-7)


def test_builder_rejects_bad_input():
    b = MilpBuilder()
    b.add_var("x")
    with pytest.raises(MilpBuildError):
        b.add_var("x")
    with pytest.raises(MilpBuildError):
        b.add_constraint("c", LinExpr.var("nope"), "<=")
    with pytest.raises(MilpBuildError):
        b.add_constraint("c", LinExpr.var("x"), "<")


def test_evaluate_needs_every_variable(micro):
    inst, state = micro
    with pytest.raises(ValueError):
        evaluate_assignment(build_milp(inst, state, 0.5), {})


def test_micro_model(micro):
    inst, state = micro
    model = build_milp(inst, state, 1.0)
    assert len(model.names("W")) == 2
    status, obj, values = solve_with_highs(model)
    assert status == "optimal" and obj == pytest.approx(0, abs=1e-9)
    assert decode_solution(model, inst, values).as_state() == state


def test_micro_alpha_zero_matches_brute_force(micro):
    inst, state = micro
    status, obj, _ = solve_with_highs(build_milp(inst, state, 0.0))
    assert obj == pytest.approx(brute_force(inst, state, SolverOptions(alpha=0.0)).objective, abs=1e-9)


def test_all_zero_assignment_flags_placement(micro):
    inst, state = micro
    model = build_milp(inst, state, 0.5)
    zero = {v.name: 0.0 for v in model.variables}
    obj, ok, bad = evaluate_assignment(model, zero)
    assert not ok and any(name.startswith("assign") for name in bad)


def test_small_identity_matches_cost_engine(small):
    inst, state = small
    model = build_milp(inst, state, 0.5)
    assert model.summary()["variables"] == len(model.variables) > 0
    obj, ok, bad = evaluate_assignment(model, assignment_from_solution(model, inst, state, state))
    assert ok, bad
    assert obj == pytest.approx(total_cost(state, state, inst, 0.5).joint, abs=1e-9)


def test_build_is_deterministic(small):
    inst, state = small
    assert build_milp(inst, state, 0.3) == build_milp(inst, state, 0.3)


def test_build_rejects_bad_arguments(micro):
    inst, state = micro
    with pytest.raises(MilpBuildError):
        build_milp(inst, state, 1.2)
    with pytest.raises(MilpBuildError):
        build_milp(inst, state, 0.5, k_paths=0)


def test_export_skeleton(micro):
    inst, state = micro
    model = build_milp(inst, state, 0.5)
    text = export_lp(model)
    assert "Minimize" in text and text.count("\nBinaries\n") == 1
    binaries = text.split("\nBinaries\n")[1].split("\n")
    for w in model.names("W"):
        assert f" {w}" in binaries


def test_export_parse_fixed_point(small):
    inst, state = small
    model = build_milp(inst, state, 0.5)
    first = export_lp(model)
    again = parse_lp(first, model.registry)
    assert export_lp(again) == first
    assert again.obj_constant == model.obj_constant
    assert set(registry_doc(model)["variables"]) == {v.name for v in again.variables}


def test_export_name_collision():
    b = MilpBuilder()
    b.add_var("a b")
    b.add_var("a_b")
    with pytest.raises(LpFormatError):
        export_lp(b.build())


@settings(max_examples=15)
@given(st.integers(0, 10_000), st.sampled_from([0.0, 0.3, 0.7, 1.0]))
def test_linearization_matches_cost_engine(seed, alpha):
    inst, state = random_micro(seed, max_sfcs=2, max_vnfs=2, max_servers=3)
    model = build_milp(inst, state, alpha, 2)
    for sol in enumerate_solutions(inst, state, 2):
        if not validate(inst, sol, state).feasible:
            continue
        obj, ok, bad = evaluate_assignment(model, assignment_from_solution(model, inst, state, sol, 2))
        assert ok, bad
        assert obj == pytest.approx(total_cost(state, sol, inst, alpha, 2).joint, abs=1e-9)
