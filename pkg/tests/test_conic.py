import numpy as np
import pytest

from instrasim._conic import (
    ConicProblem,
    ObjectiveTerm,
    Term,
    evaluate,
    objective_value,
    solve,
)
from instrasim.matcore import max_entangled
from randgen import random_hermitian


def test_duplicate_variable_rejected():
    prob = ConicProblem()
    prob.add_var("x", 2, "psd")
    with pytest.raises(ValueError, match="duplicate"):
        prob.add_var("x", 2, "psd")


def test_unknown_variable_in_constraint():
    prob = ConicProblem()
    with pytest.raises(ValueError, match="unknown variable"):
        prob.add_constraint("c", [Term("missing", 1.0, ("id",))], 0.0)


def test_nonneg_matrix_rejected():
    prob = ConicProblem()
    with pytest.raises(ValueError, match="nonneg"):
        prob.add_var("x", 3, "nonneg")


def test_solve_max_eigenvalue_program():
    # max Re tr(C X) over unit-trace PSD X is the top eigenvalue of C
    rng = np.random.default_rng(0)
    c = random_hermitian(rng, 3)
    prob = ConicProblem()
    prob.add_var("x", 3, "psd")
    prob.add_constraint("trace", [Term("x", 1.0, ("trace",))], 1.0)
    prob.set_objective("max", [ObjectiveTerm("x", 1.0, ("inner", c))])
    out = solve(prob)
    assert out.status == "optimal"
    top = np.linalg.eigvalsh(c)[-1]
    assert abs(out.objective - top) < 1e-7


def test_solve_detects_infeasible():
    prob = ConicProblem()
    prob.add_var("x", 2, "psd")
    prob.add_constraint("trace", [Term("x", 1.0, ("trace",))], -1.0)
    out = solve(prob)
    assert out.status == "infeasible"


def test_ptrace_and_pt_ops_match_numpy():
    rng = np.random.default_rng(1)
    m = random_hermitian(rng, 6)
    t = m.reshape(3, 2, 3, 2)
    from instrasim._conic import _apply_op

    assert np.allclose(
        _apply_op(("ptrace", 0, 3, 2), m), np.einsum("ijil->jl", t)
    )
    assert np.allclose(
        _apply_op(("ptrace", 1, 3, 2), m), np.einsum("ijkj->ik", t)
    )
    pt0 = _apply_op(("pt", 0, 3, 2), m)
    assert np.allclose(pt0, t.transpose(2, 1, 0, 3).reshape(6, 6))
    red = _apply_op(("reduction", 2, 3, 2), m)
    marg = np.einsum("ijil->jl", t)
    assert np.allclose(red, np.kron(np.eye(3), marg) - m / 2.0)


def test_evaluate_reports_violations():
    prob = ConicProblem()
    prob.add_var("x", 2, "psd")
    prob.add_constraint("trace", [Term("x", 1.0, ("trace",))], 1.0)
    good = {"x": np.eye(2) / 2.0}
    res = evaluate(prob, good)
    assert res["cone:x"] == 0.0
    assert res["constraint:trace"] < 1e-15
    bad = {"x": np.diag([1.5, -0.5])}
    res = evaluate(prob, bad)
    assert res["cone:x"] == pytest.approx(0.5)
    assert res["constraint:trace"] == pytest.approx(0.0)


def test_psd_constraint_via_pt():
    # max overlap with the maximally entangled projector over unit-trace
    # PPT states: for qubits PPT = separable, so the optimum is exactly 1/2
    phi = np.asarray(max_entangled(2))
    prob = ConicProblem()
    prob.add_var("x", 4, "psd")
    prob.add_constraint("trace", [Term("x", 1.0, ("trace",))], 1.0)
    prob.add_constraint(
        "ppt", [Term("x", 1.0, ("pt", 1, 2, 2))], np.zeros((4, 4)), kind="psd"
    )
    prob.set_objective("max", [ObjectiveTerm("x", 1.0, ("inner", phi))])
    out = solve(prob)
    assert out.status == "optimal"
    assert abs(out.objective - 0.5) < 1e-6
    res = evaluate(prob, out.values)
    assert max(res.values()) < 1e-6


def test_objective_value_matches_solver():
    rng = np.random.default_rng(2)
    c = random_hermitian(rng, 2)
    prob = ConicProblem()
    prob.add_var("x", 2, "psd")
    prob.add_var("s", 1, "nonneg")
    prob.add_constraint(
        "mix",
        [Term("x", 1.0, ("trace",)), Term("s", 1.0, ("value",))],
        1.0,
    )
    prob.set_objective(
        "max",
        [ObjectiveTerm("x", 1.0, ("inner", c)), ObjectiveTerm("s", -0.1, ("value",))],
    )
    out = solve(prob)
    assert out.status == "optimal"
    replay = objective_value(prob, out.values)
    assert abs(replay - out.objective) < 1e-7


def test_scalar_matrix_term():
    # x * 1 == diag(0.3): forces the scalar to 0.3
    prob = ConicProblem()
    prob.add_var("v", 1, "nonneg")
    prob.add_constraint(
        "pin",
        [Term("v", 1.0, ("scalar_matrix", np.eye(2, dtype=complex)))],
        0.3 * np.eye(2),
    )
    prob.set_objective("max", [ObjectiveTerm("v", 1.0, ("value",))])
    out = solve(prob)
    assert out.status == "optimal"
    assert abs(out.values["v"] - 0.3) < 1e-8
