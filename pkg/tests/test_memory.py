import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import cumulative_trapezoid

from glvreduce.errors import (
    ConvergenceError,
    InfeasibleReductionError,
    IntegrityError,
    SingularityError,
)
from glvreduce.integrate import integrate_fixed, read_csv
from glvreduce.memory import (
    Ref,
    chi_integrand,
    evaluate_y,
    reconstruct_eliminated,
    reduce,
    reduced_system_from_json,
    solve_reduced,
)
from glvreduce.model import GlvModel, rhs
from glvreduce.reducibility import scrambled_feasible_model


def _truth_tables(model, x):
    dx = rhs(model, x)
    return {"x": x, "dx": dx, "chi": x, "y": x, "dchi": dx}


def test_y_identity_along_detailed_flow(two_species):
    # y built from the exact x1 and dx1 recovers x2
    traj = integrate_fixed(two_species, 10.0, 1e-2)
    term = reduce(two_species, [0]).steps[0].y
    for x, dx in zip(traj.x[::50], traj.dx[::50]):
        y = evaluate_y(term, x, dx, {})
        assert y == pytest.approx(x[1], rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_terms_reproduce_true_values(S, seed):
    # with every operand at its true value, each y-term equals x_m and each
    # chi integrand equals dx_m, for any positive state
    rng = np.random.default_rng(seed)
    s = int(rng.integers(1, S))
    A, retained, _ = scrambled_feasible_model(S, s, rng)
    model = GlvModel(rng.uniform(-1, 1, S), A, rng.uniform(0.1, 2, S))
    x = rng.uniform(0.1, 3.0, S)
    tables = _truth_tables(model, x)
    rs = reduce(model, retained)
    for step in rs.steps:
        m = step.eliminated
        y = evaluate_y(step.y, tables["x"], tables["dx"], tables["chi"], tables["y"], tables["dchi"])
        assert y == pytest.approx(x[m], rel=1e-9, abs=1e-12)
        assert chi_integrand(step.chi, x[m], tables) == pytest.approx(tables["dx"][m], rel=1e-9, abs=1e-12)


def test_chi_is_trapezoid_of_integrand(nested_three):
    rs = reduce(nested_three, [0])
    rt = solve_reduced(rs, 2.0, 1e-2)
    for i, m in enumerate(rt.eliminated):
        expected = nested_three.x0[m] + cumulative_trapezoid(rt.integrand[:, i], rt.t, initial=0.0)
        np.testing.assert_allclose(rt.chi[:, i], expected, rtol=1e-11, atol=1e-13)


def test_fixed_point_holds_at_each_node(nested_three):
    # y at the accepted node equals chi: the substituted value is self-consistent
    rt = solve_reduced(reduce(nested_three, [0]), 2.0, 1e-2)
    np.testing.assert_allclose(rt.y, rt.chi, rtol=1e-10)


def test_solver_is_deterministic(nested_three):
    rs = reduce(nested_three, [0])
    a = solve_reduced(rs, 1.0, 1e-2)
    b = solve_reduced(rs, 1.0, 1e-2)
    assert a.to_csv() == b.to_csv()
    np.testing.assert_array_equal(a.fp_iterations, b.fp_iterations)


def test_keep_everything_is_detailed_run(two_species):
    rs = reduce(two_species, [0, 1])
    assert rs.steps == ()
    rt = solve_reduced(rs, 5.0, 1e-2)
    traj = integrate_fixed(two_species, 5.0, 1e-2)
    np.testing.assert_allclose(rt.x, traj.x, rtol=1e-13)


def test_decoupled_eliminated_species_stays_constant():
    m = GlvModel([1.0, 0.0], [[-1.0, 0.3], [0.0, 0.0]], [0.4, 0.7])
    rt = solve_reduced(reduce(m, [0]), 3.0, 1e-2)
    np.testing.assert_allclose(rt.chi_for(1), 0.7, rtol=1e-13)


def test_reduced_matches_detailed(two_species):
    traj = integrate_fixed(two_species, 10.0, 1e-3)
    rt = solve_reduced(reduce(two_species, [0]), 10.0, 1e-3)
    assert np.abs(rt.x[:, 0] - traj.x[:, 0]).max() < 1e-7
    assert np.abs(rt.chi_for(1) - traj.x[:, 1]).max() < 1e-7


def test_infeasible_reduction_names_entry():
    m = GlvModel([1.0] * 3, -np.ones((3, 3)), [0.5] * 3)
    with pytest.raises(InfeasibleReductionError, match=r"a\(1,3\)"):
        reduce(m, [0])


def test_pivot_singularity():
    term = reduce(GlvModel([1.0, 1.0], [[-1.0, 0.5], [0.2, -1.0]], [0.5, 0.5]), [0]).steps[0].y
    with pytest.raises(SingularityError):
        evaluate_y(term, [0.0, 0.0], [0.0, 0.0], {})


def test_convergence_error_reported(nested_three):
    with pytest.raises(ConvergenceError) as info:
        solve_reduced(reduce(nested_three, [0]), 1.0, 1e-2, fp_tol=0.0, fp_max_iter=1)
    assert info.value.step == 1


def test_provenance_two_species(two_species):
    rs = reduce(two_species, [0])
    assert rs.equation_provenance(0) == {("b", 0), ("A", 0, 0), ("A", 0, 1)}
    step = rs.steps[0]
    assert step.y.provenance == {("b", 0), ("A", 0, 0), ("A", 0, 1)}
    assert step.chi.provenance == {("b", 1), ("A", 1, 0), ("A", 1, 1)}


def test_nested_operand_kinds(nested_three):
    rs = reduce(nested_three, [0])
    first, second = rs.steps
    assert (first.eliminated, first.pivot) == (2, 1)
    assert first.y.pivot_state == Ref("y", 1) and first.y.pivot_rate == Ref("dchi", 1)
    # x2 is eliminated later, so the chi-term of x3 sees it through y
    assert Ref("y", 1) in [r for _, r in first.chi.terms]
    assert Ref("chi", 2) in [r for _, r in second.chi.terms]
    assert str(Ref("chi", 2)) == "chi:3" and Ref.parse("chi:3") == Ref("chi", 2)


def test_json_round_trip(nested_three):
    rs = reduce(nested_three, [0])
    text = rs.to_json()
    again = reduced_system_from_json(text)
    assert again.to_json() == text


def test_json_cycle_rejected(nested_three):
    doc = json.loads(reduce(nested_three, [0]).to_json())
    doc["steps"][1]["depends_on"]["y"].append({"step": 0, "term": "y"})
    doc["steps"][0]["depends_on"]["y"].append({"step": 1, "term": "y"})
    with pytest.raises(IntegrityError, match="cyclic"):
        reduced_system_from_json(json.dumps(doc))


def test_json_tampered_coefficient_rejected(nested_three):
    doc = json.loads(reduce(nested_three, [0]).to_json())
    doc["steps"][0]["coefficients"]["pivot"] = 7.0
    with pytest.raises(IntegrityError):
        reduced_system_from_json(json.dumps(doc))


def test_reconstruction_and_csv(nested_three):
    rs = reduce(nested_three, [0])
    rt = solve_reduced(rs, 0.5, 0.1)
    rec = reconstruct_eliminated(rs, rt)
    assert list(rec) == ["x2", "x3"]
    header, data = read_csv(rt.to_csv())
    assert header == ["t", "x1", "chi_x2", "chi_x3"]
    np.testing.assert_array_equal(data[:, 2], rec["x2"])
