import numpy as np
import pytest

from pparabolic.exact import counterexample, heat_reference
from pparabolic.grid import Cylinder, ScalarField, SpaceTimeGrid, make_cutoff, sample
from pparabolic.jets import Params
from pparabolic.problems import affine_problem, counterexample_problem, heat_problem, interior_error
from pparabolic.solver import (
    BoundaryData,
    SolverConfig,
    SolverError,
    flux_divergence,
    solve,
    stable_dt,
    step_implicit_picard,
    weak_form_residual,
)


def bump(x, t):
    return np.sin(np.pi * x[..., 0]) * np.sin(np.pi * x[..., 1]) + x[..., 0]


def unit_grid(nx=16, t_end=0.05, nt=6, n_dim=2):
    return SpaceTimeGrid.square(0.0, 1.0, nx, 0.0, t_end, nt, n_dim)


# -- configuration -----------------------------------------------------------


@pytest.mark.parametrize(
    "kw",
    [
        {"scheme": "crank"},
        {"cfl_safety": 0.0},
        {"picard_max_iters": 0},
        {"picard_relaxation": 2.5},
    ],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(Params(3.0), unit_grid(), **kw)


def test_explicit_singular_case_needs_eps():
    with pytest.raises(ValueError):
        SolverConfig(Params(1.5, 0.0, 0.0), unit_grid(), "explicit")
    SolverConfig(Params(1.5, 0.0, 1e-3), unit_grid(), "explicit")


def test_default_relaxation():
    assert SolverConfig(Params(3.0), unit_grid()).relaxation == pytest.approx(2 / 3)
    assert SolverConfig(Params(3.0), unit_grid(), picard_relaxation=1.0).relaxation == 1.0


def test_boundary_data_must_be_finite():
    with pytest.raises(ValueError):
        BoundaryData(lambda x, t: np.full(x.shape[:-1], np.inf))(np.zeros((2, 2)), 0.0)


# -- spatial operator ----------------------------------------------------------


def test_flux_divergence_of_quadratic_is_exact_for_p2():
    g = unit_grid()
    u = sample(lambda x, t: x[..., 0] ** 2 + 3 * x[..., 1] ** 2, g).values[0]
    div = flux_divergence(u, g, Params(2.0))
    np.testing.assert_allclose(div[1:-1, 1:-1], 8.0, rtol=1e-10)
    assert np.all(div[0] == 0) and np.all(div[:, -1] == 0)


def test_flux_divergence_of_affine_vanishes_for_any_p():
    g = unit_grid()
    u = sample(lambda x, t: 0.4 * x[..., 0] - 2.0 * x[..., 1], g).values[0]
    for p in (1.5, 3.0, 4.5):
        np.testing.assert_allclose(flux_divergence(u, g, Params(p)), 0.0, atol=1e-11)


def test_stable_dt_matches_heat_limit():
    g = unit_grid(nx=32)
    cfg = SolverConfig(Params(2.0), g, "explicit", cfl_safety=0.5)
    assert stable_dt(np.zeros(g.spatial_shape), g, cfg) == pytest.approx(g.h**2 / 8)


# -- solutions -----------------------------------------------------------------


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_affine_data_is_stationary(p):
    prob = affine_problem(p=p, eps=0.0 if p >= 2 else 1e-3)
    res = prob.solve()
    assert interior_error(res.field, prob.exact) < 1e-12
    assert res.picard_warnings == 0


@pytest.mark.parametrize("scheme, p, eps", [("implicit_picard", 3.0, 0.0), ("explicit", 1.5, 1e-3), ("explicit", 4.0, 0.0)])
def test_constant_boundary_data_stays_constant(scheme, p, eps):
    g = unit_grid()
    res = solve(SolverConfig(Params(p, 0.0, eps), g, scheme), lambda x, t: np.full(x.shape[:-1], 2.5))
    np.testing.assert_allclose(res.field.values, 2.5, rtol=0, atol=1e-13)


def test_heat_solution_converges_at_second_order():
    errs = [interior_error(heat_problem(nx, t_end=0.05).solve().field, heat_reference()) for nx in (16, 32)]
    assert errs[1] < 1e-3
    assert 3.0 <= errs[0] / errs[1] <= 5.0


def test_heat_run_uses_requested_internal_step():
    prob = heat_problem(32, t_end=0.02)
    res = prob.solve()
    assert res.diagnostics[0]["dt"] == pytest.approx(prob.grid.h**2 / 8, rel=1e-12)
    assert res.diagnostics[0]["substeps"] == 8


def test_implicit_heat_takes_one_sweep_per_step():
    g = unit_grid(nx=16, t_end=0.05, nt=11)
    res = solve(SolverConfig(Params(2.0), g, "implicit_picard"), heat_reference().u)
    assert all(d["picard_iterations"] == 1 for d in res.diagnostics)


def test_counterexample_implicit_error_small():
    prob = counterexample_problem(3.0, nx=32, eps=1e-4)
    res = prob.solve()
    assert interior_error(res.field, prob.exact) < 1e-2
    assert res.picard_warnings == 0
    assert max(d["picard_iterations"] for d in res.diagnostics) < 30


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_explicit_and_implicit_agree_to_first_order_in_dt(p):
    def final(nt, scheme):
        g = SpaceTimeGrid.square(0.0, 1.0, 16, 0.0, 0.05, nt)
        return solve(SolverConfig(Params(p, 0.0, 1e-4), g, scheme), bump).field.values[-1]

    reference = final(11, "explicit")
    gaps = [np.abs(final(nt, "implicit_picard") - reference).max() for nt in (11, 21)]
    assert gaps[0] / gaps[1] >= 1.7


def test_solutions_settle_as_eps_shrinks():
    g = SpaceTimeGrid.square(-1.0, 1.0, 16, 0.0, 0.3, 16)
    ce = counterexample(3.0)
    sols = [solve(SolverConfig(Params(3.0, 0.0, e), g, "implicit_picard"), ce.u).field.values for e in (1e-1, 1e-2, 1e-3, 1e-4)]
    gaps = [np.abs(a - b)[:, 1:-1, 1:-1].max() for a, b in zip(sols, sols[1:])]
    assert gaps[0] > gaps[1] > gaps[2]


@pytest.mark.parametrize("scheme, p", [("explicit", 2.0), ("implicit_picard", 3.0)])
def test_reruns_are_bit_identical(scheme, p):
    g = unit_grid(nt=4)
    cfg = SolverConfig(Params(p, 0.0, 1e-4), g, scheme)
    a = solve(cfg, bump)
    b = solve(cfg, bump)
    assert a.field.values.tobytes() == b.field.values.tobytes()
    assert a.diagnostics == b.diagnostics


def test_picard_iteration_cap_is_flagged_not_fatal():
    g = unit_grid(nt=3)
    cfg = SolverConfig(Params(4.0, 0.0, 1e-6), g, "implicit_picard", picard_max_iters=1, picard_tol=1e-14)
    res = solve(cfg, bump)
    assert res.picard_warnings == 2
    assert np.all(np.isfinite(res.field.values))


def test_implicit_step_reports_diagnostics():
    g = unit_grid()
    cfg = SolverConfig(Params(3.0, 0.0, 1e-4), g, "implicit_picard")
    u0 = sample(bump, g).values[0]
    _, diag = step_implicit_picard(u0, 0.0, cfg, BoundaryData(bump))
    assert diag["picard_converged"] and diag["picard_change"] < cfg.picard_tol
    assert diag["max_update"] > 0


def test_singular_coefficient_raises_solver_error():
    g = unit_grid()
    u = np.zeros(g.spatial_shape)
    with pytest.raises(SolverError):
        flux_divergence(u, g, Params(1.5, 0.0, 0.0))


# -- weak form -----------------------------------------------------------------


def test_weak_residual_zero_cutoff():
    g = unit_grid(nt=21)
    u = sample(bump, g)
    assert weak_form_residual(u, ScalarField(g, np.zeros(g.shape)), Params(3.0)) == 0.0


def test_weak_residual_affine_is_quadrature_small():
    g = SpaceTimeGrid.square(0.0, 1.0, 32, 0.0, 0.4, 41)
    u = sample(lambda x, t: 0.5 * x[..., 0] - 0.2 * x[..., 1] + 1.0, g)
    phi = make_cutoff(g, Cylinder((0.5, 0.5), 0.2, 0.2))
    assert abs(weak_form_residual(u, phi, Params(3.0))) < 1e-4


def test_weak_residual_requires_matching_grids():
    u = ScalarField(unit_grid(), np.zeros(unit_grid().shape))
    v = ScalarField(unit_grid(nx=32), np.zeros(unit_grid(nx=32).shape))
    with pytest.raises(ValueError):
        weak_form_residual(u, v, Params(2.0))


def test_weak_residual_of_solved_heat_field_drops_under_refinement():
    c = Cylinder((0.5, 0.5), 0.1, 0.15)
    res = []
    for nx in (32, 64):
        f = heat_problem(nx, t_end=0.2).solve().field
        res.append(abs(weak_form_residual(f, make_cutoff(f.grid, c), Params(2.0))))
    assert res[0] / res[1] >= 3.0
