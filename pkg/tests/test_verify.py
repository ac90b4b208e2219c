import json
import math

import numpy as np
import pytest

from pparabolic import jets
from pparabolic.exact import affine_reference, counterexample, dvs_norm_exact, heat_reference
from pparabolic.grid import Cylinder, ScalarField, SpaceTimeGrid, integrate
from pparabolic.jets import Params
from pparabolic.problems import heat_problem
from pparabolic.verify import (
    DIVERGENCE_RATIO,
    EstimateReport,
    axis_band,
    caccioppoli_report,
    classify,
    extrapolate,
    pointwise_suite,
    regularized_estimate_report,
    sharpness_oracle,
    sharpness_sweep,
    testfn_estimate_report as cutoff_report,
    time_derivative_report,
)

HEAT_CYL = Cylinder((0.5, 0.5), 0.1, 0.15)


@pytest.fixture(scope="module")
def heat_field():
    g = SpaceTimeGrid.square(0.0, 1.0, 32, 0.0, 0.2, 81)
    return heat_reference().sample(g)


@pytest.fixture(scope="module")
def affine_field():
    g = SpaceTimeGrid.square(0.0, 1.0, 16, 0.0, 0.2, 21)
    return affine_reference([0.6, -0.8], 1.0).sample(g)


# -- report structure ------------------------------------------------------------


def test_report_serialization_is_deterministic(heat_field):
    a = caccioppoli_report(heat_field, Params(2.0), HEAT_CYL)
    b = caccioppoli_report(heat_field, Params(2.0), HEAT_CYL)
    assert a.to_json() == b.to_json()
    data = json.loads(a.to_json())
    assert data["rhs_terms"].keys() == {"vs_sq", "grad_pow"}
    assert data["cylinder"]["r"] == 0.15
    text = a.to_text()
    assert "empirical_constant" in text and "rhs[vs_sq]" in text


def test_constant_for_empty_rhs():
    rep = EstimateReport("x", 0.0, {"a": 0.0}, 0.0, {}, {}, {})
    assert rep.rhs_total == 0.0


@pytest.mark.parametrize("report", [caccioppoli_report, regularized_estimate_report, cutoff_report])
def test_affine_field_has_zero_lhs(report, affine_field):
    rep = report(affine_field, Params(3.0, 0.5, 1e-3), Cylinder((0.5, 0.5), 0.1, 0.15))
    assert rep.lhs == pytest.approx(0.0, abs=1e-18)
    assert rep.empirical_constant == pytest.approx(0.0, abs=1e-15)
    assert all(v > 0 for v in rep.rhs_terms.values())


@pytest.mark.parametrize("s", [0.0, 0.5, 1.0])
def test_report_integrals_nonnegative_and_constant_finite(heat_field, s):
    for report in (caccioppoli_report, regularized_estimate_report, cutoff_report):
        rep = report(heat_field, Params(2.0, s, 1e-3), HEAT_CYL)
        assert rep.lhs >= 0 and all(v >= 0 for v in rep.rhs_terms.values())
        assert math.isfinite(rep.empirical_constant) and rep.empirical_constant > 0
        # the estimate holds with the reported constant, by construction
        scale = HEAT_CYL.r**2 if report is not cutoff_report else 1.0
        assert rep.lhs <= rep.empirical_constant * rep.rhs_total / scale * (1 + 1e-12)


def test_reports_reject_bad_geometry_and_exponent(heat_field):
    with pytest.raises(ValueError):
        caccioppoli_report(heat_field, Params(2.0), Cylinder((0.2, 0.5), 0.1, 0.15))
    with pytest.raises(ValueError):
        caccioppoli_report(heat_field, Params(2.0, -1.0), HEAT_CYL)


def test_lhs_monotone_in_radius(heat_field):
    lhs = [caccioppoli_report(heat_field, Params(2.0, 0.5), Cylinder((0.5, 0.5), 0.1, r)).lhs for r in (0.05, 0.08, 0.11, 0.15)]
    assert all(a <= b for a, b in zip(lhs, lhs[1:]))


def test_cutoff_weighted_lhs_below_unweighted_outer_lhs():
    g = SpaceTimeGrid.square(0.0, 1.0, 40, 0.0, 0.4, 81)
    f = heat_reference().sample(g)
    c = Cylinder((0.5, 0.5), 0.2, 0.1)
    weighted = cutoff_report(f, Params(2.0, 0.5), c).lhs
    outer = caccioppoli_report(f, Params(2.0, 0.5), c.scaled(2.0)).lhs
    assert weighted <= outer


def test_regularized_report_approaches_plain_report(heat_field):
    plain = caccioppoli_report(heat_field, Params(2.0, 0.5), HEAT_CYL).lhs
    gaps = [abs(regularized_estimate_report(heat_field, Params(2.0, 0.5, e), HEAT_CYL).lhs - plain) for e in (1e-2, 1e-3, 1e-4)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] / plain < 1e-2


def test_constant_stable_under_refinement_for_solved_heat():
    consts = []
    for nx in (16, 32):
        f = heat_problem(nx, t_end=0.2).solve().field
        consts.append(cutoff_report(f, Params(2.0), HEAT_CYL).empirical_constant)
    assert max(consts) / min(consts) < 2.0


def test_singular_nodes_are_skipped_and_counted():
    g = SpaceTimeGrid.square(-1.0, 1.0, 32, 0.0, 0.6, 31)
    f = counterexample(1.5).sample(g)
    rep = caccioppoli_report(f, Params(1.5, 0.0), Cylinder((0.0, 0.0), 0.3, 0.25))
    assert rep.flags["singular_nodes_skipped"] > 0
    assert math.isfinite(rep.lhs)


def test_counterexample_lhs_matches_one_dimensional_oracle():
    # time cells aligned with t0 +- r^2 so only the spatial mask contributes error
    r = 0.45
    dt = r * r / 4
    g = SpaceTimeGrid.square(-1.0, 1.0, 256, 0.0, 36 * dt, 37)
    f = counterexample(3.0).sample(g)
    rep = caccioppoli_report(f, Params(3.0, 0.5), Cylinder((0.0, 0.0), 18 * dt, r))
    assert rep.lhs == pytest.approx(sharpness_oracle(3.0, 0.5, r), rel=0.05)


# -- time derivative ------------------------------------------------------------


def test_time_derivative_affine_all_zero(affine_field):
    rep = time_derivative_report(affine_field, Params(3.0), Cylinder((0.5, 0.5), 0.1, 0.15))
    assert rep.lhs == pytest.approx(0.0, abs=1e-20)
    assert rep.extras["ut_sq"] == pytest.approx(0.0, abs=1e-20)
    assert rep.extras["residual_sup"] < 1e-10
    assert rep.params["s"] == 1.0


def test_time_derivative_counterexample_p2_matches_volume():
    g = SpaceTimeGrid.square(-1.0, 1.0, 128, 0.0, 1.4, 71)
    c = Cylinder((0.0, 0.0), 0.7, 0.4)
    rep = time_derivative_report(counterexample(2.0).sample(g), Params(2.0), c)
    assert rep.extras["ut_sq"] == pytest.approx(4 * c.volume(), rel=0.03)
    assert rep.extras["residual_sup"] < 1e-8


def test_time_derivative_residual_refines_on_exact_heat():
    sups = []
    for nx in (32, 64):
        g = SpaceTimeGrid.square(0.0, 1.0, nx, 0.0, 0.2, 2 * nx + 1)
        sups.append(time_derivative_report(heat_reference().sample(g), Params(2.0), HEAT_CYL).extras["residual_sup"])
    assert sups[0] / sups[1] >= 3.0


def test_time_derivative_handles_singular_exponent():
    g = SpaceTimeGrid.square(-1.0, 1.0, 32, 0.0, 0.6, 31)
    rep = time_derivative_report(counterexample(1.5).sample(g), Params(1.5), Cylinder((0.0, 0.0), 0.3, 0.25))
    assert math.isfinite(rep.extras["residual_sup"])


# -- pointwise suite ----------------------------------------------------------------


def test_pointwise_affine_margins_zero(affine_field):
    out = pointwise_suite(affine_field, Params(3.0, 0.5))
    for name in ("fundamental", "full_fundamental", "trivial"):
        assert out[name]["min"] == pytest.approx(0.0, abs=1e-12)


def test_pointwise_heat_minima_nonnegative(heat_field):
    out = pointwise_suite(heat_field, Params(2.0, 0.5, 1e-3))
    assert out["min_scaled"] >= -1e-9
    assert out["nodes"] > 0


def test_pointwise_counterexample_fundamental_equality():
    g = SpaceTimeGrid.square(-1.0, 1.0, 32, 0.0, 0.6, 7)
    out = pointwise_suite(counterexample(3.0).sample(g), Params(3.0, 0.0), exclude=axis_band(g, 4 * g.h))
    assert abs(out["fundamental"]["min"]) < 1e-9
    assert out["zero_gradient_nodes"] == 0


# -- sharpness -------------------------------------------------------------------


def test_extrapolate_recovers_power_law():
    hs = np.array([0.1, 0.05, 0.025, 0.0125])
    limit, k = extrapolate(hs, 3.0 + 2.0 * hs**0.75)
    assert limit == pytest.approx(3.0, rel=1e-3)
    assert k == pytest.approx(0.75, abs=0.01)


def test_classify_synthetic_sequences():
    hs = 0.5 ** np.arange(5)
    assert classify(hs, np.log(1 / hs))["classification"] == "divergent"
    assert classify(hs, 1 + hs**2)["classification"] == "convergent"
    assert classify(hs[:3], 1 + hs[:3] ** 2)["classification"] == "inconclusive"


def test_sharpness_oracle_infinite_below_threshold():
    assert math.isinf(sharpness_oracle(3.0, -1.0, 0.5))
    assert math.isfinite(sharpness_oracle(3.0, -0.99, 0.5))


def test_sharpness_sweep_p3():
    out = sharpness_sweep(3.0, [-1.0, -0.5, 0.0])
    s = out["summary"]
    assert s[0.0]["classification"] == "convergent"
    assert s[-0.5]["classification"] == "convergent"
    assert s[-0.5]["oracle_rel_error"] < 0.02
    assert s[-1.0]["classification"] == "divergent"
    assert min(s[-1.0]["increment_ratios"]) >= max(0.8, DIVERGENCE_RATIO)
    assert len(out["rows"]) == 15


def test_sweep_integrand_uses_exact_jets():
    # at a single cell center the sweep integrand equals the closed form
    ce = counterexample(2.5)
    x = np.array([0.3, 0.1])
    M = jets.d_vs_matrix(jets.Jet(ce.grad(x), ce.hess(x)), Params(2.5, 0.2))
    assert jets.frobenius(M) == pytest.approx(dvs_norm_exact(2.5, 0.2, 0.3), rel=1e-12)


def test_integrate_cell_field_matches_manual_sum():
    g = SpaceTimeGrid.square(-1.0, 1.0, 16, 0.0, 1.0, 5)
    vals = np.arange(4 * 16 * 16, dtype=float).reshape(4, 16, 16)
    assert integrate(ScalarField(g, vals, "cell")) == pytest.approx(vals.sum() * g.h**2 * g.dt)
