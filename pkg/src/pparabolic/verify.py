"""Integral estimates, the sharpness sweep and pointwise checks on fields.

Reports evaluate both sides of the second-derivative energy estimate on a
sampled or solved field and divide them to obtain an empirical constant.
No target value for the constant exists; what is checked elsewhere is
that it stays stable under refinement and as ``eps`` shrinks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as sci_integrate

from . import jets
from .exact import counterexample, counterexample_constant
from .grid import (
    Cylinder,
    ScalarField,
    SpaceTimeGrid,
    gradient_array,
    hessian_array,
    integrate,
    make_cutoff,
    gradient,
    time_deriv,
)
from .jets import Jet, Params

#: Increment ratio above which a refinement sequence counts as non-decaying.
DIVERGENCE_RATIO = 0.95
#: Relative change of the extrapolated integral below which a sweep converged.
CONVERGENCE_TOL = 0.02


@dataclass
class EstimateReport:
    name: str
    lhs: float
    rhs_terms: dict
    empirical_constant: float
    params: dict
    grid: dict
    cylinder: dict
    flags: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def rhs_total(self) -> float:
        return float(sum(self.rhs_terms.values()))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs_terms": dict(self.rhs_terms),
            "empirical_constant": self.empirical_constant,
            "params": self.params,
            "grid": self.grid,
            "cylinder": self.cylinder,
            "flags": dict(self.flags),
            "extras": dict(self.extras),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_text(self) -> str:
        rows = [("report", self.name), ("lhs", f"{self.lhs:.10e}")]
        rows += [(f"rhs[{k}]", f"{v:.10e}") for k, v in sorted(self.rhs_terms.items())]
        rows.append(("empirical_constant", f"{self.empirical_constant:.10e}"))
        rows += [(f"extra[{k}]", f"{v:.10e}" if isinstance(v, float) else str(v)) for k, v in sorted(self.extras.items())]
        rows += [(f"flag[{k}]", str(v)) for k, v in sorted(self.flags.items())]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


# -- shared plumbing ---------------------------------------------------------


def _params_dict(params: Params) -> dict:
    return {"p": params.p, "s": params.s, "eps": params.eps}


def _window(u_field: ScalarField, cylinder: Cylinder) -> ScalarField:
    """Restrict a node field to the time levels around ``Q_{2r}``, with margin."""
    grid = u_field.grid
    half = (2 * cylinder.r) ** 2
    times = grid.times
    k0 = int(np.searchsorted(times, cylinder.t0 - half, side="right")) - 2
    k1 = int(np.searchsorted(times, cylinder.t0 + half, side="left")) + 1
    k0, k1 = max(k0, 0), min(k1, grid.nt - 1)
    if k1 - k0 < 2:
        k0, k1 = max(0, k1 - 2), min(grid.nt - 1, max(k1, k0 + 2))
    return u_field.time_window(k0, k1)


def _check_geometry(u_field: ScalarField, cylinder: Cylinder):
    if not cylinder.scaled(2.0).fits_inside(u_field.grid):
        raise ValueError(f"Q_2r with r={cylinder.r} does not fit inside the grid")


def _jet_of(field: ScalarField) -> Jet:
    g = gradient_array(field.values, field.grid.h, field.grid.n_dim)
    H = hessian_array(field.values, field.grid.h, field.grid.n_dim)
    return Jet(g, H)


def _scalar(grid: SpaceTimeGrid, values) -> ScalarField:
    return ScalarField(grid, values)


def _d_vs_sq(jet: Jet, params: Params, regularized: bool):
    """``|D V_s(Du)|^2`` on every node, with singular nodes zeroed and counted."""
    a = 0.5 * (params.p - 2 + params.s)
    gn = np.sqrt(np.sum(jet.g * jet.g, axis=-1))
    singular = np.zeros(gn.shape, dtype=bool)
    if a < 0 and not (regularized and params.eps > 0):
        singular = gn < jets.ZERO_GRAD
    g = np.where(singular[..., None], 1.0, jet.g)
    safe = Jet(g, jet.H)
    M = jets.d_vs_eps_matrix(safe, params) if regularized else jets.d_vs_matrix(safe, params)
    val = np.sum(M * M, axis=(-2, -1))
    return np.where(singular, 0.0, val), int(singular.sum())


def _pow(x, e):
    """``x ** e`` for ``x >= 0`` with ``0 ** e`` taken as 0 (e > 0) or 1 (e == 0)."""
    if e == 0:
        return np.ones_like(x)
    zero = x == 0
    with np.errstate(divide="ignore"):
        return np.where(zero, 0.0 if e > 0 else np.inf, np.where(zero, 1.0, x) ** e)


def _constant(lhs, rhs, scale=1.0):
    total = sum(rhs.values())
    return float(lhs * scale / total) if total > 0 else (0.0 if lhs == 0 else math.inf)


# -- estimate reports --------------------------------------------------------


def caccioppoli_report(u_field: ScalarField, params: Params, cylinder: Cylinder, flags=None) -> EstimateReport:
    """Both sides of the energy estimate on ``Q_r`` / ``Q_{2r}``.

    ``lhs = int_{Q_r} |D V_s(Du)|^2``; the right-hand terms are
    ``int_{Q_2r} |V_s(Du)|^2`` and ``int_{Q_2r} |Du|^(s+2)``.  The empirical
    constant is ``lhs r^2 / sum(rhs)``.
    """
    params.require_s_range()
    _check_geometry(u_field, cylinder)
    f = _window(u_field, cylinder)
    jet = _jet_of(f)
    dvs2, skipped = _d_vs_sq(jet, params, regularized=False)
    gn = np.sqrt(np.sum(jet.g * jet.g, axis=-1))
    vs2 = _pow(gn, params.p + params.s)
    outer = cylinder.scaled(2.0)
    lhs = integrate(_scalar(f.grid, dvs2), cylinder)
    rhs = {
        "vs_sq": integrate(_scalar(f.grid, vs2), outer),
        "grad_pow": integrate(_scalar(f.grid, _pow(gn, params.s + 2)), outer),
    }
    return EstimateReport(
        "caccioppoli",
        lhs,
        rhs,
        _constant(lhs, rhs, cylinder.r**2),
        _params_dict(params),
        u_field.grid.describe(),
        cylinder.describe(),
        {"singular_nodes_skipped": skipped, **(flags or {})},
    )


def regularized_estimate_report(u_field: ScalarField, params: Params, cylinder: Cylinder, flags=None) -> EstimateReport:
    """Regularized counterpart of :func:`caccioppoli_report`.

    Uses ``V_s^eps`` and ``(|Du|^2 + eps)^((s+2)/2)``.
    """
    params.require_s_range()
    _check_geometry(u_field, cylinder)
    f = _window(u_field, cylinder)
    jet = _jet_of(f)
    dvs2, skipped = _d_vs_sq(jet, params, regularized=True)
    mu2 = np.sum(jet.g * jet.g, axis=-1) + params.eps
    vs2 = np.sum(jets.v_s_eps(jet.g, params) ** 2, axis=-1)
    outer = cylinder.scaled(2.0)
    lhs = integrate(_scalar(f.grid, dvs2), cylinder)
    rhs = {
        "vs_eps_sq": integrate(_scalar(f.grid, vs2), outer),
        "mu_pow": integrate(_scalar(f.grid, _pow(mu2, 0.5 * (params.s + 2))), outer),
    }
    return EstimateReport(
        "regularized",
        lhs,
        rhs,
        _constant(lhs, rhs, cylinder.r**2),
        _params_dict(params),
        u_field.grid.describe(),
        cylinder.describe(),
        {"singular_nodes_skipped": skipped, **(flags or {})},
    )


def testfn_estimate_report(u_field: ScalarField, params: Params, cylinder: Cylinder, flags=None) -> EstimateReport:
    """Cutoff-weighted form of the estimate.

    ``lhs = int |D V_s(Du)|^2 phi^2`` against
    ``int |Du|^(p+s) |D phi|^2`` and ``int |Du|^(s+2) |phi| |phi_t|``, with
    ``phi`` from :func:`make_cutoff`.  The constant is ``lhs / sum(rhs)``.
    """
    params.require_s_range()
    _check_geometry(u_field, cylinder)
    f = _window(u_field, cylinder)
    phi = make_cutoff(f.grid, cylinder)
    jet = _jet_of(f)
    dvs2, skipped = _d_vs_sq(jet, params, regularized=False)
    gn = np.sqrt(np.sum(jet.g * jet.g, axis=-1))
    Dphi2 = np.sum(gradient(phi).values ** 2, axis=-1)
    phit = time_deriv(phi).values
    ph = phi.values
    lhs = integrate(_scalar(f.grid, dvs2 * ph * ph))
    rhs = {
        "grad_cutoff": integrate(_scalar(f.grid, _pow(gn, params.p + params.s) * Dphi2)),
        "time_cutoff": integrate(_scalar(f.grid, _pow(gn, params.s + 2) * np.abs(ph) * np.abs(phit))),
    }
    return EstimateReport(
        "testfn",
        lhs,
        rhs,
        _constant(lhs, rhs),
        _params_dict(params),
        u_field.grid.describe(),
        cylinder.describe(),
        {"singular_nodes_skipped": skipped, **(flags or {})},
    )


def time_derivative_report(u_field: ScalarField, params: Params, cylinder: Cylinder, flags=None, grad_floor=jets.ZERO_GRAD) -> EstimateReport:
    """Time-derivative bound with ``s = p - 2``.

    ``lhs = int_{Q_r} |D(|Du|^(p-2) Du)|^2`` against ``int_{Q_2r} |Du|^(2(p-1))``
    and ``int_{Q_2r} |Du|^p``.  Extras: ``int_{Q_r} u_t^2`` and the sup over
    nodes of ``Q_r`` of ``|u_t - div_h(|Du|^(p-2) Du)|``, skipping nodes with
    ``|Du| < grad_floor`` when ``p != 2`` and nodes next to the boundary.
    """
    params = params.replace(s=params.p - 2)
    params.require_s_range()
    _check_geometry(u_field, cylinder)
    f = _window(u_field, cylinder)
    grid = f.grid
    jet = _jet_of(f)
    dvs2, skipped = _d_vs_sq(jet, params, regularized=False)
    gn = np.sqrt(np.sum(jet.g * jet.g, axis=-1))
    outer = cylinder.scaled(2.0)
    lhs = integrate(_scalar(grid, dvs2), cylinder)
    rhs = {
        "grad_pow_2p_minus_2": integrate(_scalar(grid, _pow(gn, 2 * (params.p - 1))), outer),
        "grad_pow_p": integrate(_scalar(grid, _pow(gn, params.p)), outer),
    }
    ut = time_deriv(f).values
    if params.p == 2:
        flux = jet.g
    else:
        # |g|^(p-1) -> 0 as g -> 0 for every p > 1
        with np.errstate(invalid="ignore"):
            flux = np.where(gn[..., None] > 0, _pow(gn, params.p - 2)[..., None] * jet.g, 0.0)
    div = sum(np.gradient(flux[..., k], grid.h, axis=1 + k, edge_order=2) for k in range(grid.n_dim))
    x = grid.node_coords()
    t = grid.times.reshape((-1,) + (1,) * grid.n_dim)
    nodes = cylinder.contains(x, t) & grid.interior_mask(2)
    nodes[0] = nodes[-1] = False
    if params.p != 2:
        nodes &= gn >= grad_floor
    resid = np.abs(ut - div)[nodes]
    extras = {
        "ut_sq": integrate(_scalar(grid, ut * ut), cylinder),
        "residual_sup": float(resid.max()) if resid.size else 0.0,
        "residual_nodes": int(resid.size),
    }
    return EstimateReport(
        "time_derivative",
        lhs,
        rhs,
        _constant(lhs, rhs, cylinder.r**2),
        _params_dict(params),
        u_field.grid.describe(),
        cylinder.describe(),
        {"singular_nodes_skipped": skipped, **(flags or {})},
        extras,
    )


# -- pointwise suite ---------------------------------------------------------


def pointwise_suite(u_field: ScalarField, params: Params, exclude=None) -> dict:
    """Run every pointwise margin on the discrete jets of interior nodes.

    ``exclude`` is an optional boolean mask over spatial nodes (for example
    a band around a singular axis).  Margins are reported raw and divided
    by their natural scale (``1 + |g|^4 |H|^2`` for the fundamental forms,
    ``1 + |H|^2`` otherwise).
    """
    grid = u_field.grid
    jet = _jet_of(u_field)
    keep = np.broadcast_to(grid.interior_mask(1), grid.shape).copy()
    if exclude is not None:
        keep &= ~np.broadcast_to(exclude, grid.shape)
    g, H = jet.g[keep], jet.H[keep]
    sub = Jet(g, H)
    g2 = np.sum(g * g, axis=-1)
    H2 = np.sum(H * H, axis=(-2, -1))
    nonzero = np.sqrt(g2) >= jets.ZERO_GRAD
    out = {"nodes": int(keep.sum()), "zero_gradient_nodes": int((~nonzero).sum())}

    def record(name, margin, scale):
        if margin.size == 0:
            out[name] = None
            return
        out[name] = {"min": float(margin.min()), "min_scaled": float((margin / scale).min())}

    big = 1 + g2 * g2 * H2
    record("fundamental", jets.fundamental_margin(sub), big)
    if grid.n_dim >= 2:
        record("full_fundamental", jets.full_fundamental_margin(sub), big)
    record("trivial", jets.trivial_inequality_margin(sub), 1 + H2)
    if params.s > -1:
        ok = nonzero | (params.eps > 0)
        record("sigma_lower_bound", jets.sigma_lower_bound_margin(Jet(g[ok], H[ok]), params), 1 + H2[ok])
        record("smo_esti", jets.smo_esti_margin(Jet(g[nonzero], H[nonzero]), params), 1 + H2[nonzero])
    out["min_scaled"] = min((v["min_scaled"] for v in out.values() if isinstance(v, dict)), default=None)
    return out


def axis_band(grid: SpaceTimeGrid, width: float) -> np.ndarray:
    """Spatial nodes with ``|x1| < width``."""
    return np.abs(grid.node_coords()[..., 0]) < width


# -- sharpness sweep ---------------------------------------------------------


def sharpness_oracle(p: float, s: float, r: float) -> float:
    """Closed-form ``int_{Q_r} |D V_s(Du)|^2`` for the counterexample in 2D.

    Reduced to one adaptive quadrature in ``x1``; infinite when ``s <= -1``.
    """
    e = (2 - p + s) / (p - 1)
    if e <= -1:
        return math.inf
    c2 = counterexample_constant(p, s) ** 2

    def f(x):
        return x**e * 2 * math.sqrt(max(r * r - x * x, 0.0))

    val, _ = sci_integrate.quad(f, 0, r, limit=200, epsabs=0, epsrel=1e-12)
    return 2 * c2 * val * 2 * r * r


def _sweep_level(p, s, nx, r):
    grid = SpaceTimeGrid.square(-r, r, nx, -r * r, r * r, 3)
    xc = grid.cell_centers()
    ce = counterexample(p)
    jet = Jet(ce.grad(xc, 0.0), ce.hess(xc, 0.0))
    M = jets.d_vs_matrix(jet, Params(p, s))
    val = np.sum(M * M, axis=(-2, -1))
    cells = np.broadcast_to(val, (grid.nt - 1,) + val.shape)
    return grid, integrate(ScalarField(grid, cells, "cell"), Cylinder((0.0, 0.0), 0.0, r))


def extrapolate(hs, values, exponents=np.linspace(0.02, 3.0, 597)):
    """Fit ``I(h) = I0 + A h^k`` by least squares, scanning ``k``.

    Returns ``(I0, k)``.
    """
    hs = np.asarray(hs, dtype=float)
    values = np.asarray(values, dtype=float)
    best = None
    for k in exponents:
        M = np.column_stack([np.ones_like(hs), hs**k])
        coef, *_ = np.linalg.lstsq(M, values, rcond=None)
        res = float(np.sum((M @ coef - values) ** 2))
        if best is None or res < best[0]:
            best = (res, float(coef[0]), float(k))
    return best[1], best[2]


def classify(hs, values) -> dict:
    """Decide whether a refinement sequence of integrals converges.

    Divergent: every increment is positive and each is at least
    ``DIVERGENCE_RATIO`` times the previous one, over at least four
    refinements.  Convergent: the extrapolated limit moves by less than
    ``CONVERGENCE_TOL`` (relative) when the finest level is added.
    """
    values = np.asarray(values, dtype=float)
    inc = np.diff(values)
    ratios = inc[1:] / inc[:-1]
    out = {"increments": inc.tolist(), "increment_ratios": ratios.tolist()}
    if len(values) >= 5 and np.all(inc > 0) and np.all(ratios >= DIVERGENCE_RATIO):
        out.update(classification="divergent", estimate=math.inf)
        return out
    if len(values) >= 4:
        full, k = extrapolate(hs, values)
        prev, _ = extrapolate(hs[:-1], values[:-1])
        change = abs(full - prev) / abs(full)
        out.update(estimate=full, fitted_exponent=k, extrapolation_change=change)
        out["classification"] = "convergent" if change < CONVERGENCE_TOL else "inconclusive"
    else:
        out.update(classification="inconclusive", estimate=float(values[-1]))
    return out


def sharpness_sweep(p: float, s_list, refinement_levels=(32, 64, 128, 256, 512), r: float = 0.5) -> dict:
    """Integrate ``|D V_s(Du)|^2`` for the counterexample over ``Q_r`` under refinement.

    The integrand is evaluated from exact jets at cell centers, which never
    lie on the singular axis.  Returns ``{"rows": [...], "summary": {s: ...}}``
    where each row is ``(s, nx, h, lhs)``.
    """
    rows = []
    summary = {}
    for s in s_list:
        hs, vals = [], []
        for nx in refinement_levels:
            grid, val = _sweep_level(p, s, nx, r)
            rows.append({"p": p, "s": s, "nx": nx, "h": grid.h, "lhs": val})
            hs.append(grid.h)
            vals.append(val)
        info = classify(hs, vals)
        oracle = sharpness_oracle(p, s, r)
        info["oracle"] = oracle
        if math.isfinite(oracle) and math.isfinite(info["estimate"]):
            info["oracle_rel_error"] = abs(info["estimate"] - oracle) / oracle
        info["expected"] = "convergent" if s > -1 else "divergent"
        summary[s] = info
    return {"rows": rows, "summary": summary}
