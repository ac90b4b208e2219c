"""Finite-difference solver for ``u_t = div((|Du|^2 + eps)^((p-2)/2) Du)``.

The spatial operator is conservative: fluxes live on the faces between
neighbouring nodes, the normal derivative is a two-point difference and
the transverse derivative is the average of the centered differences at
the two adjacent nodes.  Dirichlet data is imposed on every boundary node.

Two time integrators are provided.  ``explicit`` is forward Euler with
automatic sub-stepping under a CFL bound.  ``implicit_picard`` is
backward Euler with lagged diffusivity: each sweep freezes the
coefficient at the current iterate and solves the resulting SPD system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import ScalarField, SpaceTimeGrid, gradient, integrate, time_deriv
from .jets import Params

SCHEMES = ("explicit", "implicit_picard")


class SolverError(RuntimeError):
    """Fatal numerical failure inside a time step."""


@dataclass(frozen=True)
class SolverConfig:
    params: Params
    grid: SpaceTimeGrid
    scheme: str = "explicit"
    cfl_safety: float = 0.2
    picard_tol: float = 1e-8
    picard_max_iters: int = 50
    linear_tol: float = 1e-10
    picard_relaxation: float | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.scheme == "explicit" and self.params.p < 2 and self.params.eps <= 0:
            raise ValueError("the explicit scheme with p < 2 needs eps > 0")
        if self.picard_max_iters < 1:
            raise ValueError("picard_max_iters must be positive")
        if self.picard_relaxation is not None and not 0 < self.picard_relaxation <= 2:
            raise ValueError("picard_relaxation must lie in (0, 2]")

    @property
    def relaxation(self) -> float:
        """Picard damping factor; ``2/p`` unless set explicitly.

        The frozen-coefficient map responds to a perturbation of ``log|Du|``
        with gain ``-(p-2) |Du|^2/mu^2``; ``2/p`` minimizes the worst-case
        contraction factor of the relaxed map, which is ``|p-2|/p``.
        """
        if self.picard_relaxation is not None:
            return self.picard_relaxation
        return 2.0 / self.params.p

    def describe(self) -> dict:
        return {
            "params": {"p": self.params.p, "s": self.params.s, "eps": self.params.eps},
            "grid": self.grid.describe(),
            "scheme": self.scheme,
            "cfl_safety": self.cfl_safety,
            "picard_tol": self.picard_tol,
            "picard_max_iters": self.picard_max_iters,
            "linear_tol": self.linear_tol,
            "picard_relaxation": self.relaxation,
        }


@dataclass(frozen=True)
class BoundaryData:
    """Values ``func(x, t)`` on the parabolic boundary and the initial slice."""

    func: Callable

    def __call__(self, x, t):
        vals = np.asarray(self.func(x, t), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"boundary data is not finite at t={t}")
        return vals


@dataclass
class SolveResult:
    field: ScalarField
    diagnostics: list = field(default_factory=list)

    @property
    def picard_warnings(self) -> int:
        return sum(1 for d in self.diagnostics if d.get("picard_converged") is False)


# -- face fluxes -------------------------------------------------------------


def _face_gradients(u, h, axis):
    """Normal and squared transverse derivative on faces normal to ``axis``.

    Faces are restricted to interior transverse indices, so the returned
    arrays have length ``nx`` along ``axis`` and ``nx - 1`` elsewhere.
    """
    v = np.moveaxis(u, axis, 0)
    inner = (slice(None),) + (slice(1, -1),) * (v.ndim - 1)
    gn = (v[1:] - v[:-1])[inner] / h
    gt2 = np.zeros_like(gn)
    for b in range(1, v.ndim):
        fwd = [slice(None)] + [slice(1, -1)] * (v.ndim - 1)
        bwd = list(fwd)
        fwd[b] = slice(2, None)
        bwd[b] = slice(None, -2)
        c = (v[tuple(fwd)] - v[tuple(bwd)]) / (2 * h)
        gt = 0.5 * (c[1:] + c[:-1])
        gt2 += gt * gt
    return gn, gt2


def _coefficient(mu2, p):
    if p == 2:
        return np.ones_like(mu2)
    with np.errstate(divide="ignore"):
        return mu2 ** (0.5 * (p - 2))


def face_coefficients(u, grid: SpaceTimeGrid, params: Params):
    """``mu^(p-2)`` and the normal derivative on the faces of every axis."""
    out = []
    for a in range(grid.n_dim):
        gn, gt2 = _face_gradients(u, grid.h, a)
        coef = _coefficient(gn * gn + gt2 + params.eps, params.p)
        out.append((coef, gn))
    return out


def _raise_bad_face(arr, axis, grid, what):
    idx = np.argwhere(~np.isfinite(arr))[0]
    raise SolverError(f"non-finite {what} on face normal to axis {axis} at face index {tuple(int(i) for i in idx)} (h={grid.h:g})")


def flux_divergence(u, grid: SpaceTimeGrid, params: Params):
    """Discrete ``div(mu^(p-2) Du)`` on one time level; zero on boundary nodes."""
    div = np.zeros_like(u)
    inner = (slice(1, -1),) * grid.n_dim
    for a, (coef, gn) in enumerate(face_coefficients(u, grid, params)):
        with np.errstate(invalid="ignore"):
            flux = coef * gn
        if not np.all(np.isfinite(flux)):
            _raise_bad_face(flux, a, grid, "flux")
        d = (flux[1:] - flux[:-1]) / grid.h
        div[inner] += np.moveaxis(d, 0, a)
    return div


def stable_dt(u, grid: SpaceTimeGrid, config: SolverConfig) -> float:
    """Largest explicit step allowed by the CFL bound on the current level."""
    p = config.params.p
    cmax = max(float(np.max(c)) for c, _ in face_coefficients(u, grid, config.params))
    if not math.isfinite(cmax):
        raise SolverError("unbounded diffusion coefficient; eps must be positive for p < 2")
    cmax = max(cmax, 1e-300)
    return config.cfl_safety * grid.h**2 / (2 * grid.n_dim * max(1.0, p - 1) * cmax)


def _boundary_mask(grid: SpaceTimeGrid):
    return ~grid.interior_mask(1)


def _impose(u, x, t, boundary, bmask):
    u = u.copy()
    u[bmask] = boundary(x, t)[bmask]
    return u


def step_explicit(u_level, t: float, config: SolverConfig, boundary: BoundaryData):
    """Advance one grid step of length ``grid.dt`` with forward Euler.

    The step is split into equal sub-steps when the CFL bound is tighter
    than ``grid.dt``.
    """
    grid = config.grid
    dt = grid.dt
    limit = stable_dt(u_level, grid, config)
    nsub = max(1, math.ceil(dt / limit * (1 - 1e-12)))
    tau = dt / nsub
    x = grid.node_coords()
    bmask = _boundary_mask(grid)
    u = u_level
    for m in range(nsub):
        upd = tau * flux_divergence(u, grid, config.params)
        u = _impose(u + upd, x, t + (m + 1) * tau, boundary, bmask)
    if not np.all(np.isfinite(u)):
        raise SolverError(f"non-finite values after explicit step at t={t + dt:g}")
    diag = {"substeps": nsub, "dt": tau, "max_update": float(np.max(np.abs(u - u_level)))}
    return u, diag


def _assemble(v, grid: SpaceTimeGrid, params: Params, dt: float):
    """Matrix ``I - dt L(v)`` on interior nodes plus the boundary contribution.

    ``L`` is the divergence operator with coefficients frozen at ``v``.
    Returns ``(A, b_extra)`` where ``b_extra`` collects ``dt * L`` applied
    to the known boundary values.
    """
    n_dim, h = grid.n_dim, grid.h
    shape = grid.spatial_shape
    interior = grid.interior_mask(1)
    index = -np.ones(shape, dtype=np.int64)
    index[interior] = np.arange(int(interior.sum()))
    N = int(interior.sum())
    diag = np.ones(N)
    rows, cols, vals = [], [], []
    extra = np.zeros(N)
    for a, (coef, _) in enumerate(face_coefficients(v, grid, params)):
        if not np.all(np.isfinite(coef)):
            _raise_bad_face(coef, a, grid, "diffusion coefficient")
        w = dt * coef / h**2
        idx = np.moveaxis(index, a, 0)
        vv = np.moveaxis(v, a, 0)
        inner = (slice(None),) + (slice(1, -1),) * (n_dim - 1)
        left, right = idx[:-1][inner], idx[1:][inner]
        vl, vr = vv[:-1][inner], vv[1:][inner]
        for me, other, v_other in ((left, right, vr), (right, left, vl)):
            own = me >= 0
            np.add.at(diag, me[own], w[own])
            both = own & (other >= 0)
            rows.append(me[both])
            cols.append(other[both])
            vals.append(-w[both])
            bnd = own & (other < 0)
            np.add.at(extra, me[bnd], w[bnd] * v_other[bnd])
    rows.append(np.arange(N))
    cols.append(np.arange(N))
    vals.append(diag)
    A = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))
    return A, extra, interior


def step_implicit_picard(u_level, t: float, config: SolverConfig, boundary: BoundaryData):
    """Backward Euler step solved by lagged-diffusivity (Picard) iteration.

    Each sweep freezes ``mu^(p-2)`` at the iterate ``v``, solves
    ``(I - dt div(mu(v)^(p-2) D)) w = u_level`` and relaxes
    ``v <- v + omega (w - v)``.  Stops when the sup-norm change drops below
    ``picard_tol``; hitting ``picard_max_iters`` is flagged, not fatal.
    """
    grid = config.grid
    dt = grid.dt
    t_new = t + dt
    x = grid.node_coords()
    bmask = _boundary_mask(grid)
    omega = config.relaxation
    v = _impose(u_level, x, t_new, boundary, bmask)
    converged = False
    it = 0
    change = float("inf")
    for it in range(1, config.picard_max_iters + 1):
        A, extra, interior = _assemble(v, grid, config.params, dt)
        rhs = u_level[interior] + extra
        try:
            sol = spla.spsolve(A, rhs)
        except RuntimeError as exc:  # SuperLU reports singular factors this way
            raise SolverError(f"linear solve failed at t={t_new:g}, Picard sweep {it}: {exc}") from exc
        res = np.linalg.norm(A @ sol - rhs) / max(np.linalg.norm(rhs), 1e-300)
        if not np.all(np.isfinite(sol)) or res > config.linear_tol:
            raise SolverError(f"linear solve breakdown at t={t_new:g}, Picard sweep {it}: relative residual {res:.3e}")
        new = v.copy()
        new[interior] = sol if omega == 1 else v[interior] + omega * (sol - v[interior])
        change = float(np.max(np.abs(new - v)))
        v = new
        if change < config.picard_tol:
            converged = True
            break
        if config.params.p == 2:
            # coefficient does not depend on the iterate
            converged = True
            break
    diag = {
        "picard_iterations": it,
        "picard_converged": converged,
        "picard_change": change,
        "max_update": float(np.max(np.abs(v - u_level))),
    }
    return v, diag


def solve(config: SolverConfig, boundary) -> SolveResult:
    """March from the initial slice to ``t_end`` and collect every level."""
    if not isinstance(boundary, BoundaryData):
        boundary = BoundaryData(boundary)
    grid = config.grid
    x = grid.node_coords()
    times = grid.times
    levels = np.empty(grid.shape)
    levels[0] = boundary(x, float(times[0]))
    step = step_explicit if config.scheme == "explicit" else step_implicit_picard
    diagnostics = []
    for k in range(grid.nt - 1):
        levels[k + 1], diag = step(levels[k], float(times[k]), config, boundary)
        diag = {"step": k + 1, "t": float(times[k + 1]), **diag}
        diagnostics.append(diag)
    return SolveResult(ScalarField(grid, levels), diagnostics)


def weak_form_residual(u_field: ScalarField, phi_field: ScalarField, params: Params) -> float:
    """Quadrature of ``mu^(p-2) <Du, D phi> - u phi_t`` over the whole grid.

    ``mu^2 = |Du|^2 + eps``; with ``eps = 0`` this is the weak form of the
    unregularized equation.  ``phi`` should vanish near the grid boundary.
    """
    if u_field.grid != phi_field.grid:
        raise ValueError("u and phi must live on the same grid")
    Du = gradient(u_field).values
    Dphi = gradient(phi_field).values
    mu2 = np.sum(Du * Du, axis=-1) + params.eps
    dot = np.sum(Du * Dphi, axis=-1)
    if params.p == 2:
        flux_term = dot
    else:
        zero = mu2 == 0
        coef = np.where(zero, 0.0, np.where(zero, 1.0, mu2) ** (0.5 * (params.p - 2)))
        flux_term = coef * dot
    integrand = flux_term - u_field.values * time_deriv(phi_field).values
    return integrate(ScalarField(u_field.grid, integrand))
