"""Structured space-time grids, finite-difference calculus and quadrature.

Field values are stored time-first: a scalar field on a 2D grid has
``values.shape == (nt, nx + 1, nx + 1)``.  Vector and matrix fields append
``(n,)`` or ``(n, n)``.  Node ``i`` along a spatial axis sits at
``lo + i * h``.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class EmptyIntegrationWarning(UserWarning):
    """The integration region contains no cell centers."""


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform node grid on ``prod(bounds) x [t_start, t_end]``.

    All spatial axes must have the same extent so that ``h`` is a single
    number.
    """

    bounds: tuple
    nx: int
    t_start: float
    t_end: float
    nt: int

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        if len(bounds) not in (1, 2):
            raise ValueError("only 1 or 2 spatial dimensions are supported")
        extents = {hi - lo for lo, hi in bounds}
        if len(extents) != 1 or min(extents) <= 0:
            raise ValueError(f"spatial axes need equal positive extents, got {bounds}")
        if self.nx < 8:
            raise ValueError(f"nx must be at least 8, got {self.nx}")
        if self.nt < 3:
            raise ValueError(f"nt must be at least 3, got {self.nt}")
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")

    @classmethod
    def square(cls, lo, hi, nx, t_start, t_end, nt, n_dim=2):
        return cls(((lo, hi),) * n_dim, nx, t_start, t_end, nt)

    @property
    def n_dim(self) -> int:
        return len(self.bounds)

    @property
    def h(self) -> float:
        lo, hi = self.bounds[0]
        return (hi - lo) / self.nx

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / (self.nt - 1)

    @property
    def spatial_shape(self) -> tuple[int, ...]:
        return (self.nx + 1,) * self.n_dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nt,) + self.spatial_shape

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.nt)

    def axis(self, k: int) -> np.ndarray:
        lo, _ = self.bounds[k]
        return lo + self.h * np.arange(self.nx + 1)

    def node_coords(self) -> np.ndarray:
        """Spatial node coordinates, shape ``spatial_shape + (n_dim,)``."""
        axes = [self.axis(k) for k in range(self.n_dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def cell_centers(self) -> np.ndarray:
        axes = [self.axis(k)[:-1] + 0.5 * self.h for k in range(self.n_dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    @property
    def cell_times(self) -> np.ndarray:
        return self.times[:-1] + 0.5 * self.dt

    def interior_mask(self, width: int = 1) -> np.ndarray:
        """Spatial nodes at least ``width`` nodes away from the boundary."""
        m = np.zeros(self.spatial_shape, dtype=bool)
        m[(slice(width, -width),) * self.n_dim] = True
        return m

    def time_window(self, k0: int, k1: int) -> "SpaceTimeGrid":
        """Sub-grid made of time levels ``k0 .. k1`` inclusive."""
        return SpaceTimeGrid(self.bounds, self.nx, float(self.times[k0]), float(self.times[k1]), k1 - k0 + 1)

    def describe(self) -> dict:
        return {
            "n_dim": self.n_dim,
            "bounds": [list(b) for b in self.bounds],
            "nx": self.nx,
            "h": self.h,
            "t_start": self.t_start,
            "t_end": self.t_end,
            "nt": self.nt,
            "dt": self.dt,
        }


@dataclass(frozen=True)
class Cylinder:
    """Parabolic cylinder ``B_r(x0) x (t0 - r^2, t0 + r^2)``."""

    x0: tuple
    t0: float
    r: float

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(v) for v in np.atleast_1d(self.x0)))
        if not self.r > 0:
            raise ValueError(f"cylinder radius must be positive, got {self.r}")

    def scaled(self, factor: float) -> "Cylinder":
        return Cylinder(self.x0, self.t0, factor * self.r)

    def contains(self, x, t):
        x = np.asarray(x, dtype=float)
        d2 = np.sum((x - np.asarray(self.x0)) ** 2, axis=-1)
        return (d2 < self.r**2) & (np.abs(np.asarray(t) - self.t0) < self.r**2)

    def volume(self) -> float:
        n = len(self.x0)
        ball = 2 * self.r if n == 1 else np.pi * self.r**2
        return ball * 2 * self.r**2

    def fits_inside(self, grid: SpaceTimeGrid) -> bool:
        """True when the closed cylinder lies in the open grid domain."""
        if len(self.x0) != grid.n_dim:
            return False
        for c, (lo, hi) in zip(self.x0, grid.bounds):
            if not (lo < c - self.r and c + self.r < hi):
                return False
        return grid.t_start < self.t0 - self.r**2 and self.t0 + self.r**2 < grid.t_end

    def describe(self) -> dict:
        return {"x0": list(self.x0), "t0": self.t0, "r": self.r}


@dataclass(frozen=True)
class _Field:
    grid: SpaceTimeGrid
    values: np.ndarray
    centering: str = "node"

    _rank = 0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if self.centering == "node":
            base = self.grid.shape
        elif self.centering == "cell":
            base = (self.grid.nt - 1,) + (self.grid.nx,) * self.grid.n_dim
        else:
            raise ValueError(f"unknown centering {self.centering!r}")
        tail = () if self._rank == 0 else (self.grid.n_dim,) * self._rank
        if v.shape != base + tail:
            raise ValueError(f"field shape {v.shape} does not match grid shape {base + tail}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def time_window(self, k0: int, k1: int):
        if self.centering != "node":
            raise ValueError("time windows are only taken of node fields")
        return type(self)(self.grid.time_window(k0, k1), self.values[k0 : k1 + 1])


class ScalarField(_Field):
    """Scalar values on grid nodes (or cells); all values must be finite."""

    def __post_init__(self):
        super().__post_init__()
        if not np.all(np.isfinite(self.values)):
            raise ValueError("scalar field contains non-finite values")


class VectorField(_Field):
    _rank = 1


class MatrixField(_Field):
    _rank = 2


def sample(func, grid: SpaceTimeGrid, centering: str = "node") -> ScalarField:
    """Evaluate ``func(x, t)`` on nodes or cell centers.

    ``func`` receives ``x`` of shape ``(*spatial, n)`` and a scalar ``t``.
    """
    if centering == "node":
        x, times = grid.node_coords(), grid.times
    else:
        x, times = grid.cell_centers(), grid.cell_times
    vals = np.stack([np.broadcast_to(func(x, float(t)), x.shape[:-1]) for t in times])
    return ScalarField(grid, vals, centering)


# -- differential operators --------------------------------------------------


def _check_stencil(grid: SpaceTimeGrid):
    if grid.nx < 3:
        raise ValueError("grid too small for second-order stencils")


def _d1(u, h, axis):
    return np.gradient(u, h, axis=axis, edge_order=2)


def _d2(u, h, axis):
    """Second difference; 3-point centered inside, 4-point one-sided at the ends."""
    u = np.moveaxis(u, axis, 0)
    out = np.empty_like(u)
    out[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / h**2
    out[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / h**2
    out[-1] = (2.0 * u[-1] - 5.0 * u[-2] + 4.0 * u[-3] - u[-4]) / h**2
    return np.moveaxis(out, 0, axis)


def gradient_array(u, h: float, n_dim: int):
    """Second-order gradient of an array whose last ``n_dim`` axes are spatial."""
    off = u.ndim - n_dim
    return np.stack([_d1(u, h, off + k) for k in range(n_dim)], axis=-1)


def hessian_array(u, h: float, n_dim: int):
    """Second-order Hessian; symmetric by construction."""
    off = u.ndim - n_dim
    H = np.empty(u.shape + (n_dim, n_dim))
    for i in range(n_dim):
        H[..., i, i] = _d2(u, h, off + i)
        for j in range(i + 1, n_dim):
            cross = _d1(_d1(u, h, off + i), h, off + j)
            H[..., i, j] = cross
            H[..., j, i] = cross
    return H


def gradient(field: ScalarField) -> VectorField:
    _check_stencil(field.grid)
    return VectorField(field.grid, gradient_array(field.values, field.grid.h, field.grid.n_dim))


def hessian(field: ScalarField) -> MatrixField:
    _check_stencil(field.grid)
    return MatrixField(field.grid, hessian_array(field.values, field.grid.h, field.grid.n_dim))


def time_deriv(field: ScalarField) -> ScalarField:
    """Centered in time, second-order one-sided at the first and last level."""
    return ScalarField(field.grid, np.gradient(field.values, field.grid.dt, axis=0, edge_order=2))


# -- quadrature --------------------------------------------------------------


def _to_cells(values):
    """Average node values onto cell centers along every axis."""
    for ax in range(values.ndim):
        lo = [slice(None)] * values.ndim
        hi = [slice(None)] * values.ndim
        lo[ax] = slice(None, -1)
        hi[ax] = slice(1, None)
        values = 0.5 * (values[tuple(lo)] + values[tuple(hi)])
    return values


def cell_mask(grid: SpaceTimeGrid, cylinder: Cylinder | None) -> np.ndarray:
    shape = (grid.nt - 1,) + (grid.nx,) * grid.n_dim
    if cylinder is None:
        return np.ones(shape, dtype=bool)
    xc = grid.cell_centers()
    d2 = np.sum((xc - np.asarray(cylinder.x0)) ** 2, axis=-1)
    in_ball = d2 < cylinder.r**2
    in_time = np.abs(grid.cell_times - cylinder.t0) < cylinder.r**2
    return in_time.reshape((-1,) + (1,) * grid.n_dim) & in_ball


def integrate(field, cylinder: Cylinder | None = None) -> float:
    """Midpoint rule over the cells whose centers lie in ``cylinder``.

    Node fields are first averaged onto cell centers.  ``cylinder=None``
    integrates over the whole grid.  An empty intersection gives 0.0 and
    an :class:`EmptyIntegrationWarning`.
    """
    grid = field.grid
    vals = np.asarray(field.values)
    if field.centering == "node":
        vals = _to_cells(vals)
    mask = cell_mask(grid, cylinder)
    if not mask.any():
        warnings.warn("cylinder contains no cell centers", EmptyIntegrationWarning, stacklevel=2)
        return 0.0
    return float(np.sum(vals[mask]) * grid.h**grid.n_dim * grid.dt)


# -- cutoff functions --------------------------------------------------------


def _smooth_ramp(d, a, b):
    """1 on ``[0, a]``, 0 on ``[b, inf)``, cubic smoothstep in between."""
    x = np.clip((d - a) / (b - a), 0.0, 1.0)
    return 1.0 - x * x * (3.0 - 2.0 * x)


def make_cutoff(grid: SpaceTimeGrid, cylinder: Cylinder) -> ScalarField:
    """Cutoff equal to 1 on ``Q_r`` and supported in ``Q_{2r}``.

    Spatial ramp over ``r <= |x - x0| <= 2r`` (slope at most ``1.5/r``),
    temporal ramp over ``r^2 <= |t - t0| <= 4r^2`` (slope at most ``0.5/r^2``).
    """
    if not cylinder.scaled(2.0).fits_inside(grid):
        raise ValueError("Q_2r does not fit inside the grid; cylinder too close to the boundary")
    r = cylinder.r
    dist = np.sqrt(np.sum((grid.node_coords() - np.asarray(cylinder.x0)) ** 2, axis=-1))
    space = _smooth_ramp(dist, r, 2 * r)
    time = _smooth_ramp(np.abs(grid.times - cylinder.t0), r * r, 4 * r * r)
    return ScalarField(grid, time.reshape((-1,) + (1,) * grid.n_dim) * space)


def check_cutoff(phi: ScalarField, cylinder: Cylinder) -> dict:
    """Measure the cutoff conditions on the grid nodes.

    Returns the measured quantities together with one boolean per
    condition: equal to one on ``Q_r``, bounded by one, supported in
    ``Q_{2r}``, ``|D phi| <= 10/r`` and ``|phi_t| <= 10/r^2``.
    """
    grid, r = phi.grid, cylinder.r
    x = grid.node_coords()
    t = grid.times.reshape((-1,) + (1,) * grid.n_dim)
    inner = cylinder.contains(x, t)
    outer = cylinder.scaled(2.0).contains(x, t)
    v = phi.values
    grad_max = float(np.max(np.sqrt(np.sum(gradient(phi).values ** 2, axis=-1))))
    dt_max = float(np.max(np.abs(time_deriv(phi).values)))
    return {
        "one_on_inner": bool(np.all(v[inner] == 1.0)),
        "bounded_by_one": bool(np.all(np.abs(v) <= 1.0)),
        "support_in_outer": bool(np.all(v[~outer] == 0.0)),
        "grad_bound": grad_max <= 10.0 / r,
        "time_bound": dt_max <= 10.0 / r**2,
        "max_grad": grad_max,
        "max_time_deriv": dt_max,
    }


# -- export ------------------------------------------------------------------


def write_csv(field: ScalarField, path, time_indices=None) -> Path:
    """One row per node: coordinates, time, value."""
    grid = field.grid
    if field.centering == "node":
        x, times = grid.node_coords(), grid.times
    else:
        x, times = grid.cell_centers(), grid.cell_times
    ks = range(len(times)) if time_indices is None else time_indices
    flat_x = x.reshape(-1, grid.n_dim)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k + 1}" for k in range(grid.n_dim)] + ["t", "value"])
        for k in ks:
            vals = field.values[k].reshape(-1)
            for xi, vi in zip(flat_x, vals):
                w.writerow([repr(float(c)) for c in xi] + [repr(float(times[k])), repr(float(vi))])
    return path
