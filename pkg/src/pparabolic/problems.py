"""Ready-made solver setups with known solutions.

Each builder returns a :class:`Problem` holding the solver configuration,
the boundary data and the exact solution that generated it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exact import ExactSolution, affine_reference, counterexample, heat_reference
from .grid import ScalarField, SpaceTimeGrid
from .jets import Params
from .solver import BoundaryData, SolveResult, SolverConfig, solve

# explicit heat runs use dt = h^2/8: half of the 2D forward-Euler limit h^2/4
HEAT_CFL = 0.5


@dataclass(frozen=True)
class Problem:
    config: SolverConfig
    boundary: BoundaryData
    exact: ExactSolution

    @property
    def grid(self) -> SpaceTimeGrid:
        return self.config.grid

    def solve(self) -> SolveResult:
        return solve(self.config, self.boundary)


def heat_problem(nx: int, t_end: float = 0.2, store_every: int | None = None, eps: float = 0.0) -> Problem:
    """Heat equation on the unit square, forward Euler with ``dt = h^2/8``.

    Only every ``store_every``-th step is kept as a grid level (default
    ``nx // 4``, so the stored spacing is ``h/32``); the solver sub-steps
    in between.  ``t_end`` is rounded to a whole number of stored levels.
    """
    h = 1.0 / nx
    m = store_every or max(1, nx // 4)
    step = h * h / 8
    levels = max(2, round(t_end / (m * step)))
    grid = SpaceTimeGrid.square(0.0, 1.0, nx, 0.0, levels * m * step, levels + 1)
    ex = heat_reference()
    config = SolverConfig(Params(2.0, 0.0, eps), grid, "explicit", cfl_safety=HEAT_CFL)
    return Problem(config, BoundaryData(ex.u), ex)


def counterexample_problem(
    p: float = 3.0,
    nx: int = 32,
    eps: float = 1e-4,
    t_end: float = 0.6,
    nt: int = 31,
    scheme: str = "implicit_picard",
    half_width: float = 1.0,
    **solver_kw,
) -> Problem:
    """The separable solution on ``[-L, L]^2``, boundary and initial data exact."""
    grid = SpaceTimeGrid.square(-half_width, half_width, nx, 0.0, t_end, nt)
    ex = counterexample(p)
    config = SolverConfig(Params(p, 0.0, eps), grid, scheme, **solver_kw)
    return Problem(config, BoundaryData(ex.u), ex)


def affine_problem(a=(0.7, -0.3), b: float = 0.2, p: float = 3.0, nx: int = 16, eps: float = 0.0) -> Problem:
    grid = SpaceTimeGrid.square(0.0, 1.0, nx, 0.0, 0.05, 6)
    ex = affine_reference(a, b)
    config = SolverConfig(Params(p, 0.0, eps), grid, "implicit_picard")
    return Problem(config, BoundaryData(ex.u), ex)


def interior_error(field: ScalarField, exact: ExactSolution, width: int = 1) -> float:
    """Max ``|u_h - u|`` over interior nodes of every time level."""
    grid = field.grid
    x = grid.node_coords()
    mask = grid.interior_mask(width)
    worst = 0.0
    for k, t in enumerate(grid.times):
        err = np.abs(field.values[k] - exact.u(x, float(t)))
        worst = max(worst, float(err[mask].max()))
    return worst
