"""Closed-form solutions with exact derivatives.

Evaluators take ``x`` with shape ``(..., n)`` and a time ``t`` that
broadcasts against ``x[..., 0]``.  Points where a requested quantity is
singular come back as NaN; :meth:`ExactSolution.is_singular` reports them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import ScalarField, SpaceTimeGrid, sample


@dataclass(frozen=True)
class ExactSolution:
    name: str
    u: Callable
    grad: Callable
    hess: Callable
    u_t: Callable
    p: float | None = None
    domain: str = ""
    singular: Callable | None = None

    def __call__(self, x, t):
        return self.u(x, t)

    def is_singular(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.singular is None:
            return np.zeros(x.shape[:-1], dtype=bool)
        return self.singular(x)

    def sample(self, grid: SpaceTimeGrid, centering: str = "node") -> ScalarField:
        return sample(self.u, grid, centering)

    def pde_residual(self, x, t, p: float | None = None):
        """``u_t - div(|Du|^(p-2) Du)`` from the exact jet.

        Uses ``div(|g|^(p-2) g) = |g|^(p-2) (tr H + (p-2) <H g, g>/|g|^2)``.
        NaN where the gradient vanishes and ``p != 2``.
        """
        p = self.p if p is None else p
        if p is None:
            raise ValueError("an exponent p is needed for the residual")
        x = np.asarray(x, dtype=float)
        g = self.grad(x, t)
        H = self.hess(x, t)
        g2 = np.sum(g * g, axis=-1)
        lap = np.trace(H, axis1=-2, axis2=-1)
        if p == 2:
            return self.u_t(x, t) - lap
        zero = g2 == 0
        safe = np.where(zero, 1.0, g2)
        dinf = np.einsum("...i,...ij,...j->...", g, H, g) / safe
        div = safe ** (0.5 * (p - 2)) * (lap + (p - 2) * dinf)
        return np.where(zero, np.nan, self.u_t(x, t) - div)


def _check_p(p):
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")


def counterexample(p: float) -> ExactSolution:
    """``u = (p/(p-1))^(p-1) t + |x1|^(p/(p-1))``, a solution on R^n x R.

    The Hessian is singular on ``{x1 = 0}`` when ``p > 2``.
    """
    _check_p(p)
    q = p / (p - 1)
    speed = q ** (p - 1)
    beta = 1.0 / (p - 1)

    def u(x, t):
        x = np.asarray(x, dtype=float)
        return speed * np.asarray(t) + np.abs(x[..., 0]) ** q

    def grad(x, t=0.0):
        x = np.asarray(x, dtype=float)
        g = np.zeros(x.shape)
        x1 = x[..., 0]
        g[..., 0] = q * np.abs(x1) ** beta * np.sign(x1)
        return g

    def hess(x, t=0.0):
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        H = np.zeros(x.shape[:-1] + (n, n))
        ax = np.abs(x[..., 0])
        e = beta - 1.0
        if e < 0:
            with np.errstate(divide="ignore"):
                h11 = np.where(ax == 0, np.nan, q / (p - 1) * np.where(ax == 0, 1.0, ax) ** e)
        else:
            h11 = q / (p - 1) * ax**e
        H[..., 0, 0] = h11
        return H

    def u_t(x, t=0.0):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], speed)

    def singular(x):
        x = np.asarray(x, dtype=float)
        if p > 2:
            return x[..., 0] == 0
        return np.zeros(x.shape[:-1], dtype=bool)

    return ExactSolution(
        name=f"counterexample(p={p:g})",
        u=u,
        grad=grad,
        hess=hess,
        u_t=u_t,
        p=p,
        domain="R^n x (0, inf); Hessian singular on x1 = 0 for p > 2",
        singular=singular,
    )


def counterexample_constant(p: float, s: float) -> float:
    """Coefficient in ``|D V_s(Du)| = C |x1|^((2-p+s)/(2(p-1)))``."""
    _check_p(p)
    return (p / (p - 1)) ** (0.5 * (p - 2 + s)) * abs(p * (p + s)) / (2 * (p - 1) ** 2)


def dvs_norm_exact(p: float, s: float, x1):
    """Closed-form ``|D V_s(Du)|`` for :func:`counterexample`."""
    x1 = np.asarray(x1, dtype=float)
    if np.any(x1 == 0):
        raise ValueError("dvs_norm_exact is undefined on x1 = 0")
    return counterexample_constant(p, s) * np.abs(x1) ** ((2 - p + s) / (2 * (p - 1)))


def heat_reference(p: float = 2.0) -> ExactSolution:
    """``exp(-2 pi^2 t) sin(pi x1) sin(pi x2)`` on the unit square (p = 2 only)."""
    if p != 2:
        raise ValueError("the heat reference solves only the p = 2 equation")
    k = np.pi
    lam = 2 * k * k

    def u(x, t):
        x = np.asarray(x, dtype=float)
        return np.exp(-lam * np.asarray(t)) * np.sin(k * x[..., 0]) * np.sin(k * x[..., 1])

    def grad(x, t):
        x = np.asarray(x, dtype=float)
        a = np.exp(-lam * np.asarray(t))
        s1, s2 = np.sin(k * x[..., 0]), np.sin(k * x[..., 1])
        c1, c2 = np.cos(k * x[..., 0]), np.cos(k * x[..., 1])
        return np.stack([a * k * c1 * s2, a * k * s1 * c2], axis=-1)

    def hess(x, t):
        x = np.asarray(x, dtype=float)
        a = np.exp(-lam * np.asarray(t))
        s1, s2 = np.sin(k * x[..., 0]), np.sin(k * x[..., 1])
        c1, c2 = np.cos(k * x[..., 0]), np.cos(k * x[..., 1])
        hxx = -a * k * k * s1 * s2
        hxy = a * k * k * c1 * c2
        return np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hxx], -1)], -2)

    def u_t(x, t):
        return -lam * u(x, t)

    return ExactSolution("heat", u, grad, hess, u_t, p=2.0, domain="[0,1]^2 x [0, inf)")


def affine_reference(a, b: float = 0.0) -> ExactSolution:
    """``u = <a, x> + b``; stationary for every p."""
    a = np.asarray(a, dtype=float)

    def u(x, t):
        x = np.asarray(x, dtype=float)
        return x @ a + b + 0.0 * np.asarray(t)

    def grad(x, t=0.0):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(a, x.shape).copy()

    def hess(x, t=0.0):
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        return np.zeros(x.shape[:-1] + (n, n))

    def u_t(x, t=0.0):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1])

    return ExactSolution("affine", u, grad, hess, u_t, p=None, domain="R^n x R")
