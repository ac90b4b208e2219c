"""Pointwise second-order algebra for the parabolic p-Laplacian.

Every function here acts on a :class:`Jet`, i.e. a gradient ``g`` and a
symmetric Hessian ``H`` taken at one space-time point, or on a batch of
them.  Batches are ordinary numpy broadcasting: ``g`` has shape
``(..., n)`` and ``H`` has shape ``(..., n, n)``, and scalar results come
back with shape ``(...)``.

Inequalities are exposed as signed margins (left side minus right side).
Deciding what counts as "nonnegative enough" is left to the caller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Gradients with Euclidean norm below this are treated as exactly zero.
ZERO_GRAD = 1e-14


@dataclass(frozen=True)
class Jet:
    """Gradient and Hessian at one point (or a batch of points)."""

    g: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        H = np.asarray(self.H, dtype=float)
        if g.ndim < 1 or g.shape[-1] < 1:
            raise ValueError("gradient must have at least one component")
        n = g.shape[-1]
        if H.shape[-2:] != (n, n):
            raise ValueError(f"Hessian shape {H.shape} does not match gradient dimension {n}")
        if not np.array_equal(H, np.swapaxes(H, -1, -2)):
            raise ValueError("Hessian is not symmetric")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "H", H)

    @property
    def n(self) -> int:
        return self.g.shape[-1]

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return np.broadcast_shapes(self.g.shape[:-1], self.H.shape[:-2])


@dataclass(frozen=True)
class Params:
    """Growth exponent ``p``, scaling exponent ``s`` and regularization ``eps``.

    Any real ``s`` is accepted so that sweeps can cross ``s = -1``;
    operations that need ``s > -1`` check it themselves.
    """

    p: float
    s: float = 0.0
    eps: float = 0.0

    def __post_init__(self):
        for name in ("p", "s", "eps"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if self.eps < 0:
            raise ValueError(f"eps must be nonnegative, got {self.eps}")

    def require_s_range(self) -> None:
        if not self.s > -1:
            raise ValueError(f"this operation needs s > -1, got s={self.s}")

    def replace(self, **changes) -> "Params":
        kw = {"p": self.p, "s": self.s, "eps": self.eps}
        kw.update(changes)
        return Params(**kw)


# -- small helpers -----------------------------------------------------------


def _norm(v):
    # scaled so that |g|^2 cannot underflow for tiny nonzero g
    m = np.max(np.abs(v), axis=-1)
    safe = np.where(m > 0, m, 1.0)
    return m * np.sqrt(np.sum((v / safe[..., None]) ** 2, axis=-1))


def _frob2(M):
    return np.sum(M * M, axis=(-2, -1))


def _matvec(H, v):
    return np.einsum("...ij,...j->...i", H, v)


def _unit_gradient(g, floor=ZERO_GRAD):
    """Return ``(g/|g|, |g|, zero_mask)`` with zeros where ``|g| < floor``."""
    gn = _norm(g)
    zero = gn < floor if floor > 0 else gn == 0
    safe = np.where(zero, 1.0, gn)
    ghat = np.where(zero[..., None], 0.0, g / safe[..., None])
    return ghat, gn, zero


def _mu2(g, eps):
    mu2 = np.sum(g * g, axis=-1) + eps
    if np.any(mu2 <= 0):
        raise ValueError("mu = sqrt(|g|^2 + eps) vanishes; need eps > 0 or g != 0")
    return mu2


# -- the V_s fields ----------------------------------------------------------


def v_s(z, params: Params):
    """``|z|^((p-2+s)/2) z``, with ``V_s(0) = 0``."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite input to v_s")
    a = 0.5 * (params.p - 2 + params.s)
    zn = _norm(z)
    zero = zn == 0
    factor = np.where(zero, 0.0, np.where(zero, 1.0, zn) ** a)
    return factor[..., None] * z


def v_s_eps(z, params: Params):
    """Regularized field ``(|z|^2 + eps)^((p-2+s)/4) z``."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("non-finite input to v_s_eps")
    a = 0.25 * (params.p - 2 + params.s)
    w = np.sum(z * z, axis=-1) + params.eps
    zero = w == 0
    factor = np.where(zero, 0.0, np.where(zero, 1.0, w) ** a)
    return factor[..., None] * z


# -- Laplacians --------------------------------------------------------------


def laplacian(jet: Jet):
    return np.trace(jet.H, axis1=-2, axis2=-1)


def inf_laplacian(jet: Jet):
    """``<H g, g>``."""
    return np.einsum("...i,...ij,...j->...", jet.g, jet.H, jet.g)


def normalized_inf_laplacian(jet: Jet):
    """``<H g, g> / |g|^2``, zero where the gradient vanishes."""
    ghat, _, _ = _unit_gradient(jet.g)
    return np.einsum("...i,...ij,...j->...", ghat, jet.H, ghat)


def grad_norm_gradient(jet: Jet):
    """Spatial gradient of ``|Du|``, i.e. ``H g / |g|`` (zero if ``g = 0``)."""
    ghat, _, _ = _unit_gradient(jet.g)
    return _matvec(jet.H, ghat)


def tangential_part(jet: Jet):
    """Component of ``D|Du|`` orthogonal to ``Du``.

    Computed without choosing a frame: ``H ghat - <H ghat, ghat> ghat``.
    """
    ghat, _, _ = _unit_gradient(jet.g)
    Dg = _matvec(jet.H, ghat)
    nl = np.sum(Dg * ghat, axis=-1)
    return Dg - nl[..., None] * ghat


# -- inequality margins ------------------------------------------------------


def fundamental_margin(jet: Jet):
    """``|g|^4 |H|^2 - 2 |g|^2 |Hg|^2 + (Delta_inf)^2`` (nonnegative)."""
    g2 = np.sum(jet.g * jet.g, axis=-1)
    Hg = _matvec(jet.H, jet.g)
    dinf = np.sum(Hg * jet.g, axis=-1)
    return g2 * g2 * _frob2(jet.H) - 2.0 * g2 * np.sum(Hg * Hg, axis=-1) + dinf * dinf


def full_fundamental_margin(jet: Jet):
    """Fundamental margin minus ``(|g|^2 Delta u - Delta_inf)^2 / (n - 1)``.

    Only defined for ``n >= 2``.
    """
    n = jet.n
    if n < 2:
        raise ValueError("the full fundamental inequality needs n >= 2")
    g2 = np.sum(jet.g * jet.g, axis=-1)
    extra = (g2 * laplacian(jet) - inf_laplacian(jet)) ** 2 / (n - 1)
    return fundamental_margin(jet) - extra


def trivial_inequality_margin(jet: Jet):
    """``|H|^2 - 2 |D_T|Du||^2 - (Delta_inf^N)^2``."""
    dt = tangential_part(jet)
    nl = normalized_inf_laplacian(jet)
    return _frob2(jet.H) - 2.0 * np.sum(dt * dt, axis=-1) - nl * nl


def ellipticity_matrix(jet: Jet, params: Params):
    """``I + (p - 2) g g^T / mu^2`` with ``mu^2 = |g|^2 + eps``."""
    g = jet.g
    mu2 = _mu2(g, params.eps)
    outer = g[..., :, None] * g[..., None, :]
    eye = np.eye(jet.n)
    return eye + (params.p - 2) * outer / mu2[..., None, None]


def _mu_ratios(jet: Jet, eps: float):
    """Return ``(|g|^2/mu^2, eps/mu^2)``."""
    g2 = np.sum(jet.g * jet.g, axis=-1)
    mu2 = _mu2(jet.g, eps)
    return g2 / mu2, eps / mu2


def sigma(jet: Jet, params: Params):
    r"""``|H|^2 + (p-2+s)|Hg|^2/mu^2 + s(p-2)(Delta_inf)^2/mu^4``.

    Evaluated through the unit gradient so tiny ``|g|`` does not underflow:
    ``|Hg|^2/mu^2 = rho |H ghat|^2`` and ``Delta_inf^2/mu^4 = rho^2 (Delta_inf^N)^2``
    with ``rho = |g|^2/mu^2``.
    """
    p, s = params.p, params.s
    rho, _ = _mu_ratios(jet, params.eps)
    Dg = grad_norm_gradient(jet)
    nl = normalized_inf_laplacian(jet)
    return (
        _frob2(jet.H)
        + (p - 2 + s) * rho * np.sum(Dg * Dg, axis=-1)
        + s * (p - 2) * rho * rho * nl * nl
    )


def tau(jet: Jet, params: Params):
    """Lower bound for :func:`sigma`, grouped by powers of ``eps/mu^2``."""
    p, s = params.p, params.s
    rho, e = _mu_ratios(jet, params.eps)
    dt = tangential_part(jet)
    nl = normalized_inf_laplacian(jet)
    c_tan = (p + s) * rho * rho + (p + s + 2) * rho * e + 2.0 * e * e
    c_nor = (p - 1) * (s + 1) * rho * rho + (p + s) * rho * e + e * e
    return c_tan * np.sum(dt * dt, axis=-1) + c_nor * nl * nl


def lambda_of(params: Params) -> float:
    """Coercivity constant in ``lambda |H|^2 <= sigma``.

    ``lambda = min((p+s)/2, (p-1)(s+1), 1) / 2``.
    """
    params.require_s_range()
    p, s = params.p, params.s
    return 0.5 * min(0.5 * (p + s), (p - 1) * (s + 1), 1.0)


def eta_of(params: Params) -> float:
    """``min((p+s)/4, (p-1)(s+1)/6)``."""
    params.require_s_range()
    p, s = params.p, params.s
    return min(0.25 * (p + s), (p - 1) * (s + 1) / 6.0)


def sigma_lower_bound_margin(jet: Jet, params: Params):
    return sigma(jet, params) - lambda_of(params) * _frob2(jet.H)


def smo_esti_margin(jet: Jet, params: Params):
    """Margin of the bound ``bracket >= eta |D|Du||^2`` used with ``eta = eta_of``.

    ``bracket = |H|^2 + (p-2+s-eta)|D|Du||^2 + (s(p-2)-eta)(Delta_inf^N)^2``.
    """
    eta = eta_of(params)
    _, _, zero = _unit_gradient(jet.g)
    if np.any(zero):
        raise ValueError("smo_esti_margin needs a nonzero gradient")
    p, s = params.p, params.s
    Dg = grad_norm_gradient(jet)
    d2 = np.sum(Dg * Dg, axis=-1)
    nl = normalized_inf_laplacian(jet)
    bracket = _frob2(jet.H) + (p - 2 + s - eta) * d2 + (s * (p - 2) - eta) * nl * nl
    return bracket - eta * d2


# -- derivative of V_s(Du) ---------------------------------------------------


def d_vs_matrix(jet: Jet, params: Params):
    """Spatial derivative of ``V_s(Du)``: entry ``[i, j] = d V_i / d x_j``.

    ``|g|^a (H + a ghat (H ghat)^T)`` with ``a = (p-2+s)/2``.  Only an
    exactly zero ``g`` is special: the result is ``H`` for ``a = 0`` and the
    zero matrix for ``a > 0``; ``a < 0`` is singular there and raises.
    """
    a = 0.5 * (params.p - 2 + params.s)
    H = jet.H
    if a == 0:
        return np.broadcast_to(H, jet.batch_shape + H.shape[-2:]).copy()
    ghat, gn, zero = _unit_gradient(jet.g, floor=0.0)
    if a < 0 and np.any(zero):
        raise ValueError("D V_s(Du) is singular at Du = 0 when p - 2 + s < 0")
    Hgh = _matvec(H, ghat)
    M = H + a * ghat[..., :, None] * Hgh[..., None, :]
    scale = np.where(zero, 0.0, np.where(zero, 1.0, gn) ** a)
    return scale[..., None, None] * M


def d_vs_eps_matrix(jet: Jet, params: Params):
    """Spatial derivative of the regularized field ``V_s^eps(Du)``.

    ``mu^a (H + a g (Hg)^T / mu^2)`` with ``mu^2 = |g|^2 + eps``.  Falls back
    to :func:`d_vs_matrix` when ``eps = 0``.
    """
    if params.eps == 0:
        return d_vs_matrix(jet, params)
    a = 0.5 * (params.p - 2 + params.s)
    g, H = jet.g, jet.H
    mu2 = _mu2(g, params.eps)
    Hg = _matvec(H, g)
    M = H + a * g[..., :, None] * Hg[..., None, :] / mu2[..., None, None]
    return (mu2 ** (0.5 * a))[..., None, None] * M


def d_vs_norm_bound(jet: Jet, params: Params):
    """``(1 + |p-2+s|/2) |g|^((p-2+s)/2) |H|``, an upper bound for ``|D V_s(Du)|``."""
    a = 0.5 * (params.p - 2 + params.s)
    gn = _norm(jet.g)
    with np.errstate(divide="ignore"):
        scale = gn**a if a != 0 else np.ones_like(gn)
    return (1 + abs(a)) * scale * np.sqrt(_frob2(jet.H))


def frobenius(M):
    return np.sqrt(_frob2(np.asarray(M, dtype=float)))
