"""Seeded random-jet checks of the pointwise inequalities.

Jets are drawn with log-uniform magnitudes so that both tiny and large
gradients and Hessians show up, and a fraction of gradients is set to
exactly zero.  Parameters ``(p, s, eps)`` are drawn in groups because
every jet function takes a scalar :class:`~pparabolic.jets.Params`.
"""

from __future__ import annotations

import numpy as np

from . import jets
from .jets import Jet, Params

P_RANGE = (1.0, 5.0)
S_RANGE = (-0.99, 3.0)
EPS_RANGE = (0.0, 1.0)
MARGIN_TOL = 1e-12


def random_jets(rng: np.random.Generator, n: int, size: int, zero_fraction: float = 0.05) -> Jet:
    g = rng.normal(size=(size, n)) * 10.0 ** rng.uniform(-3, 1, size=(size, 1))
    g[rng.random(size) < zero_fraction] = 0.0
    A = rng.normal(size=(size, n, n))
    H = (A + np.swapaxes(A, -1, -2)) * 10.0 ** rng.uniform(-2, 2, size=(size, 1, 1))
    return Jet(g, H)


def random_params(rng: np.random.Generator) -> Params:
    """One draw from ``p in (1, 5]``, ``s in (-0.99, 3]``, ``eps in (0, 1]``."""
    # uniform() is half-open at the top; flip so the open end is the lower bound
    p = P_RANGE[1] - rng.uniform(0, P_RANGE[1] - P_RANGE[0])
    s = S_RANGE[1] - rng.uniform(0, S_RANGE[1] - S_RANGE[0])
    eps = EPS_RANGE[1] - rng.uniform(0, EPS_RANGE[1] - EPS_RANGE[0])
    if not p > 1:
        p = np.nextafter(1.0, 2.0)
    return Params(float(p), float(s), float(eps))


def _scaled_min(margin, scale):
    if margin.size == 0:
        return np.inf
    return float(np.min(margin / scale))


def margin_suite(seed: int, samples: int = 100_000, dims=(1, 2, 3, 4), group: int = 1000) -> dict:
    """Evaluate every margin on ``samples`` random jets per dimension.

    Returns, per inequality, the minimum of ``margin / scale`` and the
    number of jets checked.  ``scale`` is ``1 + |g|^4 |H|^2`` for the two
    fundamental forms and ``1 + |H|^2`` otherwise.
    """
    rng = np.random.default_rng(seed)
    names = ("fundamental", "full_fundamental", "trivial", "sigma_lower_bound", "smo_esti")
    mins = {k: np.inf for k in names}
    counts = {k: 0 for k in names}

    def record(name, margin, scale):
        mins[name] = min(mins[name], _scaled_min(margin, scale))
        counts[name] += int(margin.size)

    for n in dims:
        done = 0
        while done < samples:
            m = min(group, samples - done)
            jet = random_jets(rng, n, m)
            prm = random_params(rng)
            g2 = np.sum(jet.g**2, axis=-1)
            H2 = np.sum(jet.H**2, axis=(-2, -1))
            big = 1 + g2 * g2 * H2
            record("fundamental", jets.fundamental_margin(jet), big)
            if n >= 2:
                record("full_fundamental", jets.full_fundamental_margin(jet), big)
            record("trivial", jets.trivial_inequality_margin(jet), 1 + H2)
            record("sigma_lower_bound", jets.sigma_lower_bound_margin(jet, prm), 1 + H2)
            nz = np.sqrt(g2) >= jets.ZERO_GRAD
            sub = Jet(jet.g[nz], jet.H[nz])
            record("smo_esti", jets.smo_esti_margin(sub, prm), 1 + H2[nz])
            done += m
    return {
        k: {"min_scaled": mins[k], "count": counts[k], "passed": bool(mins[k] >= -MARGIN_TOL)}
        for k in names
    }


def decomposition_suite(seed: int, samples: int = 100_000, dims=(1, 2, 3, 4)) -> dict:
    """Worst relative defect of ``|D|Du||^2 = |D_T|Du||^2 + (Delta_inf^N)^2``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    per = -(-samples // len(dims))
    for n in dims:
        jet = random_jets(rng, n, per, zero_fraction=0.0)
        d2 = np.sum(jets.grad_norm_gradient(jet) ** 2, axis=-1)
        t2 = np.sum(jets.tangential_part(jet) ** 2, axis=-1)
        nl = jets.normalized_inf_laplacian(jet)
        rel = np.abs(d2 - t2 - nl * nl) / np.maximum(d2, 1e-300)
        worst = max(worst, float(rel.max()))
    return {"max_rel_defect": worst, "count": per * len(dims), "passed": bool(worst <= 1e-12)}


def ellipticity_suite(seed: int, samples: int = 10_000, dims=(1, 2, 3, 4), group: int = 250) -> dict:
    """Eigenvalues of ``I + (p-2) g g^T / mu^2`` against ``[min(1,p-1), max(1,p-1)]``.

    ``eps`` is drawn from ``[0, 1]``; when it is zero the gradient is kept nonzero.
    """
    rng = np.random.default_rng(seed)
    worst = -np.inf
    count = 0
    per = -(-samples // len(dims))
    for n in dims:
        done = 0
        while done < per:
            m = min(group, per - done)
            jet = random_jets(rng, n, m, zero_fraction=0.05)
            prm = random_params(rng)
            if rng.random() < 0.2:
                prm = prm.replace(eps=0.0)
                keep = np.linalg.norm(jet.g, axis=-1) > 0
                jet = Jet(jet.g[keep], jet.H[keep])
            lo, hi = min(1.0, prm.p - 1), max(1.0, prm.p - 1)
            ev = np.linalg.eigvalsh(jets.ellipticity_matrix(jet, prm))
            worst = max(worst, float(np.max(lo - ev)), float(np.max(ev - hi)))
            count += ev.shape[0]
            done += ev.shape[0]
    return {"max_violation": worst, "count": count, "passed": bool(worst <= 1e-12)}
