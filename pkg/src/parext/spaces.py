"""Exponent scale and the weighted norms ``X_t``, ``X_{*,t}``, ``Y_t``, ``Y_{*,t}``.

For ``t`` in ``[0, 1)``::

    1/p_t = (1 - t) * d / (d + 1)        1/q_t = (1 - t) / (d + 1)

so ``q_t = d * p_t`` for every ``t``.  With ``w = 1/upsilon_star`` and
``w* = 1/upsilon``::

    ||f||_{X_t}^{p_t}      = sum |f|^{p_t} w^{t p_t}   h^2
    ||f||_{X_{*,t}}^{p_t}  = sum |f|^{p_t} w*^{t p_t}  h^2
    ||f||_{Y_{*,t}}^{q_t}  = sum |f|^{q_t} w*^{t q_t / d} h^2
    ||f||_{Y_t}^{q_t}      = sum |f|^{q_t} w^{t q_t / d}  h^2
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .exceptions import ConvexityMismatch
from .grid import SampledField, check_same_grid, lp_norm
from .weights import upsilon_max

__all__ = [
    "SpaceIndex",
    "exponents",
    "x_norm",
    "x_star_norm",
    "y_norm",
    "y_star_norm",
    "weighted_norm",
    "holder_product_check",
    "log_convexity_check",
    "T_CAP",
]

T_CAP = 0.95
LOG_SPACE_ABOVE = 8.0


@dataclass(frozen=True)
class SpaceIndex:
    d: int
    t: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"d must be an integer >= 2, got {self.d}")
        if not 0.0 <= self.t < 1.0:
            raise ValueError(f"t must lie in [0, 1), got {self.t}")
        if self.t > T_CAP:
            raise ValueError(f"t above {T_CAP} is not supported (exponent {self.p:.3g} too large)")

    @property
    def p0(self) -> float:
        return (self.d + 1) / self.d

    @property
    def q0(self) -> float:
        return float(self.d + 1)

    @property
    def p(self) -> float:
        return self.p0 / (1.0 - self.t)

    @property
    def q(self) -> float:
        return self.q0 / (1.0 - self.t)


def exponents(d: int, t: float) -> SpaceIndex:
    idx = SpaceIndex(d, t)
    if not math.isclose(idx.q, d * idx.p, rel_tol=4e-16):
        raise AssertionError("exponent identity q = d p violated")
    return idx


def _as_index(idx, d: int = 2) -> SpaceIndex:
    return idx if isinstance(idx, SpaceIndex) else exponents(d, float(idx))


def weighted_norm(f: SampledField, p: float, weight_sign: int, weight_power: float, d: int = 2) -> float:
    """``(sum |f|^p W^a h^2)^(1/p)`` with ``W = max(1, |x1|^d, |x2 + sign x1^2|^d)``.

    ``weight_sign=+1`` selects ``w`` and ``-1`` selects ``w*``.  Large
    exponents are summed in log space.
    """
    a = np.abs(f.values)
    if weight_power == 0.0:
        return lp_norm(f, p)
    x1, x2 = f.grid.mesh()
    W = upsilon_max(x1, x2, d, weight_sign)
    if p <= LOG_SPACE_ABOVE:
        s = float(np.sum(a ** p * W ** weight_power)) * f.grid.cell_area
        return s ** (1.0 / p)
    nz = a > 0
    if not np.any(nz):
        return 0.0
    logs = p * np.log(a[nz]) + weight_power * np.log(W[nz])
    return math.exp((float(logsumexp(logs)) + math.log(f.grid.cell_area)) / p)


def x_norm(f: SampledField, idx) -> float:
    idx = _as_index(idx)
    return weighted_norm(f, idx.p, +1, idx.t * idx.p, idx.d)


def x_star_norm(f: SampledField, idx) -> float:
    idx = _as_index(idx)
    return weighted_norm(f, idx.p, -1, idx.t * idx.p, idx.d)


def y_star_norm(f: SampledField, idx) -> float:
    idx = _as_index(idx)
    return weighted_norm(f, idx.q, -1, idx.t * idx.q / idx.d, idx.d)


def y_norm(f: SampledField, idx) -> float:
    """Mirror of :func:`y_star_norm` carrying the ``w`` weight."""
    idx = _as_index(idx)
    return weighted_norm(f, idx.q, +1, idx.t * idx.q / idx.d, idx.d)


SLACK = 1e-12


def holder_product_check(
    fields: Sequence[SampledField],
    thetas: Sequence[float],
    t_alphas: Sequence[float],
    t: float,
    d: int = 2,
) -> dict:
    """Compare ``||prod f_a^theta_a||_{X_t}`` with ``prod ||f_a||_{X_{t_a}}^theta_a``.

    Requires ``sum theta = 1`` and ``1 - t = sum theta_a (1 - t_a)``.
    """
    thetas = np.asarray(thetas, dtype=np.float64)
    t_alphas = np.asarray(t_alphas, dtype=np.float64)
    if not (len(fields) == len(thetas) == len(t_alphas)):
        raise ValueError("fields, thetas and t_alphas must have equal length")
    if abs(thetas.sum() - 1.0) > 1e-12:
        raise ConvexityMismatch(f"weights sum to {thetas.sum()!r}, not 1")
    if abs((1.0 - t) - float(np.sum(thetas * (1.0 - t_alphas)))) > 1e-12:
        raise ConvexityMismatch("1 - t differs from the theta-average of 1 - t_a")
    grid = check_same_grid(*fields)
    if any(np.any(f.values < 0) for f in fields):
        raise ValueError("factors must be nonnegative")
    prod = np.ones((grid.N, grid.N))
    for f, th in zip(fields, thetas):
        if th != 0:
            prod = prod * f.values ** th
    lhs = x_norm(SampledField(grid, prod), exponents(d, t))
    rhs = 1.0
    for f, th, ta in zip(fields, thetas, t_alphas):
        if th != 0:
            rhs *= x_norm(f, exponents(d, float(ta))) ** th
    return {"lhs": lhs, "rhs": rhs, "ok": bool(lhs <= rhs * (1 + SLACK))}


def log_convexity_check(f: SampledField, alpha: float, beta: float, theta: float, d: int = 2) -> dict:
    """``||f||_{X_gamma} <= ||f||_{X_alpha}^theta ||f||_{X_beta}^(1-theta)``, gamma the convex mix."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    gamma = theta * alpha + (1.0 - theta) * beta
    lhs = x_norm(f, exponents(d, gamma))
    rhs = x_norm(f, exponents(d, alpha)) ** theta * x_norm(f, exponents(d, beta)) ** (1.0 - theta)
    return {"lhs": lhs, "rhs": rhs, "gamma": gamma, "ok": bool(lhs <= rhs * (1 + SLACK))}
