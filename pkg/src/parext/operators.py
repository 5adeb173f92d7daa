"""Discrete parabolic convolution ``T``, its transpose, and the nonlinear stack.

For ``d = 2`` the operator is

    Tf(x1, x2) = integral of f(x1 - t, x2 - t^2) dt  over |t| <= t_max,

discretised as ``sum_k w_k * interpolate(f, x1 - t_k, x2 - t_k^2)``.  For a
fixed node the point shift is the same at every output cell, so the
bilinear stencil reduces to a constant fractional index shift per axis and
the whole operator is a sum of tensor products of 1-D shift matrices.  The
exact transpose applies the transposed 1-D matrices with the same weights.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numba
import numpy as np

from .exceptions import GridMismatch, RhoExceedsQuadRange
from .grid import GridSpec, SampledField, check_same_grid, interpolate

__all__ = [
    "Rule",
    "AdjointMode",
    "QuadratureScheme",
    "OperatorHandle",
    "make_operator",
    "apply_T",
    "apply_T_star",
    "apply_T_rho",
    "apply_T_at",
    "signed_power",
    "calT",
    "calT_star",
    "apply_S",
    "apply_vecS",
    "script_L",
]

D = 2


class Rule(str, enum.Enum):
    MIDPOINT = "midpoint"
    SIMPSON = "simpson"


class AdjointMode(str, enum.Enum):
    EXACT_TRANSPOSE = "exact"
    INDEPENDENT_QUADRATURE = "independent"


@dataclass(frozen=True)
class QuadratureScheme:
    """Nodes and nonnegative weights for the ``t`` integral on ``[-t_max, t_max]``."""

    t_max: float
    n_t: int = 512
    rule: Rule = Rule.MIDPOINT

    def __post_init__(self):
        object.__setattr__(self, "rule", Rule(self.rule))
        if not self.t_max > 0:
            raise ValueError(f"t_max must be positive, got {self.t_max}")
        if self.n_t < 16:
            raise ValueError(f"n_t must be >= 16, got {self.n_t}")
        if self.rule is Rule.SIMPSON and self.n_t % 2 == 0:
            raise ValueError("Simpson's rule needs an odd node count")

    @cached_property
    def nodes_weights(self) -> tuple[np.ndarray, np.ndarray]:
        n, a = self.n_t, self.t_max
        if self.rule is Rule.MIDPOINT:
            dt = 2.0 * a / n
            nodes = -a + (np.arange(n) + 0.5) * dt
            weights = np.full(n, dt)
        else:
            nodes = np.linspace(-a, a, n)
            dt = nodes[1] - nodes[0]
            weights = np.full(n, 2.0)
            weights[1::2] = 4.0
            weights[0] = weights[-1] = 1.0
            weights *= dt / 3.0
        return nodes, weights

    @property
    def nodes(self) -> np.ndarray:
        return self.nodes_weights[0]

    @property
    def weights(self) -> np.ndarray:
        return self.nodes_weights[1]


@dataclass(frozen=True)
class OperatorHandle:
    grid: GridSpec
    quad: QuadratureScheme
    adjoint_mode: AdjointMode = AdjointMode.EXACT_TRANSPOSE

    def __post_init__(self):
        object.__setattr__(self, "adjoint_mode", AdjointMode(self.adjoint_mode))
        if self.quad.t_max ** 2 > 2 * self.grid.L * (1 + 1e-12):
            warnings.warn(
                f"t_max^2 = {self.quad.t_max ** 2:g} exceeds 2L = {2 * self.grid.L:g}; "
                "the parabola leaves the grid before the integration range ends",
                stacklevel=3,
            )

    @property
    def d(self) -> int:
        return D

    @cached_property
    def _stencil(self):
        return _stencil(self.grid, self.quad.nodes, self.quad.nodes ** 2)

    @cached_property
    def _stencil_plus(self):
        # direct discretisation of f(x1 - t, x2 + t^2)
        return _stencil(self.grid, self.quad.nodes, -self.quad.nodes ** 2)


def make_operator(
    grid: GridSpec,
    t_max: float | None = None,
    n_t: int = 512,
    rule: Rule | str = Rule.MIDPOINT,
    adjoint_mode: AdjointMode | str = AdjointMode.EXACT_TRANSPOSE,
) -> OperatorHandle:
    """Operator handle with the default range ``t_max = sqrt(2L)``."""
    if t_max is None:
        t_max = math.sqrt(2.0 * grid.L)
    return OperatorHandle(grid, QuadratureScheme(t_max, n_t, rule), adjoint_mode)


def _axis_shift(shift: np.ndarray, h: float):
    """Integer part and fraction of ``shift / h`` (index units)."""
    sigma = shift / h
    m = np.floor(sigma)
    alpha = sigma - m
    return m.astype(np.int64), alpha


def _stencil(grid: GridSpec, s1: np.ndarray, s2: np.ndarray):
    m1, a1 = _axis_shift(np.asarray(s1, dtype=np.float64), grid.h)
    m2, a2 = _axis_shift(np.asarray(s2, dtype=np.float64), grid.h)
    return m1, a1, m2, a2


# A single 1-D shift matrix M (index shift m, fraction a) has row i equal to
#   a * e_{i-m-1} + (1-a) * e_{i-m}
# for i in [m+1, m+N-1] when a > 0, and e_{i-m} for i in [m, m+N-1] when
# a == 0; other rows are zero (the point is outside the box).


@numba.njit(cache=True, parallel=True)
def _apply_shift_sum(F, weights, m1, a1, m2, a2):
    n = F.shape[0]
    out = np.zeros_like(F)
    nk = weights.shape[0]
    for i in numba.prange(n):
        row = out[i]
        for k in range(nk):
            w = weights[k]
            if w == 0.0:
                continue
            # axis 0 taps
            lo_i = i - m1[k] - 1
            hi_i = i - m1[k]
            al = a1[k]
            if hi_i < 0 or hi_i > n - 1:
                continue
            if al > 0.0:
                if lo_i < 0:
                    continue
                c_lo = w * al
            else:
                c_lo = 0.0
            c_hi = w * (1.0 - al)
            # axis 1 range of valid j
            mm = m2[k]
            be = a2[k]
            if be > 0.0:
                j0 = max(mm + 1, 0)
            else:
                j0 = max(mm, 0)
            j1 = min(mm + n - 1, n - 1)
            for j in range(j0, j1 + 1):
                hj = j - mm
                if be > 0.0:
                    lj = hj - 1
                    if c_lo != 0.0:
                        v = c_lo * ((1.0 - be) * F[lo_i, hj] + be * F[lo_i, lj])
                    else:
                        v = 0.0
                    v += c_hi * ((1.0 - be) * F[hi_i, hj] + be * F[hi_i, lj])
                else:
                    if c_lo != 0.0:
                        v = c_lo * F[lo_i, hj]
                    else:
                        v = 0.0
                    v += c_hi * F[hi_i, hj]
                row[j] += v
    return out


@numba.njit(cache=True, parallel=True)
def _apply_shift_sum_transpose(G, weights, m1, a1, m2, a2):
    n = G.shape[0]
    out = np.zeros_like(G)
    nk = weights.shape[0]
    for a in numba.prange(n):
        row = out[a]
        for k in range(nk):
            w = weights[k]
            if w == 0.0:
                continue
            al = a1[k]
            mi = m1[k]
            # rows of M1 with a nonzero entry in column a
            r_lo = a + mi + 1  # via the low tap, weight al
            r_hi = a + mi  # via the high tap, weight 1-al
            c_lo = 0.0
            c_hi = 0.0
            if al > 0.0:
                if r_lo >= mi + 1 and r_lo <= mi + n - 1 and r_lo >= 0 and r_lo <= n - 1:
                    c_lo = w * al
                if r_hi >= mi + 1 and r_hi <= mi + n - 1 and r_hi >= 0 and r_hi <= n - 1:
                    c_hi = w * (1.0 - al)
            else:
                if r_hi >= mi and r_hi <= mi + n - 1 and r_hi >= 0 and r_hi <= n - 1:
                    c_hi = w
            if c_lo == 0.0 and c_hi == 0.0:
                continue
            mm = m2[k]
            be = a2[k]
            if be > 0.0:
                q0 = mm + 1
            else:
                q0 = mm
            q1 = mm + n - 1
            if q0 < 0:
                q0 = 0
            if q1 > n - 1:
                q1 = n - 1
            for b in range(n):
                s_lo = b + mm + 1
                s_hi = b + mm
                v = 0.0
                if be > 0.0:
                    if s_lo >= q0 and s_lo <= q1:
                        v_lo = be
                        acc = 0.0
                        if c_lo != 0.0:
                            acc += c_lo * G[r_lo, s_lo]
                        if c_hi != 0.0:
                            acc += c_hi * G[r_hi, s_lo]
                        v += v_lo * acc
                    if s_hi >= q0 and s_hi <= q1:
                        acc = 0.0
                        if c_lo != 0.0:
                            acc += c_lo * G[r_lo, s_hi]
                        if c_hi != 0.0:
                            acc += c_hi * G[r_hi, s_hi]
                        v += (1.0 - be) * acc
                else:
                    if s_hi >= q0 and s_hi <= q1:
                        acc = 0.0
                        if c_lo != 0.0:
                            acc += c_lo * G[r_lo, s_hi]
                        if c_hi != 0.0:
                            acc += c_hi * G[r_hi, s_hi]
                        v += acc
                row[b] += v
    return out


def _check(h: OperatorHandle, f: SampledField) -> None:
    if f.grid != h.grid:
        raise GridMismatch(f"field grid {f.grid} does not match operator grid {h.grid}")


def _weights(h: OperatorHandle, rho: float | None = None) -> np.ndarray:
    nodes, weights = h.quad.nodes_weights
    if rho is None:
        return weights
    return np.where(np.abs(nodes) <= rho, weights, 0.0)


def apply_T(h: OperatorHandle, f: SampledField) -> SampledField:
    _check(h, f)
    m1, a1, m2, a2 = h._stencil
    return SampledField(h.grid, _apply_shift_sum(f.values, _weights(h), m1, a1, m2, a2))


def apply_T_star(h: OperatorHandle, f: SampledField) -> SampledField:
    """Transpose of :func:`apply_T`.

    In exact mode this is the algebraic transpose of the discrete operator
    (same stencil, transposed), so ``<Tf, g> = <f, T*g>`` up to roundoff.
    In independent mode the ``x2 + t^2`` formula is discretised directly.
    """
    _check(h, f)
    if h.adjoint_mode is AdjointMode.EXACT_TRANSPOSE:
        m1, a1, m2, a2 = h._stencil
        vals = _apply_shift_sum_transpose(f.values, _weights(h), m1, a1, m2, a2)
    else:
        m1, a1, m2, a2 = h._stencil_plus
        vals = _apply_shift_sum(f.values, _weights(h), m1, a1, m2, a2)
    return SampledField(h.grid, vals)


def apply_T_rho(h: OperatorHandle, f: SampledField, rho: float) -> SampledField:
    """Truncated operator: only nodes with ``|t_k| <= rho`` contribute."""
    _check(h, f)
    if rho > h.quad.t_max:
        raise RhoExceedsQuadRange(f"rho={rho} exceeds t_max={h.quad.t_max}")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    m1, a1, m2, a2 = h._stencil
    return SampledField(h.grid, _apply_shift_sum(f.values, _weights(h, rho), m1, a1, m2, a2))


def apply_T_star_rho(h: OperatorHandle, f: SampledField, rho: float) -> SampledField:
    _check(h, f)
    if rho > h.quad.t_max:
        raise RhoExceedsQuadRange(f"rho={rho} exceeds t_max={h.quad.t_max}")
    m1, a1, m2, a2 = h._stencil
    return SampledField(
        h.grid, _apply_shift_sum_transpose(f.values, _weights(h, rho), m1, a1, m2, a2)
    )


def apply_T_at(h: OperatorHandle, f: SampledField, x1, x2, sign: int = -1):
    """Evaluate the quadrature sum at arbitrary points.

    ``sign=-1`` gives ``T`` and ``sign=+1`` the direct ``T*`` formula.
    """
    nodes, weights = h.quad.nodes_weights
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    vals = interpolate(f, x1[..., None] - nodes, x2[..., None] + sign * nodes ** 2)
    out = np.asarray(vals) @ weights
    return float(out) if np.ndim(out) == 0 else out


def signed_power(u, s: float):
    """``u |u|^(s-1)``: odd, increasing, and defined for signed input."""
    u = np.asarray(u, dtype=np.float64)
    if s == 1:
        out = u.copy()
    elif s == 2:
        out = u * np.abs(u)
    else:
        out = np.sign(u) * np.abs(u) ** s
    return float(out) if out.ndim == 0 else out


def _spow(f: SampledField, s: float) -> SampledField:
    return SampledField(f.grid, signed_power(f.values, s))


def calT(h: OperatorHandle, f: SampledField) -> SampledField:
    return _spow(apply_T(h, f), h.d)


def calT_star(h: OperatorHandle, f: SampledField) -> SampledField:
    return _spow(apply_T_star(h, f), h.d)


def apply_S(h: OperatorHandle, f: SampledField) -> SampledField:
    """The Euler-Lagrange map ``(T*[(Tf)^d])^d`` with signed powers."""
    return calT_star(h, calT(h, f))


def apply_vecS(h: OperatorHandle, fs) -> SampledField:
    """Multilinear ``prod_i T*(prod_j T f_ij)`` for a ``d x d`` array of fields."""
    d = h.d
    if len(fs) != d or any(len(row) != d for row in fs):
        raise ValueError(f"expected a {d}x{d} array of fields")
    for row in fs:
        for f in row:
            _check(h, f)
    out = np.ones((h.grid.N, h.grid.N))
    for row in fs:
        inner = np.ones((h.grid.N, h.grid.N))
        for f in row:
            inner = inner * apply_T(h, f).values
        out = out * apply_T_star(h, SampledField(h.grid, inner)).values
    return SampledField(h.grid, out)


def script_L(h: OperatorHandle, phi: SampledField, g: SampledField, lam: float) -> SampledField:
    """``lam * S(phi + g) - lam * S(g) - phi``."""
    check_same_grid(phi, g)
    return lam * apply_S(h, phi + g) - lam * apply_S(h, g) - phi
