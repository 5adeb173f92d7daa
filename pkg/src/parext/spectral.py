"""Fourier multipliers on the grid torus.

A field on ``[-L, L]^2`` is treated as ``2L``-periodic with frequencies
``xi = (pi / L) * k`` for integer ``k`` in ``[-N/2, N/2)``.  All symbols
except the Riesz components are real and even, so outputs of real fields
are real.  The Riesz symbol ``i xi_j / |xi|`` is odd; it is set to zero on
the Nyquist lines (where an odd real-output symbol cannot exist) and at
the origin.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import KTooLarge, NonPowerOfTwo
from .grid import GridSpec, SampledField, check_same_grid, lp_norm

__all__ = [
    "MultiplierKind",
    "MultiplierSpec",
    "cutoff",
    "frequencies",
    "symbol",
    "apply_multiplier",
    "littlewood_paley_partition",
    "leibniz_decomposition",
    "riesz_gradient",
    "spectral_gradient",
    "band_limit",
    "project_meanfree",
    "mollified_leibniz_ratio",
]


def cutoff(r):
    """C^1 smoothstep: 1 on ``[0, 1]``, 0 on ``[2, inf)``, ``1 - 3u^2 + 2u^3`` between."""
    r = np.asarray(r, dtype=np.float64)
    u = np.clip(r - 1.0, 0.0, 1.0)
    return 1.0 - u * u * (3.0 - 2.0 * u)


class MultiplierKind(str, enum.Enum):
    ABS_D = "absd"
    D_LAMBDA = "dlambda"
    P = "p"
    Q = "q"
    R = "r"
    RIESZ = "riesz"


@dataclass(frozen=True)
class MultiplierSpec:
    """``s`` for the derivative kinds, ``k`` for P/Q/R, ``j`` in {1, 2} for Riesz."""

    kind: MultiplierKind
    s: float = 0.0
    lam: float = 0.0
    k: int = 0
    j: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", MultiplierKind(self.kind))
        if self.kind is MultiplierKind.RIESZ and self.j not in (1, 2):
            raise ValueError("Riesz component index must be 1 or 2")
        if self.kind is MultiplierKind.D_LAMBDA and self.lam < 0:
            raise ValueError("Lambda must be nonnegative")

    @classmethod
    def abs_d(cls, s):
        return cls(MultiplierKind.ABS_D, s=s)

    @classmethod
    def d_lambda(cls, s, lam):
        return cls(MultiplierKind.D_LAMBDA, s=s, lam=lam)

    @classmethod
    def lp(cls, k):
        return cls(MultiplierKind.P, k=k)

    @classmethod
    def band(cls, k):
        return cls(MultiplierKind.Q, k=k)

    @classmethod
    def tail(cls, K):
        return cls(MultiplierKind.R, k=K)

    @classmethod
    def riesz(cls, j):
        return cls(MultiplierKind.RIESZ, j=j)


def frequencies(grid: GridSpec):
    """Frequency arrays ``(xi1, xi2)`` in FFT order, shape ``(N, N)``."""
    n = grid.N
    if n & (n - 1):
        raise NonPowerOfTwo(f"N must be a power of two, got {n}")
    k = np.fft.fftfreq(n, d=1.0 / n)  # integers in FFT order, -N/2 included
    xi = (np.pi / grid.L) * k
    return np.meshgrid(xi, xi, indexing="ij")


def nyquist(grid: GridSpec) -> float:
    return np.pi * grid.N / (2.0 * grid.L)


def _p_symbol(r, k):
    return cutoff(r / 2.0 ** k)


def symbol(spec: MultiplierSpec, grid: GridSpec) -> np.ndarray:
    xi1, xi2 = frequencies(grid)
    r = np.hypot(xi1, xi2)
    kind = spec.kind
    if kind is MultiplierKind.ABS_D:
        if spec.s == 0:
            return np.ones_like(r)
        with np.errstate(divide="ignore"):
            m = r ** spec.s
        m[0, 0] = 0.0  # s > 0: vanishes there anyway; s < 0: mean projected out
        return m
    if kind is MultiplierKind.D_LAMBDA:
        bracket = np.minimum(np.sqrt(1.0 + r * r), np.sqrt(1.0 + spec.lam ** 2))
        return bracket ** spec.s
    if kind is MultiplierKind.P:
        return _p_symbol(r, spec.k)
    if kind is MultiplierKind.Q:
        return _p_symbol(r, spec.k) - _p_symbol(r, spec.k - 1)
    if kind is MultiplierKind.R:
        return 1.0 - _p_symbol(r, spec.k)
    xi = xi1 if spec.j == 1 else xi2
    with np.errstate(invalid="ignore", divide="ignore"):
        m = 1j * xi / r
    m[0, 0] = 0.0
    half = grid.N // 2
    m[half, :] = 0.0
    m[:, half] = 0.0
    return m


def _apply_symbol(m: np.ndarray, f: SampledField) -> SampledField:
    out = np.fft.ifft2(m * np.fft.fft2(f.values))
    return SampledField(f.grid, out.real)


def apply_multiplier(spec: MultiplierSpec, f: SampledField) -> SampledField:
    return _apply_symbol(symbol(spec, f.grid), f)


def _check_K(grid: GridSpec, K: int):
    if K < 0:
        raise ValueError("K must be nonnegative")
    if 2.0 ** K >= nyquist(grid):
        raise KTooLarge(f"2^{K} is not below the Nyquist frequency {nyquist(grid):.4g}")


def littlewood_paley_partition(f: SampledField, K: int) -> list[SampledField]:
    """``[P_0 f, Q_1 f, ..., Q_K f, R_K f]``; the pieces sum to ``f``."""
    _check_K(f.grid, K)
    F = np.fft.fft2(f.values)
    r = np.hypot(*frequencies(f.grid))
    pieces = [_p_symbol(r, 0)]
    pieces += [_p_symbol(r, k) - _p_symbol(r, k - 1) for k in range(1, K + 1)]
    pieces.append(1.0 - _p_symbol(r, K))
    return [SampledField(f.grid, np.fft.ifft2(m * F).real) for m in pieces]


# -- product decomposition ----------------------------------------------------


def _leakage(values: np.ndarray, inside: np.ndarray) -> float:
    """Fraction of spectral l2 mass outside the mask ``inside``."""
    E = np.abs(np.fft.fft2(values)) ** 2
    total = float(E.sum())
    if total == 0.0:
        return 0.0
    return float(np.sqrt(E[~inside].sum() / total))


def leibniz_decomposition(f: SampledField, g: SampledField, K: int) -> dict:
    """Split ``f g`` into the dyadic product groups and the low remainder.

    Band ``0`` is ``P_0``.  Returns labelled group fields, the remainder,
    the reconstruction residual and per-term spectral-support leakages:
    high-low terms ``Q_k f P_{k-3} g`` must sit in ``2^{k-2} <= |xi| <= 2^{k+2}``,
    diagonal terms in ``|xi| <= 2^{k+2}`` and the remainder in ``|xi| <= 8``.
    """
    grid = check_same_grid(f, g)
    _check_K(grid, K)
    r = np.hypot(*frequencies(grid))
    Ff, Fg = np.fft.fft2(f.values), np.fft.fft2(g.values)

    def filt(F, m):
        return np.fft.ifft2(m * F).real

    P = {k: _p_symbol(r, k) for k in range(-1, K + 1)}

    def Qsym(k):
        return P[0] if k == 0 else P[k] - P[k - 1]

    Qf = {k: filt(Ff, Qsym(k)) for k in range(0, K + 1)}
    Qg = {k: filt(Fg, Qsym(k)) for k in range(0, K + 1)}
    Pf = {k: filt(Ff, P[k]) for k in range(0, K + 1)}
    Pg = {k: filt(Fg, P[k]) for k in range(0, K + 1)}
    Rf, Rg = filt(Ff, 1.0 - P[K]), filt(Fg, 1.0 - P[K])
    zero = np.zeros((grid.N, grid.N))

    groups = {name: zero.copy() for name in (
        "high_low_f", "high_low_g", "diagonal_f", "diagonal_g",
        "tail_f_low_g", "tail_g_low_f", "tail_f_band_g", "tail_g_band_f", "tail_tail",
    )}
    certificates = []
    for k in range(3, K + 1):
        inside = (r >= 2.0 ** (k - 2)) & (r <= 2.0 ** (k + 2))
        for name, a, b in (("high_low_f", Qf[k], Pg[k - 3]), ("high_low_g", Qg[k], Pf[k - 3])):
            term = a * b
            groups[name] += term
            certificates.append({"group": name, "k": k, "leakage": _leakage(term, inside)})
    for k in range(2, K + 1):
        inside = r <= 2.0 ** (k + 2)
        terms = (
            ("diagonal_f", Qf[k] * (Qg[k - 2] + Qg[k - 1] + Qg[k])),
            ("diagonal_g", Qg[k] * (Qf[k - 2] + Qf[k - 1])),
        )
        for name, term in terms:
            groups[name] += term
            certificates.append({"group": name, "k": k, "leakage": _leakage(term, inside)})
    if K >= 2:
        groups["tail_f_low_g"] = Rf * Pg[K - 2]
        groups["tail_g_low_f"] = Rg * Pf[K - 2]
    if K >= 1:
        groups["tail_f_band_g"] = Rf * (Qg[K - 1] + Qg[K])
        groups["tail_g_band_f"] = Rg * (Qf[K - 1] + Qf[K])
    groups["tail_tail"] = Rf * Rg

    product = f.values * g.values
    assembled = zero.copy()
    for v in groups.values():
        assembled += v
    remainder = product - assembled
    certificates.append({"group": "remainder", "k": None, "leakage": _leakage(remainder, r <= 8.0)})
    residual = (product - assembled) - remainder
    return {
        "groups": {k: SampledField(grid, v) for k, v in groups.items()},
        "remainder": SampledField(grid, remainder),
        "residual": float(np.max(np.abs(residual))),
        "certificates": certificates,
        "max_leakage": max(c["leakage"] for c in certificates),
    }


# -- Riesz transforms and gradients --------------------------------------------


def project_meanfree(h: SampledField) -> tuple[SampledField, dict]:
    """Remove the zero mode and the Nyquist lines; report what was removed."""
    H = np.fft.fft2(h.values)
    n = h.grid.N
    half = n // 2
    mean = float(H[0, 0].real) / (n * n)
    nyq = float(np.sqrt(np.sum(np.abs(H[half, :]) ** 2) + np.sum(np.abs(H[:, half]) ** 2)
                        - np.abs(H[half, half]) ** 2) / n)
    H[0, 0] = 0.0
    H[half, :] = 0.0
    H[:, half] = 0.0
    return SampledField(h.grid, np.fft.ifft2(H).real), {"mean_removed": mean, "nyquist_l2_removed": nyq}


def riesz_gradient(h: SampledField) -> tuple[tuple[SampledField, SampledField], dict]:
    """``grad |D|^-1 h`` as its two Riesz components, with projection metadata."""
    h0, meta = project_meanfree(h)
    comps = tuple(apply_multiplier(MultiplierSpec.riesz(j), h0) for j in (1, 2))
    meta["projected"] = h0
    return comps, meta


def spectral_gradient(f: SampledField) -> tuple[SampledField, SampledField]:
    """Periodic derivative ``(d/dx1, d/dx2)`` via the symbol ``i xi_j`` (Nyquist zeroed)."""
    xi1, xi2 = frequencies(f.grid)
    F = np.fft.fft2(f.values)
    half = f.grid.N // 2
    out = []
    for xi in (xi1, xi2):
        m = 1j * xi
        m[half, :] = 0.0
        m[:, half] = 0.0
        out.append(SampledField(f.grid, np.fft.ifft2(m * F).real))
    return out[0], out[1]


def band_limit(f: SampledField, band: float) -> SampledField:
    """Sharp spectral truncation to ``|xi| <= band``."""
    r = np.hypot(*frequencies(f.grid))
    return _apply_symbol((r <= band).astype(np.float64), f)


def mollified_leibniz_ratio(f: SampledField, g: SampledField, s: float, lam: float) -> float:
    """``||D(fg)||_2 / (||Df||_4 ||g||_4 + ||f||_4 ||Dg||_4)`` with ``D = D^s_Lambda``."""
    m = MultiplierSpec.d_lambda(s, lam)
    lhs = lp_norm(apply_multiplier(m, f * g), 2)
    rhs = lp_norm(apply_multiplier(m, f), 4) * lp_norm(g, 4) + lp_norm(f, 4) * lp_norm(apply_multiplier(m, g), 4)
    return lhs / rhs
