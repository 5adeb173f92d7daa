"""Euler-Lagrange power iteration and the numerical probes built on it.

The extremal problem is ``max ||Tf||_{q0} / ||f||_{p0}``; critical points
satisfy ``f = lambda * S(f)`` with ``S(f) = (T*[(Tf)^d])^d`` and
``lambda = ||Tf||_{q0}^(-d q0) ||f||_{p0}^(d p0)``.

Every probe takes an explicit integer seed and draws from
``numpy.random.default_rng(seed)`` (PCG64).  Per-trial streams use
``seed + trial`` so trials are independent of execution order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import DegenerateDenominator, EmptyRegion, NonFinite, ZeroField, ZeroImage
from .grid import SampledField, interpolate, lp_norm, rescale_parabolic, shift_cells
from .operators import (
    OperatorHandle,
    apply_S,
    apply_T,
    apply_T_rho,
    apply_T_star,
    apply_vecS,
    signed_power,
)
from .spaces import exponents, x_norm, x_star_norm, y_norm, y_star_norm
from .spectral import MultiplierSpec, apply_multiplier, band_limit, spectral_gradient
from .weights import WeightKind, WeightSpec, weight_field

__all__ = [
    "Renorm",
    "IterationConfig",
    "StepRecord",
    "IterationTrace",
    "seed_field",
    "rayleigh",
    "lambda_of",
    "el_residual",
    "el_iterate",
    "vecs_holder_slack",
    "key_lemma_ratio",
    "gaussian_mixture",
    "weighted_ineq_probe",
    "corollary_iteration",
    "decay_report",
    "smoothing_probe",
    "lipschitz_quotient",
    "contraction_probe",
    "regularity_report",
    "parabolic_symmetry_defect",
]


def _exps(h: OperatorHandle):
    d = h.d
    return (d + 1) / d, float(d + 1)


# -- basic functionals ----------------------------------------------------------


def rayleigh(h: OperatorHandle, f: SampledField) -> float:
    p0, q0 = _exps(h)
    nf = lp_norm(f, p0)
    if nf == 0:
        raise ZeroField("the Rayleigh quotient of the zero field is undefined")
    return lp_norm(apply_T(h, f), q0) / nf


def _lambda_from_norms(d, p0, q0, norm_Tf, norm_f):
    try:
        return norm_Tf ** (-d * q0) * norm_f ** (d * p0)
    except OverflowError:
        return math.inf


def lambda_of(h: OperatorHandle, f: SampledField) -> float:
    """``||Tf||_{q0}^(-d q0) ||f||_{p0}^(d p0)``."""
    p0, q0 = _exps(h)
    nT = lp_norm(apply_T(h, f), q0)
    if nT == 0:
        raise ZeroImage("Tf vanishes identically")
    return _lambda_from_norms(h.d, p0, q0, nT, lp_norm(f, p0))


def el_residual(h: OperatorHandle, f: SampledField) -> float:
    """``||f - lambda S(f)||_{p0} / ||f||_{p0}``; invariant under ``f -> c f``."""
    p0, _ = _exps(h)
    nf = lp_norm(f, p0)
    if nf == 0:
        raise ZeroField("residual of the zero field is undefined")
    lam = lambda_of(h, f)
    return lp_norm(f - lam * apply_S(h, f), p0) / nf


# -- the iteration ---------------------------------------------------------------


class Renorm(str, enum.Enum):
    NONE = "none"
    P0 = "p0"
    P0_CENTER = "p0+center"
    P0_CENTER_SCALE = "p0+center+scale"


def seed_field(grid, profile: str = "ball_indicator") -> SampledField:
    x1, x2 = grid.mesh()
    if profile == "ball_indicator":
        return SampledField(grid, (x1 * x1 + x2 * x2 <= 1.0).astype(np.float64))
    if profile == "gaussian":
        return SampledField(grid, np.exp(-(x1 * x1 + x2 * x2)))
    raise ValueError(f"unknown seed profile {profile!r}")


@dataclass(frozen=True)
class IterationConfig:
    """Settings for :func:`el_iterate`.

    ``renorm`` defaults to normalisation plus whole-cell recentring; the
    ``+scale`` variant also applies a clamped parabolic dilation each step
    that equalises the ``x1`` and ``x2`` second moments.
    """

    max_steps: int = 200
    renorm: Renorm = Renorm.P0_CENTER
    stop_tol: float = 1e-6
    plateau_window: int = 10
    seed_profile: str = "ball_indicator"
    holder_check_every: int = 10

    def __post_init__(self):
        object.__setattr__(self, "renorm", Renorm(self.renorm))
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not self.stop_tol > 0:
            raise ValueError("stop_tol must be positive")


@dataclass
class StepRecord:
    step: int
    rayleigh: float
    lam: float
    residual: float
    shift: tuple = (0, 0)
    scale: float = 1.0
    holder_slack: float | None = None


@dataclass
class IterationTrace:
    steps: list = field(default_factory=list)
    converged: bool = False

    @property
    def rayleighs(self) -> np.ndarray:
        return np.array([s.rayleigh for s in self.steps])

    @property
    def final(self) -> StepRecord:
        return self.steps[-1]

    def decreasing_steps(self, tol: float = 1e-9) -> int:
        r = self.rayleighs
        return int(np.sum(np.diff(r) < -tol))

    def as_dicts(self) -> list[dict]:
        out = []
        for s in self.steps:
            d = asdict(s)
            d["shift"] = list(s.shift)
            out.append(d)
        return out


def _moments(f: SampledField, p: float):
    """Centroid and central second moments of the mass ``|f|^p``."""
    x1, x2 = f.grid.mesh()
    m = np.abs(f.values) ** p
    total = m.sum()
    c1 = float((m * x1).sum() / total)
    c2 = float((m * x2).sum() / total)
    v1 = float((m * (x1 - c1) ** 2).sum() / total)
    v2 = float((m * (x2 - c2) ** 2).sum() / total)
    return c1, c2, v1, v2


def _renormalize(f: SampledField, mode: Renorm, p0: float):
    shift, r = (0, 0), 1.0
    if mode is Renorm.NONE:
        return f, shift, r
    if mode is Renorm.P0_CENTER_SCALE:
        _, _, v1, v2 = _moments(f, p0)
        if v1 > 0 and v2 > 0:
            r = float(np.clip(math.sqrt(v2 / v1), 0.5, 2.0))
            f = rescale_parabolic(f, r)
    if mode in (Renorm.P0_CENTER, Renorm.P0_CENTER_SCALE):
        c1, c2, _, _ = _moments(f, p0)
        di, dj = -int(round(c1 / f.grid.h)), -int(round(c2 / f.grid.h))
        if di or dj:
            f = shift_cells(f, di, dj)
        shift = (di, dj)
    n = lp_norm(f, p0)
    if n == 0:
        raise ZeroImage("iterate collapsed to zero")
    return f * (1.0 / n), shift, r


def vecs_holder_slack(h: OperatorHandle, fs) -> float:
    """Largest ratio ``|vecS(f)| / prod S(|f_ij|)^(1/d^2)`` over the grid.

    Points where the right side vanishes must have a vanishing left side;
    otherwise ``inf`` is returned.
    """
    d = h.d
    lhs = np.abs(apply_vecS(h, fs).values)
    rhs = np.ones_like(lhs)
    for row in fs:
        for f in row:
            rhs = rhs * apply_S(h, abs(f)).values ** (1.0 / d ** 2)
    pos = rhs > 0
    if np.any(lhs[~pos] > 0):
        return math.inf
    if not np.any(pos):
        return 0.0
    return float(np.max(lhs[pos] / rhs[pos]))


def _holder_fields(f: SampledField):
    """Four distinct fields derived from an iterate, for the spot check."""
    return [
        [f, shift_cells(f, 1, 0)],
        [shift_cells(f, 0, 2), f.with_values(signed_power(f.values, 1.5))],
    ]


def el_iterate(cfg: IterationConfig, h: OperatorHandle, seed: SampledField | None = None):
    """Run ``f <- renormalise(S(f))`` and return ``(trace, field)``.

    ``field`` is the last iterate whose statistics are the final trace entry.
    Stops once ``|Phi_{n+1} - Phi_n| < stop_tol`` holds for
    ``plateau_window`` consecutive steps.
    """
    p0, q0 = _exps(h)
    d = h.d
    f = seed if seed is not None else seed_field(h.grid, cfg.seed_profile)
    if f.max_abs() == 0:
        raise ZeroField("seed is identically zero")
    f = f * (1.0 / lp_norm(f, p0))
    trace = IterationTrace()
    calm = 0
    for n in range(cfg.max_steps):
        Tf = apply_T(h, f)
        nT = lp_norm(Tf, q0)
        nf = lp_norm(f, p0)
        if nT == 0:
            raise ZeroImage(f"Tf vanished at step {n}")
        lam = _lambda_from_norms(d, p0, q0, nT, nf)
        with np.errstate(over="ignore", invalid="ignore"):
            inner = signed_power(Tf.values, d)
            outer = None
            if np.all(np.isfinite(inner)):
                outer = signed_power(apply_T_star(h, Tf.with_values(inner)).values, d)
        if outer is None or not np.all(np.isfinite(outer)):
            raise NonFinite(f"S(f) overflowed at step {n}")
        Sf = SampledField(h.grid, outer)
        rec = StepRecord(n, nT / nf, lam, lp_norm(f - lam * Sf, p0) / nf)
        if not all(map(math.isfinite, (rec.rayleigh, rec.lam, rec.residual))):
            raise NonFinite(f"non-finite statistics at step {n}")
        if cfg.holder_check_every and n % cfg.holder_check_every == 0:
            rec.holder_slack = vecs_holder_slack(h, _holder_fields(f))
        if trace.steps and abs(rec.rayleigh - trace.steps[-1].rayleigh) < cfg.stop_tol:
            calm += 1
        else:
            calm = 0
        trace.steps.append(rec)
        if calm >= cfg.plateau_window:
            trace.converged = True
            break
        if n + 1 < cfg.max_steps:
            f_next, rec.shift, rec.scale = _renormalize(Sf, cfg.renorm, p0)
            f = f_next
    return trace, f


# -- Lemma-style probes -----------------------------------------------------------


def _argmax_point(grid, ratio):
    i, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    x = grid.nodes
    return [float(x[i]), float(x[j])]


def key_lemma_ratio(h: OperatorHandle) -> dict:
    """``sup T(upsilon*) / upsilon^(1/d)`` and the mirrored ``sup T*(upsilon) / upsilon*^(1/d)``."""
    g = h.grid
    d = h.d
    ups = weight_field(WeightSpec(WeightKind.UPSILON), g).values
    ups_star = weight_field(WeightSpec(WeightKind.UPSILON_STAR), g).values
    direct = apply_T(h, SampledField(g, ups_star)).values / ups ** (1.0 / d)
    mirror = apply_T_star(h, SampledField(g, ups)).values / ups_star ** (1.0 / d)
    return {
        "C": float(direct.max()),
        "argmax": _argmax_point(g, direct),
        "C_mirror": float(mirror.max()),
        "argmax_mirror": _argmax_point(g, mirror),
        "finite": bool(np.all(np.isfinite(direct)) and np.all(np.isfinite(mirror))),
    }


def gaussian_mixture(grid, rng: np.random.Generator, components: int | None = None) -> SampledField:
    """Nonnegative sum of 1-4 Gaussians centred in ``[-L/2, L/2]^2``.

    Values below ``1e-30`` of the peak are set to zero, so the field has
    compact support and fourfold products of its images stay far from
    underflow.
    """
    L = grid.L
    k = int(rng.integers(1, 5)) if components is None else components
    x1, x2 = grid.mesh()
    out = np.zeros_like(x1)
    for _ in range(k):
        c = rng.uniform(-L / 2, L / 2, size=2)
        s = rng.uniform(0.25, 0.15 * L, size=2)
        a = rng.uniform(0.2, 1.0)
        out += a * np.exp(-0.5 * (((x1 - c[0]) / s[0]) ** 2 + ((x2 - c[1]) / s[1]) ** 2))
    out[out < 1e-30 * out.max()] = 0.0
    return SampledField(grid, out)


def weighted_ineq_probe(h: OperatorHandle, ts, trials: int, seed: int) -> dict:
    """Largest ``||Tf||_{Y*_t} / ||f||_{X_t}`` and mirror ``||T*f||_{Y_t} / ||f||_{X*_t}``.

    Test fields are Gaussian mixtures; one operator application per trial
    serves every ``t``.
    """
    ts = [float(t) for t in np.atleast_1d(ts)]
    for t in ts:
        if not 0 <= t <= 0.9:
            raise ValueError("t must lie in [0, 0.9]")
    per_t = {t: {"ratios": [], "mirror_ratios": []} for t in ts}
    for k in range(trials):
        rng = np.random.default_rng(seed + k)
        f = gaussian_mixture(h.grid, rng)
        Tf, Tsf = apply_T(h, f), apply_T_star(h, f)
        for t in ts:
            idx = exponents(h.d, t)
            per_t[t]["ratios"].append(y_star_norm(Tf, idx) / x_norm(f, idx))
            per_t[t]["mirror_ratios"].append(y_norm(Tsf, idx) / x_star_norm(f, idx))
    out = {}
    for t, v in per_t.items():
        out[t] = {
            "max_ratio": max(v["ratios"]),
            "max_mirror_ratio": max(v["mirror_ratios"]),
            "ratios": v["ratios"],
            "mirror_ratios": v["mirror_ratios"],
        }
    return out


def corollary_iteration(h: OperatorHandle, steps: int = 4) -> dict:
    """Alternate ``f <- (Tf)^d`` and ``f <- (T* f)^d`` from the unit-disc indicator.

    Fields are carried as ``exp(log_scale) * F`` with ``max F = 1`` so large
    steps never overflow.  For even ``n`` reports ``R_n = sup f_n / upsilon*``.
    Two growth checks are reported: the geometric one ``R_n <= R_2^(n/2)``
    and the exact monotonicity bound ``R_{n+2} <= R_n^(d^2) sup S(upsilon*)/upsilon*``
    (``S`` is ``d^2``-homogeneous and order preserving on nonnegative input).
    """
    if steps < 2 or steps % 2 or steps > 6:
        raise ValueError("steps must be an even count between 2 and 6")
    g = h.grid
    d = h.d
    ups_star = weight_field(WeightSpec(WeightKind.UPSILON_STAR), g)
    F = seed_field(g, "ball_indicator")
    log_scale = 0.0
    f0_excess = float(np.max(F.values - ups_star.values))
    fields = [(0.0, F)]
    log_R = {0: math.log(float(np.max(F.values / ups_star.values)))}
    min_value = float(F.values.min())
    for n in range(steps):
        G = apply_T(h, F) if n % 2 == 0 else apply_T_star(h, F)
        G = G.with_values(signed_power(G.values, d))
        peak = G.max_abs()
        if peak == 0:
            raise ZeroImage(f"iterate {n + 1} vanished")
        log_scale = d * log_scale + math.log(peak)
        F = G * (1.0 / peak)
        min_value = min(min_value, float(F.values.min()))
        fields.append((log_scale, F))
        if (n + 1) % 2 == 0:
            log_R[n + 1] = log_scale + math.log(float(np.max(F.values / ups_star.values)))
    log_K = math.log(float(np.max(apply_S(h, ups_star).values / ups_star.values)))
    geometric, homogeneity = {}, {}
    for n in log_R:
        if n >= 4:
            geometric[n] = bool(log_R[n] <= (n / 2) * log_R[2] + math.log(1.05))
        if n >= 2:
            bound = d * d * log_R[n - 2] + log_K
            homogeneity[n] = bool(log_R[n] <= bound + 1e-12 * max(1.0, abs(bound)))
    return {
        "fields": fields,
        "f0_max_excess": f0_excess,
        "f0_below_weight": bool(f0_excess <= 0.0),
        "nonnegative": bool(min_value >= 0.0),
        "log_R": log_R,
        "R": {n: math.exp(v) if v < 700 else math.inf for n, v in log_R.items()},
        "log_S_gain": log_K,
        "geometric_growth_ok": geometric,
        "homogeneity_bound_ok": homogeneity,
    }


def decay_report(f: SampledField, floor: float, n_profile: int = 65) -> dict:
    """Measure ``|f| / upsilon`` on ``{|f| > floor}`` and along three curves."""
    g = f.grid
    ups = weight_field(WeightSpec(WeightKind.UPSILON), g)
    a = np.abs(f.values)
    region = a > floor
    if not np.any(region):
        raise EmptyRegion(f"no sample exceeds the floor {floor:g}")
    ratio = a / ups.values
    rf = SampledField(g, ratio)
    top = g.nodes[-1]
    s = np.linspace(0.0, top, n_profile)
    curves = {
        "x1_axis": (s, np.zeros_like(s)),
        "x2_axis": (np.zeros_like(s), s),
        "parabola": (s[s * s <= top], s[s * s <= top] ** 2),
    }
    profiles = {}
    for name, (p1, p2) in curves.items():
        vals = interpolate(rf, p1, p2)
        profiles[name] = [[float(u), float(v), float(r)] for u, v, r in zip(p1, p2, vals)]
    return {
        "ratio": rf,
        "sup": float(ratio[region].max()),
        "inf": float(ratio[region].min()),
        "region_cells": int(region.sum()),
        "profiles": profiles,
    }


def _windowed_noise(grid, rng, band_index: float) -> SampledField:
    """Band-limited noise multiplied by a ``cos^2`` window on ``[-L/2, L/2]^2``."""
    n, L = grid.N, grid.L
    noise = SampledField(grid, rng.standard_normal((n, n)))
    f = band_limit(noise, math.pi * band_index / L)
    x1, x2 = grid.mesh()
    win = np.where((np.abs(x1) <= L / 2) & (np.abs(x2) <= L / 2),
                   np.cos(np.pi * x1 / L) ** 2 * np.cos(np.pi * x2 / L) ** 2, 0.0)
    return f * win


def smoothing_probe(h: OperatorHandle, alpha: float, rho: float, band_index: float, trials: int, seed: int) -> dict:
    """Largest ``|| |D|^alpha T_rho f ||_2 / ||f||_2`` over windowed band-limited noise.

    ``band_index`` is in grid units: frequencies ``pi k / L`` with ``|k| <= band_index``.
    ``mass`` is the total quadrature weight on ``|t| <= rho``.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if band_index >= h.grid.N / 2:
        raise ValueError("band must lie below the Nyquist index N/2")
    nodes, weights = h.quad.nodes_weights
    mass = float(weights[np.abs(nodes) <= rho].sum())
    D = MultiplierSpec.abs_d(alpha)
    ratios = []
    for k in range(trials):
        f = _windowed_noise(h.grid, np.random.default_rng(seed + k), band_index)
        g = apply_T_rho(h, f, rho)
        if alpha:
            g = apply_multiplier(D, g)
        ratios.append(lp_norm(g, 2) / lp_norm(f, 2))
    return {"max_ratio": max(ratios), "ratios": ratios, "mass": mass, "two_rho": 2.0 * rho}


def _truncate(f: SampledField, eps: float, p0: float):
    """Smallest box ``|x|_inf <= R`` (in whole cells) leaving an ``L^p0`` tail below ``eps``."""
    g = f.grid
    x1, x2 = g.mesh()
    box = np.maximum(np.abs(x1), np.abs(x2))
    for R in np.sort(np.unique(np.round(g.nodes[g.nodes > 0], 12))):
        phi = np.where(box <= R, f.values, 0.0)
        tail = f.values - phi
        if lp_norm(SampledField(g, tail), p0) < eps:
            return SampledField(g, phi), SampledField(g, tail), float(R)
    return f, f * 0.0, float(g.L)


def lipschitz_quotient(h: OperatorHandle, lam: float, u: SampledField, v: SampledField, t: float) -> float:
    """``||lam S(u) - lam S(v)||_{X_t} / ||u - v||_{X_t}``."""
    idx = exponents(h.d, t)
    den = x_norm(u - v, idx)
    if den < 1e-14:
        raise DegenerateDenominator("the two arguments coincide")
    return x_norm(lam * (apply_S(h, u) - apply_S(h, v)), idx) / den


def contraction_probe(
    h: OperatorHandle,
    f: SampledField,
    eps: float,
    t: float,
    pairs: int,
    seed: int,
) -> dict:
    """Lipschitz quotients of ``h -> lambda S(h)`` on the ``X_t`` ball of radius ``eps^(1/2)``.

    ``f`` is normalised to unit ``L^p0`` norm and split as ``phi + g`` with
    ``||g||_{p0} < eps``.  The fixed-point map differs from ``lambda S`` by a
    term independent of ``h``, so only ``lambda S`` enters the quotient.
    Pair directions depend on the seed only, never on ``eps``.
    """
    p0, _ = _exps(h)
    f = f * (1.0 / lp_norm(f, p0))
    lam = lambda_of(h, f)
    phi, g, R = _truncate(f, eps, p0)
    idx = exponents(h.d, t)
    radius = math.sqrt(eps)
    quotients = []
    for k in range(pairs):
        rng = np.random.default_rng(seed + k)
        u = gaussian_mixture(h.grid, rng)
        v = gaussian_mixture(h.grid, rng)
        if rng.random() < 0.5:
            v = v * -1.0
        a, b = rng.uniform(0.05, 1.0, size=2)
        hu = u * (a * radius / x_norm(u, idx))
        hv = v * (b * radius / x_norm(v, idx))
        quotients.append(lipschitz_quotient(h, lam, hu, hv, t))
    return {
        "max_quotient": max(quotients),
        "quotients": quotients,
        "lambda": lam,
        "truncation_box": R,
        "tail_norm": lp_norm(g, p0),
        "contraction": bool(max(quotients) < 1.0),
    }


def regularity_report(f: SampledField, rho: float, varrho: float, d: int = 2) -> dict:
    """``||grad f||_{X_varrho}`` against ``||f||_{X_rho}^(d^2)``."""
    if not 0 <= varrho < rho <= 0.1:
        raise ValueError("need 0 <= varrho < rho <= 0.1")
    g1, g2 = spectral_gradient(f)
    grad = SampledField(f.grid, np.hypot(g1.values, g2.values))
    lhs = x_norm(grad, exponents(d, varrho))
    rhs = x_norm(f, exponents(d, rho)) ** (d * d)
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs}


def parabolic_symmetry_defect(h: OperatorHandle, f: SampledField, r: float) -> dict:
    """Compare ``delta_r(Tf)`` with ``r^(d-1) T(delta_r f)`` where ``delta_r f(x) = f(r x1, r^2 x2)``.

    Substituting ``t = r s`` maps the range ``|t| <= t_max`` to
    ``|s| <= t_max / r``, so the right side uses the truncated operator with
    that range.  The ``L^2`` defect is measured where ``(r x1, r^2 x2)``
    stays inside the grid.  Also returns the relative change of the
    Rayleigh quotient under the dilation.
    """
    if not r >= 1:
        raise ValueError("use r >= 1 (swap the roles of the fields otherwise)")
    d = h.d
    g = h.grid
    lhs = rescale_parabolic(apply_T(h, f), r).values
    fr = rescale_parabolic(f, r)
    rhs = apply_T_rho(h, fr, h.quad.t_max / r).values * r ** (d - 1)
    x1, x2 = g.mesh()
    top = g.nodes[-1]
    inside = (np.abs(r * x1) <= top) & (np.abs(r * r * x2) <= top)
    l2 = float(np.sqrt(np.sum((lhs - rhs)[inside] ** 2) / np.sum(lhs[inside] ** 2)))
    phi, phi_r = rayleigh(h, f), rayleigh(h, fr)
    return {"l2_defect": l2, "rayleigh": phi, "rayleigh_dilated": phi_r,
            "rayleigh_defect": abs(phi_r - phi) / phi}
