"""Named end-to-end checks, each a small study with explicit pass/fail bounds.

Every function returns a :class:`CheckReport`; ``report.ok`` is the
conjunction of its items.  The same functions back ``parext check NAME``
and the acceptance test module.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .extremize import (
    IterationConfig,
    contraction_probe,
    corollary_iteration,
    el_iterate,
    el_residual,
    gaussian_mixture,
    key_lemma_ratio,
    parabolic_symmetry_defect,
    smoothing_probe,
    vecs_holder_slack,
    weighted_ineq_probe,
)
from .grid import SampledField, inner_product, lp_norm, make_grid
from .operators import apply_T, apply_T_star, make_operator
from .spaces import holder_product_check, log_convexity_check
from .spectral import band_limit, leibniz_decomposition, littlewood_paley_partition, riesz_gradient
from .weights import WeightKind, WeightSpec, ap_constant, axis_family, max_weight_comparison, standard_family

__all__ = ["CheckItem", "CheckReport", "CHECKS", "run_check", "converged_extremizer"]


@dataclass
class CheckItem:
    label: str
    value: float
    bound: str
    ok: bool

    def as_dict(self):
        return {"label": self.label, "value": self.value, "bound": self.bound, "ok": self.ok}


@dataclass
class CheckReport:
    name: str
    items: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(i.ok for i in self.items)

    def add(self, label, value, bound, ok):
        self.items.append(CheckItem(label, float(value), bound, bool(ok)))

    def as_dict(self):
        return {"name": self.name, "ok": self.ok, "items": [i.as_dict() for i in self.items],
                "details": self.details}


def _rel_change(a, b):
    return abs(b - a) / abs(a)


@functools.lru_cache(maxsize=4)
def converged_extremizer(L: float = 16.0, N: int = 128, max_steps: int = 200):
    """EL iteration from the unit-disc indicator; cached per grid."""
    h = make_operator(make_grid(L, N))
    trace, f = el_iterate(IterationConfig(max_steps=max_steps), h)
    return h, trace, f


# -- individual checks ------------------------------------------------------------


def check_adjoint(seed: int = 0, pairs: int = 100, N: int = 128) -> CheckReport:
    rep = CheckReport("adjoint")
    h = make_operator(make_grid(16, N))
    worst = 0.0
    for k in range(pairs):
        rng = np.random.default_rng(seed + k)
        f = SampledField(h.grid, rng.standard_normal((N, N)))
        g = SampledField(h.grid, rng.standard_normal((N, N)))
        defect = abs(inner_product(apply_T(h, f), g) - inner_product(f, apply_T_star(h, g)))
        worst = max(worst, defect / (lp_norm(f, 2) * lp_norm(g, 2)))
    rep.add("max |<Tf,g> - <f,T*g>| / (|f|_2 |g|_2)", worst, "<= 1e-12", worst <= 1e-12)
    return rep


def _signed_mixture(grid, rng):
    f = gaussian_mixture(grid, rng)
    return f * (-1.0) if rng.random() < 0.5 else f


def check_holder(seed: int = 0, trials: int = 1000, N: int = 128, n_t: int = 64) -> CheckReport:
    """Pointwise multilinear bound, product Holder in ``X_t`` and log-convexity.

    All three are finite-sum Holder inequalities, exact for any positive
    quadrature rule, so the pointwise bound uses a coarse ``n_t``.
    """
    rep = CheckReport("holder")
    h = make_operator(make_grid(16, N), n_t=n_t)
    g = h.grid
    vec, prod, logc = 0.0, 0.0, 0.0
    for k in range(trials):
        rng = np.random.default_rng(seed + k)
        fs = [[_signed_mixture(g, rng) for _ in range(2)] for _ in range(2)]
        vec = max(vec, vecs_holder_slack(h, fs))
        # product form with theta = 1/4 and one index carrying 4t
        t = float(rng.uniform(0.0, 0.2))
        factors = [SampledField(g, np.abs(rng.standard_normal((N, N)))) for _ in range(4)]
        r = holder_product_check(factors, [0.25] * 4, [4 * t, 0.0, 0.0, 0.0], t)
        prod = max(prod, r["lhs"] / r["rhs"])
        alpha, beta = 0.0, 0.5
        theta = 0.3
        r = log_convexity_check(abs(_signed_mixture(g, rng)), alpha, beta, theta)
        logc = max(logc, r["lhs"] / r["rhs"])
    for label, v in (("pointwise multilinear", vec), ("product in X_t", prod), ("log-convexity", logc)):
        rep.add(f"max lhs/rhs, {label}", v, "<= 1 + 1e-12", v <= 1 + 1e-12)
    return rep


def check_symmetry(r: float = 2.0, N: int = 256) -> CheckReport:
    rep = CheckReport("symmetry")
    g = make_grid(16, N)
    h = make_operator(g)
    x1, x2 = g.mesh()
    # smooth bump supported in [-4, 4]^2, then band limited
    bump = np.where((np.abs(x1) < 4) & (np.abs(x2) < 4),
                    np.cos(np.pi * x1 / 8) ** 2 * np.cos(np.pi * x2 / 8) ** 2, 0.0)
    f = band_limit(SampledField(g, bump), 0.25 * np.pi * N / (2 * 16))
    d = parabolic_symmetry_defect(h, f, r)
    rep.add("relative L2 defect", d["l2_defect"], "<= 0.03", d["l2_defect"] <= 0.03)
    rep.add("relative Rayleigh defect", d["rayleigh_defect"], "<= 0.03", d["rayleigh_defect"] <= 0.03)
    rep.details = d
    return rep


def check_key_lemma() -> CheckReport:
    rep = CheckReport("key-lemma")
    res = {}
    for L in (8, 16, 32):
        res[L] = key_lemma_ratio(make_operator(make_grid(L, 8 * L)))
    vals = [res[L]["C"] for L in res]
    spread = (max(vals) - min(vals)) / min(vals)
    mirror = max(abs(r["C"] - r["C_mirror"]) / r["C"] for r in res.values())
    rep.add("all ratios finite", float(all(r["finite"] for r in res.values())), "== 1",
            all(r["finite"] for r in res.values()))
    rep.add("spread of C over L in {8,16,32}", spread, "< 0.25", spread < 0.25)
    rep.add("max relative gap T vs T* estimate", mirror, "<= 0.02", mirror <= 0.02)
    rep.details = {str(L): r for L, r in res.items()}
    return rep


def check_weighted(seed: int = 0, trials: int = 100) -> CheckReport:
    rep = CheckReport("weighted")
    ts = [0.0, 0.25, 0.5, 0.75]
    out, phis = {}, {}
    for N in (128, 256):
        h = make_operator(make_grid(16, N))
        out[N] = weighted_ineq_probe(h, ts, trials, seed)
        phis[N] = converged_extremizer(16.0, N)[1].final.rayleigh
    for t in ts:
        a, b = out[128][t]["max_ratio"], out[256][t]["max_ratio"]
        ok = math.isfinite(a) and math.isfinite(b) and _rel_change(a, b) < 0.25
        rep.add(f"N=128 vs 256 change of max ratio, t={t}", _rel_change(a, b), "< 0.25", ok)
    for N in (128, 256):
        excess = out[N][0.0]["max_ratio"] / phis[N] - 1.0
        rep.add(f"t=0 probe max over plateau - 1, N={N}", excess, "<= 0.01", excess <= 0.01)
    rep.details = {
        "max_ratio": {str(N): {str(t): out[N][t]["max_ratio"] for t in ts} for N in out},
        "max_mirror_ratio": {str(N): {str(t): out[N][t]["max_mirror_ratio"] for t in ts} for N in out},
        "plateau": {str(N): v for N, v in phis.items()},
    }
    return rep


def check_el() -> CheckReport:
    rep = CheckReport("el")
    _, tr128, f128 = converged_extremizer(16.0, 128)
    h256, tr256, _ = converged_extremizer(16.0, 256)
    h128 = converged_extremizer(16.0, 128)[0]
    r = tr128.rayleighs
    rep.add("plateau reached within 200 steps (N=128)", float(tr128.converged), "== 1", tr128.converged)
    res = el_residual(h128, f128)
    rep.add("final residual (N=128)", res, "< 1e-3", res < 1e-3)
    gap = _rel_change(tr128.final.rayleigh, tr256.final.rayleigh)
    rep.add("plateau gap N=128 vs N=256", gap, "<= 0.01", gap <= 0.01)
    frac = tr128.decreasing_steps() / max(1, len(r) - 1)
    rep.add("fraction of decreasing steps", frac, "<= 0.02", frac <= 0.02)
    slack = max(s.holder_slack for s in tr128.steps if s.holder_slack is not None)
    rep.add("multilinear bound on sampled iterates", slack, "<= 1 + 1e-12", slack <= 1 + 1e-12)
    rep.details = {"plateau_128": tr128.final.rayleigh, "plateau_256": tr256.final.rayleigh,
                   "steps_128": len(tr128.steps), "steps_256": len(tr256.steps),
                   "residual_256": tr256.final.residual}
    return rep


def check_corollary() -> CheckReport:
    rep = CheckReport("corollary")
    res = {L: corollary_iteration(make_operator(make_grid(L, 8 * L)), 4) for L in (16, 32)}
    r16 = res[16]
    rep.add("max(f0 - upsilon*) on the grid", r16["f0_max_excess"], "<= 0", r16["f0_below_weight"])
    R2 = {L: r["R"][2] for L, r in res.items()}
    ch = _rel_change(R2[16], R2[32])
    rep.add("R2 change L=16 -> 32", ch, "< 0.25", math.isfinite(R2[16]) and ch < 0.25)
    rep.add("iterates nonnegative", float(r16["nonnegative"]), "== 1", r16["nonnegative"])
    rep.details = {str(L): {"R": {str(k): v for k, v in r["R"].items()},
                            "geometric_growth_ok": {str(k): v for k, v in r["geometric_growth_ok"].items()},
                            "homogeneity_bound_ok": {str(k): v for k, v in r["homogeneity_bound_ok"].items()}}
                   for L, r in res.items()}
    return rep


def check_spectral(seed: int = 0) -> CheckReport:
    rep = CheckReport("spectral")
    g = make_grid(math.pi, 256)  # integer frequencies, Nyquist 128
    rng = np.random.default_rng(seed)
    f = SampledField(g, rng.standard_normal((256, 256)))
    parts = littlewood_paley_partition(f, 5)
    lp = float(np.sqrt(np.sum((sum(p.values for p in parts) - f.values) ** 2))) / float(np.sqrt(np.sum(f.values ** 2)))
    rep.add("Littlewood-Paley reconstruction", lp, "<= 1e-12", lp <= 1e-12)
    a = band_limit(SampledField(g, rng.standard_normal((256, 256))), 48)
    b = band_limit(SampledField(g, rng.standard_normal((256, 256))), 48)
    dec = leibniz_decomposition(a, b, 5)
    rep.add("product decomposition residual", dec["residual"], "== 0", dec["residual"] == 0)
    rep.add("max spectral leakage over terms", dec["max_leakage"], "<= 1e-10", dec["max_leakage"] <= 1e-10)
    (c1, c2), meta = riesz_gradient(f)
    h0 = meta["projected"]
    iso = abs(lp_norm(c1, 2) ** 2 + lp_norm(c2, 2) ** 2 - lp_norm(h0, 2) ** 2) / lp_norm(h0, 2) ** 2
    rep.add("Riesz isometry on mean-free field", iso, "<= 1e-12", iso <= 1e-12)
    return rep


def check_ap_threshold() -> CheckReport:
    rep = CheckReport("ap-threshold")
    mild, strong = WeightSpec(WeightKind.AXIS_POWER, s=0.5), WeightSpec(WeightKind.AXIS_POWER, s=1.5)
    a6 = ap_constant(mild, 2.0, axis_family(1.0, 6)).value
    a8 = ap_constant(mild, 2.0, axis_family(1.0, 8)).value
    rep.add("s=0.5: change K=6 -> 8", _rel_change(a6, a8), "< 0.10", _rel_change(a6, a8) < 0.10)
    b0 = ap_constant(strong, 2.0, axis_family(1.0, 6)).value
    b1 = ap_constant(strong, 2.0, axis_family(0.25, 8)).value
    rep.add("s=1.5: growth with two extra small octaves", b1 / b0, ">= 1.5", b1 / b0 >= 1.5)
    pairs = [
        (mild, WeightSpec(WeightKind.PARABOLA_POWER, s=0.3)),
        (mild, WeightSpec(WeightKind.UPSILON, power=0.2)),
        (WeightSpec(WeightKind.W, power=0.1), WeightSpec(WeightKind.W_STAR, power=0.1)),
    ]
    worst = 0.0
    for fam in (standard_family(), axis_family(1.0, 6)):
        for u, v in pairs:
            r = max_weight_comparison(u, v, 2.0, fam)
            worst = max(worst, r["ap_max"] / r["bound"])
    rep.add("max [max(u,v)] / (2 max([u],[v]))", worst, "<= 1", worst <= 1 + 1e-12)
    rep.details = {"mild": [a6, a8], "strong": [b0, b1]}
    return rep


def check_smoothing(seed: int = 0, trials: int = 20) -> CheckReport:
    rep = CheckReport("smoothing")
    N = 256
    h = make_operator(make_grid(16, N))
    res = {a: [smoothing_probe(h, a, 1.0, band, trials, seed) for band in (N / 8, N / 4)]
           for a in (0.0, 0.4, 0.75)}
    mass = max(r["max_ratio"] / r["two_rho"] for r in res[0.0])
    rep.add("alpha=0: max ratio / (2 rho)", mass, "<= 1 + 1e-6", mass <= 1 + 1e-6)
    lo, hi = (r["max_ratio"] for r in res[0.4])
    rep.add("alpha=0.4: change under band doubling", _rel_change(lo, hi), "< 0.30", _rel_change(lo, hi) < 0.30)
    lo, hi = (r["max_ratio"] for r in res[0.75])
    rep.add("alpha=0.75: growth under band doubling", hi / lo, ">= 1.3", hi / lo >= 1.3)
    rep.details = {str(a): [r["max_ratio"] for r in v] for a, v in res.items()}
    return rep


def check_contraction(seed: int = 0, pairs: int = 100) -> CheckReport:
    rep = CheckReport("contraction")
    h, _, f = converged_extremizer(16.0, 128)
    eps_ladder = (0.1, 0.05, 0.025)
    res = {e: contraction_probe(h, f, e, 0.02, pairs, seed) for e in eps_ladder}
    q = res[0.05]["max_quotient"]
    rep.add("max Lipschitz quotient at eps=0.05", q, "< 1", q < 1)
    qs = [res[e]["max_quotient"] for e in eps_ladder]
    slope = float(np.polyfit(np.log(eps_ladder), np.log(qs), 1)[0])
    rep.add("log-log slope of quotient in eps", slope, "in [0.35, 0.65]", 0.35 <= slope <= 0.65)
    rep.details = {str(e): {k: res[e][k] for k in ("max_quotient", "lambda", "truncation_box", "tail_norm")}
                   for e in eps_ladder}
    return rep


def check_determinism() -> CheckReport:
    from .cli import run_command  # local import, the CLI depends on this module

    rep = CheckReport("determinism")
    argv = ["verify", "vecs-holder", "--seed", "7", "--trials", "5", "--N", "64", "--n-t", "32"]
    a = run_command(argv, threads=1)
    b = run_command(argv, threads=1)
    same = a.results_bytes() == b.results_bytes()
    rep.add("identical result bytes on repeat", float(same), "== 1", same)
    return rep


CHECKS = {
    "adjoint": check_adjoint,
    "holder": check_holder,
    "symmetry": check_symmetry,
    "key-lemma": check_key_lemma,
    "weighted": check_weighted,
    "el": check_el,
    "corollary": check_corollary,
    "spectral": check_spectral,
    "ap-threshold": check_ap_threshold,
    "smoothing": check_smoothing,
    "contraction": check_contraction,
    "determinism": check_determinism,
}


def run_check(name: str, **kwargs) -> CheckReport:
    try:
        fn = CHECKS[name]
    except KeyError:
        raise ValueError(f"unknown check {name!r}; choose from {sorted(CHECKS)}") from None
    return fn(**kwargs)
