import math

import numpy as np
import pytest

from parext.exceptions import DegenerateDenominator, EmptyRegion, NonFinite, ZeroField
from parext.extremize import (
    IterationConfig,
    Renorm,
    _lambda_from_norms,
    contraction_probe,
    corollary_iteration,
    decay_report,
    el_iterate,
    el_residual,
    gaussian_mixture,
    key_lemma_ratio,
    lambda_of,
    lipschitz_quotient,
    rayleigh,
    regularity_report,
    seed_field,
    smoothing_probe,
    weighted_ineq_probe,
)
from parext.grid import SampledField, lp_norm, make_grid, zeros
from parext.operators import QuadratureScheme, make_operator
from parext.weights import WeightKind, WeightSpec, weight_field

from .conftest import gaussian


@pytest.fixture(scope="module")
def fixed_point(small_op):
    """A discrete fixed point: pure normalisation drives the residual to ~1e-10."""
    _, f = el_iterate(IterationConfig(max_steps=1500, stop_tol=1e-300, renorm=Renorm.P0), small_op)
    return f


class TestFunctionals:
    def test_lambda_unit_norms(self):
        assert _lambda_from_norms(2, 1.5, 3.0, 1.0, 1.0) == 1.0

    @pytest.mark.parametrize("c", [0.5, 2.0, 7.0])
    def test_lambda_homogeneity(self, small_op, c):
        f = gaussian(small_op.grid, sigma=1.3)
        assert lambda_of(small_op, f * c) == pytest.approx(c ** -3 * lambda_of(small_op, f), rel=1e-12)

    def test_lambda_from_quotient(self):
        h = make_operator(make_grid(16, 256), n_t=256)
        x1, x2 = h.grid.mesh()
        f = SampledField(h.grid, ((abs(x1) <= 1) & (abs(x2) <= 1)).astype(float))
        want = rayleigh(h, f) ** -6 * lp_norm(f, 1.5) ** -3
        assert lambda_of(h, f) == pytest.approx(want, rel=1e-12)

    @pytest.mark.parametrize("c", [1e-3, 0.5, 40.0])
    def test_residual_scale_invariant(self, small_op, c):
        f = gaussian(small_op.grid, 0.5, 0.3, 1.1)
        assert el_residual(small_op, f * c) == pytest.approx(el_residual(small_op, f), rel=1e-12)

    def test_quotient_scale_invariant(self, small_op):
        f = gaussian(small_op.grid, sigma=0.9)
        assert rayleigh(small_op, f * 3.3) == pytest.approx(rayleigh(small_op, f), rel=1e-12)

    def test_zero_field(self, small_op):
        with pytest.raises(ZeroField):
            el_residual(small_op, zeros(small_op.grid))
        with pytest.raises(ZeroField):
            rayleigh(small_op, zeros(small_op.grid))


class TestIteration:
    def test_single_step(self, small_op):
        trace, _ = el_iterate(IterationConfig(max_steps=1), small_op)
        assert len(trace.steps) == 1 and not trace.converged

    def test_config_validation(self):
        with pytest.raises(ValueError):
            IterationConfig(max_steps=0)
        with pytest.raises(ValueError):
            IterationConfig(stop_tol=0.0)
        assert IterationConfig(renorm="p0").renorm is Renorm.P0

    def test_plateau_and_trace(self, small_op):
        trace, f = el_iterate(IterationConfig(max_steps=200), small_op)
        assert trace.converged
        assert trace.decreasing_steps() <= 0.02 * len(trace.steps)
        assert np.all(np.isfinite(trace.rayleighs))
        rows = trace.as_dicts()
        assert rows[0]["step"] == 0 and {"rayleigh", "lam", "residual", "shift", "scale"} <= set(rows[0])
        assert lp_norm(f, 1.5) == pytest.approx(1.0, rel=1e-12)
        assert el_residual(small_op, f) < 1e-3

    def test_holder_spot_checks(self, small_op):
        trace, _ = el_iterate(IterationConfig(max_steps=30, holder_check_every=10), small_op)
        slacks = [s.holder_slack for s in trace.steps if s.holder_slack is not None]
        assert len(slacks) == 3 and max(slacks) <= 1 + 1e-12

    def test_fixed_point_seed(self, small_op, fixed_point):
        assert el_residual(small_op, fixed_point) < 1e-6
        trace, _ = el_iterate(IterationConfig(max_steps=5, renorm=Renorm.P0), small_op, seed=fixed_point)
        assert np.ptp(trace.rayleighs) < 1e-9
        assert max(s.residual for s in trace.steps) < 1e-6

    def test_unnormalised_iteration_overflows(self, small_op):
        with pytest.raises(NonFinite):
            el_iterate(IterationConfig(max_steps=400, renorm=Renorm.NONE), small_op)

    def test_zero_seed(self, small_op):
        with pytest.raises(ZeroField):
            el_iterate(IterationConfig(), small_op, seed=zeros(small_op.grid))

    def test_seed_profiles(self):
        g = make_grid(4, 32)
        assert seed_field(g).values.max() == 1.0
        assert seed_field(g, "gaussian").values.max() < 1.0
        with pytest.raises(ValueError):
            seed_field(g, "square")


class TestProbes:
    def test_key_lemma_small(self):
        r = key_lemma_ratio(make_operator(make_grid(8, 64)))
        assert r["finite"]
        assert abs(r["C"] - r["C_mirror"]) / r["C"] <= 0.02
        assert len(r["argmax"]) == 2

    def test_mixture_reproducible(self):
        g = make_grid(8, 64)
        a = gaussian_mixture(g, np.random.default_rng(5))
        b = gaussian_mixture(g, np.random.default_rng(5))
        np.testing.assert_array_equal(a.values, b.values)
        assert a.values.min() >= 0

    def test_weighted_probe(self, small_op):
        out = weighted_ineq_probe(small_op, [0.0, 0.5], trials=3, seed=0)
        assert all(math.isfinite(out[t]["max_ratio"]) and math.isfinite(out[t]["max_mirror_ratio"])
                   for t in (0.0, 0.5))
        with pytest.raises(ValueError):
            weighted_ineq_probe(small_op, [0.95], trials=1, seed=0)

    def test_weighted_probe_below_plateau(self, small_op):
        trace, _ = el_iterate(IterationConfig(), small_op)
        out = weighted_ineq_probe(small_op, [0.0], trials=20, seed=3)
        assert out[0.0]["max_ratio"] <= trace.final.rayleigh * 1.01

    def test_corollary_structure(self, small_op):
        r = corollary_iteration(small_op, 4)
        assert r["nonnegative"]
        assert set(r["R"]) == {0, 2, 4}
        assert all(r["homogeneity_bound_ok"].values())
        with pytest.raises(ValueError):
            corollary_iteration(small_op, 3)

    def test_seed_exceeds_weight_inside_disc(self, small_op):
        # upsilon_* < 1 wherever |x2 + x1^2| > 1, which happens inside the unit disc
        r = corollary_iteration(small_op, 2)
        assert r["f0_max_excess"] > 0
        ups_star = weight_field(WeightSpec(WeightKind.UPSILON_STAR), small_op.grid).values
        assert ups_star.min() < 1


class TestDecay:
    def test_weight_itself(self):
        g = make_grid(8, 64)
        ups = weight_field(WeightSpec(WeightKind.UPSILON), g)
        rep = decay_report(ups, 0.0)
        assert rep["sup"] == pytest.approx(1.0, rel=1e-15) and rep["inf"] == pytest.approx(1.0, rel=1e-15)
        rep2 = decay_report(ups * 2.0, 0.0)
        assert rep2["sup"] == pytest.approx(2.0, rel=1e-15) and rep2["inf"] == pytest.approx(2.0, rel=1e-15)
        assert set(rep["profiles"]) == {"x1_axis", "x2_axis", "parabola"}

    def test_empty_region(self):
        with pytest.raises(EmptyRegion):
            decay_report(gaussian(make_grid(8, 64)), 10.0)

    def test_extremizer_ratio_finite(self, small_op):
        _, f = el_iterate(IterationConfig(), small_op)
        rep = decay_report(f, 1e-6 * f.max_abs())
        assert math.isfinite(rep["sup"]) and rep["inf"] > 0


class TestSmoothing:
    def test_mass_bound(self, small_op):
        r = smoothing_probe(small_op, 0.0, 1.0, 8, trials=5, seed=0)
        assert r["mass"] == pytest.approx(2.0, rel=1e-12)
        assert r["max_ratio"] <= 2.0 * (1 + 1e-6)

    def test_rejects_band(self, small_op):
        with pytest.raises(ValueError):
            smoothing_probe(small_op, 0.4, 1.0, 32, trials=1, seed=0)

    def test_measure_decay_rate(self):
        # |sum_k w_k exp(-i xi t_k^2)| over |t| <= 1 decays like xi^(-1/2); this is
        # the rate that sets the threshold alpha = 1/2 for the smoothing gain
        nodes, weights = QuadratureScheme(1.0, 200_000).nodes_weights
        xi = np.geomspace(50, 1600, 12)
        mu = np.abs(np.exp(-1j * np.outer(xi, nodes ** 2)) @ weights)
        slope = np.polyfit(np.log(xi), np.log(mu), 1)[0]
        assert slope == pytest.approx(-0.5, abs=0.05)
        # the gain ratio under band doubling is then about 2^(alpha - 1/2)
        assert 2 ** (0.75 - 0.5) < 1.3


class TestContraction:
    def test_identical_arguments(self, small_op):
        f = gaussian(small_op.grid)
        with pytest.raises(DegenerateDenominator):
            lipschitz_quotient(small_op, 1.0, f, f, 0.02)

    def test_quotient_vanishes_at_zero(self, small_op):
        u = gaussian(small_op.grid, sigma=1.2)
        qs = [lipschitz_quotient(small_op, 1.0, u * c, zeros(small_op.grid), 0.02) for c in (0.1, 0.05, 0.025)]
        assert qs[0] > qs[1] > qs[2]
        # S is fourfold homogeneous, so the quotient falls by 2^3 per halving
        assert qs[0] / qs[1] == pytest.approx(8.0, rel=1e-10)

    def test_probe_small(self, small_op, fixed_point):
        r = contraction_probe(small_op, fixed_point, 0.05, 0.02, pairs=5, seed=0)
        assert len(r["quotients"]) == 5 and r["tail_norm"] < 0.05
        assert r["contraction"] == (r["max_quotient"] < 1)


class TestRegularity:
    def test_scaling_exponent(self, fixed_point):
        cs = np.array([1.0, 0.5, 0.25])
        ratios = [regularity_report(fixed_point * c, 0.05, 0.0)["ratio"] for c in cs]
        slope = np.polyfit(np.log(cs), np.log(ratios), 1)[0]
        assert slope == pytest.approx(-3.0, rel=0.05)

    def test_finite(self, fixed_point):
        r = regularity_report(fixed_point, 0.05, 0.0)
        assert all(math.isfinite(r[k]) and r[k] > 0 for k in ("lhs", "rhs", "ratio"))

    @pytest.mark.parametrize("rho,varrho", [(0.2, 0.0), (0.05, 0.05), (0.05, -0.01)])
    def test_rejects_indices(self, fixed_point, rho, varrho):
        with pytest.raises(ValueError):
            regularity_report(fixed_point, rho, varrho)
