import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import beta

from parext.exceptions import SingularEvaluation
from parext.grid import make_grid
from parext.weights import (
    BallFamily,
    WeightKind,
    WeightSpec,
    ap_constant,
    axis_family,
    eval_weight,
    max_weight_comparison,
    standard_family,
    weight_field,
)

UPS = WeightSpec(WeightKind.UPSILON)
UPS_STAR = WeightSpec(WeightKind.UPSILON_STAR)
W = WeightSpec(WeightKind.W)
W_STAR = WeightSpec(WeightKind.W_STAR)
ONE = WeightSpec(WeightKind.AXIS_POWER, s=0.0)
coord = st.floats(-50, 50, allow_nan=False)


def axis_ap_exact(s, p=2.0):
    """Scale-free A_p product for |x1|^s over discs centred on the axis."""
    m = lambda a: beta((a + 1) / 2, 1.5) / (math.pi / 2)  # disc average of |u|^a
    return m(s) * m(-s / (p - 1)) ** (p - 1)


class TestEvaluation:
    def test_examples(self):
        assert eval_weight(UPS, 0.0, 0.0) == 1.0
        assert eval_weight(UPS, 2.0, 4.0) == 0.25
        assert eval_weight(UPS_STAR, 1.0, 3.0) == 0.0625
        assert eval_weight(W, 2.0, 0.0) == 16.0

    def test_three_dimensional(self):
        ups3 = WeightSpec(WeightKind.UPSILON, d=3)
        assert eval_weight(ups3, np.array([2.0, 0.0]), 4.0) == 0.125
        assert eval_weight(ups3, np.array([0.0, 2.0]), 4.0) == 0.125

    def test_singular_power(self):
        with pytest.raises(SingularEvaluation):
            eval_weight(WeightSpec(WeightKind.AXIS_POWER, s=-0.5), 0.0, 1.0)

    def test_field_reciprocity(self):
        g = make_grid(8, 64)
        prod = weight_field(W, g).values * weight_field(UPS_STAR, g).values
        np.testing.assert_allclose(prod, 1.0, rtol=2.3e-16, atol=0)

    @given(x1=coord, x2=coord)
    def test_reciprocity(self, x1, x2):
        assert eval_weight(W, x1, x2) * eval_weight(UPS_STAR, x1, x2) == pytest.approx(1.0, rel=2.3e-16)
        assert eval_weight(W_STAR, x1, x2) * eval_weight(UPS, x1, x2) == pytest.approx(1.0, rel=2.3e-16)

    @given(x1=coord, x2=coord)
    def test_range(self, x1, x2):
        assert 0.0 < eval_weight(UPS, x1, x2) <= 1.0
        assert 0.0 < eval_weight(UPS_STAR, x1, x2) <= 1.0
        assert eval_weight(W, x1, x2) >= 1.0

    @given(x1=coord, x2=coord)
    def test_parabolic_comparability(self, x1, x2):
        if math.hypot(x1, x2) < 1:
            return
        jb = lambda v: math.sqrt(1 + v * v)
        assert eval_weight(W, x1, x2) >= 0.25 * max(jb(x1), math.sqrt(jb(x2))) ** 2

    def test_parse_and_label(self):
        spec = WeightSpec.parse("axis:0.5")
        assert spec.kind is WeightKind.AXIS_POWER and spec.s == 0.5
        assert spec.label() == "axis:0.5"
        assert WeightSpec.parse("w_star").kind is WeightKind.W_STAR
        with pytest.raises(ValueError):
            WeightSpec.parse("parabola")


class TestApConstant:
    def test_constant_weight(self):
        for p in (1.5, 2.0, 4.0):
            assert ap_constant(ONE, p, axis_family(1.0, 3)).value == pytest.approx(1.0, rel=1e-14)

    def test_rejects_p(self):
        with pytest.raises(ValueError):
            ap_constant(ONE, 1.0, axis_family())

    def test_matches_closed_form(self):
        est = ap_constant(WeightSpec(WeightKind.AXIS_POWER, s=0.5), 2.0, axis_family(1.0, 8)).value
        assert est == pytest.approx(axis_ap_exact(0.5), rel=0.02)
        assert est <= axis_ap_exact(0.5)

    def test_mild_power_is_stable(self):
        spec = WeightSpec(WeightKind.AXIS_POWER, s=0.5)
        a = ap_constant(spec, 2.0, axis_family(1.0, 6)).value
        b = ap_constant(spec, 2.0, axis_family(1.0, 8)).value
        assert abs(b - a) / a < 0.10

    def test_strong_power_diverges(self):
        spec = WeightSpec(WeightKind.AXIS_POWER, s=1.5)
        a = ap_constant(spec, 2.0, axis_family(1.0, 6)).value
        b = ap_constant(spec, 2.0, axis_family(0.25, 8)).value
        assert b / a >= 1.5

    @pytest.mark.parametrize("spec", [WeightSpec(WeightKind.AXIS_POWER, s=0.5),
                                      WeightSpec(WeightKind.PARABOLA_POWER, s=0.3)])
    def test_family_monotone(self, spec):
        vals = [ap_constant(spec, 2.0, axis_family(1.0, K)).value for K in range(4)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_argmax_reported(self):
        res = ap_constant(WeightSpec(WeightKind.AXIS_POWER, s=0.5), 2.0, axis_family(1.0, 2))
        d = res.as_dict()
        assert d["ap"] == res.value
        assert d["argmax_ball"]["center"][0] == 0.0
        assert d["argmax_ball"]["radius"] in (1.0, 2.0, 4.0)

    def test_family_validation(self):
        with pytest.raises(ValueError):
            BallFamily(((0.0, 0.0),), 0.0, 2)
        with pytest.raises(ValueError):
            BallFamily(((0.0, 0.0),), 1.0, 2, samples_per_axis=4)
        assert np.all(np.diff(standard_family().radii) > 0)


class TestMaxComparison:
    def test_equal_weights(self):
        u = WeightSpec(WeightKind.AXIS_POWER, s=0.5)
        r = max_weight_comparison(u, u, 2.0, axis_family(1.0, 3))
        assert r["ap_max"] == r["ap_u"] == r["ap_v"]
        assert r["ok"]

    def test_trivial_weights(self):
        r = max_weight_comparison(ONE, ONE, 2.0, axis_family(1.0, 2))
        assert (r["ap_max"], r["ap_u"], r["ap_v"]) == pytest.approx((1.0, 1.0, 1.0))
        assert r["ok"]

    @pytest.mark.slow
    def test_axis_and_parabola(self):
        r = max_weight_comparison(WeightSpec(WeightKind.AXIS_POWER, s=0.5),
                                  WeightSpec(WeightKind.PARABOLA_POWER, s=0.3), 2.0, standard_family())
        assert r["ok"]
        assert all(math.isfinite(r[k]) for k in ("ap_max", "ap_u", "ap_v"))
