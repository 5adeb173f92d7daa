import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parext.exceptions import KTooLarge, NonPowerOfTwo
from parext.grid import GridSpec, SampledField, lp_norm, make_grid, sample, zeros
from parext.spaces import x_norm
from parext.spectral import (
    MultiplierSpec,
    apply_multiplier,
    band_limit,
    cutoff,
    frequencies,
    leibniz_decomposition,
    littlewood_paley_partition,
    mollified_leibniz_ratio,
    nyquist,
    project_meanfree,
    riesz_gradient,
    spectral_gradient,
    symbol,
)

# L = pi puts the frequencies on the integer lattice
TORUS = make_grid(math.pi, 256)


def noise(grid, seed):
    return SampledField(grid, np.random.default_rng(seed).standard_normal((grid.N, grid.N)))


def mode(grid, k1, k2, phase=0.0):
    c = math.pi / grid.L
    return sample(lambda x1, x2: np.cos(c * (k1 * x1 + k2 * x2) + phase), grid)


def windowed(grid, rng, band):
    x1, x2 = grid.mesh()
    L = grid.L
    win = np.where((abs(x1) < L / 2) & (abs(x2) < L / 2),
                   np.cos(np.pi * x1 / L) ** 2 * np.cos(np.pi * x2 / L) ** 2, 0.0)
    return band_limit(SampledField(grid, rng.standard_normal((grid.N, grid.N)) * win), band)


def rel(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


class TestCutoff:
    def test_profile(self):
        r = np.linspace(0, 3, 301)
        eta = cutoff(r)
        assert np.all(eta[r <= 1] == 1) and np.all(eta[r >= 2] == 0)
        assert np.all(np.diff(eta) <= 0)
        assert cutoff(1.5) == 0.5

    def test_lp_symbol_range(self):
        for k in range(4):
            m = symbol(MultiplierSpec.lp(k), TORUS)
            r = np.hypot(*frequencies(TORUS))
            assert m.min() >= 0 and m.max() <= 1
            assert np.all(m[r <= 2 ** k] == 1)

    def test_frequencies_need_power_of_two(self):
        g = GridSpec.__new__(GridSpec)
        object.__setattr__(g, "L", 1.0)
        object.__setattr__(g, "N", 12)
        with pytest.raises(NonPowerOfTwo):
            frequencies(g)


class TestMultipliers:
    def test_zero_power_identity(self):
        f = noise(TORUS, 0)
        for lam in (0.0, 4.0, 100.0):
            np.testing.assert_allclose(apply_multiplier(MultiplierSpec.d_lambda(0, lam), f).values, f.values,
                                       atol=1e-12)

    def test_abs_derivative_of_sine(self):
        g = make_grid(4.0, 64)
        f = sample(lambda x1, x2: np.sin(np.pi * x1 / 4) + 0 * x2, g)
        out = apply_multiplier(MultiplierSpec.abs_d(1), f)
        np.testing.assert_allclose(out.values, (np.pi / 4) * f.values, atol=1e-12)

    def test_riesz_squares(self):
        f, _ = project_meanfree(noise(TORUS, 1))
        total = sum(apply_multiplier(MultiplierSpec.riesz(j), apply_multiplier(MultiplierSpec.riesz(j), f)).values
                    for j in (1, 2))
        assert np.max(np.abs(total + f.values)) <= 1e-12 * np.max(np.abs(f.values))

    @given(s=st.floats(-2, 2), lam=st.floats(0, 64))
    def test_dlambda_inverse(self, s, lam):
        f = noise(make_grid(math.pi, 32), 2)
        back = apply_multiplier(MultiplierSpec.d_lambda(-s, lam), apply_multiplier(MultiplierSpec.d_lambda(s, lam), f))
        assert rel(back.values, f.values) <= 1e-12

    def test_dlambda_bounded(self):
        m = symbol(MultiplierSpec.d_lambda(1.0, 3.0), TORUS)
        assert m.max() == pytest.approx(math.sqrt(10))

    def test_negative_power_removes_mean(self):
        f = noise(TORUS, 3) + 5.0
        out = apply_multiplier(MultiplierSpec.abs_d(-1), f)
        assert abs(out.values.mean()) < 1e-12

    def test_linear(self):
        a, b = noise(TORUS, 4), noise(TORUS, 5)
        m = MultiplierSpec.abs_d(0.5)
        lhs = apply_multiplier(m, a * 2.0 + b).values
        rhs = 2 * apply_multiplier(m, a).values + apply_multiplier(m, b).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)


class TestPartition:
    @pytest.mark.parametrize("K", [0, 1, 5])
    def test_reconstruction(self, K):
        f = noise(TORUS, K)
        parts = littlewood_paley_partition(f, K)
        assert len(parts) == K + 2
        assert rel(sum(p.values for p in parts), f.values) <= 1e-12

    def test_single_mode_bands(self):
        # |xi| = 2^3 exactly: P_3 is one there, so only the Q_3 band carries it
        f = mode(TORUS, 8, 0)
        parts = littlewood_paley_partition(f, 5)
        norms = [lp_norm(p, 2) for p in parts]
        assert norms[3] == pytest.approx(lp_norm(f, 2), rel=1e-12)
        assert all(n < 1e-12 for i, n in enumerate(norms) if i != 3)

    def test_off_dyadic_mode(self):
        # |xi| = 5 lies in the transition of P_2 (4 < 5 < 8), so Q_2 and Q_3 share it
        f = mode(TORUS, 5, 0)
        parts = littlewood_paley_partition(f, 5)
        nonzero = [i for i, p in enumerate(parts) if lp_norm(p, 2) > 1e-12]
        assert nonzero == [2, 3]
        eta = float(cutoff(5 / 4))
        assert lp_norm(parts[2], 2) == pytest.approx(eta * lp_norm(f, 2), rel=1e-12)

    def test_too_many_bands(self):
        with pytest.raises(KTooLarge):
            littlewood_paley_partition(noise(TORUS, 0), 7)  # 2^7 = Nyquist


class TestLeibniz:
    def test_zero_factor(self):
        out = leibniz_decomposition(noise(TORUS, 0), zeros(TORUS), 5)
        assert all(g.max_abs() == 0 for g in out["groups"].values())
        assert out["remainder"].max_abs() == 0

    def test_low_modes_land_in_remainder(self):
        f, g = mode(TORUS, 1, 0), mode(TORUS, 0, 1, 0.3)
        out = leibniz_decomposition(f, g, 5)
        assert all(v.max_abs() < 1e-14 for v in out["groups"].values())
        np.testing.assert_allclose(out["remainder"].values, (f * g).values, atol=1e-14)

    def test_support_certificates(self):
        a = band_limit(noise(TORUS, 10), 48)
        b = band_limit(noise(TORUS, 11), 48)
        out = leibniz_decomposition(a, b, 5)
        assert out["residual"] == 0.0
        assert out["max_leakage"] <= 1e-10
        names = {c["group"] for c in out["certificates"]}
        assert {"high_low_f", "high_low_g", "diagonal_f", "diagonal_g", "remainder"} <= names

    def test_grouping_exhausts_product(self):
        a, b = noise(TORUS, 12), noise(TORUS, 13)
        out = leibniz_decomposition(a, b, 4)
        total = sum(g.values for g in out["groups"].values()) + out["remainder"].values
        np.testing.assert_allclose(total, (a * b).values, atol=1e-12)


class TestRiesz:
    def test_sine(self):
        g = make_grid(4.0, 64)
        h = sample(lambda x1, x2: np.sin(np.pi * x1 / 4) + 0 * x2, g)
        (c1, c2), meta = riesz_gradient(h)
        cosine = sample(lambda x1, x2: np.cos(np.pi * x1 / 4) + 0 * x2, g)
        np.testing.assert_allclose(c1.values, cosine.values, atol=1e-12)
        assert c2.max_abs() < 1e-12
        assert abs(meta["mean_removed"]) < 1e-15

    def test_isometry(self):
        (c1, c2), meta = riesz_gradient(noise(TORUS, 20) + 3.0)
        h0 = meta["projected"]
        assert meta["mean_removed"] == pytest.approx(3.0, abs=0.02)
        lhs = lp_norm(c1, 2) ** 2 + lp_norm(c2, 2) ** 2
        assert abs(lhs - lp_norm(h0, 2) ** 2) <= 1e-12 * lp_norm(h0, 2) ** 2

    @pytest.mark.slow
    def test_weighted_ratio_stable(self):
        consts = []
        for N in (128, 256):
            g = make_grid(16, N)
            band = nyquist(g) / 4  # index N/8
            lo, hi = math.inf, 0.0
            for k in range(200):
                h = windowed(g, np.random.default_rng(k), band)
                (c1, c2), _ = riesz_gradient(h)
                grad = SampledField(g, np.hypot(c1.values, c2.values))
                r = x_norm(grad, 0.02) / x_norm(h, 0.02)
                lo, hi = min(lo, r), max(hi, r)
            consts.append(max(hi, 1 / lo))
        assert abs(consts[1] - consts[0]) / consts[0] <= 0.20

    def test_spectral_gradient(self):
        g = make_grid(4.0, 64)
        f = sample(lambda x1, x2: np.sin(np.pi * x1 / 4) * np.cos(np.pi * x2 / 2), g)
        d1, d2 = spectral_gradient(f)
        want = sample(lambda x1, x2: (np.pi / 4) * np.cos(np.pi * x1 / 4) * np.cos(np.pi * x2 / 2), g)
        np.testing.assert_allclose(d1.values, want.values, atol=1e-12)


@pytest.mark.slow
def test_mollified_leibniz_constant_stable():
    consts = []
    for N in (128, 256):
        g = make_grid(16, N)
        band = nyquist(g) / 4
        for lam in (4, 16, 64):
            worst = 0.0
            for k in range(200):
                rng = np.random.default_rng(k)
                a, b = windowed(g, rng, band), windowed(g, rng, band)
                worst = max(worst, mollified_leibniz_ratio(a, b, 0.5, lam))
            consts.append(worst)
    assert (max(consts) - min(consts)) / min(consts) < 0.25
