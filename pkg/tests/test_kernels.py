"""Special functions and the covariance catalog."""

import math

import numpy as np
import pytest
from scipy.integrate import dblquad, quad

from chaosavg import kernels as K
from chaosavg.errors import InvalidArgumentError, InvalidInputError, NonIntegrableError


class TestBallVolume:
    def test_values(self):
        assert K.ball_volume(1) == pytest.approx(2.0, abs=1e-14)
        assert K.ball_volume(2) == pytest.approx(math.pi, abs=1e-14)
        assert K.ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0, abs=1e-13)

    def test_invalid_dimension(self):
        with pytest.raises(InvalidArgumentError):
            K.ball_volume(0)
        with pytest.raises(InvalidArgumentError):
            K.ball_volume(-2)


class TestBesselJ:
    def test_half_order_at_pi_over_2(self):
        # closed half-order form sqrt(2/(pi x)) sin x, cross-checked against
        # an adaptive quadrature of the defining integral
        x = math.pi / 2.0
        oracle, _ = quad(lambda th: math.sin(th) * math.cos(x * math.cos(th)), 0.0, math.pi)
        oracle *= (x / 2.0) ** 0.5 / (math.sqrt(math.pi) * math.gamma(1.0))
        assert oracle == pytest.approx(2.0 / math.pi, abs=1e-12)
        assert K.bessel_j(0.5, x) == pytest.approx(2.0 / math.pi, abs=1e-12)

    def test_zero_argument(self):
        assert K.bessel_j(1.0, 0.0) == 0.0

    def test_half_order_large_argument(self):
        expected = math.sqrt(2.0 / (10.0 * math.pi)) * math.sin(10.0)
        assert K.bessel_j(0.5, 10.0) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(-0.13726, abs=1e-5)

    def test_crossover_overlap(self):
        xs = np.linspace(25.0, 35.0, 200)
        for order in (0.5, 1.0, 1.5):
            q = K._bessel_quadrature(order, xs)
            a = K._bessel_asymptotic(order, xs)
            assert np.max(np.abs(q - a)) < 1e-9

    def test_decay_envelope_single_constant(self):
        # |J_p(x)| sqrt(x) stays below one constant over a wide range
        xs = np.logspace(-3, 4, 400)
        for order in (0.5, 1.0, 1.5):
            vals = np.abs(K.bessel_j(order, xs)) * np.sqrt(xs)
            assert np.max(vals) < 1.0

    def test_invalid_order(self):
        with pytest.raises(InvalidArgumentError):
            K.bessel_j(0.0, 1.0)
        with pytest.raises(InvalidArgumentError):
            K.bessel_j(-1.0, 1.0)


class TestBallFourier:
    def test_d1_zero_of_sine(self):
        assert K.ball_fourier(1, 1.0, math.pi) == pytest.approx(0.0, abs=1e-12)

    def test_d1_small_frequency(self):
        assert K.ball_fourier(1, 1.0, 1e-9) == pytest.approx(2.0, abs=1e-12)
        assert K.ball_fourier(1, 1.0, 0.0) == pytest.approx(2.0, abs=1e-14)

    def test_d2_against_disk_quadrature(self):
        # oracle: 2-d quadrature of cos(xi . u) over the unit disk
        oracle, _ = dblquad(
            lambda th, r: r * math.cos(r * math.cos(th)),
            0.0, 1.0, 0.0, 2.0 * math.pi, epsabs=1e-12,
        )
        val = K.ball_fourier(2, 1.0, np.array([1.0, 0.0]))
        assert val == pytest.approx(oracle, abs=1e-9)
        # the oracle fixes 2 pi J_1(1) = 2.7649194 (frozen from the quadrature)
        assert val == pytest.approx(2.7649193747, abs=1e-9)

    def test_d1_identity_on_log_grid(self):
        xi = np.logspace(-3, 3, 1000)
        for R in (1.0, 3.0):
            target = 2.0 * np.sin(R * xi) / xi
            vals = np.array([K.ball_fourier(1, R, float(x)) for x in xi])
            rel = np.abs(vals - target) / np.maximum(np.abs(target), 1e-30)
            assert np.max(rel) < 1e-10

    def test_invalid_radius(self):
        with pytest.raises(InvalidArgumentError):
            K.ball_fourier(1, 0.0, 1.0)


class TestEllR:
    def test_total_mass(self):
        assert abs(K.ell_r_total_mass(1) - 1.0) < 1e-3
        assert abs(K.ell_r_total_mass(2) - 1.0) < 1e-3

    def test_scaling(self):
        for R, x in [(3.0, 0.7), (10.0, 0.05), (2.5, 1.3)]:
            lhs = K.ell_r(1, R, x)
            rhs = R * K.ell_r(1, 1.0, R * x)
            assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_sifting_monotone(self):
        # integral against a gaussian bump increases to 1 as R grows
        vals = [K.ell_r_weighted_integral(1, R, lambda r: np.exp(-(r**2)))
                for R in (1.0, 10.0, 100.0)]
        assert vals[0] < vals[1] < vals[2] < 1.0 + 1e-3
        # heavy-tailed weight: deficit decays like 1/R
        assert 1.0 - vals[2] < 0.01
        assert (1.0 - vals[2]) < (1.0 - vals[1]) / 5.0


class TestConvolvePower:
    def test_gaussian_square_at_zero(self):
        grid = np.linspace(-12.0, 12.0, 4097)
        conv = K.convolve_power(lambda x: np.exp(-(x**2)), 2, grid)
        center = conv[grid.size // 2]
        oracle, _ = quad(lambda x: math.exp(-2.0 * x * x), -np.inf, np.inf)
        assert oracle == pytest.approx(math.sqrt(math.pi / 2.0), rel=1e-12)
        assert center == pytest.approx(oracle, rel=1e-5)

    def test_indicator_triangle(self):
        grid = np.linspace(-4.0, 4.0, 2001)
        phi = (np.abs(grid) <= 1.0).astype(float)
        conv = K.convolve_power(phi, 2, grid)
        assert conv[grid.size // 2] == pytest.approx(2.0, abs=2e-2)

    def test_young_bound(self):
        grid = np.linspace(-10.0, 10.0, 2049)
        h = grid[1] - grid[0]
        phi = np.exp(-(grid**2))
        conv3 = K.convolve_power(phi, 3, grid)
        q = 1.5
        norm_q = (np.sum(phi**q) * h) ** (1.0 / q)
        assert conv3.max() <= norm_q**3 * (1.0 + 1e-9)

    def test_nonfinite_rejected(self):
        grid = np.linspace(-1.0, 1.0, 65)
        bad = np.ones(65)
        bad[3] = np.inf
        with pytest.raises(InvalidInputError):
            K.convolve_power(bad, 2, grid)


class TestCatalog:
    @pytest.mark.parametrize("mid", ["gaussian:scale=1", "exponential:scale=1",
                                     "bump:scale=1", "riesz:beta=0.5"])
    def test_symmetry_and_nonnegativity(self, mid):
        m = K.model_from_id(mid)
        rng = np.random.default_rng(11)
        pts = rng.uniform(-30, 30, size=10_000)
        pts = pts[pts != 0.0]
        g_plus = m.gamma_radial(np.abs(pts))
        g_minus = m.gamma_radial(np.abs(-pts))
        assert np.array_equal(g_plus, g_minus)
        assert np.all(m.phi_radial(np.abs(pts)) >= 0.0)

    def test_gaussian_mass_matches_gamma0(self):
        m = K.gaussian_model()
        mass, _ = quad(lambda x: float(m.phi_radial(np.asarray(abs(x)))), -np.inf, np.inf)
        assert abs(mass - m.gamma_at(0.0)) < 1e-8

    def test_exponential_phi_is_cauchy(self):
        m = K.exponential_model()
        xi = np.linspace(-5, 5, 11)
        assert np.allclose(m.phi_radial(np.abs(xi)), 1.0 / (math.pi * (1.0 + xi**2)))

    def test_bump_transform_pair(self):
        # hat spectral density has the elementary closed form, and the kernel
        # is the triangle in d = 1
        m = K.bump_model()
        xi = np.linspace(0.05, 30.0, 301)
        closed = (2.0 / math.pi) * np.sin(xi / 2.0) ** 2 / xi**2
        assert np.allclose(m.phi_radial(xi), closed, rtol=1e-12)
        xs = np.linspace(-1.5, 1.5, 61)
        assert np.allclose(m.gamma_radial(np.abs(xs)), np.clip(1 - np.abs(xs), 0, None))

    def test_riesz_flags_and_window(self):
        m = K.riesz_model(0.5, d=1)
        assert not m.integrable and not m.finite_at_zero
        with pytest.raises(InvalidArgumentError):
            K.riesz_model(1.5, d=1)
        with pytest.raises(InvalidArgumentError):
            K.riesz_model(0.0, d=1)
        K.riesz_model(1.5, d=2)  # admissible there

    def test_riesz_constant_matches_mellin_ratio(self):
        from scipy.special import gamma as G

        for d, b in [(1, 0.5), (2, 1.2), (3, 0.8)]:
            c = K.riesz_spectral_constant(d, b)
            closed = G((d - b) / 2.0) / (2.0**b * math.pi ** (d / 2.0) * G(b / 2.0))
            assert c == pytest.approx(closed, rel=1e-10)

    def test_riesz_transform_consistency(self):
        # gamma(x) = int phi cos(x xi) d xi checked at one lag via mollified quadrature
        m = K.riesz_model(0.5, d=1)
        x = 2.0
        eps = 1e-4
        val, _ = quad(
            lambda xi: float(m.phi_radial(np.asarray(abs(xi)))) * math.cos(xi * x)
            * math.exp(-eps * xi * xi),
            -np.inf, np.inf, limit=800,
        )
        assert val == pytest.approx(2.0**-0.5, rel=5e-3)

    def test_model_from_id_roundtrip(self):
        m = K.model_from_id("riesz:beta=0.5,d=2")
        assert m.d == 2 and m.params["beta"] == 0.5
        assert K.model_from_id(m.id, d=2).params == m.params
        with pytest.raises(InvalidArgumentError):
            K.model_from_id("unknown:x=1")
        with pytest.raises(InvalidArgumentError):
            K.model_from_id("gaussian:scale")

    def test_gamma_integral_powers(self):
        g = K.gaussian_model()
        assert g.gamma_integral(1) == pytest.approx(math.sqrt(math.pi), rel=1e-9)
        assert g.gamma_integral(2) == pytest.approx(math.sqrt(math.pi / 2.0), rel=1e-9)
        rz = K.riesz_model(0.5)
        for power in (1, 2, 3):
            with pytest.raises(NonIntegrableError):
                rz.gamma_integral(power)  # pure powers never integrate globally


class TestTemporalKernel:
    def test_big_gamma(self):
        const = K.TemporalKernel(kind="const", value=1.0)
        assert const.big_gamma(2.0) == pytest.approx(4.0)
        delta = K.TemporalKernel(kind="delta")
        assert delta.big_gamma(2.0) == 1.0
        power = K.TemporalKernel(kind="power", alpha=0.5)
        assert power.big_gamma(1.0) == pytest.approx(4.0)  # 2 t^{1/2} / (1/2)

    def test_double_integral_closed_forms(self):
        const = K.TemporalKernel(kind="const", value=2.0)
        assert const.double_integral(1.5, 2.0) == pytest.approx(6.0)
        delta = K.TemporalKernel(kind="delta")
        assert delta.double_integral(1.5, 2.0) == pytest.approx(1.5)
        power = K.TemporalKernel(kind="power", alpha=0.3)
        oracle = dblquad(lambda u, v: (abs(u - v) + 1e-14) ** -0.3, 0, 1.0, 0, 1.0)[0]
        assert power.double_integral(1.0, 1.0) == pytest.approx(oracle, rel=1e-4)

    def test_weighted_double_integral(self):
        # h(w) = exp(-w): closed form for the const kernel
        const = K.TemporalKernel(kind="const", value=1.0)
        t = s = 1.0
        oracle = dblquad(lambda u, v: math.exp(-((t - u) + (s - v))), 0, s, 0, t)[0]
        val = const.weighted_double_integral(t, s, lambda w: np.exp(-w))
        assert val == pytest.approx(oracle, rel=1e-10)
        delta = K.TemporalKernel(kind="delta")
        oracle_d = quad(lambda u: math.exp(-(t + s - 2 * u)), 0, min(s, t))[0]
        val_d = delta.weighted_double_integral(t, s, lambda w: np.exp(-w))
        assert val_d == pytest.approx(oracle_d, rel=1e-10)

    def test_alpha_admissible(self):
        const = K.TemporalKernel(kind="const", value=1.0)
        assert const.alpha_admissible(0.3)
        assert not const.alpha_admissible(0.7)  # outside (0, 1/2)
        delta = K.TemporalKernel(kind="delta")
        assert delta.alpha_admissible(0.49)
        power = K.TemporalKernel(kind="power", alpha=0.4)
        assert power.alpha_admissible(0.25)

    def test_gamma0_nonnegative_symmetric(self):
        power = K.TemporalKernel(kind="power", alpha=0.4)
        u = np.linspace(-3, 3, 101)
        vals = np.asarray(power.gamma0_at(u))
        finite = vals[np.isfinite(vals)]
        assert np.all(finite >= 0)
        assert np.allclose(np.asarray(power.gamma0_at(u)), np.asarray(power.gamma0_at(-u)),
                           equal_nan=True)
