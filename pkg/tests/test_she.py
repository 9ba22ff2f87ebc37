"""Heat-equation quantities: exact kernels, quadratures, and Feynman-Kac MC."""

import math

import numpy as np
import pytest
from scipy.integrate import dblquad, quad
from scipy.special import gamma as gamma_fn

from chaosavg import kernels as K
from chaosavg import rng as RNG
from chaosavg import she as S
from chaosavg.errors import InvalidArgumentError, InvalidConfigError
from chaosavg.kernels import TemporalKernel

GAUSS = K.gaussian_model()
RIESZ = K.riesz_model(0.5)
CONST1 = TemporalKernel(kind="const", value=1.0)


class TestHeatKernel:
    def test_spot_value(self):
        assert S.heat_kernel(1.0, 0.0) == pytest.approx((2.0 * math.pi) ** -0.5, rel=1e-14)

    def test_unit_mass(self):
        mass, _ = quad(lambda x: S.heat_kernel(0.5, x), -np.inf, np.inf)
        assert mass == pytest.approx(1.0, abs=1e-8)

    def test_semigroup(self):
        s, t = 0.4, 0.7
        for x in (0.0, 0.8):
            conv, _ = quad(lambda y: S.heat_kernel(s, x - y) * S.heat_kernel(t, y),
                           -np.inf, np.inf)
            assert conv == pytest.approx(S.heat_kernel(s + t, x), rel=1e-9)

    def test_invalid_time(self):
        with pytest.raises(InvalidArgumentError):
            S.heat_kernel(0.0, 1.0)


class TestChaosKernel:
    def test_single_factor(self):
        assert S.chaos_kernel(1.0, 0.0, 1, [0.5], [0.0]) == pytest.approx(
            S.heat_kernel(0.5, 0.0), rel=1e-14)
        assert S.heat_kernel(0.5, 0.0) == pytest.approx(math.pi**-0.5, rel=1e-12)

    def test_hand_composed_product(self):
        v = S.chaos_kernel(1.0, 0.0, 2, [0.7, 0.3], [0.1, -0.2])
        expected = 0.5 * S.heat_kernel(0.3, -0.1) * S.heat_kernel(0.4, 0.3)
        assert v == pytest.approx(expected, rel=1e-13)

    def test_permutation_invariance(self):
        a = S.chaos_kernel(1.0, 0.0, 2, [0.7, 0.3], [0.1, -0.2])
        b = S.chaos_kernel(1.0, 0.0, 2, [0.3, 0.7], [-0.2, 0.1])
        assert a == pytest.approx(b, rel=1e-14)

    def test_vanishes_off_simplex_and_ties_rejected(self):
        assert S.chaos_kernel(1.0, 0.0, 1, [1.5], [0.0]) == 0.0
        assert S.chaos_kernel(1.0, 0.0, 2, [0.5, -0.1], [0.0, 0.0]) == 0.0
        with pytest.raises(InvalidArgumentError):
            S.chaos_kernel(1.0, 0.0, 2, [0.5, 0.5], [0.0, 0.0])


class TestBMPathPair:
    def test_grid_increments(self):
        pair = S.BMPathPair.sample(RNG.stream(1, 0), 2.0, 1.0, 128)
        inc = np.diff(pair.grid1[:, 0])
        assert pair.grid1[0, 0] == 0.0 and pair.grid2[0, 0] == 0.0
        assert inc.size == 256
        # standardized increments look standard normal
        from chaosavg.stats import ks_normal
        zs = np.concatenate([
            np.diff(S.BMPathPair.sample(RNG.stream(1, j), 2.0, 1.0, 32).grid1[:, 0])
            for j in range(40)
        ]) / math.sqrt(1.0 / 32)
        _, p = ks_normal(zs, 0.0, 1.0)
        assert p > 0.01


class TestBetaFunctional:
    def test_constant_kernel_exact(self):
        # a kernel that is constant over the visited range: beta = c s t
        wide = K.gaussian_model(scale=1e6)
        pair = S.BMPathPair.sample(RNG.stream(2, 0), 1.0, 0.5, 64)
        val = S.beta_functional(pair, 0.0, CONST1, wide)
        assert val == pytest.approx(1.0 * 0.5, rel=1e-6)

    def test_frozen_paths(self):
        pair = S.BMPathPair.sample(RNG.stream(2, 1), 1.0, 1.0, 64)
        pair.x1_half[:] = 0.0
        pair.x2_half[:] = 0.0
        val = S.beta_functional(pair, 0.3, CONST1, GAUSS)
        assert val == pytest.approx(float(GAUSS.gamma_at(0.3)), rel=1e-12)

    def test_mean_against_smoothing_oracle(self):
        # E[gamma1(X^1_u - X^2_v)] = (1 + 2(u+v))^{-1/2} for the unit gaussian
        oracle = dblquad(lambda u, v: (1.0 + 2.0 * (u + v)) ** -0.5, 0, 1, 0, 1)[0]
        vals = [
            S.beta_functional(S.BMPathPair.sample(RNG.stream(3, j), 1.0, 1.0, 64),
                              0.0, CONST1, GAUSS)
            for j in range(10_000)
        ]
        vals = np.asarray(vals)
        se = vals.std(ddof=1) / math.sqrt(vals.size)
        assert abs(vals.mean() - oracle) < 4.0 * se

    def test_nonnegative(self):
        for j in range(50):
            pair = S.BMPathPair.sample(RNG.stream(4, j), 0.7, 1.3, 32)
            z = RNG.stream(5, j).normal(0, 3)
            assert S.beta_functional(pair, z, CONST1, GAUSS) >= 0.0

    def test_delta_kernel_collapses_to_diagonal(self):
        delta = TemporalKernel(kind="delta")
        pair = S.BMPathPair.sample(RNG.stream(6, 0), 1.0, 1.0, 64)
        val = S.beta_functional(pair, 0.1, delta, GAUSS)
        diffs = pair.mid1[:, 0] - pair.mid2[:, 0] + 0.1
        manual = float(np.sum(np.exp(-diffs**2)) * pair.dt)
        assert val == pytest.approx(manual, rel=1e-12)

    def test_riesz_pathwise_rejected(self):
        pair = S.BMPathPair.sample(RNG.stream(7, 0), 1.0, 1.0, 32)
        with pytest.raises(InvalidArgumentError):
            S.beta_functional(pair, 0.0, CONST1, RIESZ)


class TestFirstChaosCovariance:
    def test_gaussian_limit_at_r50(self):
        val = S.first_chaos_covariance(50.0, 1.0, 1.0, CONST1, GAUSS)
        lim = S.first_chaos_limit(1.0, 1.0, CONST1, GAUSS)
        assert lim == pytest.approx(2.0 * math.sqrt(math.pi), rel=1e-12)
        assert abs(val / 50.0 / lim - 1.0) < 0.02

    def test_time_symmetry(self):
        a = S.first_chaos_covariance(20.0, 0.5, 1.0, CONST1, GAUSS)
        b = S.first_chaos_covariance(20.0, 1.0, 0.5, CONST1, GAUSS)
        assert a == pytest.approx(b, abs=1e-12)

    def test_riesz_ratio_increasing(self):
        vals = {R: S.first_chaos_covariance(R, 1.0, 1.0, CONST1, RIESZ)
                for R in (10.0, 30.0, 100.0)}
        ratios = [vals[R] * R**-1.5 for R in (10.0, 30.0, 100.0)]
        assert ratios[0] < ratios[1] < ratios[2]

    def test_delta_temporal_kernel(self):
        delta = TemporalKernel(kind="delta")
        val = S.first_chaos_covariance(30.0, 1.0, 1.0, delta, GAUSS)
        lim = S.first_chaos_limit(1.0, 1.0, delta, GAUSS)
        assert lim == pytest.approx(2.0 * math.sqrt(math.pi) * 1.0, rel=1e-12)
        assert abs(val / 30.0 / lim - 1.0) < 0.05


class TestKappaBeta:
    def test_d1_closed_form(self):
        beta = 0.5
        val = S.kappa_beta(1, beta, 1.0, CONST1)
        closed = 2.0 ** (3.0 - beta) / ((1.0 - beta) * (2.0 - beta))
        assert val == pytest.approx(closed, rel=1e-10)
        assert closed == pytest.approx(7.5425, abs=2e-4)

    def test_oracle_via_variable_split_quadrature(self):
        beta = 0.7
        # independent oracle: 2 int_0^2 (2-u) u^-beta du with an explicit split
        inner = quad(lambda u: (2.0 - u) * u ** (-beta), 0.0, 1.0, points=[0.0])[0]
        outer = quad(lambda u: (2.0 - u) * u ** (-beta), 1.0, 2.0)[0]
        assert S.kappa_beta(1, beta, 1.0, CONST1) == pytest.approx(
            2.0 * (inner + outer), rel=1e-8)

    def test_small_beta_ball_limit(self):
        val = S.kappa_beta(1, 1e-6, 1.0, CONST1)
        assert val == pytest.approx(4.0, rel=1e-4)  # vol(B_1)^2 in d = 1

    def test_zero_temporal_kernel(self):
        zero = TemporalKernel(kind="const", value=0.0)
        assert S.kappa_beta(1, 0.5, 1.0, zero) == 0.0

    def test_d2_against_polar_oracle(self):
        beta = 1.2
        def lens(rho):
            z = min(rho / 2.0, 1.0)
            return 2.0 * math.acos(z) - 2.0 * z * math.sqrt(1.0 - z * z)

        oracle = 2 * math.pi * quad(lambda r: lens(r) * r ** (1.0 - beta), 0.0, 2.0,
                                    points=[0.0])[0]
        assert S.kappa_beta(2, beta, 1.0, CONST1) == pytest.approx(oracle, rel=1e-6)

    def test_window_validation(self):
        with pytest.raises(InvalidArgumentError):
            S.kappa_beta(1, 1.2, 1.0, CONST1)


class TestSigmaLimit:
    def make_cfg(self, **kw):
        base = dict(d=1, gamma0=CONST1, gamma1=GAUSS, bm_steps=32, n_paths=4,
                    n_z=400, master_seed=31)
        base.update(kw)
        return S.SHEConfig(**base)

    def test_first_order_term_within_3se(self):
        cfg = self.make_cfg(n_z=600)
        est = S.beta_mean_integral_mc(1.0, 1.0, cfg)
        target = 1.0 * GAUSS.gamma_integral()  # t^2 Gamma-bar gamma1(R) with both 1
        assert abs(est.estimate - target) < 3.0 * est.std_error

    def test_symmetry_within_2se(self):
        a = S.sigma_limit(0.5, 1.0, self.make_cfg(master_seed=32))
        b = S.sigma_limit(1.0, 0.5, self.make_cfg(master_seed=33))
        tol = 2.0 * math.hypot(a.std_error, b.std_error)
        assert abs(a.estimate - b.estimate) <= tol

    def test_positivity_and_first_order_bound(self):
        for t in (0.5, 1.0):
            est = S.sigma_limit(t, t, self.make_cfg(master_seed=34))
            assert est.estimate > 0.0
            first_order = 2.0 * t * t * GAUSS.gamma_integral()
            assert est.estimate > first_order - 3.0 * est.std_error

    def test_riesz_rejected(self):
        cfg = self.make_cfg(gamma1=RIESZ)
        with pytest.raises(InvalidArgumentError):
            S.sigma_limit(1.0, 1.0, cfg)


class TestMomentBeta:
    def make_cfg(self, **kw):
        base = dict(d=1, gamma0=CONST1, gamma1=GAUSS, bm_steps=64, n_paths=4000,
                    n_z=10, master_seed=41)
        base.update(kw)
        return S.SHEConfig(**base)

    def test_first_moment_gaussian_oracle(self):
        oracle = dblquad(lambda u, v: (1.0 + 2.0 * (u + v)) ** -0.5, 0, 1, 0, 1)[0]
        est = S.moment_beta_p(1.0, 0.0, 1, self.make_cfg())
        assert abs(est.estimate - oracle) < 4.0 * est.std_error

    def test_monotone_in_time(self):
        cfg = self.make_cfg(n_paths=2000)
        vals = [S.moment_beta_p(t, 0.0, 1, cfg).estimate for t in (0.5, 1.0, 2.0)]
        assert vals[0] < vals[1] < vals[2]

    def test_jensen(self):
        cfg = self.make_cfg(n_paths=2000, master_seed=42)
        m1 = S.moment_beta_p(1.0, 0.0, 1, cfg)
        m2 = S.moment_beta_p(1.0, 0.0, 2, cfg)
        assert m2.estimate >= m1.estimate**2 - 3.0 * (m2.std_error + 2 * m1.std_error)

    def test_riesz_first_moment_quadrature_vs_closed_form(self):
        # E |N(0, u+v)|^{-beta} has an explicit gamma-function form
        beta = 0.5
        ez = 2.0 ** (-beta / 2.0) * gamma_fn((1.0 - beta) / 2.0) / math.sqrt(math.pi)
        oracle = dblquad(lambda u, v: (u + v) ** (-beta / 2.0) * ez, 0, 1, 0, 1)[0]
        cfg = self.make_cfg(gamma1=RIESZ, n_paths=10, n_z=10)
        est = S.moment_beta_p(1.0, 0.0, 1, cfg)
        assert est.extras["route"] == "quadrature"
        assert est.estimate == pytest.approx(oracle, rel=1e-5)

    def test_riesz_second_moment_vs_pathwise(self):
        cfg = self.make_cfg(gamma1=RIESZ, n_paths=1500, n_z=1000, master_seed=43)
        spec = S.moment_beta_p(1.0, 1.0, 2, cfg)
        assert spec.extras["route"] == "spectral-mc"
        vals = []
        for j in range(8000):
            pair = S.BMPathPair.sample(RNG.stream(44, j), 1.0, 1.0, 64)
            diffs = np.abs(pair.mid1[:, None, 0] - pair.mid2[None, :, 0] + 1.0)
            vals.append((np.sum(diffs**-0.5) * pair.dt * pair.dt) ** 2)
        vals = np.asarray(vals)
        tol = 4.0 * math.hypot(spec.std_error, vals.std(ddof=1) / math.sqrt(vals.size)) + 0.02
        assert abs(spec.estimate - vals.mean()) < tol


class TestChaosTailBound:
    def test_big_gamma_value(self):
        tb = S.chaos_tail_bound(2.0, GAUSS, 1.0, CONST1, p_max=3)
        assert tb.big_gamma == pytest.approx(4.0)

    def test_cn_decreasing(self):
        cs = [S.chaos_tail_bound(1.0, GAUSS, N, CONST1, p_max=2).C_N for N in (1.0, 2.0, 4.0)]
        assert cs[0] > cs[1] > cs[2] > 0.0

    def test_gate_and_bisection(self):
        tb = S.chaos_tail_bound(1.0, GAUSS, 0.25, CONST1, p_max=4)
        assert not tb.gate_ok and tb.admissible_N is not None
        tb2 = S.chaos_tail_bound(1.0, GAUSS, tb.admissible_N * 1.0001, CONST1, p_max=4)
        assert tb2.gate_ok and tb2.geometric_sum is not None and tb2.geometric_sum > 0

    def test_bound_dominates_mc_moment(self):
        tb = S.chaos_tail_bound(1.0, GAUSS, 2.0, CONST1, p_max=3)
        assert tb.gate_ok
        # MC estimate of int E[beta^2] dz via shift importance sampling
        rng = RNG.stream(51, 0)
        per_z = []
        for k in range(300):
            z = rng.normal(0.0, 3.0)
            q = math.exp(-z * z / 18.0) / math.sqrt(18.0 * math.pi)
            pair = S.BMPathPair.sample(RNG.stream(52, k), 1.0, 1.0, 32)
            b = S.beta_functional(pair, z, CONST1, GAUSS)
            per_z.append(b * b / q)
        mc = float(np.mean(per_z))
        assert tb.per_p[2] > mc

    def test_modified_mode_for_riesz(self):
        with pytest.raises(InvalidArgumentError):
            S.chaos_tail_bound(1.0, RIESZ, 1.0, CONST1)
        tb = S.chaos_tail_bound(1.0, K.riesz_model(0.75), 1.0, CONST1, mode="modified",
                                p_max=3)
        assert math.isfinite(tb.C_N) and math.isfinite(tb.D_N)


class TestRieszShare:
    def make_cfg(self, beta=0.5, **kw):
        base = dict(d=1, gamma0=CONST1, gamma1=K.riesz_model(beta), bm_steps=32,
                    n_paths=400, n_z=1000, master_seed=61)
        base.update(kw)
        return S.SHEConfig(**base)

    def test_share_decreases_beyond_2se(self):
        cfg = self.make_cfg()
        out = S.riesz_second_chaos_share(1.0, 0.5, CONST1, [10.0, 100.0], cfg)
        (r_lo, r_hi), (diff, dse) = next(iter(out["paired"].items()))
        assert (r_lo, r_hi) == (10.0, 100.0)
        assert diff > 2.0 * dse

    def test_part1_window_gate(self):
        assert not S.riesz_part1_admissible(1, 0.5)
        assert S.riesz_part1_admissible(1, 0.75)
        with pytest.raises(InvalidConfigError):
            self.make_cfg(beta=0.5, require_part1=True).validate()
        self.make_cfg(beta=0.75, require_part1=True).validate()

    def test_zero_temporal_kernel_gives_zero(self):
        zero = TemporalKernel(kind="const", value=0.0)
        cfg = self.make_cfg()
        out = S.riesz_second_chaos_share(1.0, 0.5, zero, [10.0], cfg)
        assert out["estimates"][10.0] == (0.0, 0.0)


class TestSection4Inequalities:
    def test_two_factor_and_one_factor_bounds(self):
        # for 50 random (x, y, s): the shifted double product is dominated by
        # the centered one, and likewise with a single factor
        rng = np.random.default_rng(71)
        phi = lambda u: float(GAUSS.phi_radial(np.asarray(abs(u))))
        for _ in range(50):
            x, y = rng.normal(0, 2, size=2)
            s = rng.uniform(0.05, 3.0)
            lhs2, _ = quad(lambda e: math.exp(-s * e * e) * phi(e - x) * phi(y - e),
                           -np.inf, np.inf)
            rhs2, _ = quad(lambda e: math.exp(-s * e * e) * phi(e) ** 2, -np.inf, np.inf)
            assert lhs2 <= rhs2 * (1.0 + 1e-9)
            lhs1, _ = quad(lambda e: math.exp(-s * e * e) * phi(e - x), -np.inf, np.inf)
            rhs1, _ = quad(lambda e: math.exp(-s * e * e) * phi(e), -np.inf, np.inf)
            assert lhs1 <= rhs1 * (1.0 + 1e-9)


class TestConsistency:
    def test_first_chaos_vs_beta_mean(self):
        # Var(P_1 A_t(R)) / (R^d vol(B_1) int E[beta] dz) -> 1
        t = 1.0
        R = 60.0
        var1 = S.first_chaos_covariance(R, t, t, CONST1, GAUSS)
        exact_mean_integral = CONST1.double_integral(t, t) * GAUSS.gamma_integral()
        ratio = var1 / (R * 2.0 * exact_mean_integral)
        assert abs(ratio - 1.0) < 0.05

    def test_sigma_limit_exceeds_first_order(self):
        cfg = S.SHEConfig(d=1, gamma0=CONST1, gamma1=GAUSS, bm_steps=32, n_paths=4,
                          n_z=300, master_seed=81)
        est = S.sigma_limit(0.5, 1.0, cfg)
        first_order = 2.0 * CONST1.double_integral(0.5, 1.0) * GAUSS.gamma_integral()
        assert est.estimate >= first_order - 3.0 * est.std_error
