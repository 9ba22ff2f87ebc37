"""Spatial averages of the linear stochastic heat equation with colored noise.

The solution driven by a noise with temporal kernel gamma0 and spatial kernel
gamma1 has an explicit chaos decomposition built from heat kernels.  This
module evaluates, at desk scale:

* the exact first-chaos covariance of ball averages, by spectral quadrature
  against the squared-Bessel window (no Monte Carlo);
* the limiting covariance of the normalized averages through the
  Feynman-Kac route: exponential moments of the coupled Brownian functional

      beta_{s,t}(z) = int_0^s int_0^t gamma0(r - v) gamma1(X^1_r - X^2_v + z) dr dv

  for two independent Brownian motions, by importance-sampled Monte Carlo;
* the power-decay constant for the riesz spatial kernel (time double
  integral times the singular two-ball integral);
* explicit tail bounds on the higher-chaos mass with the small/large
  frequency split, including the admissibility gate for the geometric sum;
* the relative size of the second chaos for riesz kernels across radii.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

from . import rng as rngmod
from .errors import InvalidArgumentError, InvalidConfigError, NonIntegrableError
from .kernels import (
    CovarianceModel,
    TemporalKernel,
    ball_volume,
    bessel_j,
    riesz_spectral_constant,
    sphere_area,
)

__all__ = [
    "heat_kernel",
    "chaos_kernel",
    "BMPathPair",
    "beta_functional",
    "beta_profile",
    "SHEConfig",
    "SheEstimate",
    "dalang_integral",
    "modified_dalang_integral",
    "riesz_part1_admissible",
    "first_chaos_covariance",
    "first_chaos_limit",
    "kappa_beta",
    "sigma_limit",
    "moment_beta_p",
    "TailBound",
    "chaos_tail_bound",
    "riesz_second_chaos_share",
]


# ---------------------------------------------------------------------------
# heat kernel and chaos kernels
# ---------------------------------------------------------------------------


def heat_kernel(t: float, x, d: int | None = None) -> float | np.ndarray:
    """Gaussian heat kernel (2 pi t)^{-d/2} exp(-|x|^2 / (2t)); unit mass in x."""
    if t <= 0:
        raise InvalidArgumentError(f"t must be positive, got {t}")
    arr = np.asarray(x, dtype=float)
    if d is None:
        d = arr.shape[-1] if arr.ndim > 0 else 1
    if arr.ndim > 0 and arr.shape[-1] == d and d > 1:
        sq = np.sum(arr * arr, axis=-1)
    else:
        sq = arr * arr
    out = (2.0 * math.pi * t) ** (-d / 2.0) * np.exp(-sq / (2.0 * t))
    return float(out) if np.ndim(out) == 0 else out


def chaos_kernel(t: float, x, n: int, times, points) -> float:
    """Order-n chaos kernel of the solution at (t, x):

        (1/n!) G(t - s_(1), x - y_(1)) G(s_(1) - s_(2), y_(1) - y_(2)) ...

    with the time arguments sorted decreasingly inside (0, t); vanishes when
    any time falls outside (0, t), and tied times are rejected.
    """
    times = np.asarray(times, dtype=float)
    pts = np.asarray(points, dtype=float)
    if times.shape[0] != n:
        raise InvalidArgumentError("need n time arguments")
    if np.unique(times).size != times.size:
        raise InvalidArgumentError("tied time arguments")
    if np.any(times <= 0.0) or np.any(times >= t):
        return 0.0
    order = np.argsort(-times)
    ts = times[order]
    if pts.ndim == 1 and n > 1 and pts.shape[0] == n:
        ys = pts[order]
    else:
        ys = np.atleast_2d(pts)[order] if pts.ndim > 1 else np.asarray([pts])[order]
    prev_t, prev_y = t, np.asarray(x, dtype=float)
    val = 1.0 / math.factorial(n)
    for k in range(n):
        val *= float(np.asarray(heat_kernel(prev_t - ts[k], prev_y - ys[k])).reshape(-1)[0])
        prev_t, prev_y = ts[k], ys[k]
    return val


# ---------------------------------------------------------------------------
# Brownian path pairs and the coupled functional
# ---------------------------------------------------------------------------


@dataclass
class BMPathPair:
    """Two independent standard Brownian paths on [0, t] and [0, s].

    Paths are simulated on half-step grids so that both the grid values
    (step dt, increments N(0, dt I)) and the exact midpoint values used by
    the midpoint Riemann sums are available.
    """

    t: float
    s: float
    dt: float
    x1_half: np.ndarray  # (2 n1 + 1, d) values at 0, dt/2, dt, ...
    x2_half: np.ndarray

    @classmethod
    def sample(cls, rng: np.random.Generator, t: float, s: float,
               steps_per_unit: int, d: int = 1) -> "BMPathPair":
        n1 = max(1, int(round(t * steps_per_unit)))
        n2 = max(1, int(round(s * steps_per_unit)))
        if abs(n1 / t - n2 / s) > 1e-9:
            # keep a common step so the diagonal (delta kernel) rule works
            n2 = max(1, int(round(s * n1 / t)))
        dt = t / n1
        inc1 = rng.normal(0.0, math.sqrt(dt / 2.0), size=(2 * n1, d))
        inc2 = rng.normal(0.0, math.sqrt(dt / 2.0), size=(2 * n2, d))
        x1 = np.vstack([np.zeros((1, d)), np.cumsum(inc1, axis=0)])
        x2 = np.vstack([np.zeros((1, d)), np.cumsum(inc2, axis=0)])
        return cls(t=t, s=s, dt=dt, x1_half=x1, x2_half=x2)

    @property
    def mid1(self) -> np.ndarray:
        return self.x1_half[1::2]

    @property
    def mid2(self) -> np.ndarray:
        return self.x2_half[1::2]

    @property
    def grid1(self) -> np.ndarray:
        return self.x1_half[0::2]

    @property
    def grid2(self) -> np.ndarray:
        return self.x2_half[0::2]


def beta_profile(pair: BMPathPair, zs: np.ndarray, gamma0: TemporalKernel,
                 gamma1: CovarianceModel) -> np.ndarray:
    """Midpoint double Riemann sum of the coupled functional, for a batch of shifts.

    ``zs`` has shape (m, d); returns the (m,) array of values.  The point-mass
    temporal kernel collapses the double sum onto the common diagonal.
    """
    if not gamma1.finite_at_zero:
        raise InvalidArgumentError(
            "pathwise evaluation needs a finite spatial kernel; riesz moments "
            "go through the spectral representation"
        )
    zs = np.atleast_2d(np.asarray(zs, dtype=float))
    m1, m2 = pair.mid1, pair.mid2
    dt = pair.dt
    if gamma0.is_delta:
        k = min(m1.shape[0], m2.shape[0])
        diffs = m1[:k] - m2[:k]  # (k, d)
        out = np.empty(zs.shape[0])
        block = max(1, int(2**22 // max(diffs.shape[0], 1)))
        for lo in range(0, zs.shape[0], block):
            sl = slice(lo, lo + block)
            shifted = diffs[None, :, :] + zs[sl, None, :]
            r = np.sqrt(np.sum(shifted * shifted, axis=-1))
            out[sl] = np.sum(gamma1.gamma_radial(r), axis=-1) * dt
        return out
    r_mid = (np.arange(m1.shape[0]) + 0.5) * dt
    v_mid = (np.arange(m2.shape[0]) + 0.5) * dt
    g0 = np.asarray(gamma0.gamma0_at(r_mid[:, None] - v_mid[None, :]))
    g0 = np.where(np.isfinite(g0), g0, 0.0)
    diffs = m1[:, None, :] - m2[None, :, :]  # (n1, n2, d)
    flat = diffs.reshape(-1, diffs.shape[-1])
    g0_flat = g0.ravel()
    out = np.empty(zs.shape[0])
    block = max(1, int(2**22 // max(flat.shape[0], 1)))
    for lo in range(0, zs.shape[0], block):
        sl = slice(lo, lo + block)
        shifted = flat[None, :, :] + zs[sl, None, :]
        r = np.sqrt(np.sum(shifted * shifted, axis=-1))
        out[sl] = (gamma1.gamma_radial(r) @ g0_flat) * dt * dt
    return out


def beta_functional(pair: BMPathPair, z, gamma0: TemporalKernel,
                    gamma1: CovarianceModel) -> float:
    """Single-shift value of the coupled Brownian functional (nonnegative)."""
    d = pair.x1_half.shape[1]
    z_arr = np.atleast_1d(np.asarray(z, dtype=float)).reshape(1, d)
    return float(beta_profile(pair, z_arr, gamma0, gamma1)[0])


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def dalang_integral(model: CovarianceModel) -> float:
    """int phi(xi) / (1 + |xi|^2) d xi by radial quadrature (finite <=> admissible noise)."""
    d = model.d

    def f(r: float) -> float:
        return float(model.phi_radial(np.asarray(r))) * r ** (d - 1) / (1.0 + r * r)

    inner, _ = quad(f, 0.0, 1.0, limit=200)
    outer, _ = quad(f, 1.0, np.inf, limit=200)
    return sphere_area(d) * (inner + outer)


def modified_dalang_integral(model: CovarianceModel) -> float:
    """Same with phi + phi^2 in place of phi (needed when gamma1 has infinite mass)."""
    d = model.d
    if model.kind == "riesz" and model.params["beta"] <= d / 2.0:
        # phi^2 ~ |xi|^{2 beta - 2d} makes the integrand non-integrable at 0
        return math.inf

    def f(r: float) -> float:
        p = float(model.phi_radial(np.asarray(r)))
        return (p + p * p) * r ** (d - 1) / (1.0 + r * r)

    inner, _ = quad(f, 0.0, 1.0, limit=200)
    outer, _ = quad(f, 1.0, np.inf, limit=200)
    return sphere_area(d) * (inner + outer)


def riesz_part1_admissible(d: int, beta: float) -> bool:
    """Window in which the riesz kernel passes the modified admissibility check."""
    return d / 2.0 < beta < min(2, d)


@dataclass
class SHEConfig:
    """Inputs of the heat-equation experiments."""

    d: int
    gamma0: TemporalKernel
    gamma1: CovarianceModel
    times: list = field(default_factory=lambda: [1.0])
    radii: list = field(default_factory=lambda: [10.0])
    bm_steps: int = 256
    n_paths: int = 100
    n_z: int = 1000
    z_proposal_scale: float | None = None
    master_seed: int = 0
    chaos_cutoff_N_freq: float = 2.0
    require_part1: bool = False

    def validate(self) -> None:
        if self.gamma1.d != self.d:
            raise InvalidConfigError("spatial kernel dimension disagrees with d")
        if self.gamma1.kind == "riesz":
            beta = self.gamma1.params["beta"]
            if not (0.0 < beta < min(2, self.d)):
                raise InvalidConfigError(
                    f"riesz exponent must satisfy 0 < beta < min(2, d), got {beta}"
                )
            if self.require_part1:
                if not riesz_part1_admissible(self.d, beta):
                    raise InvalidConfigError(
                        f"beta={beta} is outside the admissible window "
                        f"({self.d / 2}, {min(2, self.d)}) for the squared-density route"
                    )
                if not math.isfinite(modified_dalang_integral(self.gamma1)):
                    raise InvalidConfigError("modified admissibility integral diverges")
        da = dalang_integral(self.gamma1)
        if not math.isfinite(da):
            raise InvalidConfigError("the noise admissibility integral diverges")
        if self.bm_steps < 2 or self.n_paths < 1 or self.n_z < 1:
            raise InvalidConfigError("bm_steps >= 2, n_paths >= 1, n_z >= 1 required")

    def z_scale(self, s: float, t: float) -> float:
        if self.z_proposal_scale is not None:
            return float(self.z_proposal_scale)
        return math.sqrt(s + t) + 3.0 * self.gamma1.correlation_length()


@dataclass
class SheEstimate:
    estimate: float
    std_error: float
    n: int
    inconclusive: bool = False
    extras: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# first chaos: exact spectral quadrature
# ---------------------------------------------------------------------------


def _window_kernel_values(d: int, n_segments: int, nodes_per_segment: int):
    """Quadrature nodes u > 0, weights, and J_{d/2}(u)^2 / u on them.

    First Bessel period is handled with a square-root substitution so that
    integrable spectral singularities at 0 stay smooth.
    """
    gl_x, gl_w = leggauss(nodes_per_segment)
    v_hi = math.sqrt(math.pi)
    v = 0.5 * v_hi * (gl_x + 1.0)
    wv = 0.5 * v_hi * gl_w
    u_head = v * v
    w_head = 2.0 * v * wv
    k = np.arange(1, n_segments)
    mids = k[:, None] * math.pi + 0.5 * math.pi * (gl_x[None, :] + 1.0)
    w_seg = np.broadcast_to(0.5 * math.pi * gl_w[None, :], mids.shape)
    u = np.concatenate([u_head, mids.ravel()])
    w = np.concatenate([w_head, w_seg.ravel()])
    if d == 1:
        jsq_over_u = 2.0 * np.sin(u) ** 2 / (math.pi * u * u)
    else:
        jsq_over_u = bessel_j(d / 2.0, u) ** 2 / u
    return u, w, jsq_over_u


def spectral_ball_window(model: CovarianceModel, R: float, w_values,
                         *, n_segments: int = 400, nodes_per_segment: int = 12) -> np.ndarray:
    """int |F 1_{B_R}|^2(xi) phi(xi) exp(-w |xi|^2 / 2) d xi, vectorized over w.

    Reduces to (2 pi R)^d d vol(B_1) int_0^inf J_{d/2}(u)^2 phi(u/R)
    exp(-w u^2 / (2 R^2)) du / u; composite Gauss-Legendre over Bessel
    periods plus the oscillation-averaged tail.
    """
    d = model.d
    w_arr = np.atleast_1d(np.asarray(w_values, dtype=float))
    u, wt, jsq = _window_kernel_values(d, n_segments, nodes_per_segment)
    phi_u = model.phi_radial(u / R)
    base = jsq * phi_u * wt
    damp = np.exp(-np.outer(w_arr, (u / R) ** 2) / 2.0)
    head = damp @ base
    U = n_segments * math.pi
    tails = np.empty_like(w_arr)
    for i, wv in enumerate(w_arr):
        tails[i], _ = quad(
            lambda uu: float(model.phi_radial(np.asarray(uu / R)))
            * math.exp(-wv * (uu / R) ** 2 / 2.0) / (math.pi * uu * uu),
            U, np.inf, epsabs=0.0, epsrel=1e-9, limit=200,
        )
    pref = (2.0 * math.pi * R) ** d * d * ball_volume(d)
    return pref * (head + tails)


def first_chaos_covariance(R: float, t: float, s: float, gamma0: TemporalKernel,
                           model: CovarianceModel, *, n_segments: int = 400) -> float:
    """Exact covariance of the first chaotic components of the ball averages,

        E[P_1 A_t(R) P_1 A_s(R)],

    by nested quadrature: the double time integral of gamma0 against the
    spectral window with heat damping exp(-((t-u) + (s-v)) |xi|^2 / 2).
    No Monte Carlo is involved.
    """
    da = dalang_integral(model)
    if not math.isfinite(da):
        raise NonIntegrableError("noise admissibility integral diverges")

    def h(w: np.ndarray) -> np.ndarray:
        return spectral_ball_window(model, R, w, n_segments=n_segments)

    return gamma0.weighted_double_integral(t, s, h)


def first_chaos_limit(t: float, s: float, gamma0: TemporalKernel,
                      model: CovarianceModel) -> float:
    """R -> infinity limit of R^-d E[P_1 A_t(R) P_1 A_s(R)] for integrable gamma1:

        (2 pi)^d vol(B_1) phi(0) int_0^t int_0^s gamma0(u - v) du dv.
    """
    if not model.finite_at_zero:
        raise InvalidArgumentError("finite-mass limit formula needs integrable gamma1")
    phi0 = float(model.phi_radial(np.asarray(0.0)))
    return ((2.0 * math.pi) ** model.d * ball_volume(model.d) * phi0
            * gamma0.double_integral(t, s))


# ---------------------------------------------------------------------------
# riesz power-decay constant
# ---------------------------------------------------------------------------


def _two_ball_riesz_integral(d: int, beta: float, n_nodes: int = 96) -> float:
    """int_{B_1 x B_1} |x - y|^-beta dx dy by singularity-splitting quadrature."""
    gl_x, gl_w = leggauss(n_nodes)
    if d == 1:
        # 2 int_0^2 (2 - u) u^-beta du; substitute u = v^(1/(1-beta)) on [0,1]
        p = 1.0 / (1.0 - beta)
        v = 0.5 * (gl_x + 1.0)
        w = 0.5 * gl_w
        u1 = v**p
        part1 = float(np.sum(w * (2.0 - u1) * p * v ** (p * (1.0 - beta) - 1.0)))
        u2 = 1.0 + 0.5 * (gl_x + 1.0)
        w2 = 0.5 * gl_w
        part2 = float(np.sum(w2 * (2.0 - u2) * u2 ** (-beta)))
        return 2.0 * (part1 + part2)
    if d == 2:
        # 2 pi int_0^2 lens(rho) rho^{1-beta} d rho, lens = overlap of unit disks
        def lens(rho):
            z = np.clip(rho / 2.0, 0.0, 1.0)
            return 2.0 * np.arccos(z) - 2.0 * z * np.sqrt(1.0 - z * z)

        p = 2.0 / (2.0 - beta)
        v = 0.5 * (gl_x + 1.0)
        w = 0.5 * gl_w
        rho1 = v**p
        jac1 = p * v ** (p - 1.0)
        part1 = float(np.sum(w * lens(rho1) * rho1 ** (1.0 - beta) * jac1))
        rho2 = 1.0 + 0.5 * (gl_x + 1.0)
        part2 = float(np.sum(0.5 * gl_w * lens(rho2) * rho2 ** (1.0 - beta)))
        return 2.0 * math.pi * (part1 + part2)
    raise InvalidArgumentError("two-ball integral implemented for d in {1, 2}")


def kappa_beta(d: int, beta: float, t: float, gamma0: TemporalKernel) -> float:
    """Limiting variance constant for the riesz spatial kernel:

        (int_0^t int_0^t gamma0(r - v) dr dv) * int_{B_1^2} |x - y|^-beta dx dy.
    """
    if not (0.0 < beta < min(2, d)):
        raise InvalidArgumentError(f"need 0 < beta < min(2, d), got beta={beta}, d={d}")
    time_part = gamma0.double_integral(t, t)
    return time_part * _two_ball_riesz_integral(d, beta)


# ---------------------------------------------------------------------------
# Feynman-Kac Monte Carlo for the limiting covariance
# ---------------------------------------------------------------------------


def _gauss_density(z: np.ndarray, scale: float) -> np.ndarray:
    d = z.shape[-1]
    sq = np.sum(z * z, axis=-1)
    return (2.0 * math.pi * scale * scale) ** (-d / 2.0) * np.exp(-sq / (2.0 * scale * scale))


def sigma_limit(s: float, t: float, cfg: SHEConfig) -> SheEstimate:
    """Limiting covariance of normalized ball averages at times (s, t):

        vol(B_1) int (E[exp(beta_{s,t}(z))] - 1) dz,

    by importance sampling: shifts z from a centered Gaussian proposal, a
    fresh batch of path pairs per shift, jackknife standard error over
    shifts.  Estimates with SE/estimate > 0.5 are flagged inconclusive.
    """
    cfg.validate()
    if not cfg.gamma1.integrable:
        raise InvalidArgumentError("the limiting covariance needs an integrable spatial kernel")
    scale = cfg.z_scale(s, t)
    wd = ball_volume(cfg.d)
    weights = np.empty(cfg.n_z)
    for k in range(cfg.n_z):
        gen = rngmod.stream(cfg.master_seed, 11, k)
        z = gen.normal(0.0, scale, size=(1, cfg.d))
        evals = np.empty(cfg.n_paths)
        for j in range(cfg.n_paths):
            pair = BMPathPair.sample(rngmod.stream(cfg.master_seed, 12, k, j),
                                     t, s, cfg.bm_steps, cfg.d)
            evals[j] = beta_profile(pair, z, cfg.gamma0, cfg.gamma1)[0]
        weights[k] = (np.exp(evals).mean() - 1.0) / _gauss_density(z, scale)[0]
    est = wd * float(weights.mean())
    se = wd * float(weights.std(ddof=1) / math.sqrt(cfg.n_z))
    inconclusive = not (est > 0.0) or se > 0.5 * abs(est)
    return SheEstimate(estimate=est, std_error=se, n=cfg.n_z, inconclusive=inconclusive,
                       extras={"proposal_scale": scale})


def beta_mean_integral_mc(s: float, t: float, cfg: SHEConfig) -> SheEstimate:
    """Monte Carlo estimate of int E[beta_{s,t}(z)] dz (the first-order term).

    Shares the shift proposal with ``sigma_limit`` but integrates the
    functional itself; the exact value for integrable gamma1 is
    gamma0-double-integral times the total mass of gamma1.
    """
    cfg.validate()
    scale = cfg.z_scale(s, t)
    per_z = np.empty(cfg.n_z)
    for k in range(cfg.n_z):
        gen = rngmod.stream(cfg.master_seed, 21, k)
        z = gen.normal(0.0, scale, size=(1, cfg.d))
        evals = np.empty(cfg.n_paths)
        for j in range(cfg.n_paths):
            pair = BMPathPair.sample(rngmod.stream(cfg.master_seed, 22, k, j),
                                     t, s, cfg.bm_steps, cfg.d)
            evals[j] = beta_profile(pair, z, cfg.gamma0, cfg.gamma1)[0]
        per_z[k] = evals.mean() / _gauss_density(z, scale)[0]
    est = float(per_z.mean())
    se = float(per_z.std(ddof=1) / math.sqrt(cfg.n_z))
    return SheEstimate(estimate=est, std_error=se, n=cfg.n_z,
                       inconclusive=se > 0.5 * abs(est),
                       extras={"proposal_scale": scale})


def moment_beta_p(t: float, z, p: int, cfg: SHEConfig) -> SheEstimate:
    """E[beta_{t,t}(z)^p]: pathwise Monte Carlo for function kernels, the
    spectral representation for the riesz kernel (p <= 2 there).
    """
    if p < 1:
        raise InvalidArgumentError("moment order must be >= 1")
    if cfg.gamma1.kind == "riesz":
        return _riesz_beta_moment(t, z, p, cfg)
    z_arr = np.asarray(z, dtype=float).reshape(1, cfg.d)
    vals = np.empty(cfg.n_paths)
    for j in range(cfg.n_paths):
        pair = BMPathPair.sample(rngmod.stream(cfg.master_seed, 31, j), t, t,
                                 cfg.bm_steps, cfg.d)
        vals[j] = beta_profile(pair, z_arr, cfg.gamma0, cfg.gamma1)[0]
    mom = vals**p
    est = float(mom.mean())
    se = float(mom.std(ddof=1) / math.sqrt(cfg.n_paths))
    return SheEstimate(estimate=est, std_error=se, n=cfg.n_paths,
                       inconclusive=se > 0.5 * abs(est) if est != 0 else False)


def _riesz_beta_moment(t: float, z, p: int, cfg: SHEConfig) -> SheEstimate:
    """Spectral-route moments of beta for the riesz kernel (no pathwise gamma1).

    p = 1 is a two-fold quadrature; p = 2 reuses the frequency sampler of the
    second-chaos estimator with the ball window replaced by cos(z . tau).
    """
    beta = cfg.gamma1.params["beta"]
    d = cfg.d
    c = riesz_spectral_constant(d, beta)
    z_arr = np.asarray(z, dtype=float).reshape(d)
    if p == 1:
        if d != 1:
            raise InvalidArgumentError("riesz moment quadrature implemented for d = 1")
        znorm = float(abs(z_arr[0]))

        def h(w: np.ndarray) -> np.ndarray:
            # int phi1(xi) cos(z xi) e^{-w xi^2 / 2} d xi (even integrand)
            out = np.empty_like(w)
            for i, wv in enumerate(w):
                val, _ = quad(
                    lambda xi: c * xi ** (beta - 1.0) * math.cos(znorm * xi)
                    * math.exp(-wv * xi * xi / 2.0),
                    0.0, np.inf, limit=400,
                )
                out[i] = 2.0 * val
            return out

        est = cfg.gamma0.weighted_double_integral(t, t, h)
        return SheEstimate(estimate=est, std_error=0.0, n=0, extras={"route": "quadrature"})
    if p == 2:
        sampler = _RieszSecondOrderSampler(t, cfg, n_samples=cfg.n_paths * cfg.n_z)
        vals = sampler.weights * np.cos(sampler.tau * float(z_arr[0]))
        est = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(vals.size))
        return SheEstimate(estimate=est, std_error=se, n=vals.size,
                           inconclusive=se > 0.5 * abs(est), extras={"route": "spectral-mc"})
    raise InvalidArgumentError("riesz moments implemented for p <= 2 at desk scale")


# ---------------------------------------------------------------------------
# chaos tail bounds
# ---------------------------------------------------------------------------


@dataclass
class TailBound:
    t: float
    N: float
    mode: str
    C_N: float
    D_N: float
    big_gamma: float
    gate_ok: bool
    per_p: dict
    geometric_sum: float | None
    admissible_N: float | None


def _cn_dn(model: CovarianceModel, N: float, mode: str) -> tuple[float, float]:
    d = model.d

    def density(r: float) -> float:
        p = float(model.phi_radial(np.asarray(r)))
        return p + p * p if mode == "modified" else p

    cn_int, _ = quad(lambda r: density(r) * r ** (d - 3), N, np.inf, limit=200)
    if N <= 1.0:
        dn_a, _ = quad(lambda r: density(r) * r ** (d - 1), 0.0, N, limit=200)
        dn_int = dn_a
    else:
        dn_a, _ = quad(lambda r: density(r) * r ** (d - 1), 0.0, 1.0, limit=200)
        dn_b, _ = quad(lambda r: density(r) * r ** (d - 1), 1.0, N, limit=200)
        dn_int = dn_a + dn_b
    s = sphere_area(d)
    return s * cn_int, s * dn_int


def chaos_tail_bound(t: float, model: CovarianceModel, N: float,
                     gamma0: TemporalKernel, *, mode: str = "standard",
                     p_max: int = 8, n_search_max: float = 1e6) -> TailBound:
    """Frequency-split bound on the higher-chaos mass of the shifted moments.

    Computes C_N (spectral mass above N weighted by |xi|^-2), D_N (mass below
    N), the per-order bound

        ||phi||_inf (2 pi)^d Gamma_t^p p! t (4 C_N)^{p-1} exp(t D_N / (2 C_N)),

    and, when the gate 4 Gamma_t C_N < 1 holds, the geometric sum over orders
    p >= 2.  If the gate fails at the given N, the smallest admissible N is
    located by bisection and reported.  ``mode="modified"`` replaces phi by
    phi + phi^2 throughout and drops the ||phi||_inf prefactor (the route for
    infinite-mass kernels like riesz).
    """
    if N <= 0:
        raise InvalidArgumentError("N must be positive")
    if mode not in ("standard", "modified"):
        raise InvalidArgumentError("mode must be 'standard' or 'modified'")
    phi_inf = model.phi_bound()
    if mode == "standard" and not math.isfinite(phi_inf):
        raise InvalidArgumentError(
            "standard bound needs a bounded spectral density; use mode='modified'"
        )
    prefactor = phi_inf if mode == "standard" else 1.0
    d = model.d
    gam = gamma0.big_gamma(t)
    C_N, D_N = _cn_dn(model, N, mode)
    gate = 4.0 * gam * C_N < 1.0

    def bound_p(p: int, cn: float, dn: float) -> float:
        # assembled in log space: the exponential blows up for deep splits,
        # and an infinite bound is still a valid (useless) bound
        log_b = (math.log(prefactor) + d * math.log(2.0 * math.pi)
                 + p * math.log(gam) + math.lgamma(p + 1) + math.log(t)
                 + (p - 1) * math.log(4.0 * cn) + t * dn / (2.0 * cn))
        return math.exp(log_b) if log_b < 700.0 else math.inf

    per_p = {p: bound_p(p, C_N, D_N) for p in range(2, p_max + 1)}
    geometric = None
    if gate:
        log_g = (math.log(4.0 * prefactor) + d * math.log(2.0 * math.pi) + math.log(t)
                 + math.log(C_N) + 2.0 * math.log(gam) + t * D_N / (2.0 * C_N)
                 - math.log(1.0 - 4.0 * gam * C_N))
        geometric = math.exp(log_g) if log_g < 700.0 else math.inf

    admissible = None
    if not gate:
        lo, hi = N, max(2.0 * N, 2.0)
        while 4.0 * gam * _cn_dn(model, hi, mode)[0] >= 1.0:
            hi *= 2.0
            if hi > n_search_max:
                raise NonIntegrableError(
                    f"no admissible frequency split found below N = {n_search_max:g}"
                )
        for _ in range(60):
            mid_n = 0.5 * (lo + hi)
            if 4.0 * gam * _cn_dn(model, mid_n, mode)[0] < 1.0:
                hi = mid_n
            else:
                lo = mid_n
        admissible = float(hi)
    return TailBound(t=t, N=float(N), mode=mode, C_N=float(C_N), D_N=float(D_N),
                     big_gamma=float(gam), gate_ok=bool(gate),
                     per_p={p: float(v) for p, v in per_p.items()},
                     geometric_sum=None if geometric is None else float(geometric),
                     admissible_N=admissible)


# ---------------------------------------------------------------------------
# second-chaos share for the riesz kernel
# ---------------------------------------------------------------------------


class _RieszSecondOrderSampler:
    """Shared frequency/time sampler for the order-2 riesz functionals.

    Draws times uniformly, then frequencies (tau = xi_1 + xi_2, xi_2) with a
    mixture proposal whose power factors match the spectral singularities and
    whose Gaussian factors match the diagonal of the heat damping; the cross
    term is kept in the integrand through the exact decomposition

        A = diag(a - m, b - m) + m [1 1]^T [1 1],

    which keeps every retained exponential factor <= 1 and the weights
    square-integrable.  ``weights`` carries everything except the
    radius-dependent ball window, so one sample set serves all radii
    (common random numbers).
    """

    def __init__(self, t: float, cfg: SHEConfig, n_samples: int, seed_key: int = 41):
        if cfg.d != 1:
            raise InvalidArgumentError("second-order riesz sampler implemented for d = 1")
        beta = cfg.gamma1.params["beta"]
        c = riesz_spectral_constant(1, beta)
        rng = rngmod.stream(cfg.master_seed, seed_key)
        n = int(n_samples)
        self.t = t
        # times; the point-mass temporal kernel collapses r_j onto s_j
        s12 = rng.uniform(0.0, t, size=(n, 2))
        if cfg.gamma0.is_delta:
            r12 = s12.copy()
            w_time = np.full(n, t * t)
        else:
            r12 = rng.uniform(0.0, t, size=(n, 2))
            g0 = np.asarray(cfg.gamma0.gamma0_at(s12 - r12))
            g0 = np.where(np.isfinite(g0), g0, 0.0)
            w_time = t**4 * g0[:, 0] * g0[:, 1]
        a = s12[:, 0] + r12[:, 0]
        b = s12[:, 1] + r12[:, 1]
        m = np.minimum(s12[:, 0], s12[:, 1]) + np.minimum(r12[:, 0], r12[:, 1])
        lam1 = np.maximum((a - m) / 2.0, 1e-12)
        lam2 = np.maximum((b - m) / 2.0, 1e-12)
        alpha = beta / 2.0  # gamma shape for |xi|^{beta-1} e^{-lam xi^2}

        def draw_power_gauss(lam: np.ndarray) -> np.ndarray:
            y = rng.gamma(shape=alpha, scale=1.0, size=lam.shape) / lam
            return np.sqrt(y) * rng.choice([-1.0, 1.0], size=lam.shape)

        def q_power_gauss(xi: np.ndarray, lam: np.ndarray) -> np.ndarray:
            z_norm = 0.5 * math.gamma(alpha) * lam ** (-alpha)
            return np.abs(xi) ** (beta - 1.0) * np.exp(-lam * xi * xi) / (2.0 * z_norm)

        # tau from a radius-free envelope q_tau ~ min(r_hi, 1/(r_lo tau^2)),
        # which dominates the ball window ell_R for every R in [r_lo, r_hi]
        r_lo, r_hi = 1.0, 1.0e4
        bp = 1.0 / math.sqrt(r_lo * r_hi)
        mass_core = 2.0 * r_hi * bp
        mass_tail = 2.0 / (r_lo * bp)
        total = mass_core + mass_tail
        pick_core = rng.uniform(size=n) < mass_core / total
        tau_core = rng.uniform(-bp, bp, size=n)
        u_tail = np.maximum(rng.uniform(size=n), 1e-12)
        sign = np.where(rng.uniform(size=n) < 0.5, -1.0, 1.0)
        tau_tail = sign * bp / u_tail  # inverse transform of the 1/(r_lo tau^2) tail
        tau = np.where(pick_core, tau_core, tau_tail)

        def q_tau(tv: np.ndarray) -> np.ndarray:
            core = np.where(np.abs(tv) <= bp, r_hi, 0.0)
            tail = np.where(np.abs(tv) > bp, 1.0 / (r_lo * tv * tv), 0.0)
            return (core + tail) / total

        # xi_2 given tau: mixture centered at the two spectral singularities
        use_zero = rng.uniform(size=n) < 0.5
        g1 = draw_power_gauss(lam1)
        g2 = draw_power_gauss(lam2)
        xi2 = np.where(use_zero, g2, tau - g1)
        xi1 = tau - xi2
        q_mix = 0.5 * q_power_gauss(xi2, lam2) + 0.5 * q_power_gauss(tau - xi2, lam1)

        min12 = np.minimum(s12[:, 0], s12[:, 1])
        # exact heat damping exp(-1/2 xi^T A xi), A from two Brownian bridges
        quad_form = (a * xi1 * xi1 + b * xi2 * xi2 + 2.0 * m * xi1 * xi2)
        damp = np.exp(-0.5 * quad_form)
        phi_prod = (c * np.abs(xi1) ** (beta - 1.0)) * (c * np.abs(xi2) ** (beta - 1.0))
        self.tau = tau
        self.weights = w_time * phi_prod * damp / (q_tau(tau) * q_mix)
        self.beta = beta
        self.d = 1

    def ball_window_estimates(self, radii) -> dict:
        """Per-radius (estimate, se) of Var(P_2 A_t(R)) R^{-2d+beta} on common samples."""
        out = {}
        d = self.d
        wd = ball_volume(d)
        for R in radii:
            ell = np.sin(R * self.tau) ** 2 / (math.pi * R * self.tau * self.tau)
            vals = (0.5 * (2.0 * math.pi * R) ** d * wd * ell * self.weights
                    * R ** (-2.0 * d + self.beta))
            est = float(vals.mean())
            se = float(vals.std(ddof=1) / math.sqrt(vals.size))
            out[R] = (est, se)
        return out

    def paired_difference(self, r_small: float, r_large: float) -> tuple[float, float]:
        """Estimate and SE of ratio(r_small) - ratio(r_large) on common samples."""
        d, wd = self.d, ball_volume(self.d)

        def vals(R):
            ell = np.sin(R * self.tau) ** 2 / (math.pi * R * self.tau * self.tau)
            return (0.5 * (2.0 * math.pi * R) ** d * wd * ell * self.weights
                    * R ** (-2.0 * d + self.beta))

        diff = vals(r_small) - vals(r_large)
        return float(diff.mean()), float(diff.std(ddof=1) / math.sqrt(diff.size))


def riesz_second_chaos_share(t: float, beta: float, gamma0: TemporalKernel,
                             radii, cfg: SHEConfig) -> dict:
    """Normalized second-chaos variances Var(P_2 A_t(R)) R^{-2d+beta} across radii.

    One importance sample set serves every radius, so differences between
    radii are paired (common random numbers); the sequence is expected to
    decrease since the first chaos carries the R^{2d-beta} growth.
    """
    if cfg.gamma1.kind != "riesz" or abs(cfg.gamma1.params["beta"] - beta) > 1e-12:
        raise InvalidArgumentError("config spatial kernel must be the matching riesz kernel")
    cfg.validate()
    if gamma0.kind == "const" and gamma0.value == 0.0:
        return {"estimates": {R: (0.0, 0.0) for R in radii}, "paired": {}}
    sampler = _RieszSecondOrderSampler(t, cfg, n_samples=cfg.n_paths * cfg.n_z)
    estimates = sampler.ball_window_estimates(radii)
    paired = {}
    rs = sorted(radii)
    if len(rs) >= 2:
        dd, dse = sampler.paired_difference(rs[0], rs[-1])
        paired[(rs[0], rs[-1])] = (dd, dse)
    return {"estimates": estimates, "paired": paired}
