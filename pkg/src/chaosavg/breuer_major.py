"""Spatial-average experiments over growing balls and their limiting variances.

The engine samples a stationary unit-variance Gaussian field, pushes it
through a Hermite series, averages over balls of several radii, and normalizes
by R^{d/2}.  Three independent evaluators predict the limiting variance:

* ``limit_variance_bm``     from the correlation function and the series,
* ``limit_variance_kernel`` from chaos kernels coupled through the covariance,
* ``var_spectral``          from the spectral side (squared-Bessel window).

Diagnostics cover the fourth-moment ratio, a KS normality proxy, a
small-frequency mass ratio, and the decay of normalized contraction norms.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from . import rng as rngmod
from .errors import (
    InsufficientDataError,
    InvalidArgumentError,
    NonIntegrableError,
)
from .field import FieldSample, GridSpec, sample_circulant, sample_spectral
from .functionals import (
    Axis,
    DiscreteKernel,
    HermiteSeries,
    apply_series,
    contract,
    h_norm,
)
from .kernels import CovarianceModel, ball_volume
from .stats import MCEnsemble, ks_normal, moments

__all__ = [
    "BMExperiment",
    "BMResult",
    "spatial_average",
    "run_bm",
    "limit_variance_bm",
    "limit_variance_kernel",
    "KernelVariance",
    "var_spectral",
    "SpectralVariance",
    "psi_p",
    "maruyama_ratio",
    "clt_diagnostics",
    "ball_average_kernel",
    "contraction_decay",
]


# ---------------------------------------------------------------------------
# spatial averages of a transformed field
# ---------------------------------------------------------------------------


def spatial_average(values: np.ndarray, grid: GridSpec, R: float) -> float:
    """Riemann sum h^d * sum over sites with |x| <= R of the transformed field."""
    if R > grid.half_extent + 1e-12:
        raise InvalidArgumentError(f"R={R} exceeds the grid half-extent {grid.half_extent}")
    mask = grid.site_norms() <= R + 1e-12
    return float(grid.spacing**grid.d * np.sum(np.asarray(values)[mask]))


# ---------------------------------------------------------------------------
# experiment driver
# ---------------------------------------------------------------------------


@dataclass
class BMExperiment:
    """A spatial-average experiment: model + series + radii + grid + replication plan."""

    model: CovarianceModel
    series: HermiteSeries
    radii: list
    grid: GridSpec
    n_reps: int
    master_seed: int
    sampler: str = "circulant"
    freq_cutoff: float | None = None
    n_modes_per_axis: int = 2048
    n_threads: int = 1

    def validate(self) -> None:
        if self.n_reps < 1:
            raise InvalidArgumentError("need at least one replication")
        if max(self.radii) > self.grid.half_extent:
            raise InvalidArgumentError("grid half-extent must cover the largest radius")
        if self.model.d != self.grid.d:
            raise InvalidArgumentError("model and grid dimension differ")
        if not self.model.finite_at_zero or abs(self.model.gamma_at(0.0) - 1.0) > 1e-9:
            raise InvalidArgumentError(
                "series semantics need a unit-variance field; standardize the model first"
            )
        # every term of the limiting variance must be finite before simulating
        for q in self.series.coeffs:
            try:
                self.model.gamma_integral(power=q)
            except NonIntegrableError as exc:
                raise InvalidArgumentError(
                    f"series order {q} fails the integrability check: {exc}"
                ) from exc

    def sample_field(self, rep: int) -> FieldSample:
        token = rngmod.stream_token(self.master_seed, rep)
        if self.sampler == "circulant":
            return sample_circulant(self.model, self.grid, seed=token)
        if self.sampler == "spectral":
            return sample_spectral(
                self.model, self.grid, seed=token,
                freq_cutoff=self.freq_cutoff, n_modes_per_axis=self.n_modes_per_axis,
            )
        raise InvalidArgumentError(f"unknown sampler {self.sampler!r}")


@dataclass
class BMResult:
    ensemble: MCEnsemble
    sigma2_theory: float | None
    sigma_source: str
    summaries: dict

    def values(self, R) -> np.ndarray:
        return self.ensemble.groups[R]


def run_bm(exp: BMExperiment) -> BMResult:
    """Run the experiment and summarize each radius group.

    Produces the normalized statistics R^{-d/2} * spatial_average per
    (radius, replication), with per-radius mean, variance, and a KS test
    against N(0, sigma_hat^2).  sigma_hat^2 is the theoretical limit when the
    model admits one, otherwise the ensemble variance (recorded in
    ``sigma_source``).
    """
    exp.validate()
    if exp.n_reps == 0:
        raise InvalidArgumentError("empty ensemble")
    radii = list(exp.radii)
    d = exp.grid.d
    masks = {R: exp.grid.site_norms() <= R + 1e-12 for R in radii}
    hd = exp.grid.spacing**d

    out = np.empty((len(radii), exp.n_reps))

    def one_rep(r: int) -> None:
        sample = exp.sample_field(r)
        gvals = apply_series(exp.series, sample.values)
        for k, R in enumerate(radii):
            out[k, r] = R ** (-d / 2.0) * hd * float(np.sum(gvals[masks[R]]))

    if exp.n_threads > 1:
        with ThreadPoolExecutor(max_workers=exp.n_threads) as pool:
            list(pool.map(one_rep, range(exp.n_reps)))
    else:
        for r in range(exp.n_reps):
            one_rep(r)

    seeds = np.array(
        [rngmod.stream_token(exp.master_seed, r) for r in range(exp.n_reps)], dtype=np.uint64
    )
    ensemble = MCEnsemble(label="bm")
    for k, R in enumerate(radii):
        ensemble.add(R, out[k], seeds)

    try:
        sigma2 = limit_variance_bm(exp.model, exp.series)
        source = "theory"
    except NonIntegrableError:
        sigma2, source = None, "ensemble"

    summaries = {}
    for R in radii:
        vals = ensemble.groups[R]
        sd2 = sigma2 if sigma2 is not None else float(np.var(vals, ddof=1))
        summary = {
            "mean": float(vals.mean()),
            "var": float(np.var(vals, ddof=1)),
            "sigma2_used": sd2,
        }
        if vals.size >= 30:
            ks_d, ks_p = ks_normal(vals, 0.0, math.sqrt(sd2))
            mom = moments(vals)
            summary.update(
                ks_stat=ks_d,
                ks_p=ks_p,
                fourth_moment_ratio=mom["excess_kurtosis"] + 3.0,
            )
        summaries[R] = summary
    return BMResult(ensemble=ensemble, sigma2_theory=sigma2, sigma_source=source, summaries=summaries)


# ---------------------------------------------------------------------------
# limiting variance, correlation-function route
# ---------------------------------------------------------------------------


def limit_variance_bm(model: CovarianceModel, series: HermiteSeries) -> float:
    """Limiting variance of the normalized average of a Hermite series:

        sigma^2 = vol(B_1) * sum_q c_q^2 q! int rho(x)^q dx,

    with the exponent following each term's order q (the per-term exponent is
    forced by consistency with the kernel-route variance; statements that put
    the series rank in every exponent disagree with it term by term).
    Each term's integrability is verified and a failure names the order.
    """
    if not model.finite_at_zero or abs(model.gamma_at(0.0) - 1.0) > 1e-9:
        raise InvalidArgumentError("the series route needs a unit-variance correlation")
    wd = ball_volume(model.d)
    total = 0.0
    for q, c in sorted(series.coeffs.items()):
        try:
            integral = model.gamma_integral(power=q)
        except NonIntegrableError as exc:
            raise NonIntegrableError(f"series term q={q} is not integrable: {exc}") from exc
        total += wd * c * c * math.factorial(q) * integral
    return total


# ---------------------------------------------------------------------------
# limiting variance, covariance-kernel route
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelVariance:
    sigma2: float
    per_order: dict
    abs_certificate: float  # same sum with |f| and |gamma| (finite => admissible)


def _riesz_check(model: CovarianceModel, p: int) -> None:
    if model.kind == "riesz":
        beta = model.params["beta"]
        if p <= model.d / beta:
            raise NonIntegrableError(
                f"kappa_{p} diverges for the riesz kernel: needs p > d/beta = {model.d / beta:g}"
            )


def _kappa_quad_riesz(model: CovarianceModel, a: np.ndarray, rtol: float, min_sep: float) -> float:
    """kappa_p at one difference tuple for the riesz kernel.

    The integrand prod_j |a_j + z|^-beta is integrable only when the a_j are
    distinct; tied entries (diagonal tuples of a discrete kernel) are spread
    by the half-cell separation ``min_sep``, the same offset rule used for
    the contraction diagonal (bias O(h^{1-beta})).
    """
    arr = np.sort(np.asarray(a, dtype=float))
    for j in range(1, arr.size):
        if arr[j] - arr[j - 1] < min_sep:
            arr[j] = arr[j - 1] + min_sep

    def integrand(z: float) -> float:
        return float(np.prod(model.gamma_radial(np.abs(arr + z))))

    pts = sorted(set((-arr).tolist()))
    lo, hi = min(pts) - 1.0, max(pts) + 1.0
    mid, _ = quad(integrand, lo, hi, points=pts, limit=400, epsrel=rtol)
    left, _ = quad(integrand, -np.inf, lo, limit=200, epsrel=rtol)
    right, _ = quad(integrand, hi, np.inf, limit=200, epsrel=rtol)
    return mid + left + right


def _kappa_batch(model: CovarianceModel, diffs: np.ndarray, rtol: float) -> np.ndarray:
    """kappa_p(a) = int prod_j gamma(a_j + z) dz for a batch of difference tuples (d = 1).

    Common composite Gauss-Legendre window, refined by node doubling until
    the relative change drops below rtol.
    """
    m, p = diffs.shape
    span = float(np.max(np.abs(diffs))) if m else 1.0
    decay = {"gaussian": 7.0, "exponential": 45.0, "bump": 1.0}[model.kind]
    half = span + decay * model.params.get("scale", 1.0) + 1.0
    prev = None
    n_seg = 24
    from numpy.polynomial.legendre import leggauss

    gl_x, gl_w = leggauss(16)
    while True:
        edges = np.linspace(-half, half, n_seg + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        hw = 0.5 * (edges[1] - edges[0])
        z = (mid[:, None] + hw * gl_x[None, :]).ravel()
        w = np.tile(hw * gl_w, n_seg)
        vals = np.empty(m)
        block = max(1, int(4e6 // max(z.size, 1)))
        for lo_i in range(0, m, block):
            sl = slice(lo_i, lo_i + block)
            prod = np.ones((diffs[sl].shape[0], z.size))
            for j in range(p):
                prod *= model.gamma_radial(np.abs(diffs[sl, j][:, None] + z[None, :]))
            vals[sl] = prod @ w
        if prev is not None and np.max(np.abs(vals - prev)) <= rtol * max(np.max(np.abs(vals)), 1e-300):
            return vals
        if n_seg > 3000:
            return vals
        prev = vals
        n_seg *= 2


def limit_variance_kernel(
    kernels: list[DiscreteKernel], model: CovarianceModel, *, rtol: float = 1e-9
) -> KernelVariance:
    """Kernel-route limiting variance

        sigma^2 = vol(B_1) * sum_p p! int int f_p(s) f_p(t) kappa_p(t - s) ds dt,

    with kappa_p(a) = int prod_j gamma(a_j + z) dz evaluated by adaptive
    quadrature at relative tolerance ``rtol``, deduplicated over the
    difference tuples t - s.  The absolute-value version (|f_p|, |gamma|) is
    evaluated alongside and returned as a finiteness certificate; the catalog
    kernels are nonnegative, so it differs from the signed sum only through
    |f_p|.
    """
    if model.d != 1:
        raise InvalidArgumentError("the kernel variance route is implemented for d = 1")
    wd = ball_volume(model.d)
    per_order: dict = {}
    total = 0.0
    abs_total = 0.0
    for f in kernels:
        p = f.order
        _riesz_check(model, p)
        grids = np.meshgrid(*[a.nodes for a in f.axes], indexing="ij")
        nodes = np.stack([g.ravel() for g in grids], axis=-1)  # (N, p)
        wgrid = f.values.copy()
        for k, ax in enumerate(f.axes):
            shape = [1] * p
            shape[k] = ax.n
            wgrid = wgrid * ax.weights.reshape(shape)
        wflat = wgrid.ravel()
        n = nodes.shape[0]
        diffs = (nodes[None, :, :] - nodes[:, None, :]).reshape(-1, p)
        uniq, inv = np.unique(np.round(diffs, 12), axis=0, return_inverse=True)
        if model.kind == "riesz":
            min_sep = 0.5 * min(ax.min_spacing() for ax in f.axes)
            kvals = np.array([_kappa_quad_riesz(model, a, rtol, min_sep) for a in uniq])
        else:
            kvals = _kappa_batch(model, uniq, rtol)
        kmat = kvals[inv].reshape(n, n)
        term = float(wflat @ kmat @ wflat)
        abs_term = float(np.abs(wflat) @ kmat @ np.abs(wflat))
        per_order[p] = wd * math.factorial(p) * term
        total += per_order[p]
        abs_total += wd * math.factorial(p) * abs_term
    return KernelVariance(sigma2=total, per_order=per_order, abs_certificate=abs_total)


# ---------------------------------------------------------------------------
# limiting variance, spectral route
# ---------------------------------------------------------------------------


def psi_p(
    p: int,
    ff_sq: Callable,
    phi: Callable,
    x: float,
    *,
    rtol: float = 1e-9,
    mc: dict | None = None,
) -> float:
    """Spectral overlap density at frequency x (d = 1):

        Psi_p(x) = int |F f_p|^2(xi_1, ..., xi_{p-1}, x - sum xi_i)
                   phi(x - sum xi_i) prod phi(xi_i) d xi.

    ``ff_sq`` takes an array of frequency tuples shaped (..., p).  p = 1 and
    p = 2 are exact quadratures; p >= 3 is Monte Carlo over the spectral
    marginal (see ``psi_p_mc``).
    """
    if p == 1:
        return float(ff_sq(np.array([[x]]))[0] * phi(np.asarray(x)))
    if p == 2:

        def integrand(xi: float) -> float:
            other = x - xi
            val = ff_sq(np.array([[xi, other]]))[0]
            return float(val * phi(np.asarray(other)) * phi(np.asarray(xi)))

        val, _ = quad(integrand, -np.inf, np.inf, limit=400, epsrel=rtol)
        return val
    if mc is None:
        raise InvalidArgumentError("p >= 3 needs a Monte Carlo specification")
    est, _ = psi_p_mc(p, ff_sq, phi, x, mc)
    return est


def psi_p_mc(p: int, ff_sq, phi, x: float, mc: dict) -> tuple[float, float]:
    """Monte Carlo Psi_p(x) for p >= 3 with the spectral marginal as proposal.

    ``mc`` needs keys ``model`` (a finite-mass CovarianceModel whose spectral
    density is phi), ``n`` (sample count), and ``rng``.
    """
    model: CovarianceModel = mc["model"]
    n: int = mc["n"]
    rng: np.random.Generator = mc["rng"]
    mass = model.spectral_mass()
    xi = model.sample_spectral(rng, n * (p - 1)).reshape(n, p - 1)
    last = x - xi.sum(axis=1)
    tuples = np.concatenate([xi, last[:, None]], axis=1)
    vals = ff_sq(tuples) * phi(np.abs(last)) * mass ** (p - 1)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n))


@dataclass(frozen=True)
class SpectralVariance:
    var_R: float
    psi0: float
    limit: float
    std_error: float | None = None


def _psi_fast_evaluator(p: int, ff_sq, phi, u_needed: float, mc: dict | None):
    """Chebyshev surrogate of Psi_p on [0, u_hi] (Psi_p is even and smooth).

    ``u_hi`` stops where Psi_p has decayed below 1e-15 of its peak, so the
    surrogate is exact-to-roundoff on the region that contributes.
    """
    def psi_raw(u: float) -> float:
        return psi_p(p, ff_sq, phi, abs(u), mc=mc)

    psi0 = psi_raw(0.0)
    u_hi = 1.0
    scale = abs(psi0) + 1e-300
    while u_hi < u_needed and abs(psi_raw(u_hi)) > 1e-15 * scale:
        u_hi *= 2.0
    u_hi = min(u_hi, u_needed)
    cheb = np.polynomial.chebyshev.Chebyshev.interpolate(
        lambda u: np.array([psi_raw(v) for v in np.atleast_1d(u)]), 128, domain=[0.0, u_hi]
    )

    def psi(u):
        u = np.abs(np.asarray(u, dtype=float))
        out = np.where(u <= u_hi, cheb(np.clip(u, 0.0, u_hi)), 0.0)
        return out

    return psi, psi0


def var_spectral(
    p: int,
    ff_sq: Callable,
    phi: Callable,
    R: float,
    *,
    d: int = 1,
    mc: dict | None = None,
) -> SpectralVariance:
    """Variance of the order-p average over B_R through the spectral window:

        Var = p! (2 pi R)^d int |tau|^-d J_{d/2}(R |tau|)^2 |F f_p|^2 mu(d xi),

    reduced to vol(B_1) int ell_R(u) Psi_p(u) du over the total frequency u.
    Returns the finite-R variance, Psi_p(0), and the R -> infinity prediction
    p! (2 pi)^d vol(B_1) Psi_p(0).  p <= 2 by quadrature; p >= 3 by Monte
    Carlo (``mc`` as in ``psi_p_mc``) with a reported standard error.
    """
    if d != 1:
        raise InvalidArgumentError("the spectral variance route is implemented for d = 1")
    wd = ball_volume(d)

    se = None
    if p > 2:
        if mc is None:
            raise InvalidArgumentError("p >= 3 needs a Monte Carlo specification")
        _, se = psi_p_mc(p, ff_sq, phi, 0.0, mc)

    n_seg = 300
    U = n_seg * math.pi
    psi, psi0 = _psi_fast_evaluator(p, ff_sq, phi, U / R, mc if p > 2 else None)

    # int_R ell_R(u) Psi_p(u) du with ell_R(u) = sin^2(Ru)/(pi R u^2) in d=1;
    # substitute v = R u and integrate over Bessel periods, averaged tail
    from numpy.polynomial.legendre import leggauss

    gl_x, gl_w = leggauss(16)
    seg = np.arange(n_seg)
    v = (seg[:, None] + 0.5 * (gl_x[None, :] + 1.0)) * math.pi
    w = np.full_like(v, math.pi / 2.0) * gl_w[None, :]
    head = float(np.sum(np.sin(v) ** 2 / (math.pi * v * v) * psi(v / R) * w))
    tail, _ = quad(lambda vv: float(psi(vv / R)) / (2.0 * math.pi * vv * vv), U, np.inf,
                   epsabs=0.0, epsrel=1e-8, limit=200)
    window_integral = 2.0 * (head + tail)  # both signs of u
    var_R = math.factorial(p) * (2.0 * math.pi) ** d * R**d * wd * window_integral
    limit = math.factorial(p) * (2.0 * math.pi) ** d * wd * psi0
    return SpectralVariance(var_R=var_R, psi0=psi0, limit=limit, std_error=se)


def maruyama_ratio(p: int, ff_sq: Callable, phi: Callable, h: float, *, rtol: float = 1e-9) -> float:
    """Small-frequency mass ratio h^-d int_{|tau| <= h} |F f_p|^2 mu(d xi) (d = 1).

    A positive limit inferior as h -> 0 certifies that the variance of the
    normalized average stays of exact order R^d.  p <= 2 supported.
    """
    if h <= 0:
        raise InvalidArgumentError("h must be positive")
    if p == 1:
        val, _ = quad(lambda u: float(ff_sq(np.array([[u]]))[0] * phi(np.asarray(u))),
                      -h, h, limit=200, epsrel=rtol)
        return val / h
    if p == 2:
        val, _ = quad(lambda u: psi_p(2, ff_sq, phi, u), -h, h, limit=100, epsrel=1e-6)
        return val / h
    raise InvalidArgumentError("small-frequency ratio implemented for p <= 2")


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def clt_diagnostics(ensemble: MCEnsemble, *, sigma2: float | None = None,
                    contraction: dict | None = None) -> dict:
    """Fourth-moment ratio and KS proxy per group, with optional contraction report.

    Needs >= 30 replications per group.  The fourth-moment ratio targets 3
    (Gaussian); the KS statistic is measured against N(0, sigma_hat^2) with
    sigma_hat^2 the supplied theory value or else the group variance.
    ``contraction`` (as produced by ``contraction_decay``) is attached
    verbatim when given.
    """
    report: dict = {"groups": {}}
    for key, vals in ensemble.groups.items():
        if vals.size < 30:
            raise InsufficientDataError(
                f"group {key!r} has {vals.size} replications; diagnostics need >= 30"
            )
        mom = moments(vals)
        sd2 = sigma2 if sigma2 is not None else mom["var"]
        ks_d, ks_p = ks_normal(vals, 0.0, math.sqrt(sd2))
        report["groups"][key] = {
            "fourth_moment_ratio": mom["excess_kurtosis"] + 3.0,
            "fourth_moment_se": mom["std_errors"]["excess_kurtosis"],
            "ks_stat": ks_d,
            "ks_p": ks_p,
            "n": int(vals.size),
            "sigma2_used": sd2,
        }
    report["sigma_source"] = "theory" if sigma2 is not None else "ensemble"
    if contraction is not None:
        report["contraction_norms"] = contraction
    return report


def ball_average_kernel(
    component: Callable[[np.ndarray], np.ndarray],
    support: tuple[float, float],
    p: int,
    R: float,
    h: float,
) -> DiscreteKernel:
    """Discretize g(y_1..y_p) = int_{|x|<=R} prod_j e(y_j - x) dx for a tensor kernel e^{(x) p}.

    ``component`` is the 1-d factor e with the given support; the result
    lives on a midpoint grid of spacing h covering [-R + support_lo,
    R + support_hi].  Orders p <= 2 are supported (enough for the
    contraction-decay diagnostics).
    """
    lo, hi = support
    n_y = int(round((2 * R + (hi - lo)) / h))
    y = (-R + lo) + h * (np.arange(n_y) + 0.5)
    n_x = int(round(2 * R / h))
    x = -R + h * (np.arange(n_x) + 0.5)
    E = component(y[:, None] - x[None, :])  # (n_y, n_x)
    axis = Axis(nodes=y, weights=np.full(n_y, h))
    if p == 1:
        vals = E.sum(axis=1) * h
        return DiscreteKernel(1, (axis,), vals, symmetric=True)
    if p == 2:
        vals = (E * h) @ E.T
        return DiscreteKernel(2, (axis, axis), vals, symmetric=True)
    raise InvalidArgumentError("ball-averaged kernels implemented for p <= 2")


def contraction_decay(
    component: Callable[[np.ndarray], np.ndarray],
    support: tuple[float, float],
    radii: list,
    model: CovarianceModel,
    *,
    h: float = 0.25,
) -> dict:
    """Normalized contraction norms ||g_R (x)_1 g_R|| / Var(G_{2,R}) across radii.

    ``g_R`` is the ball-averaged order-2 tensor kernel; the variance in the
    denominator is 2 ||g_R||^2.  A decaying sequence is the operative
    sufficient condition for asymptotic normality of the order-2 average.
    """
    out = {"radii": list(radii), "ratio": [], "sigma2_R": [], "contraction_norm": []}
    for R in radii:
        g = ball_average_kernel(component, support, 2, R, h)
        c = contract(g, g, 1, model)
        norm_c = h_norm(c, model)
        sigma2 = 2.0 * h_norm(g, model) ** 2
        out["contraction_norm"].append(norm_c)
        out["sigma2_R"].append(sigma2)
        out["ratio"].append(norm_c / sigma2)
    return out
