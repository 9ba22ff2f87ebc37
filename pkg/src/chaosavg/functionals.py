"""Hermite polynomials, Hermite series, and the discrete contraction calculus.

Chaos kernels are stored densely on tensor grids of 1-d quadrature axes.  The
supported envelope is order <= 4 with <= 64 nodes per axis; contractions are
evaluated axis-by-axis so a full inner product of two order-p kernels costs
O(p n^{p+1}) rather than O(n^{2p}).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, QuadratureError
from .kernels import CovarianceModel

__all__ = [
    "hermite_eval",
    "HermiteSeries",
    "apply_series",
    "Axis",
    "DiscreteKernel",
    "uniform_axis",
    "gauss_axis",
    "indicator_kernel",
    "tensor_kernel",
    "contract",
    "h_norm",
]

MAX_ORDER = 4
MAX_NODES_PER_AXIS = 1024


def hermite_eval(p: int, x) -> float | np.ndarray:
    """Probabilists' Hermite polynomial H_p(x) by the three-term recurrence.

    H_0 = 1, H_1 = x, H_{p+1} = x H_p - p H_{p-1}; orthogonal under the
    standard Gaussian weight with E[H_p(Z)^2] = p!.
    """
    if p < 0 or int(p) != p:
        raise InvalidArgumentError(f"order must be a nonnegative integer, got {p}")
    x_arr = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x_arr)
    if p == 0:
        return float(h_prev) if x_arr.ndim == 0 else h_prev
    h = x_arr.copy()
    for k in range(1, p):
        h, h_prev = x_arr * h - k * h_prev, h
    return float(h) if x_arr.ndim == 0 else h


@dataclass(frozen=True)
class HermiteSeries:
    """Finite Hermite expansion g = sum_p c_p H_p with rank >= 1.

    ``coeffs`` maps order p to coefficient c_p.  The rank is the smallest
    order with a nonzero coefficient; entries below the rank are forbidden
    and the rank coefficient must be nonzero.
    """

    coeffs: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.coeffs:
            raise InvalidArgumentError("series needs at least one coefficient")
        cleaned = {}
        for p, c in self.coeffs.items():
            p = int(p)
            if p < 1:
                raise InvalidArgumentError("series orders must be >= 1 (centered functional)")
            cleaned[p] = float(c)
        object.__setattr__(self, "coeffs", cleaned)
        if cleaned[min(cleaned)] == 0.0:
            raise InvalidArgumentError("rank coefficient must be nonzero")

    @property
    def rank(self) -> int:
        return min(self.coeffs)

    @property
    def max_order(self) -> int:
        return max(self.coeffs)

    def second_moment(self) -> float:
        """E[g(Z)^2] for standard normal Z: sum c_p^2 p!."""
        return sum(c * c * float(math.factorial(p)) for p, c in self.coeffs.items())

    @classmethod
    def from_dict(cls, d: dict) -> "HermiteSeries":
        return cls({int(k): float(v) for k, v in d.items()})


def apply_series(series: HermiteSeries, values: np.ndarray) -> np.ndarray:
    """Evaluate g = sum_p c_p H_p at every entry of ``values``.

    The series semantics assume the input field has unit marginal variance;
    callers must standardize first when that is not the case.
    """
    x = np.asarray(values, dtype=float)
    out = np.zeros_like(x)
    pmax = series.max_order
    h_prev = np.ones_like(x)
    h = x.copy()
    if 1 in series.coeffs:
        out += series.coeffs[1] * h
    for k in range(1, pmax):
        h, h_prev = x * h - k * h_prev, h
        if (k + 1) in series.coeffs:
            out += series.coeffs[k + 1] * h
    return out


# ---------------------------------------------------------------------------
# discrete chaos kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Axis:
    """1-d quadrature axis: nodes with matching weights."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise InvalidArgumentError("axis nodes and weights must be matching 1-d arrays")
        if nodes.size > MAX_NODES_PER_AXIS:
            raise InvalidArgumentError(f"axis exceeds the {MAX_NODES_PER_AXIS}-node envelope")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self) -> int:
        return self.nodes.size

    def min_spacing(self) -> float:
        if self.n < 2:
            return 1.0
        return float(np.min(np.diff(np.sort(self.nodes))))


def uniform_axis(lo: float, hi: float, n: int) -> Axis:
    """Midpoint rule on [lo, hi] with n cells (uniform weights, no endpoint nodes)."""
    h = (hi - lo) / n
    nodes = lo + h * (np.arange(n) + 0.5)
    return Axis(nodes=nodes, weights=np.full(n, h))


def gauss_axis(lo: float, hi: float, n: int) -> Axis:
    """Gauss-Legendre rule on [lo, hi] with n nodes (for smooth kernels)."""
    x, w = np.polynomial.legendre.leggauss(n)
    return Axis(nodes=lo + 0.5 * (hi - lo) * (x + 1.0), weights=0.5 * (hi - lo) * w)


@dataclass(frozen=True)
class DiscreteKernel:
    """Chaos kernel of a given order, sampled on a tensor grid of axes.

    ``values[i1, ..., ip]`` is the kernel at ``(axes[0].nodes[i1], ...)``;
    integrals pick up the product of axis weights.  ``symmetric`` marks
    kernels invariant under argument permutations.
    """

    order: int
    axes: tuple[Axis, ...]
    values: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        if self.order < 1 or self.order > MAX_ORDER:
            raise InvalidArgumentError(f"kernel order must be in 1..{MAX_ORDER}")
        axes = tuple(self.axes)
        if len(axes) != self.order:
            raise InvalidArgumentError("need one axis per argument")
        values = np.asarray(self.values, dtype=float)
        if values.shape != tuple(a.n for a in axes):
            raise InvalidArgumentError("values shape does not match axes")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", values)

    def l1_norm(self) -> float:
        w = np.abs(self.values)
        for ax in reversed(self.axes):
            w = w @ ax.weights
        return float(w)

    def integral(self) -> float:
        w = self.values
        for ax in reversed(self.axes):
            w = w @ ax.weights
        return float(w)

    def scaled(self, c: float) -> "DiscreteKernel":
        return DiscreteKernel(self.order, self.axes, c * self.values, self.symmetric)

    def check_symmetry(self, rng: np.random.Generator, n_trials: int = 8, tol: float = 1e-12) -> bool:
        """Spot-check invariance under random argument permutations."""
        if not self.symmetric or self.order == 1:
            return True
        for _ in range(n_trials):
            perm = rng.permutation(self.order)
            if not np.allclose(self.values, np.transpose(self.values, perm), atol=tol, rtol=0.0):
                return False
        return True

    def fourier_sq(self, xi: np.ndarray) -> np.ndarray:
        """|F f|^2 at stacked frequency tuples ``xi`` of shape (..., order)."""
        xi = np.asarray(xi, dtype=float)
        # dense sum over the tensor grid; fine inside the desk-scale envelope
        grids = np.meshgrid(*[a.nodes for a in self.axes], indexing="ij")
        wgrid = self.values.copy()
        for k, ax in enumerate(self.axes):
            shape = [1] * self.order
            shape[k] = ax.n
            wgrid = wgrid * ax.weights.reshape(shape)
        flat_nodes = np.stack([g.ravel() for g in grids], axis=-1)  # (N, order)
        phases = np.exp(-1j * xi.reshape(-1, self.order) @ flat_nodes.T)
        acc = (phases @ wgrid.ravel()).reshape(xi.shape[:-1])
        return np.abs(acc) ** 2

    # -- persistence -------------------------------------------------------
    def save(self, path: str | Path) -> None:
        """Write a JSON header next to a flat .npy value array."""
        path = Path(path)
        npy = path.with_suffix(".npy")
        header = {
            "order": self.order,
            "symmetric": self.symmetric,
            "axes": [
                {"nodes": a.nodes.tolist(), "weights": a.weights.tolist()} for a in self.axes
            ],
            "shape": list(self.values.shape),
            "values_file": npy.name,
        }
        path.with_suffix(".json").write_text(json.dumps(header, indent=2))
        np.save(npy, self.values.ravel())

    @classmethod
    def load(cls, path: str | Path) -> "DiscreteKernel":
        path = Path(path)
        header = json.loads(path.with_suffix(".json").read_text())
        values = np.load(path.parent / header["values_file"]).reshape(header["shape"])
        axes = tuple(
            Axis(np.asarray(a["nodes"]), np.asarray(a["weights"])) for a in header["axes"]
        )
        return cls(header["order"], axes, values, header["symmetric"])


def indicator_kernel(lo: float, hi: float, n: int) -> DiscreteKernel:
    """Order-1 kernel for the indicator of [lo, hi] on an n-cell midpoint grid."""
    ax = uniform_axis(lo, hi, n)
    return DiscreteKernel(1, (ax,), np.ones(n), symmetric=True)


def tensor_kernel(component: DiscreteKernel, p: int) -> DiscreteKernel:
    """p-fold tensor power e x e x ... x e of an order-1 kernel (symmetric)."""
    if component.order != 1:
        raise InvalidArgumentError("tensor_kernel expects an order-1 component")
    values = component.values
    out = values
    for _ in range(p - 1):
        out = np.multiply.outer(out, values)
    return DiscreteKernel(p, component.axes * p, out, symmetric=True)


def _pair_matrix(ax_f: Axis, ax_g: Axis, gamma: CovarianceModel) -> np.ndarray:
    """Weighted covariance coupling M[a, b] = w_a gamma(x_a - x_b) w_b.

    Kernels with a singular diagonal (riesz) are integrated with the
    half-cell offset rule: coincident nodes are evaluated at half the local
    spacing, an O(h^{1-beta}) bias documented for this envelope.
    """
    diff = ax_f.nodes[:, None] - ax_g.nodes[None, :]
    if not gamma.finite_at_zero:
        half = 0.5 * min(ax_f.min_spacing(), ax_g.min_spacing())
        diff = np.where(np.abs(diff) < half, half, diff)
    vals = gamma.gamma_radial(np.abs(diff))
    return ax_f.weights[:, None] * vals * ax_g.weights[None, :]


def contract(
    f: DiscreteKernel, g: DiscreteKernel, r: int, gamma: CovarianceModel
) -> DiscreteKernel | float:
    """r-fold contraction of f (order p) and g (order q) through gamma.

    Pairs the last r arguments of each kernel:

        (f (x)_r g)(s, t) = int f(s, a) g(t, b) prod_j gamma(a_j - b_j) da db,

    approximated with the product quadrature carried by the axes.  r = 0 is
    the plain tensor product; r = p = q returns the scalar inner product in
    the gamma-weighted space.
    """
    p, q = f.order, g.order
    if r < 0 or r > min(p, q):
        raise InvalidArgumentError(f"contraction index must satisfy 0 <= r <= min(p, q), got {r}")
    if r == 0:
        values = np.multiply.outer(f.values, g.values)
        return DiscreteKernel(p + q, f.axes + g.axes, values, symmetric=False)
    # transform g along each of its last r axes by the coupling matrix, then
    # sum those axes against the last r axes of f
    gt = g.values
    for j in range(r):
        ax_g = g.axes[q - 1 - j]
        ax_f = f.axes[p - 1 - j]
        M = _pair_matrix(ax_f, ax_g, gamma)
        # replace g's axis (q-1-j) by an f-node axis: result index order is
        # (other g axes..., new axis at the same position)
        gt = np.moveaxis(np.tensordot(gt, M, axes=([q - 1 - j], [1])), -1, q - 1 - j)
    # now sum f's last r axes against g's last r axes (weights already in M)
    f_axes_idx = list(range(p - r, p))
    g_axes_idx = list(range(q - r, q))
    # f's axis p-1 pairs with g's axis q-1, etc.
    out = np.tensordot(f.values, gt, axes=(f_axes_idx[::-1], g_axes_idx[::-1]))
    if p + q - 2 * r == 0:
        return float(out)
    return DiscreteKernel(p + q - 2 * r, f.axes[: p - r] + g.axes[: q - r], out, symmetric=False)


def h_norm(f: DiscreteKernel, gamma: CovarianceModel) -> float:
    """Norm of a chaos kernel in the gamma-weighted Hilbert space.

    Computed as sqrt of the full self-contraction; a value below -1e-10
    signals a non-positive-definite quadrature of gamma and is an error,
    smaller negative noise is clipped to zero.
    """
    v = contract(f, f, f.order, gamma)
    if v < -1e-10:
        raise QuadratureError(
            f"squared norm evaluated to {v:.3e}; quadrature of gamma is not positive definite"
        )
    return float(np.sqrt(max(v, 0.0)))
