"""Ensemble statistics: normality tests, moment summaries, power-law fits.

A Kolmogorov-Smirnov statistic plus moment checks stand in for distributional
distances that cannot be estimated from samples without density estimation;
reports label them as proxies.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import kolmogorov
from scipy.stats import norm

from .errors import InsufficientDataError, InvalidArgumentError

__all__ = ["MCEnsemble", "ks_normal", "moments", "power_fit"]


@dataclass
class MCEnsemble:
    """Replication outputs grouped by a key (typically the averaging radius).

    ``groups[key]`` holds one value per replication and ``seeds[key]`` the
    stream fingerprint that produced each value; seeds must be unique within
    a group so that every row is replayable.
    """

    label: str
    groups: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)

    def add(self, key, values, seeds) -> None:
        values = np.asarray(values, dtype=float)
        seeds = np.asarray(seeds, dtype=np.uint64)
        if values.shape != seeds.shape:
            raise InvalidArgumentError("values and seeds must align")
        if np.unique(seeds).size != seeds.size:
            raise InvalidArgumentError(f"duplicate seeds in group {key!r}")
        self.groups[key] = values
        self.seeds[key] = seeds

    def group_sizes(self) -> dict:
        return {k: int(v.size) for k, v in self.groups.items()}

    def to_rows(self):
        """Yield (group, replication, value, seed) rows in deterministic order."""
        for key in self.groups:
            vals = self.groups[key]
            seeds = self.seeds[key]
            for i in range(vals.size):
                yield key, i, float(vals[i]), int(seeds[i])

    def save_csv(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["group", "replication", "value", "seed"])
            for row in self.to_rows():
                writer.writerow([row[0], row[1], repr(row[2]), row[3]])

    @classmethod
    def load_csv(cls, path: str | Path, label: str | None = None) -> "MCEnsemble":
        path = Path(path)
        ens = cls(label=label or path.stem)
        buckets: dict = {}
        with path.open() as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                key = row["group"]
                buckets.setdefault(key, ([], []))
                buckets[key][0].append(float(row["value"]))
                buckets[key][1].append(int(row["seed"]))
        for key, (vals, seeds) in buckets.items():
            ens.add(key, np.asarray(vals), np.asarray(seeds, dtype=np.uint64))
        return ens


def ks_normal(values, mean: float, sd: float) -> tuple[float, float]:
    """One-sample Kolmogorov-Smirnov test against N(mean, sd^2).

    Returns (D_n, p) with the asymptotic Kolmogorov p-value
    ``p = K(sqrt(n) D_n)``.  Requires at least 30 values and sd > 0.
    """
    values = np.asarray(values, dtype=float)
    if sd <= 0:
        raise InvalidArgumentError(f"sd must be positive, got {sd}")
    n = values.size
    if n < 30:
        raise InsufficientDataError(f"KS test needs >= 30 values, got {n}")
    u = np.sort(norm.cdf(values, loc=mean, scale=sd))
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - u)
    d_minus = np.max(u - (i - 1) / n)
    d = float(max(d_plus, d_minus))
    p = float(kolmogorov(math.sqrt(n) * d))
    return d, p


def moments(values) -> dict:
    """Mean, unbiased variance, and k-statistic skewness / excess kurtosis.

    Jackknife standard errors accompany each statistic (vectorized
    leave-one-out through power sums).  Constant samples report zero variance
    and flag the shape statistics as undefined (NaN).
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if n < 4:
        raise InsufficientDataError(f"moment summary needs >= 4 values, got {n}")

    def kstats(s1, s2, s3, s4, m):
        mu = s1 / m
        k2 = (m * s2 - s1**2) / (m * (m - 1))
        k3 = (2 * s1**3 - 3 * m * s1 * s2 + m**2 * s3) / (m * (m - 1) * (m - 2))
        k4 = (
            -6 * s1**4
            + 12 * m * s1**2 * s2
            - 3 * m * (m - 1) * s2**2
            - 4 * m * (m + 1) * s1 * s3
            + m**2 * (m + 1) * s4
        ) / (m * (m - 1) * (m - 2) * (m - 3))
        return mu, k2, k3, k4

    S1, S2, S3, S4 = (float(np.sum(x**k)) for k in (1, 2, 3, 4))
    mu, k2, k3, k4 = kstats(S1, S2, S3, S4, n)
    degenerate = k2 <= 0.0
    if degenerate:
        skew, exk = float("nan"), float("nan")
    else:
        skew = k3 / k2**1.5
        exk = k4 / k2**2

    # leave-one-out statistics, vectorized
    m = n - 1
    l1, l2, l3, l4 = (S1 - x, S2 - x**2, S3 - x**3, S4 - x**4)
    mu_i, k2_i, k3_i, k4_i = kstats(l1, l2, l3, l4, m)
    with np.errstate(invalid="ignore", divide="ignore"):
        skew_i = k3_i / k2_i**1.5
        exk_i = k4_i / k2_i**2

    def jse(stat_i):
        stat_i = np.asarray(stat_i, dtype=float)
        if not np.all(np.isfinite(stat_i)):
            return float("nan")
        return float(math.sqrt((n - 1) / n * np.sum((stat_i - stat_i.mean()) ** 2)))

    return {
        "n": int(n),
        "mean": float(mu),
        "var": float(k2),
        "skewness": float(skew),
        "excess_kurtosis": float(exk),
        "std_errors": {
            "mean": jse(mu_i),
            "var": jse(k2_i),
            "skewness": jse(skew_i) if not degenerate else float("nan"),
            "excess_kurtosis": jse(exk_i) if not degenerate else float("nan"),
        },
        "degenerate": bool(degenerate),
    }


def power_fit(x, y) -> tuple[float, float, float]:
    """Least-squares fit of log y against log x: returns (exponent, intercept, r^2)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise InvalidArgumentError("power fit needs at least 3 points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise InvalidArgumentError("power fit needs positive x and y")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), float(r2)
