"""Statistical helpers shared by the experiment drivers.

Mostly thin wrappers over numpy/scipy/statsmodels with the conventions
used throughout: batch means for Monte Carlo standard errors, weighted
least squares for scaling-law fits, and normality diagnostics for the
central-limit checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .errors import ValidationError

MIN_BATCHES = 20


@dataclass
class BatchStats:
    mean: float
    se: float
    batches: int
    batch_size: int


def batch_stats(samples: np.ndarray, batches: int = MIN_BATCHES) -> BatchStats:
    """Mean and batch-means standard error of a 1-D sample array."""
    samples = np.asarray(samples, dtype=float).ravel()
    if batches < MIN_BATCHES:
        raise ValidationError(f"need at least {MIN_BATCHES} batches, got {batches}")
    if len(samples) < batches:
        raise ValidationError(
            f"{len(samples)} samples cannot fill {batches} batches")
    size = len(samples) // batches
    means = samples[:size * batches].reshape(batches, size).mean(axis=1)
    se = float(means.std(ddof=1) / np.sqrt(batches))
    return BatchStats(mean=float(samples.mean()), se=se,
                      batches=batches, batch_size=size)


@dataclass
class FitResult:
    slope: float
    intercept: float
    slope_se: float
    r_squared: float
    ci_low: float
    ci_high: float

    def covers(self, value: float) -> bool:
        return self.ci_low <= value <= self.ci_high


def fit_through_origin(x, y, weights=None) -> FitResult:
    """Weighted least squares for y = slope * x (no intercept)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    sxx = np.sum(w * x * x)
    slope = float(np.sum(w * x * y) / sxx)
    resid = y - slope * x
    dof = len(x) - 1
    slope_se = float(np.sqrt(np.sum(w * resid ** 2) / dof / sxx)) if dof else np.inf
    ss_res = float(np.sum(w * resid ** 2))
    ss_tot = float(np.sum(w * y ** 2))   # no-intercept convention
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else np.nan
    half = sps.t.ppf(0.975, dof) * slope_se if dof else np.inf
    return FitResult(slope=slope, intercept=0.0, slope_se=slope_se,
                     r_squared=r2, ci_low=slope - half, ci_high=slope + half)


def fit_line(x, y, weights=None) -> FitResult:
    """Weighted least squares for y = intercept + slope * x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    design = np.column_stack([np.ones_like(x), x])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(design * sw[:, None], y * sw, rcond=None)
    intercept, slope = float(coef[0]), float(coef[1])
    resid = y - (intercept + slope * x)
    dof = len(x) - 2
    cov_inv = (design * w[:, None]).T @ design
    if dof > 0:
        sigma2 = float(np.sum(w * resid ** 2) / dof)
        slope_se = float(np.sqrt(sigma2 * np.linalg.inv(cov_inv)[1, 1]))
    else:
        slope_se = np.inf
    ybar = float(np.sum(w * y) / np.sum(w))
    ss_res = float(np.sum(w * resid ** 2))
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else np.nan
    half = sps.t.ppf(0.975, dof) * slope_se if dof > 0 else np.inf
    return FitResult(slope=slope, intercept=intercept, slope_se=slope_se,
                     r_squared=r2, ci_low=slope - half, ci_high=slope + half)


def fit_loglog(n_values, y_values, weights=None) -> FitResult:
    """Power-law exponent fit: log y = alpha * log n + c."""
    n_values = np.asarray(n_values, dtype=float)
    y_values = np.asarray(y_values, dtype=float)
    if np.any(y_values <= 0) or np.any(n_values <= 0):
        raise ValidationError("log-log fit needs strictly positive data")
    return fit_line(np.log(n_values), np.log(y_values), weights)


def lindeberg_sum(samples: np.ndarray, eps: float) -> float:
    """Normalized tail second moment E[Z^2; |Z| > eps * s_n] / s_n^2.

    Computed on the centered sample with s_n^2 the empirical variance;
    decreasing values along a size ladder support a CLT.
    """
    z = np.asarray(samples, dtype=float)
    z = z - z.mean()
    s2 = float(np.mean(z ** 2))
    if s2 == 0:
        return 0.0
    cut = eps * np.sqrt(s2)
    tail = z[np.abs(z) > cut]
    return float(np.sum(tail ** 2) / (len(z) * s2))


def normality_ks(samples: np.ndarray) -> float:
    """p-value of a composite Kolmogorov-Smirnov test of normality.

    Mean and variance are estimated from the data, so the Lilliefors
    correction is required; the plain KS table would be anti-conservative.
    """
    from statsmodels.stats.diagnostic import lilliefors
    _, pval = lilliefors(np.asarray(samples, dtype=float), dist="norm")
    return float(pval)


def fourth_moment_ratio(samples: np.ndarray) -> float:
    """E[(X - EX)^4] / (Var X)^2 (3 for a Gaussian)."""
    z = np.asarray(samples, dtype=float)
    z = z - z.mean()
    v = float(np.mean(z ** 2))
    return float(np.mean(z ** 4) / v ** 2)
