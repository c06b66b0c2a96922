"""Plug-in asymptotic variances and Wald-type confidence intervals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .errors import InsufficientData, InvalidLevel, MeanNearZero
from .estimator import MEAN_FLOOR, CarFit, Dataset
from .linalg import guarded_ols


@dataclass(frozen=True)
class VarianceEstimates:
    """Asymptotic variance estimates for ``sqrt(n) * (gamma_hat - gamma)``.

    ``sigma_sq`` holds the raw values, which can be negative in small
    samples; intervals clamp them at zero. ``per_coef_terms[r]`` maps term
    names to the additive pieces that make up ``sigma_sq[r]``.
    """

    sigma_sq: np.ndarray
    pooled_rss_over_n: float
    per_coef_terms: list[dict[str, float]]


@dataclass(frozen=True)
class ConfidenceInterval:
    estimate: float
    lower: float
    upper: float
    level: float
    std_error: float

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    @property
    def length(self) -> float:
        return self.upper - self.lower


def normal_quantile(prob: float) -> float:
    """Standard normal quantile via the inverse error function."""
    return float(np.sqrt(2.0) * special.erfinv(2.0 * prob - 1.0))


def two_sided_z(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise InvalidLevel(f"level must lie in (0, 1), got {level}")
    return normal_quantile(0.5 + 0.5 * level)


def estimate_variances(fit: CarFit, data: Dataset | None = None) -> VarianceEstimates:
    """Consistent plug-in estimates of the limiting variances.

    Sums run over fitted bins and ``n`` is the fitted total, in line with
    the estimator's weights. The sample variance of each observed predictor
    uses all observations (taken from ``data`` when given, else from the
    value cached on the fit).
    """
    bins = fit.bin_fits
    n = float(fit.n_fitted)
    p = fit.p
    L = np.array([b.count for b in bins], dtype=float)
    w = L / n
    betas = np.array([b.beta for b in bins])
    xbars = np.array([b.x_bar_bin for b in bins])
    sumsq = np.array([b.sum_x_sq_bin for b in bins])
    inv_diag = np.array([np.diag(b.inverse_gram) for b in bins])
    pooled = float(sum(b.rss for b in bins) / n)

    x_bar = fit.x_bar_global
    if np.any(np.abs(x_bar) < MEAN_FLOOR):
        raise MeanNearZero("a global predictor mean is numerically zero")
    if data is not None:
        s2 = data.x_tilde.var(axis=0, ddof=1)
    else:
        s2 = fit.x_var_global
    g = fit.gamma_hat

    sigma_sq = np.empty(p + 1)
    terms: list[dict[str, float]] = []

    spread = float(w @ betas[:, 0] ** 2 - g[0] ** 2)
    noise = pooled * float(w @ inv_diag[:, 0])
    sigma_sq[0] = spread + noise
    terms.append({"beta_spread": spread, "noise": noise})

    for r in range(1, p + 1):
        b, ss = betas[:, r], sumsq[:, r - 1]
        t_sq = float(b**2 @ ss) / n
        t_mean = g[r] ** 2 * x_bar[r - 1] ** 2
        t_cross = -2.0 * g[r] / n * float(b @ ss)
        t_var = g[r] ** 2 * s2[r - 1]
        # slope r sits at position r of the intercept-first inverse Gram
        t_noise = pooled * float(w @ (xbars[:, r - 1] ** 2 * inv_diag[:, r]))
        denom = x_bar[r - 1] ** 2
        sigma_sq[r] = (t_sq + t_mean + t_cross + t_var + t_noise) / denom
        terms.append(
            {
                "beta_sq_x_sq": t_sq,
                "gamma_sq_mean_sq": t_mean,
                "cross": t_cross,
                "gamma_sq_var": t_var,
                "noise": t_noise,
                "mean_sq": denom,
            }
        )
    return VarianceEstimates(sigma_sq=sigma_sq, pooled_rss_over_n=pooled, per_coef_terms=terms)


def confidence_interval(
    estimate: float, sigma_hat_sq: float, n: int, level: float = 0.95
) -> ConfidenceInterval:
    """``estimate +/- z * sqrt(max(sigma_hat_sq, 0) / n)``."""
    z = two_sided_z(level)
    if n < 1:
        raise InsufficientData("n must be at least 1")
    se = float(np.sqrt(max(sigma_hat_sq, 0.0)) / np.sqrt(n))
    half = z * se
    return ConfidenceInterval(
        estimate=float(estimate),
        lower=float(estimate - half),
        upper=float(estimate + half),
        level=level,
        std_error=se,
    )


def car_intervals(fit: CarFit, variances: VarianceEstimates, level: float = 0.95):
    n = fit.n_fitted
    return [
        confidence_interval(g, s, n, level)
        for g, s in zip(fit.gamma_hat, variances.sigma_sq)
    ]


def naive_ols(data: Dataset, level: float = 0.95) -> list[ConfidenceInterval]:
    """Global least squares of observed response on observed predictors.

    Intervals use the t distribution with ``n - p - 1`` degrees of freedom.
    """
    if not 0.0 < level < 1.0:
        raise InvalidLevel(f"level must lie in (0, 1), got {level}")
    dof = data.n - data.p - 1
    if dof < 1:
        raise InsufficientData(f"need n > p + 1 for t intervals, got n={data.n}")
    ols = guarded_ols(data.design(), data.y_tilde)
    s2 = ols.residual_sum_squares / dof
    # inverse_gram is (X'X / n)^-1
    se = np.sqrt(s2 * np.diag(ols.inverse_gram) / data.n)
    t = float(stats.t.ppf(0.5 + 0.5 * level, dof))
    return [
        ConfidenceInterval(float(b), float(b - t * s), float(b + t * s), level, float(s))
        for b, s in zip(ols.coefficients, se)
    ]
