"""Binned covariate-adjusted regression estimator.

The observed response and predictors follow a varying-coefficient model in
the confounder ``u``. Fitting ordinary least squares inside each bin gives
raw coefficient estimates; their bin-count weighted averages recover the
coefficients of the undistorted regression.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .binning import BinPartition, bin_data, default_m, default_min_bin_size
from .errors import (
    IndexOutOfRange,
    InsufficientData,
    InvalidInput,
    MeanNearZero,
    NoUsableBins,
    SingularBin,
)
from .linalg import DEFAULT_DET_THRESHOLD, guarded_ols

MEAN_FLOOR = 1e-10


@dataclass(frozen=True)
class Dataset:
    """Observed data: confounder ``u``, distorted predictors and response."""

    u: np.ndarray
    x_tilde: np.ndarray
    y_tilde: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).ravel()
        x = np.asarray(self.x_tilde, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(self.y_tilde, dtype=float).ravel()
        if x.ndim != 2 or not (len(u) == len(y) == x.shape[0]):
            raise InvalidInput(
                f"inconsistent lengths: u={len(u)}, x={x.shape}, y={len(y)}"
            )
        if x.shape[1] < 1:
            raise InvalidInput("need at least one predictor")
        if not (np.isfinite(u).all() and np.isfinite(x).all() and np.isfinite(y).all()):
            raise InvalidInput("data contain non-finite values")
        if len(u) < x.shape[1] + 1:
            raise InsufficientData(f"n={len(u)} < p+1={x.shape[1] + 1}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "x_tilde", x)
        object.__setattr__(self, "y_tilde", y)

    @property
    def n(self) -> int:
        return len(self.u)

    @property
    def p(self) -> int:
        return self.x_tilde.shape[1]

    def design(self, rows=slice(None)) -> np.ndarray:
        x = self.x_tilde[rows]
        return np.column_stack([np.ones(len(x)), x])


@dataclass(frozen=True)
class BinFit:
    bin_index: int
    count: int
    beta: np.ndarray
    x_bar_bin: np.ndarray
    inverse_gram: np.ndarray
    sum_x_sq_bin: np.ndarray
    rss: float
    midpoint: float
    gram_determinant: float


@dataclass(frozen=True)
class CarFit:
    gamma_hat: np.ndarray
    x_bar_global: np.ndarray
    bin_fits: list[BinFit]
    partition: BinPartition
    n: int
    skipped_bins: list[tuple[int, str]] = field(default_factory=list)
    x_var_global: np.ndarray | None = None
    det_threshold: float = DEFAULT_DET_THRESHOLD

    @property
    def p(self) -> int:
        return len(self.gamma_hat) - 1

    @property
    def n_fitted(self) -> int:
        return sum(b.count for b in self.bin_fits)

    @property
    def weights(self) -> np.ndarray:
        counts = np.array([b.count for b in self.bin_fits], dtype=float)
        return counts / counts.sum()


class RawCoefficient(NamedTuple):
    midpoint: float
    count: int
    beta: float


def _bin_order(partition: BinPartition):
    order = np.argsort(partition.assignments, kind="stable")
    bounds = np.concatenate([[0], np.cumsum(partition.counts)])
    return order, bounds


def fit_bins(
    data: Dataset,
    partition: BinPartition,
    det_threshold: float = DEFAULT_DET_THRESHOLD,
) -> tuple[list[BinFit], list[tuple[int, str]]]:
    """Regress ``y_tilde`` on ``[1, x_tilde]`` separately inside every bin.

    Returns the fitted bins ordered by bin index together with the bins that
    were skipped and why (too few points, or failing the determinant guard).
    """
    if len(partition.assignments) != data.n:
        raise InvalidInput("partition was not built over this dataset")
    order, bounds = _bin_order(partition)
    mids = partition.midpoints
    fits: list[BinFit] = []
    skipped: list[tuple[int, str]] = []
    for j in range(partition.number_of_bins):
        rows = order[bounds[j]:bounds[j + 1]]
        if len(rows) < data.p + 1:
            skipped.append((j, InsufficientData.code))
            continue
        x = data.x_tilde[rows]
        try:
            ols = guarded_ols(data.design(rows), data.y_tilde[rows], det_threshold)
        except SingularBin:
            skipped.append((j, SingularBin.code))
            continue
        fits.append(
            BinFit(
                bin_index=j,
                count=len(rows),
                beta=ols.coefficients,
                x_bar_bin=x.mean(axis=0),
                inverse_gram=ols.inverse_gram,
                sum_x_sq_bin=(x * x).sum(axis=0),
                rss=ols.residual_sum_squares,
                midpoint=float(mids[j]),
                gram_determinant=ols.gram_determinant,
            )
        )
    if not fits:
        raise NoUsableBins(f"none of {partition.number_of_bins} bins could be fitted")
    return fits, skipped


def estimate_gamma(
    bin_fits: list[BinFit],
    data: Dataset,
    partition: BinPartition | None = None,
    skipped_bins: list[tuple[int, str]] | None = None,
    det_threshold: float = DEFAULT_DET_THRESHOLD,
) -> CarFit:
    """Combine per-bin coefficients into the adjusted estimates.

    The intercept is the count-weighted mean of the bin intercepts. Slope
    ``r`` is the count-weighted mean of ``beta_r * mean(x_r in bin)``
    divided by the global mean of ``x_r``. Weights renormalize over the
    fitted bins; the global means use all ``n`` observations.
    """
    if not bin_fits:
        raise NoUsableBins("no fitted bins to combine")
    x_bar = data.x_tilde.mean(axis=0)
    small = np.flatnonzero(np.abs(x_bar) < MEAN_FLOOR)
    if small.size:
        raise MeanNearZero(
            f"mean of predictor(s) {[int(r) + 1 for r in small]} is numerically zero"
        )
    w = np.array([b.count for b in bin_fits], dtype=float)
    w /= w.sum()
    betas = np.array([b.beta for b in bin_fits])
    xbars = np.array([b.x_bar_bin for b in bin_fits])
    gamma = np.empty(data.p + 1)
    gamma[0] = w @ betas[:, 0]
    gamma[1:] = (w @ (betas[:, 1:] * xbars)) / x_bar
    if not np.all(np.isfinite(gamma)):
        raise NoUsableBins("combined estimate is not finite")
    return CarFit(
        gamma_hat=gamma,
        x_bar_global=x_bar,
        bin_fits=list(bin_fits),
        partition=partition,
        n=data.n,
        skipped_bins=list(skipped_bins or []),
        x_var_global=data.x_tilde.var(axis=0, ddof=1) if data.n > 1 else np.zeros(data.p),
        det_threshold=det_threshold,
    )


def fit_car(
    data: Dataset,
    m: int | None = None,
    min_bin_size: int | None = None,
    det_threshold: float = DEFAULT_DET_THRESHOLD,
) -> CarFit:
    """Bin, merge, fit and combine in one call."""
    if m is None:
        m = default_m(data.n)
    if min_bin_size is None:
        min_bin_size = default_min_bin_size(data.p)
    partition = bin_data(data.u, m, min_bin_size)
    fits, skipped = fit_bins(data, partition, det_threshold)
    return estimate_gamma(fits, data, partition, skipped, det_threshold)


def export_raw_coefficients(fit: CarFit, r: int) -> list[RawCoefficient]:
    """Per-bin raw estimates of coefficient ``r`` against bin midpoints."""
    if not 0 <= r <= fit.p:
        raise IndexOutOfRange(f"coefficient index {r} outside 0..{fit.p}")
    rows = [RawCoefficient(b.midpoint, b.count, float(b.beta[r])) for b in fit.bin_fits]
    return sorted(rows, key=lambda row: row.midpoint)
