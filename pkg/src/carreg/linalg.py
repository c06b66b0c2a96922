"""Dense linear algebra for the small per-bin regressions.

Designs are ``(rows, p + 1)`` arrays with the intercept column first. The
systems solved here are tiny (p is at most a handful), so everything is
unblocked and dense.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InsufficientData, InvalidInput, SingularBin

DEFAULT_DET_THRESHOLD = 1e-8


@dataclass(frozen=True)
class OlsResult:
    """Least squares fit of one design.

    ``inverse_gram`` is the inverse of the normalized Gram matrix
    ``X'X / rows`` and ``gram_determinant`` its determinant.
    """

    coefficients: np.ndarray
    inverse_gram: np.ndarray
    gram_determinant: float
    residual_sum_squares: float


def _as_design(design) -> np.ndarray:
    X = np.asarray(design, dtype=float)
    if X.ndim != 2:
        raise InvalidInput(f"design must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInput("design contains non-finite entries")
    return X


def gram(design) -> np.ndarray:
    """Return the normalized Gram matrix ``X'X / rows``."""
    X = _as_design(design)
    if X.shape[0] < 1:
        raise InvalidInput("design has no rows")
    G = X.T @ X / X.shape[0]
    return 0.5 * (G + G.T)


def guarded_ols(design, response, det_threshold: float = DEFAULT_DET_THRESHOLD) -> OlsResult:
    """Ordinary least squares with a determinant guard.

    The fit goes through a QR decomposition of the design; the normal
    equations are never formed explicitly. The guard compares
    ``|det(X'X / rows)|`` with ``det_threshold`` so that bins of different
    sizes are judged on the same scale.

    Raises
    ------
    InsufficientData
        Fewer rows than columns.
    SingularBin
        The normalized Gram determinant is at or below ``det_threshold``.
    """
    X = _as_design(design)
    y = np.asarray(response, dtype=float).ravel()
    rows, cols = X.shape
    if y.shape[0] != rows:
        raise InvalidInput(f"response length {y.shape[0]} != design rows {rows}")
    if not np.all(np.isfinite(y)):
        raise InvalidInput("response contains non-finite entries")
    if det_threshold <= 0:
        raise InvalidInput("det_threshold must be positive")
    if rows < cols:
        raise InsufficientData(f"{rows} rows cannot identify {cols} coefficients")

    q, r = np.linalg.qr(X, mode="reduced")
    diag = np.diag(r)
    # det(R'R / rows) computed in log space to avoid under/overflow
    with np.errstate(divide="ignore"):
        log_det = 2.0 * np.sum(np.log(np.abs(diag))) - cols * np.log(rows)
    det = float(np.exp(log_det))
    if not det > det_threshold:
        raise SingularBin(
            f"normalized Gram determinant {det:.3e} <= {det_threshold:.1e}",
            determinant=det,
        )

    beta = solve_triangular(r, q.T @ y)
    r_inv = solve_triangular(r, np.eye(cols))
    inv_gram = rows * (r_inv @ r_inv.T)
    inv_gram = 0.5 * (inv_gram + inv_gram.T)
    resid = y - X @ beta
    return OlsResult(
        coefficients=beta,
        inverse_gram=inv_gram,
        gram_determinant=det,
        residual_sum_squares=float(resid @ resid),
    )
