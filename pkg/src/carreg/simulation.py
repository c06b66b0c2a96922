"""Synthetic data, Monte Carlo coverage studies and the limiting-variance oracle."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .binning import default_m, default_min_bin_size
from .distortion import (
    DistortionSpec,
    affine_distortions,
    catalogue_distortion,
    distortion_from_dict,
    identity_distortions,
    paper_distortions,
)
from .errors import CarError, ConfigError, InvalidInput, MeanNearZero, SingularDesignLimit
from .estimator import Dataset, fit_car
from .inference import estimate_variances, two_sided_z
from .linalg import DEFAULT_DET_THRESHOLD

# Bins per sample size for the benchmark: n divided by the reported average
# number of points per bin (5, 16, 32).
BENCHMARK_M = {100: 20, 400: 25, 1600: 50}

# Coverage (percent) and mean interval length of 95% intervals, per n, for
# (gamma_0, gamma_1, gamma_2, gamma_3).
BENCHMARK_TABLE = {
    100: {"coverage": (90.7, 90.4, 91.7, 96.6), "length": (0.56, 0.32, 0.20, 0.73)},
    400: {"coverage": (93.4, 94.1, 93.4, 95.5), "length": (0.21, 0.11, 0.06, 0.30)},
    1600: {"coverage": (94.2, 95.2, 94.7, 95.0), "length": (0.10, 0.05, 0.03, 0.14)},
}

NORMALITY_LEVELS = (0.80, 0.90, 0.95, 0.99)


@dataclass(frozen=True)
class PredictorLaw:
    """``normal(mean, variance)`` or ``uniform(low, high)``."""

    kind: str
    a: float
    b: float

    @classmethod
    def normal(cls, mean: float, variance: float) -> "PredictorLaw":
        if not variance > 0:
            raise InvalidInput("predictor variance must be positive")
        return cls("normal", float(mean), float(variance))

    @classmethod
    def uniform(cls, low: float, high: float) -> "PredictorLaw":
        if not low < high:
            raise InvalidInput("uniform predictor law needs low < high")
        return cls("uniform", float(low), float(high))

    @property
    def mean(self) -> float:
        return self.a if self.kind == "normal" else 0.5 * (self.a + self.b)

    @property
    def variance(self) -> float:
        return self.b if self.kind == "normal" else (self.b - self.a) ** 2 / 12.0

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "normal":
            return rng.normal(self.a, np.sqrt(self.b), size)
        return rng.uniform(self.a, self.b, size)

    def to_dict(self) -> dict:
        if self.kind == "normal":
            return {"law": "normal", "mean": self.a, "variance": self.b}
        return {"law": "uniform", "low": self.a, "high": self.b}


@dataclass(frozen=True)
class GenerativeModel:
    gamma: np.ndarray
    predictor_laws: tuple[PredictorLaw, ...]
    noise_variance: float
    distortions: DistortionSpec
    name: str = "custom"

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float).ravel()
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "predictor_laws", tuple(self.predictor_laws))
        if self.noise_variance < 0:
            raise InvalidInput("noise variance must be non-negative")
        if len(g) != len(self.predictor_laws) + 1:
            raise InvalidInput("gamma needs one entry per predictor plus the intercept")
        if self.distortions.p != len(self.predictor_laws):
            raise InvalidInput("need one predictor distortion per predictor")

    @property
    def p(self) -> int:
        return len(self.predictor_laws)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "gamma": self.gamma.tolist(),
            "predictors": [law.to_dict() for law in self.predictor_laws],
            "noise_variance": self.noise_variance,
            "distortion": self.distortions.name,
            "u_law": self.distortions.u_law.describe(),
        }


def paper_model() -> GenerativeModel:
    """Four-coefficient benchmark ``Y = 4 - X1 + 0.3 X2 + 3 X3 + e``.

    The second parameter of each reference normal law is read as a standard
    deviation; the laws here are stated by variance.
    """
    return GenerativeModel(
        gamma=np.array([4.0, -1.0, 0.3, 3.0]),
        predictor_laws=(
            PredictorLaw.normal(1.5, 0.7**2),
            PredictorLaw.normal(1.0, 1.2**2),
            PredictorLaw.normal(0.5, 1.0**2),
        ),
        noise_variance=0.3**2,
        distortions=paper_distortions(),
        name="paper-5.2",
    )


def identity_model() -> GenerativeModel:
    """The benchmark regression without any distortion."""
    base = paper_model()
    return GenerativeModel(
        gamma=base.gamma,
        predictor_laws=base.predictor_laws,
        noise_variance=base.noise_variance,
        distortions=identity_distortions(base.p),
        name="identity",
    )


def model_from_dict(spec: dict) -> GenerativeModel:
    """Build a model from its JSON description.

    ``distortion`` is a catalogue name, ``{"affine": [slopes...], "u": [a, b]}``
    with the response slope first, or a polynomial description accepted by
    :func:`~carreg.distortion.distortion_from_dict`.
    """
    try:
        laws = []
        for d in spec["predictors"]:
            if d.get("law", "normal") == "normal":
                laws.append(PredictorLaw.normal(d["mean"], d["variance"]))
            elif d["law"] == "uniform":
                laws.append(PredictorLaw.uniform(d["low"], d["high"]))
            else:
                raise ConfigError(f"unsupported predictor law {d['law']!r}")
        dist = spec.get("distortion", "identity")
        if isinstance(dist, str):
            distortions = catalogue_distortion(dist, len(laws))
        elif "affine" in dist:
            a, b = dist.get("u", (2.0, 6.0))
            distortions = affine_distortions(dist["affine"], a, b)
        elif "psi" in dist:
            distortions = distortion_from_dict(dist)
        else:
            raise ConfigError(f"unsupported distortion description {dist!r}")
        return GenerativeModel(
            gamma=np.asarray(spec["gamma"], dtype=float),
            predictor_laws=tuple(laws),
            noise_variance=float(spec["noise_variance"]),
            distortions=distortions,
            name=spec.get("name", "custom"),
        )
    except (KeyError, TypeError, ValueError, InvalidInput) as exc:
        raise ConfigError(f"invalid model description: {exc}") from exc


def resolve_model(name_or_path: str) -> GenerativeModel:
    if name_or_path == "paper-5.2":
        return paper_model()
    if name_or_path == "identity":
        return identity_model()
    path = Path(name_or_path)
    if not path.is_file():
        raise ConfigError(f"unknown model {name_or_path!r} (not a catalogue name or file)")
    try:
        spec = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"model file is not valid JSON: {exc}") from exc
    return model_from_dict(spec)


@dataclass(frozen=True)
class Latent:
    x: np.ndarray
    y: np.ndarray
    e: np.ndarray


def replicate_rng(seed: int, k: int) -> np.random.Generator:
    """Independent stream for replicate ``k``; depends only on ``(seed, k)``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(k,)))


def generate(model: GenerativeModel, n: int, seed) -> tuple[Dataset, Latent]:
    """Draw ``n`` observations. ``seed`` is an int or a ``numpy`` Generator."""
    if n < model.p + 2:
        raise InvalidInput(f"n={n} < p+2={model.p + 2}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    u = model.distortions.u_law.draw(rng, n)
    x = np.column_stack([law.draw(rng, n) for law in model.predictor_laws])
    e = rng.normal(0.0, np.sqrt(model.noise_variance), n)
    y = model.gamma[0] + x @ model.gamma[1:] + e
    x_tilde = model.distortions.phi_values(u) * x
    y_tilde = model.distortions.psi_values(u) * y
    return Dataset(u=u, x_tilde=x_tilde, y_tilde=y_tilde), Latent(x=x, y=y, e=e)


@dataclass(frozen=True)
class ReplicateResults:
    """Per-replicate estimates; rows of failed replicates are NaN."""

    n: int
    m: int
    seed: int
    gamma_hat: np.ndarray
    sigma_sq: np.ndarray
    n_fitted: np.ndarray
    bins_used: np.ndarray
    failures: list[tuple[int, str]]

    @property
    def ok(self) -> np.ndarray:
        return np.isfinite(self.gamma_hat).all(axis=1)


def _one_replicate(model, n, m, min_bin_size, det_threshold, seed, k):
    data, _ = generate(model, n, replicate_rng(seed, k))
    try:
        fit = fit_car(data, m=m, min_bin_size=min_bin_size, det_threshold=det_threshold)
        var = estimate_variances(fit, data)
    except CarError as exc:
        return k, None, exc.code
    return k, (fit.gamma_hat, var.sigma_sq, fit.n_fitted, len(fit.bin_fits)), None


def run_replicates(
    model: GenerativeModel,
    n: int,
    replicates: int,
    m: int,
    seed: int,
    min_bin_size: int | None = None,
    det_threshold: float = DEFAULT_DET_THRESHOLD,
    workers: int = 1,
) -> ReplicateResults:
    if replicates < 1:
        raise InvalidInput("replicates must be at least 1")
    if min_bin_size is None:
        min_bin_size = default_min_bin_size(model.p)
    k1 = model.p + 1
    gam = np.full((replicates, k1), np.nan)
    sig = np.full((replicates, k1), np.nan)
    nfit = np.zeros(replicates, dtype=np.int64)
    used = np.zeros(replicates, dtype=np.int64)
    failures = []

    def task(k):
        return _one_replicate(model, n, m, min_bin_size, det_threshold, seed, k)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, range(replicates)))
    else:
        results = [task(k) for k in range(replicates)]
    # results are indexed by replicate, so aggregation order never depends on scheduling
    for k, payload, err in results:
        if payload is None:
            failures.append((k, err))
            continue
        gam[k], sig[k], nfit[k], used[k] = payload
    return ReplicateResults(n, m, seed, gam, sig, nfit, used, failures)


@dataclass(frozen=True)
class CoefficientSummary:
    coverage_fraction: float
    mean_ci_length: float
    mean_estimate: float
    sd_estimate: float


@dataclass(frozen=True)
class SimulationReport:
    n: int
    replicates: int
    m_used: int
    level: float
    seed: int
    failures: int
    coefficients: list[CoefficientSummary]
    model: dict = field(default_factory=dict)
    mean_points_per_bin: float = float("nan")
    notes: list[str] = field(default_factory=list)

    @property
    def successes(self) -> int:
        return self.replicates - self.failures

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "replicates": self.replicates,
            "successful_replicates": self.successes,
            "failures": self.failures,
            "m_used": self.m_used,
            "mean_points_per_bin": self.mean_points_per_bin,
            "level": self.level,
            "seed": self.seed,
            "model": self.model,
            "coefficients": [
                {
                    "index": r,
                    "coverage_fraction": c.coverage_fraction,
                    "mean_ci_length": c.mean_ci_length,
                    "mean_estimate": c.mean_estimate,
                    "sd_estimate": c.sd_estimate,
                }
                for r, c in enumerate(self.coefficients)
            ],
            "notes": self.notes,
        }


def summarize(
    results: ReplicateResults, gamma_true, level: float, model_info: dict | None = None
) -> SimulationReport:
    z = two_sided_z(level)
    ok = results.ok
    g = results.gamma_hat[ok]
    se = np.sqrt(np.maximum(results.sigma_sq[ok], 0.0) / results.n_fitted[ok][:, None])
    half = z * se
    covered = np.abs(g - np.asarray(gamma_true)[None, :]) <= half
    coefs = []
    for r in range(g.shape[1]):
        if g.shape[0] == 0:
            coefs.append(CoefficientSummary(float("nan"), float("nan"), float("nan"), float("nan")))
            continue
        coefs.append(
            CoefficientSummary(
                coverage_fraction=float(covered[:, r].mean()),
                mean_ci_length=float((2.0 * half[:, r]).mean()),
                mean_estimate=float(g[:, r].mean()),
                sd_estimate=float(g[:, r].std(ddof=1)) if g.shape[0] > 1 else 0.0,
            )
        )
    notes = []
    if results.n in BENCHMARK_M and results.m == BENCHMARK_M[results.n]:
        notes.append(
            f"m={results.m} inverted from the reported average points per bin for n={results.n}"
        )
    bins = results.bins_used[ok]
    return SimulationReport(
        n=results.n,
        replicates=len(results.gamma_hat),
        m_used=results.m,
        level=level,
        seed=results.seed,
        failures=len(results.failures),
        coefficients=coefs,
        model=model_info or {},
        mean_points_per_bin=float(results.n / bins.mean()) if bins.size else float("nan"),
        notes=notes,
    )


def run_monte_carlo(
    model: GenerativeModel,
    n: int,
    replicates: int,
    m: int,
    level: float = 0.95,
    seed: int = 0,
    workers: int = 1,
    min_bin_size: int | None = None,
    det_threshold: float = DEFAULT_DET_THRESHOLD,
) -> SimulationReport:
    """Coverage and mean length of the asymptotic intervals over replicates.

    Replicates that fail (for instance with no usable bins) are counted in
    ``failures`` and left out of the coverage numerator and denominator.
    """
    two_sided_z(level)
    results = run_replicates(
        model, n, replicates, m, seed, min_bin_size, det_threshold, workers
    )
    return summarize(results, model.gamma, level, model.describe())


@dataclass(frozen=True)
class TheoreticalVariance:
    sigma_sq_true: np.ndarray
    moment_estimates: dict


def theoretical_variance(
    model: GenerativeModel, oracle_samples: int = 1_000_000, seed: int = 0
) -> TheoreticalVariance:
    """Limiting variances of ``sqrt(n) * (gamma_hat - gamma)`` by Monte Carlo moments.

    Slopes follow the delta method applied to the joint limit of the
    weighted numerator and the predictor mean, with weights
    ``(1 / E X_r, -gamma_r / E X_r)``.
    """
    if oracle_samples < 100_000:
        raise InvalidInput("oracle_samples must be at least 1e5")
    rng = np.random.default_rng(seed)
    u = model.distortions.u_law.draw(rng, oracle_samples)
    x = np.column_stack([law.draw(rng, oracle_samples) for law in model.predictor_laws])
    psi = model.distortions.psi_values(u)
    phi = model.distortions.phi_values(u)
    sigma2 = model.noise_variance
    g = model.gamma
    p = model.p

    design = np.column_stack([np.ones(oracle_samples), x])
    big_x = design.T @ design / oracle_samples
    big_x = 0.5 * (big_x + big_x.T)
    det = float(np.linalg.det(big_x))
    if abs(det) <= 1e-10:
        raise SingularDesignLimit(f"limiting design matrix determinant {det:.3e}")
    big_x_inv = np.linalg.inv(big_x)

    ex = x.mean(axis=0)
    if np.any(np.abs(ex) <= 1e-10):
        raise MeanNearZero("a predictor has mean numerically zero")
    # U is independent of the predictors, so mixed moments factor into
    # U-moments times X-moments; this keeps the near-cancelling slope terms
    # consistent with each other.
    ex2 = (x * x).mean(axis=0)
    var_x = ex2 - ex**2
    e_psi2 = float((psi * psi).mean())
    var_psi = e_psi2 - float(psi.mean()) ** 2
    e_phi_psi = (phi * psi[:, None]).mean(axis=0)
    var_xt = (phi * phi).mean(axis=0) * ex2 - (phi.mean(axis=0) * ex) ** 2

    sig = np.empty(p + 1)
    sig[0] = g[0] ** 2 * var_psi + sigma2 * big_x_inv[0, 0] * e_psi2
    sigmas = []
    for r in range(1, p + 1):
        i = r - 1
        s11 = g[r] ** 2 * (ex[i] ** 2 * var_psi + var_x[i] * e_psi2) + (
            sigma2 * ex[i] ** 2 * e_psi2 * big_x_inv[r, r]
        )
        s12 = g[r] * (e_phi_psi[i] * ex2[i] - ex[i] ** 2)
        s22 = var_xt[i]
        a, b = 1.0 / ex[i], -g[r] / ex[i]
        sig[r] = a * a * s11 + 2 * a * b * s12 + b * b * s22
        sigmas.append(np.array([[s11, s12], [s12, s22]]))
    moments = {
        "E_X": ex,
        "E_X2": ex2,
        "var_X": var_x,
        "E_psi2": e_psi2,
        "var_psi": var_psi,
        "E_phi_psi": e_phi_psi,
        "var_X_tilde": var_xt,
        "design_limit": big_x,
        "design_limit_inverse": big_x_inv,
        "design_limit_det": det,
        "Sigma": sigmas,
    }
    return TheoreticalVariance(sigma_sq_true=sig, moment_estimates=moments)


@dataclass(frozen=True)
class NormalityReport:
    n: int
    replicates: int
    levels: tuple[float, ...]
    # coverage[r][i]: fraction of |standardized| <= z at levels[i]
    coverage: np.ndarray
    standardized: np.ndarray
    sigma_true: np.ndarray

    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.coverage - np.asarray(self.levels)[None, :])))


def standardized_errors(results: ReplicateResults, model: GenerativeModel, sigma_sq_true):
    ok = results.ok
    err = np.sqrt(results.n_fitted[ok])[:, None] * (results.gamma_hat[ok] - model.gamma)
    sd = np.sqrt(np.maximum(np.asarray(sigma_sq_true), 0.0))
    out = np.zeros_like(err)
    for r in range(err.shape[1]):
        if sd[r] > 1e-6:
            out[:, r] = err[:, r] / sd[r]
        else:
            # zero limiting variance: only exact recovery standardizes to 0
            out[:, r] = np.where(np.abs(err[:, r]) <= 1e-6, 0.0, np.copysign(np.inf, err[:, r]))
    return out


def normality_check(
    model: GenerativeModel,
    n: int,
    replicates: int,
    seed: int,
    m: int | None = None,
    oracle: TheoreticalVariance | None = None,
    levels=NORMALITY_LEVELS,
    workers: int = 1,
) -> NormalityReport:
    """Compare standardized estimates with the standard normal at several levels."""
    if replicates < 500:
        raise InvalidInput("normality check needs at least 500 replicates")
    if m is None:
        m = BENCHMARK_M.get(n, default_m(n))
    if oracle is None:
        oracle = theoretical_variance(model, seed=seed + 1)
    results = run_replicates(model, n, replicates, m, seed, workers=workers)
    z_std = standardized_errors(results, model, oracle.sigma_sq_true)
    cov = np.array(
        [[float(np.mean(np.abs(z_std[:, r]) <= two_sided_z(lv))) for lv in levels]
         for r in range(z_std.shape[1])]
    )
    return NormalityReport(
        n=n,
        replicates=replicates,
        levels=tuple(levels),
        coverage=cov,
        standardized=z_std,
        sigma_true=np.sqrt(np.maximum(oracle.sigma_sq_true, 0.0)),
    )
