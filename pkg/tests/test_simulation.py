from __future__ import annotations

import json

import numpy as np
import pytest

from carreg.distortion import identity_distortions
from carreg.errors import ConfigError, InvalidInput, SingularDesignLimit
from carreg.linalg import guarded_ols
from carreg.simulation import (
    BENCHMARK_M,
    NORMALITY_LEVELS,
    GenerativeModel,
    PredictorLaw,
    identity_model,
    model_from_dict,
    normality_check,
    resolve_model,
    run_monte_carlo,
    run_replicates,
    standardized_errors,
    summarize,
    theoretical_variance,
)
from carreg.simulation import generate
from oracles import paper_limit_variances


def _noiseless_identity(gamma=(4.0, -1.0, 0.3, 3.0)):
    base = identity_model()
    return GenerativeModel(
        gamma=np.asarray(gamma),
        predictor_laws=base.predictor_laws,
        noise_variance=0.0,
        distortions=identity_distortions(3),
        name="noiseless",
    )


def test_generate_noiseless_identity_is_exact():
    model = _noiseless_identity()
    data, latent = generate(model, 200, 1)
    np.testing.assert_array_equal(data.x_tilde, latent.x)
    ols = guarded_ols(data.design(), data.y_tilde).coefficients
    np.testing.assert_allclose(ols, model.gamma, atol=1e-9)


def test_generate_law_of_large_numbers(paper):
    data, latent = generate(paper, 100_000, 8)
    assert abs(latent.x[:, 0].mean() - 1.5) < 0.02
    assert abs(paper.distortions.psi_values(data.u).mean() - 1) < 0.005
    # the second parameter of each normal law is a standard deviation
    np.testing.assert_allclose(latent.x.std(axis=0), [0.7, 1.2, 1.0], rtol=0.02)
    assert abs(latent.e.std() - 0.3) < 0.005
    np.testing.assert_array_equal(data.y_tilde, paper.distortions.psi_values(data.u) * latent.y)


def test_distortion_perturbs_without_destroying(paper):
    data, latent = generate(paper, 5000, 2)
    c = np.corrcoef(data.x_tilde[:, 0], latent.x[:, 0])[0, 1]
    assert 0 < c < 1


def test_generate_is_deterministic_and_checks_n(paper):
    a, _ = generate(paper, 50, 4)
    b, _ = generate(paper, 50, 4)
    np.testing.assert_array_equal(a.y_tilde, b.y_tilde)
    with pytest.raises(InvalidInput):
        generate(paper, 4, 0)


def test_monte_carlo_is_deterministic_across_workers(paper):
    a = run_replicates(paper, 200, 40, 10, seed=5, workers=1)
    b = run_replicates(paper, 200, 40, 10, seed=5, workers=3)
    np.testing.assert_array_equal(a.gamma_hat, b.gamma_hat)
    np.testing.assert_array_equal(a.sigma_sq, b.sigma_sq)
    ra = run_monte_carlo(paper, 200, 40, 10, seed=5).to_dict()
    rb = run_monte_carlo(paper, 200, 40, 10, seed=5, workers=4).to_dict()
    assert ra == rb


def test_single_replicate_coverage_is_zero_or_one(paper):
    rep = run_monte_carlo(paper, 100, 1, 20, seed=3)
    assert rep.replicates == 1
    assert all(c.coverage_fraction in (0.0, 1.0) for c in rep.coefficients)


def test_vanishing_level_covers_nothing(paper):
    rep = run_monte_carlo(paper, 100, 50, 20, level=1e-9, seed=3)
    assert all(c.coverage_fraction == 0.0 for c in rep.coefficients)


def test_coverage_monotone_in_level(paper):
    res = run_replicates(paper, 400, 100, 25, seed=1)
    cov = np.array(
        [[c.coverage_fraction for c in summarize(res, paper.gamma, lv).coefficients]
         for lv in NORMALITY_LEVELS]
    )
    assert np.all((0 <= cov) & (cov <= 1))
    assert np.all(np.diff(cov, axis=0) >= 0)


def test_failures_are_counted(paper):
    rep = run_monte_carlo(paper, 100, 5, 20, seed=0, det_threshold=1e6)
    assert rep.failures == 5 and rep.successes == 0
    d = rep.to_dict()
    assert d["failures"] + d["successful_replicates"] == d["replicates"]


def test_report_contents(paper):
    rep = run_monte_carlo(paper, 100, 20, BENCHMARK_M[100], seed=0)
    d = rep.to_dict()
    assert d["m_used"] == 20 and d["seed"] == 0
    assert any("m=20" in note for note in d["notes"])
    assert d["model"]["name"] == "paper-5.2"
    # 100 / 20 = 5 before merging; merging can only raise the average
    assert 5 <= d["mean_points_per_bin"] <= 10
    assert all(c["mean_ci_length"] >= 0 for c in d["coefficients"])


def test_oracle_identity_reductions():
    model = identity_model()
    tv = theoretical_variance(model, 200_000, seed=1)
    inv = tv.moment_estimates["design_limit_inverse"]
    assert tv.moment_estimates["var_psi"] == 0.0
    assert tv.sigma_sq_true[0] == pytest.approx(model.noise_variance * inv[0, 0], rel=1e-12)
    # closed form of the first inverse entry for independent predictors
    means = [law.mean for law in model.predictor_laws]
    variances = [law.variance for law in model.predictor_laws]
    assert inv[0, 0] == pytest.approx(1 + sum(m * m / v for m, v in zip(means, variances)), rel=0.02)
    np.testing.assert_allclose(tv.moment_estimates["design_limit"], tv.moment_estimates["design_limit"].T)


def test_oracle_zero_gamma_kills_cross_terms():
    model = _noiseless_identity(gamma=(0.0, 0.0, 0.0, 0.0))
    model = GenerativeModel(model.gamma, model.predictor_laws, 0.09, model.distortions)
    tv = theoretical_variance(model, 100_000, seed=2)
    inv = tv.moment_estimates["design_limit_inverse"]
    assert tv.sigma_sq_true[0] == pytest.approx(0.09 * inv[0, 0], rel=1e-12)
    for sig in tv.moment_estimates["Sigma"]:
        assert sig[0, 1] == 0.0


def test_oracle_matches_quadrature(oracle):
    np.testing.assert_allclose(oracle.sigma_sq_true, paper_limit_variances(), rtol=0.02)


def test_oracle_errors():
    base = identity_model()
    flat = GenerativeModel(
        base.gamma,
        (PredictorLaw.normal(1.0, 1e-14), *base.predictor_laws[1:]),
        0.09,
        base.distortions,
    )
    with pytest.raises(SingularDesignLimit):
        theoretical_variance(flat, 100_000)
    with pytest.raises(InvalidInput):
        theoretical_variance(base, 99_999)


def test_normality_degenerate_model():
    rep = normality_check(_noiseless_identity(), 100, 500, seed=0)
    assert np.all(rep.standardized == 0.0)
    np.testing.assert_array_equal(rep.coverage, 1.0)


def test_normality_needs_500_replicates(paper):
    with pytest.raises(InvalidInput):
        normality_check(paper, 100, 499, seed=0)


def test_small_n_deviates_more_than_large_n(paper, oracle, replicates_1600):
    small = normality_check(paper, 100, 1000, seed=0, oracle=oracle)
    z = standardized_errors(replicates_1600, paper, oracle.sigma_sq_true)
    large = max(
        abs(np.mean(np.abs(z[:, r]) <= q) - lv)
        for r in range(4)
        for lv, q in zip(NORMALITY_LEVELS, (1.2816, 1.6449, 1.9600, 2.5758))
    )
    assert small.max_deviation() > large


def test_models_from_files(tmp_path):
    spec = {
        "gamma": [1.0, 2.0],
        "predictors": [{"law": "uniform", "low": 1.0, "high": 3.0}],
        "noise_variance": 0.25,
        "distortion": {"affine": [0.1, -0.1], "u": [0, 2]},
    }
    path = tmp_path / "m.json"
    path.write_text(json.dumps(spec))
    model = resolve_model(str(path))
    assert model.p == 1 and model.predictor_laws[0].mean == 2.0
    assert resolve_model("identity").distortions.name == "identity"
    with pytest.raises(ConfigError):
        model_from_dict({"gamma": [1.0], "predictors": [], "noise_variance": -1})
    with pytest.raises(ConfigError):
        resolve_model(str(tmp_path / "missing.json"))
