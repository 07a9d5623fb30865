"""Saturated-model fitting, contrast inference, and report output."""

import json
import math

import numpy as np
import pytest

import factive as fv
from conftest import make_dataset, make_design, make_rich_model


def _manual_dataset(treatment, outcomes, covariates=None):
    """Two-cell eligible Part A dataset with hand-picked outcomes."""
    t = np.asarray(treatment, dtype=np.int8)
    n = len(t)
    x = (np.empty((n, 0)) if covariates is None
         else np.asarray(covariates, dtype=float))
    return fv.TrialDataset(
        ids=np.arange(1, n + 1),
        eligible=np.ones(n, dtype=np.int8),
        in_part_a=np.ones(n, dtype=bool),
        conditions=np.ones(n, dtype=np.int8),
        treatment=t,
        covariates=x,
        outcome=np.asarray(outcomes, dtype=float),
        ice=np.zeros(n, dtype=bool),
    )


def _lstsq_oracle(data, adjust, variance):
    """Reference fit: one dense regression on [cell indicators | covariates]."""
    bundle = fv.build_design_matrix(data, adjust)
    z = bundle.full_matrix()
    y = bundle.response
    n, p = z.shape
    beta, *_ = np.linalg.lstsq(z, y, rcond=None)
    resid = y - z @ beta
    df = n - p
    s2 = float(resid @ resid) / df
    ztz_inv = np.linalg.inv(z.T @ z)
    if variance == "pooled":
        cov = s2 * ztz_inv
    else:
        meat = z.T @ (z * (resid ** 2)[:, None])
        cov = (n / df) * ztz_inv @ meat @ ztz_inv
    return beta, cov, s2, df


# ---------------------------------------------------------------------------
# design matrix extraction


def test_indicators_are_one_hot(rich_dataset):
    bundle = fv.build_design_matrix(rich_dataset)
    ind = bundle.indicators()
    assert ind.shape == (len(rich_dataset), 8)
    assert np.array_equal(ind.sum(axis=1), np.ones(len(rich_dataset)))
    assert np.array_equal(np.argmax(ind, axis=1), rich_dataset.cell_index())


def test_full_matrix_drops_empty_cells():
    data = make_dataset(seed=9, n_broader=0, p_part_a=1.0)
    bundle = fv.build_design_matrix(data)
    assert bundle.full_matrix().shape == (len(data), 2)


def test_missing_outcomes_rejected():
    cohort = fv.randomize_cohort(make_design(seed=1))
    with pytest.raises(fv.DataError, match="no outcomes"):
        fv.build_design_matrix(cohort)


def test_nan_outcome_names_the_patient(rich_dataset):
    y = rich_dataset.outcome.copy()
    y[3] = np.nan
    broken = rich_dataset.with_outcomes(rich_dataset.covariates, y,
                                        rich_dataset.ice)
    with pytest.raises(fv.DataError,
                       match=f"patient {int(broken.ids[3])}.*missing"):
        fv.build_design_matrix(broken)


# ---------------------------------------------------------------------------
# fitting


def test_constant_outcome_recovers_the_constant():
    cohort = fv.randomize_cohort(make_design(seed=2))
    data = cohort.with_outcomes(cohort.covariates,
                                np.full(len(cohort), 7.0),
                                np.zeros(len(cohort), dtype=bool))
    fit = fv.fit_saturated(data)
    assert np.allclose(fit.cell_means, 7.0)
    assert fit.residual_variance == pytest.approx(0.0, abs=1e-24)


def test_unadjusted_fit_matches_group_means(rich_dataset):
    fit = fv.fit_saturated(rich_dataset)
    idx = rich_dataset.cell_index()
    for cell in range(8):
        rows = idx == cell
        if rows.any():
            assert fit.cell_means[cell] == pytest.approx(
                rich_dataset.outcome[rows].mean(), rel=1e-12)
    assert fit.n == len(rich_dataset)
    assert fit.df == fit.n - 8


@pytest.mark.parametrize("variance", ["pooled", "robust"])
@pytest.mark.parametrize("seed,k", [(5, 0), (6, 1), (7, 3)])
def test_partitioned_fit_matches_dense_regression(variance, seed, k):
    model = make_rich_model(
        covariate_slopes=np.linspace(0.5, -0.5, k) if k else np.zeros(0),
        covariate_means={"eligible": np.full(k, 0.5),
                         "broader": np.full(k, -0.5)})
    data = make_dataset(seed=seed, model=model)
    fit = fv.fit_saturated(data, adjust_covariates=bool(k), variance=variance)
    beta, cov, s2, df = _lstsq_oracle(data, bool(k), variance)

    nonempty = np.flatnonzero(fit.cell_counts)
    m = len(nonempty)
    assert fit.df == df
    assert fit.residual_variance == pytest.approx(s2, rel=1e-10)
    assert np.allclose(fit.cell_means[nonempty], beta[:m], rtol=1e-9,
                       atol=1e-12)
    assert np.allclose(fit.vcov[np.ix_(nonempty, nonempty)], cov[:m, :m],
                       rtol=1e-8, atol=1e-12)
    if k:
        assert np.allclose(fit.gamma, beta[m:], rtol=1e-9, atol=1e-12)
        assert np.allclose(fit.gamma_cov, cov[m:, m:], rtol=1e-8, atol=1e-12)


def test_robust_cell_variance_closed_form():
    data = make_dataset(seed=11)
    fit = fv.fit_saturated(data, variance="robust")
    idx = data.cell_index()
    scale = fit.n / fit.df
    for cell in range(8):
        rows = idx == cell
        n_c = rows.sum()
        resid = data.outcome[rows] - fit.cell_means[cell]
        expected = scale * float(resid @ resid) / n_c ** 2
        assert fit.vcov[cell, cell] == pytest.approx(expected, rel=1e-12)
    off_diag = fit.vcov[~np.eye(8, dtype=bool)]
    assert np.allclose(off_diag, 0.0, atol=1e-18)


def test_collinear_covariate_is_named():
    cohort = fv.randomize_cohort(make_design(seed=3))
    x = cohort.treatment.astype(float)[:, None]
    data = cohort.with_outcomes(x, np.arange(len(cohort), dtype=float),
                                np.zeros(len(cohort), dtype=bool))
    with pytest.raises(fv.EstimationError, match=r"x1.*collinear"):
        fv.fit_saturated(data, adjust_covariates=True)


def test_duplicated_covariate_is_collinear():
    model = make_rich_model(covariate_slopes=[1.0])
    data = make_dataset(seed=4, model=model)
    doubled = np.column_stack([data.covariates, 2.0 * data.covariates[:, 0]])
    data = data.with_outcomes(doubled, data.outcome, data.ice)
    with pytest.raises(fv.EstimationError, match="collinear"):
        fv.fit_saturated(data, adjust_covariates=True)


def test_empty_dataset_has_nothing_to_fit():
    data = fv.randomize_cohort(make_design(n_eligible=0, n_broader=0))
    data = data.with_outcomes(data.covariates, np.zeros(0), np.zeros(0, bool))
    with pytest.raises(fv.DataError, match="no observations"):
        fv.fit_saturated(data)


def test_unknown_variance_kind_rejected(rich_dataset):
    with pytest.raises(fv.ConfigurationError, match="variance"):
        fv.fit_saturated(rich_dataset, variance="hc3")


# ---------------------------------------------------------------------------
# contrast inference


def test_null_outcome_gives_zero_estimate_and_degenerate_interval():
    cohort = fv.randomize_cohort(make_design(seed=12))
    data = cohort.with_outcomes(cohort.covariates,
                                np.full(len(cohort), 7.0),
                                np.zeros(len(cohort), dtype=bool))
    row = fv.estimate_trial(data)["theta1"]
    assert row.estimate == 0.0
    assert row.se == 0.0
    assert (row.ci_low, row.ci_high) == (0.0, 0.0)
    assert row.p_value == 1.0
    assert row.statistic == 0.0


def test_zero_se_with_signal_is_infinitely_significant():
    data = _manual_dataset([1, 1, 0, 0], [3.0, 3.0, 1.0, 1.0])
    row = fv.estimate_trial(data)["theta1"]
    assert row.estimate == pytest.approx(2.0)
    assert row.se == 0.0
    assert row.p_value == 0.0
    assert math.isinf(row.statistic) and row.statistic > 0


def test_zero_df_yields_point_estimates_only():
    data = _manual_dataset([1, 0], [1.0, 3.0])
    report = fv.estimate_trial(data)
    row = report["theta1"]
    assert row.estimate == pytest.approx(-2.0)
    assert row.se is None and row.ci_low is None and row.p_value is None
    assert report.df == 0


def test_plain_rct_data_estimates_theta1_only():
    design = fv.ablate_to_plain_rct(make_design(seed=8))
    data = fv.generate_outcomes(fv.randomize_cohort(design),
                                make_rich_model())
    report = fv.estimate_trial(data)
    assert report["theta1"].inestimable_reason is None
    assert report["theta1"].estimate is not None
    for name in fv.ESTIMANDS:
        if name == "theta1":
            continue
        row = report[name]
        assert row.estimate is None
        assert "requires empty cell" in row.inestimable_reason
    # the reason names cells that are actually empty
    reason = report["theta7"].inestimable_reason
    assert "broader_rct_treated" in reason and "broader_rct_control" in reason


def test_estimates_agree_with_direct_cell_mean_contrasts(rich_dataset):
    report = fv.estimate_trial(rich_dataset)
    fit = fv.fit_saturated(rich_dataset)
    mu = fit.cell_means
    t1 = mu[fv.cell_index(1, 1, 1)] - mu[fv.cell_index(1, 1, 0)]
    t7 = mu[fv.cell_index(0, 1, 1)] - mu[fv.cell_index(0, 1, 0)]
    assert report["theta1"].estimate == pytest.approx(t1, rel=1e-12)
    assert report["theta1_tilde"].estimate == pytest.approx(
        0.5 * t1 + 0.5 * t7, rel=1e-12)


def test_confidence_interval_and_p_value_are_consistent(rich_dataset):
    report = fv.estimate_trial(rich_dataset)
    for row in report.estimates:
        if row.se in (None, 0.0):
            continue
        excludes_zero = row.ci_low > 0.0 or row.ci_high < 0.0
        assert (row.p_value < report.alpha) == excludes_zero, row.estimand


def test_estimator_identities_hold_on_data(rich_dataset):
    for weights in (fv.WeightScheme.equal(), fv.WeightScheme.explicit(0.3, 0.7),
                    fv.WeightScheme.sample_size()):
        report = fv.estimate_trial(rich_dataset,
                                   fv.AnalysisConfig(weights=weights))
        est = {r.estimand: r.estimate for r in report.estimates}
        pairs = report.resolved_weights
        w1, w2 = pairs["theta1_tilde"]
        assert est["theta1_tilde"] == pytest.approx(
            w1 * est["theta1"] + w2 * est["theta7"], rel=1e-12)
        w1, w2 = pairs["theta2"]
        assert est["theta2"] == pytest.approx(
            w1 * est["theta5"] + w2 * est["theta6"], rel=1e-12)
        if weights.shared_pair:
            assert est["theta3"] == pytest.approx(
                est["theta1_tilde"] - est["theta8"], rel=1e-12)


def test_location_shift_moves_nothing_but_means(rich_dataset):
    shifted = rich_dataset.with_outcomes(rich_dataset.covariates,
                                         rich_dataset.outcome + 100.0,
                                         rich_dataset.ice)
    base = fv.estimate_trial(rich_dataset)
    moved = fv.estimate_trial(shifted)
    for name in fv.ESTIMANDS:
        assert moved[name].estimate == pytest.approx(base[name].estimate,
                                                     abs=1e-9)
        assert moved[name].se == pytest.approx(base[name].se, abs=1e-9)


def test_adjustment_shrinks_model_se_with_a_prognostic_covariate():
    model = make_rich_model(covariate_slopes=[3.0], noise_sd=0.5)
    data = make_dataset(seed=14, model=model)
    plain = fv.estimate_trial(data)["theta1"]
    adjusted = fv.estimate_trial(
        data, fv.AnalysisConfig(adjust_covariates=True))["theta1"]
    assert adjusted.se < plain.se


def test_adjustment_shrinks_monte_carlo_spread():
    model = make_rich_model(covariate_slopes=[3.0], noise_sd=0.5)
    plain, adjusted = [], []
    for seed in range(120):
        data = make_dataset(seed=seed, n_eligible=90, n_broader=60,
                            model=model)
        plain.append(fv.estimate_trial(data)["theta1"].estimate)
        adjusted.append(fv.estimate_trial(
            data, fv.AnalysisConfig(adjust_covariates=True))["theta1"].estimate)
    assert np.std(adjusted) < np.std(plain)


# ---------------------------------------------------------------------------
# analysis configuration


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2])
def test_alpha_bounds(alpha):
    with pytest.raises(fv.ConfigurationError, match="alpha"):
        fv.AnalysisConfig(alpha=alpha)


def test_composite_is_not_an_analysis_strategy():
    with pytest.raises(fv.ConfigurationError,
                       match="data-generating model"):
        fv.AnalysisConfig(ice_strategy="composite")


def test_unknown_variance_in_config():
    with pytest.raises(fv.ConfigurationError, match="variance"):
        fv.AnalysisConfig(variance="jackknife")


# ---------------------------------------------------------------------------
# report output


def test_report_rows_carry_exactly_the_interchange_keys(rich_dataset):
    report = fv.estimate_trial(rich_dataset)
    expected = {"estimand", "estimate", "se", "ci_low", "ci_high",
                "p_value", "df", "inestimable_reason"}
    for row in report.estimates:
        assert set(row.as_row()) == expected
    payload = json.loads(report.to_json())
    assert [r["estimand"] for r in payload["estimates"]] == list(fv.ESTIMANDS)
    for r in payload["estimates"]:
        assert set(r) == expected
    assert payload["fit"]["n"] == len(rich_dataset)
    assert set(payload["fit"]["cell_counts"]) == set(fv.CELL_LABELS)


def test_report_csv_round_trips_floats(rich_dataset):
    report = fv.estimate_trial(rich_dataset)
    lines = report.to_csv().strip().split("\n")
    assert lines[0] == ("estimand,estimate,se,ci_low,ci_high,"
                        "p_value,df,inestimable_reason")
    assert len(lines) == 1 + len(fv.ESTIMANDS)
    first = lines[1].split(",")
    assert first[0] == "theta1"
    assert float(first[1]) == report["theta1"].estimate


def test_report_text_includes_cells_and_weights(rich_dataset):
    text = fv.estimate_trial(rich_dataset).to_text()
    assert "cell counts" in text
    assert "weights: equal" in text
    for label in fv.CELL_LABELS:
        assert label in text


def test_resolved_weights_cover_the_weighted_estimands(rich_dataset):
    report = fv.estimate_trial(rich_dataset)
    assert set(report.resolved_weights) == set(fv.WEIGHTED_ESTIMANDS)
    assert all(pair == (0.5, 0.5)
               for pair in report.resolved_weights.values())


def test_estimate_from_csv_reproduces_in_memory_report(rich_dataset, tmp_path):
    path = tmp_path / "trial.csv"
    fv.write_dataset_csv(rich_dataset, path)
    from_file = fv.estimate_from_csv(path)
    in_memory = fv.estimate_trial(rich_dataset)
    assert from_file.to_json() == in_memory.to_json()


def test_estimate_from_csv_with_header_only_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text(",".join(fv.dataset_header(0)) + "\n")
    with pytest.raises(fv.DataError, match="no observations"):
        fv.estimate_from_csv(path)
