"""Estimation: saturated cell-means regression and estimand contrasts.

The analysis model regresses the outcome on indicators for the eight
design cells (only nonempty ones get a parameter) plus, optionally, the
covariates with slopes shared across cells.  Estimands are then linear
contrasts of the fitted cell means.

The fit uses the partitioned form of least squares rather than one big
normal-equation solve: covariates and response are demeaned within cells,
the slope solve is k x k, and cell means are recovered as

    mu_c = ybar_c - xbar_c' gamma.

Because the demeaned covariates have zero sums within every cell, the raw
cell means are uncorrelated with the slope estimate, which gives the cell
mean covariance in closed form:

    pooled:  V = s^2 (diag(1/n_c) + Xbar G Xbar'),   G = (Xt'Xt)^{-1}

The robust option is the HC1 sandwich of the equivalent full regression,
assembled from the same blocks; with no covariates it reduces to the
cell-wise formula sum(e_i^2 within c) / n_c^2 times n/(n - p).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.stats

from .cells import CELL_LABELS, N_CELLS
from .design import TrialDataset, read_dataset_csv
from .errors import (ConfigurationError, DataError, EstimationError,
                     IdentifiabilityError)
from .estimands import ESTIMANDS, EstimandSpec, WeightScheme, build_contrast

VARIANCE_KINDS = ("pooled", "robust")

#: Intercurrent-event strategies the analysis side supports.  The composite
#: strategy is a property of the data-generating model, not of the analysis
#: of a realized dataset, so it is rejected here.
ANALYSIS_ICE_STRATEGIES = ("treatment-policy",)


@dataclass(frozen=True)
class AnalysisConfig:
    """Estimation options: weighting, level, covariates, variance."""

    weights: WeightScheme = field(default_factory=WeightScheme.equal)
    alpha: float = 0.05
    adjust_covariates: bool = False
    variance: str = "pooled"
    ice_strategy: str = "treatment-policy"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError(
                f"analysis.alpha: must lie in (0, 1), got {self.alpha}")
        if self.variance not in VARIANCE_KINDS:
            raise ConfigurationError(
                f"analysis.variance: unknown kind {self.variance!r}; expected "
                "one of " + ", ".join(VARIANCE_KINDS))
        if self.ice_strategy not in ANALYSIS_ICE_STRATEGIES:
            raise ConfigurationError(
                f"analysis.ice_strategy: {self.ice_strategy!r} is not an "
                "analysis strategy (composite handling is part of the "
                "data-generating model); expected one of "
                + ", ".join(ANALYSIS_ICE_STRATEGIES))


@dataclass(frozen=True)
class DesignMatrixBundle:
    """Response, cell membership and covariates extracted from a dataset."""

    response: np.ndarray      # (n,)
    cell_index: np.ndarray    # (n,) in 0..7
    covariates: np.ndarray    # (n, k); k = 0 when unadjusted

    def indicators(self) -> np.ndarray:
        """Dense (n, 8) one-hot cell membership matrix."""
        out = np.zeros((len(self.response), N_CELLS))
        out[np.arange(len(self.response)), self.cell_index] = 1.0
        return out

    def full_matrix(self) -> np.ndarray:
        """[indicators for nonempty cells | covariates] as one matrix."""
        ind = self.indicators()
        ind = ind[:, ind.any(axis=0)]
        return np.hstack([ind, self.covariates])


def build_design_matrix(data: TrialDataset,
                        adjust_covariates: bool = False) -> DesignMatrixBundle:
    """Extract the regression pieces, checking outcome completeness."""
    if not data.has_outcomes:
        raise DataError("dataset has no outcomes; generate or load them first")
    missing = np.flatnonzero(np.isnan(data.outcome))
    if missing.size:
        raise DataError(
            f"patient {int(data.ids[missing[0]])}: outcome is missing")
    k = data.n_covariates if adjust_covariates else 0
    covariates = data.covariates[:, :k] if k else np.empty((len(data), 0))
    return DesignMatrixBundle(
        response=np.asarray(data.outcome, dtype=float),
        cell_index=data.cell_index(),
        covariates=np.asarray(covariates, dtype=float),
    )


@dataclass(frozen=True)
class FitResult:
    """Fitted saturated model: cell means, their covariance, and slopes.

    Arrays indexed by cell are length 8 in canonical order with NaN for
    cells absent from the data; ``vcov`` rows/columns of empty cells are
    NaN as well.  ``df`` may be 0, in which case no variance estimate
    exists and all standard errors are unavailable.
    """

    n: int
    cell_counts: np.ndarray          # (8,) int
    cell_means: np.ndarray           # (8,) mu-hat, NaN where empty
    vcov: np.ndarray                 # (8, 8)
    gamma: np.ndarray                # (k,) covariate slopes
    gamma_cov: np.ndarray            # (k, k)
    residual_variance: float         # NaN when df == 0
    df: int
    variance: str

    @property
    def n_covariates(self) -> int:
        return len(self.gamma)

    @property
    def se_available(self) -> bool:
        return self.df >= 1

    def empty_cells(self) -> np.ndarray:
        return self.cell_counts == 0

    def contrast_value(self, coefficients: np.ndarray) -> float:
        used = coefficients != 0.0
        return float(coefficients[used] @ self.cell_means[used])

    def contrast_se(self, coefficients: np.ndarray) -> float:
        used = coefficients != 0.0
        sub = self.vcov[np.ix_(used, used)]
        return math.sqrt(max(float(coefficients[used] @ sub @ coefficients[used]), 0.0))


def _covariate_rank_check(demeaned: np.ndarray) -> None:
    """Fail with the names of covariate columns that are collinear after
    within-cell centering (a cell-constant covariate shows up here too)."""
    n, k = demeaned.shape
    if k == 0:
        return
    r, pivots = scipy.linalg.qr(demeaned, mode="r", pivoting=True)
    diag = np.abs(np.diag(r)) if r.size else np.zeros(0)
    tol = (diag[0] if diag.size else 0.0) * max(n, k) * np.finfo(float).eps
    rank = int(np.sum(diag > tol))
    if rank < k:
        bad = sorted(int(j) for j in pivots[rank:])
        names = ", ".join(f"x{j + 1}" for j in bad)
        raise EstimationError(
            f"covariate column(s) {names} are collinear after within-cell "
            "centering; drop or combine them")


def fit_saturated(data: TrialDataset, adjust_covariates: bool = False,
                  variance: str = "pooled") -> FitResult:
    """Fit the saturated cell-means model, optionally covariate-adjusted."""
    if variance not in VARIANCE_KINDS:
        raise ConfigurationError(
            f"variance: unknown kind {variance!r}; expected one of "
            + ", ".join(VARIANCE_KINDS))
    bundle = build_design_matrix(data, adjust_covariates)
    y, idx, x = bundle.response, bundle.cell_index, bundle.covariates
    n, k = x.shape
    if n == 0:
        raise DataError("no observations to fit")

    counts8 = np.bincount(idx, minlength=N_CELLS)
    nonempty = np.flatnonzero(counts8)
    m = len(nonempty)
    pos = np.full(N_CELLS, -1)
    pos[nonempty] = np.arange(m)
    g = pos[idx]
    n_c = counts8[nonempty].astype(float)

    ybar = np.bincount(g, weights=y, minlength=m) / n_c
    if k:
        xbar = np.column_stack(
            [np.bincount(g, weights=x[:, j], minlength=m) / n_c
             for j in range(k)])
        xt = x - xbar[g]
        _covariate_rank_check(xt)
        xtx = xt.T @ xt
        gram_inv = np.linalg.inv(xtx)
        gamma = gram_inv @ (xt.T @ y)
        mu = ybar - xbar @ gamma
        resid = y - mu[g] - x @ gamma
    else:
        xbar = np.zeros((m, 0))
        gram_inv = np.zeros((0, 0))
        gamma = np.zeros(0)
        mu = ybar
        resid = y - mu[g]

    p = m + k
    df = n - p
    rss = float(resid @ resid)
    s2 = rss / df if df >= 1 else math.nan

    if df >= 1:
        if variance == "pooled":
            vc = s2 * (np.diag(1.0 / n_c) + xbar @ gram_inv @ xbar.T)
            gcov = s2 * gram_inv
        else:
            # HC1 sandwich of the equivalent single regression on
            # [indicators | covariates], assembled from partitioned blocks.
            e2 = resid ** 2
            q_c = np.bincount(g, weights=e2, minlength=m)
            dlx = np.column_stack(
                [np.bincount(g, weights=e2 * x[:, j], minlength=m)
                 for j in range(k)]) if k else np.zeros((m, 0))
            xlx = x.T @ (x * e2[:, None])
            top = np.diag(1.0 / n_c) + xbar @ gram_inv @ xbar.T   # (m, m)
            right = -xbar @ gram_inv                              # (m, k)
            scale = n / df
            vc = scale * (top * q_c @ top.T
                          + top @ dlx @ right.T
                          + right @ dlx.T @ top.T
                          + right @ xlx @ right.T)
            glow = np.hstack([-gram_inv @ xbar.T, gram_inv])      # (k, m+k)
            meat = np.block([[np.diag(q_c), dlx], [dlx.T, xlx]])
            gcov = scale * (glow @ meat @ glow.T)
    else:
        vc = np.full((m, m), math.nan)
        gcov = np.full((k, k), math.nan)

    means8 = np.full(N_CELLS, math.nan)
    means8[nonempty] = mu
    vcov8 = np.full((N_CELLS, N_CELLS), math.nan)
    vcov8[np.ix_(nonempty, nonempty)] = vc

    return FitResult(
        n=n,
        cell_counts=counts8,
        cell_means=means8,
        vcov=vcov8,
        gamma=gamma,
        gamma_cov=gcov,
        residual_variance=s2,
        df=df,
        variance=variance,
    )


@dataclass(frozen=True)
class EstimandEstimate:
    """One estimand's estimate row.

    Exactly one of ``estimate`` and ``inestimable_reason`` is None.  The
    uncertainty fields may be None with the point estimate present when
    the fit has no residual degrees of freedom.
    """

    estimand: str
    estimate: Optional[float]
    se: Optional[float]
    ci_low: Optional[float]
    ci_high: Optional[float]
    statistic: Optional[float]
    p_value: Optional[float]
    df: Optional[int]
    inestimable_reason: Optional[str]

    def as_row(self) -> dict:
        """The interchange row (statistic is a display-only extra)."""
        return {
            "estimand": self.estimand,
            "estimate": self.estimate,
            "se": self.se,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "p_value": self.p_value,
            "df": self.df,
            "inestimable_reason": self.inestimable_reason,
        }


def _estimate_one(fit: FitResult, spec: EstimandSpec, alpha: float
                  ) -> EstimandEstimate:
    coef = spec.coefficients
    touched = (coef != 0.0) & fit.empty_cells()
    if touched.any():
        labels = ", ".join(CELL_LABELS[i] for i in np.flatnonzero(touched))
        return EstimandEstimate(spec.name, None, None, None, None, None, None,
                                None, f"requires empty cell(s): {labels}")
    est = fit.contrast_value(coef)
    if not fit.se_available:
        return EstimandEstimate(spec.name, est, None, None, None, None, None,
                                fit.df, None)
    se = fit.contrast_se(coef)
    if se == 0.0:
        # Degenerate but estimable: zero residual variation on this contrast.
        stat = 0.0 if est == 0.0 else math.copysign(math.inf, est)
        p = 1.0 if est == 0.0 else 0.0
        return EstimandEstimate(spec.name, est, 0.0, est, est, stat, p,
                                fit.df, None)
    stat = est / se
    p = 2.0 * float(scipy.stats.t.sf(abs(stat), fit.df))
    half = float(scipy.stats.t.ppf(1.0 - alpha / 2.0, fit.df)) * se
    return EstimandEstimate(spec.name, est, se, est - half, est + half,
                            stat, p, fit.df, None)


def estimate_estimands(fit: FitResult, weights: WeightScheme,
                       alpha: float = 0.05) -> list[EstimandEstimate]:
    """Estimate all nine estimands from a fitted model.

    Estimands touching empty cells, or whose sample-size weights cannot be
    resolved, come back with an ``inestimable_reason`` instead of numbers.
    """
    rows = []
    for name in ESTIMANDS:
        try:
            spec = build_contrast(name, weights, fit.cell_counts)
        except IdentifiabilityError as err:
            rows.append(EstimandEstimate(name, None, None, None, None, None,
                                         None, None, str(err)))
            continue
        rows.append(_estimate_one(fit, spec, alpha))
    return rows


@dataclass(frozen=True)
class EstimateReport:
    """Estimates for all estimands plus fit provenance and diagnostics."""

    estimates: tuple[EstimandEstimate, ...]
    alpha: float
    weights: WeightScheme
    resolved_weights: dict
    variance: str
    adjust_covariates: bool
    ice_strategy: str
    n: int
    df: int
    n_covariates: int
    cell_counts: np.ndarray
    cell_means: np.ndarray
    residual_variance: float

    @property
    def weights_note(self) -> str:
        if self.weights.shared_pair:
            pair = self.weights.resolve()
            return (f"all weighted estimands share (w1, w2) = "
                    f"({pair[0]:.6g}, {pair[1]:.6g})")
        return ("sample-size weights resolve per estimand from realized "
                "class counts in that estimand's conditions stratum")

    def __getitem__(self, name: str) -> EstimandEstimate:
        for row in self.estimates:
            if row.estimand == name:
                return row
        raise KeyError(name)

    def to_json_dict(self) -> dict:
        def clean(v):
            if v is None:
                return None
            if isinstance(v, float) and math.isnan(v):
                return None
            return v

        weights = {"kind": self.weights.kind}
        if self.weights.kind == "target-population":
            weights["fraction_eligible"] = self.weights.fraction_eligible
        if self.weights.kind == "explicit":
            weights["w1"], weights["w2"] = self.weights.w1, self.weights.w2
        weights["resolved"] = {
            name: list(pair) for name, pair in self.resolved_weights.items()}
        weights["note"] = self.weights_note
        return {
            "estimates": [
                {key: clean(v) for key, v in row.as_row().items()}
                for row in self.estimates],
            "fit": {
                "n": self.n,
                "df": self.df,
                "alpha": self.alpha,
                "variance": self.variance,
                "adjust_covariates": self.adjust_covariates,
                "n_covariates": self.n_covariates,
                "ice_strategy": self.ice_strategy,
                "residual_variance": clean(self.residual_variance),
                "cell_counts": {label: int(c) for label, c
                                in zip(CELL_LABELS, self.cell_counts)},
                "cell_means": {label: clean(float(v)) for label, v
                               in zip(CELL_LABELS, self.cell_means)},
                "weights": weights,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    def to_csv(self) -> str:
        header = ["estimand", "estimate", "se", "ci_low", "ci_high",
                  "p_value", "df", "inestimable_reason"]
        lines = [",".join(header)]
        for row in self.estimates:
            rec = row.as_row()
            out = []
            for key in header:
                v = rec[key]
                if v is None:
                    out.append("")
                elif isinstance(v, float):
                    out.append(format(v, ".17g"))
                elif key == "inestimable_reason":
                    out.append('"' + str(v).replace('"', '""') + '"')
                else:
                    out.append(str(v))
            lines.append(",".join(out))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        def num(v, width=12):
            return ("" if v is None or (isinstance(v, float) and math.isnan(v))
                    else format(v, ".6g")).rjust(width)

        lines = []
        lines.append(f"{'estimand':<14}{'estimate':>12}{'se':>12}"
                     f"{'ci_low':>12}{'ci_high':>12}{'t':>12}{'p':>12}")
        for row in self.estimates:
            if row.inestimable_reason is not None:
                lines.append(f"{row.estimand:<14}  -- {row.inestimable_reason}")
                continue
            lines.append(f"{row.estimand:<14}" + num(row.estimate)
                         + num(row.se) + num(row.ci_low) + num(row.ci_high)
                         + num(row.statistic) + num(row.p_value))
        lines.append("")
        lines.append(f"n = {self.n}, residual df = {self.df}, "
                     f"variance = {self.variance}, alpha = {self.alpha}")
        if self.adjust_covariates:
            lines.append(f"adjusted for {self.n_covariates} covariate(s)")
        rv = self.residual_variance
        if not (isinstance(rv, float) and math.isnan(rv)):
            lines.append(f"residual variance = {rv:.6g}")
        lines.append("weights: " + self.weights.kind + "; " + self.weights_note)
        if self.resolved_weights:
            for name, pair in self.resolved_weights.items():
                lines.append(f"  {name}: (w1, w2) = "
                             f"({pair[0]:.6g}, {pair[1]:.6g})")
        lines.append("cell counts / fitted means:")
        for i, label in enumerate(CELL_LABELS):
            mean = self.cell_means[i]
            mean_text = "--" if math.isnan(mean) else format(mean, ".6g")
            lines.append(f"  {label:<26}{int(self.cell_counts[i]):>7}"
                         f"  {mean_text}")
        return "\n".join(lines) + "\n"


def estimate_trial(data: TrialDataset,
                   analysis: Optional[AnalysisConfig] = None) -> EstimateReport:
    """Fit the saturated model on a dataset and estimate every estimand."""
    if analysis is None:
        analysis = AnalysisConfig()
    fit = fit_saturated(data, analysis.adjust_covariates, analysis.variance)
    rows = estimate_estimands(fit, analysis.weights, analysis.alpha)
    resolved = {}
    for row in rows:
        if row.inestimable_reason is None:
            try:
                spec = build_contrast(row.estimand, analysis.weights,
                                      fit.cell_counts)
            except IdentifiabilityError:  # pragma: no cover - already handled
                continue
            if spec.resolved is not None:
                resolved[row.estimand] = spec.resolved
    return EstimateReport(
        estimates=tuple(rows),
        alpha=analysis.alpha,
        weights=analysis.weights,
        resolved_weights=resolved,
        variance=analysis.variance,
        adjust_covariates=analysis.adjust_covariates,
        ice_strategy=analysis.ice_strategy,
        n=fit.n,
        df=fit.df,
        n_covariates=fit.n_covariates,
        cell_counts=fit.cell_counts,
        cell_means=fit.cell_means,
        residual_variance=fit.residual_variance,
    )


def estimate_from_csv(path, analysis: Optional[AnalysisConfig] = None
                      ) -> EstimateReport:
    """Load a dataset written by :func:`factive.design.write_dataset_csv`
    and estimate from it."""
    return estimate_trial(read_dataset_csv(path), analysis)
