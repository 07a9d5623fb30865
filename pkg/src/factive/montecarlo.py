"""Replicated simulation: operating characteristics and interim gating.

One replicate is randomize -> generate outcomes -> (optional gate) ->
fit -> estimate.  Replicates are pure functions of (design seed,
replicate index), so a run is reproducible replicate by replicate and
independent of how work is distributed across processes.

The gate models a staged protocol: Part A starts alone, and at an interim
look at a fraction of Part A the treatment effect among eligible patients
under RCT conditions is screened through a conjugate normal-normal update.
Part B (the close-to-real-world augmentation) is activated only when the
posterior probability of a positive effect reaches the threshold;
otherwise the replicate is analyzed as the plain RCT it reduced to.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Optional, Sequence

import numpy as np
import scipy.stats

from . import _rng
from .cells import CELL_LABELS, N_CELLS
from .design import (DesignSpec, TrialDataset, expected_cell_counts,
                     randomize_cohort, require_valid_design)
from .errors import (ConfigurationError, DataError, EstimationError,
                     IdentifiabilityError)
from .estimands import ESTIMANDS
from .inference import (AnalysisConfig, EstimandEstimate, estimate_trial)
from .outcomes import OutcomeModelSpec, generate_outcomes, true_estimands


@dataclass(frozen=True)
class GatingRule:
    """Interim activation rule for Part B.

    At a look after ``interim_fraction`` of Part A, combine the interim
    difference-in-means estimate with a normal prior on the effect and
    activate Part B iff the posterior probability that the effect is
    positive reaches ``threshold``.  A threshold of 0 therefore always
    activates, turning the gate off.
    """

    interim_fraction: float = 0.5
    prior_mean: float = 0.0
    prior_sd: float = 1.0
    threshold: float = 0.975

    def __post_init__(self):
        if not 0.0 < self.interim_fraction <= 1.0:
            raise ConfigurationError(
                "part_b_gate.interim_fraction: must lie in (0, 1], got "
                f"{self.interim_fraction}")
        if not self.prior_sd > 0.0:
            raise ConfigurationError(
                f"part_b_gate.prior_sd: must be > 0, got {self.prior_sd}")
        if not 0.0 <= self.threshold < 1.0:
            raise ConfigurationError(
                "part_b_gate.threshold: must lie in [0, 1), got "
                f"{self.threshold}")


@dataclass(frozen=True)
class GateDecision:
    """Outcome of one interim look."""

    activated: bool
    prob_positive: float
    posterior_mean: float
    posterior_sd: float
    estimate: Optional[float]   # interim difference in means, if formed
    se: Optional[float]
    n_interim: int
    note: Optional[str] = None


def interim_rows(data: TrialDataset, interim_fraction: float) -> np.ndarray:
    """Row indices of the interim analysis set: the first
    ceil(fraction * n_part_a) Part A rows in id order."""
    rows = np.flatnonzero(data.in_part_a)
    return rows[:math.ceil(interim_fraction * len(rows))]


def gate_posterior(estimate: float, se: float, rule: GatingRule
                   ) -> tuple[float, float, float]:
    """Conjugate normal-normal update of the prior with N(estimate, se^2).

    Returns (posterior mean, posterior sd, Pr(effect > 0 | data)).  A zero
    standard error collapses the posterior to a point mass at the estimate.
    """
    if se == 0.0:
        return estimate, 0.0, (1.0 if estimate > 0.0 else 0.0)
    prior_prec = 1.0 / rule.prior_sd ** 2
    data_prec = 1.0 / se ** 2
    post_var = 1.0 / (prior_prec + data_prec)
    post_mean = post_var * (rule.prior_mean * prior_prec
                            + estimate * data_prec)
    post_sd = math.sqrt(post_var)
    prob = float(scipy.stats.norm.sf(0.0, post_mean, post_sd))
    return post_mean, post_sd, prob


def apply_gate(outcome: np.ndarray, treatment: np.ndarray,
               rule: GatingRule) -> GateDecision:
    """Evaluate the gate on an interim two-arm sample.

    With both arms populated, the difference in means and its pooled-
    variance standard error form the likelihood for
    :func:`gate_posterior`.  Without enough data for a standard error the
    posterior is just the prior; a zero standard error gives a point-mass
    posterior at the estimate.
    """
    y = np.asarray(outcome, dtype=float)
    t = np.asarray(treatment)
    y_t, y_c = y[t == 1], y[t == 0]
    n_t, n_c = len(y_t), len(y_c)
    df = n_t + n_c - 2

    if n_t == 0 or n_c == 0 or df < 1:
        prob = float(scipy.stats.norm.sf(0.0, rule.prior_mean, rule.prior_sd))
        return GateDecision(
            activated=prob >= rule.threshold,
            prob_positive=prob,
            posterior_mean=rule.prior_mean,
            posterior_sd=rule.prior_sd,
            estimate=None, se=None, n_interim=int(len(y)),
            note="interim data cannot support an estimate; posterior equals "
                 "the prior")

    est = float(y_t.mean() - y_c.mean())
    pooled = (((n_t - 1) * y_t.var(ddof=1) if n_t > 1 else 0.0)
              + ((n_c - 1) * y_c.var(ddof=1) if n_c > 1 else 0.0)) / df
    se = math.sqrt(pooled * (1.0 / n_t + 1.0 / n_c))
    post_mean, post_sd, prob = gate_posterior(est, se, rule)
    return GateDecision(
        activated=prob >= rule.threshold,
        prob_positive=prob,
        posterior_mean=post_mean,
        posterior_sd=post_sd,
        estimate=est, se=se, n_interim=int(len(y)),
        note=("zero interim standard error; posterior is a point mass"
              if se == 0.0 else None))


@dataclass(frozen=True)
class ReplicateResult:
    """Everything retained from one replicate."""

    replicate: int
    activated: bool
    cell_counts: np.ndarray                  # analysis-set counts, (8,)
    rows: Optional[tuple[EstimandEstimate, ...]]
    error: Optional[str] = None


def run_one_replicate(design: DesignSpec, model: OutcomeModelSpec,
                      analysis: AnalysisConfig, replicate: int
                      ) -> ReplicateResult:
    """Simulate and analyze a single replicate."""
    streams = _rng.CounterStreams(design.seed, replicate)
    data = randomize_cohort(design, streams)
    data = generate_outcomes(data, model, streams)

    activated = True
    if design.part_b_gate is not None:
        rows = interim_rows(data, design.part_b_gate.interim_fraction)
        decision = apply_gate(data.outcome[rows], data.treatment[rows],
                              design.part_b_gate)
        activated = decision.activated
        if not activated:
            data = data.subset(data.in_part_a)

    try:
        report = estimate_trial(data, analysis)
    except (DataError, EstimationError, IdentifiabilityError) as err:
        return ReplicateResult(replicate, activated, data.cell_counts(),
                               None, f"{type(err).__name__}: {err}")
    return ReplicateResult(replicate, activated, data.cell_counts(),
                           report.estimates)


@dataclass(frozen=True)
class EstimandSummary:
    """Monte Carlo operating characteristics of one estimand.

    ``coverage`` and ``rejection_rate`` average over replicates where a
    standard error existed; ``truth`` is None when the weight scheme
    cannot be resolved from the design's expected cell counts.
    """

    estimand: str
    truth: Optional[float]
    n_estimable: int
    mc_mean: Optional[float]
    bias: Optional[float]
    mc_se: Optional[float]
    empirical_se: Optional[float]
    mean_model_se: Optional[float]
    coverage: Optional[float]
    rejection_rate: Optional[float]

    def as_dict(self) -> dict:
        return {
            "estimand": self.estimand,
            "truth": self.truth,
            "n_estimable": self.n_estimable,
            "mc_mean": self.mc_mean,
            "bias": self.bias,
            "mc_se": self.mc_se,
            "empirical_se": self.empirical_se,
            "mean_model_se": self.mean_model_se,
            "coverage": self.coverage,
            "rejection_rate": self.rejection_rate,
        }


@dataclass(frozen=True)
class SimulationSummary:
    """Aggregate of a replicated run, plus the retained per-rep results."""

    n_reps: int
    master_seed: int
    alpha: float
    weights_kind: str
    variance: str
    activation_rate: float
    error_count: int
    mean_cell_counts: np.ndarray
    estimands: tuple[EstimandSummary, ...]
    replicates: Optional[tuple[ReplicateResult, ...]] = None

    @property
    def error_rate(self) -> float:
        return self.error_count / self.n_reps if self.n_reps else 0.0

    def __getitem__(self, name: str) -> EstimandSummary:
        for row in self.estimands:
            if row.estimand == name:
                return row
        raise KeyError(name)

    def to_json_dict(self) -> dict:
        return {
            "n_reps": self.n_reps,
            "master_seed": self.master_seed,
            "alpha": self.alpha,
            "weights_kind": self.weights_kind,
            "variance": self.variance,
            "activation_rate": self.activation_rate,
            "error_count": self.error_count,
            "error_rate": self.error_rate,
            "mean_cell_counts": {label: float(c) for label, c
                                 in zip(CELL_LABELS, self.mean_cell_counts)},
            "estimands": [row.as_dict() for row in self.estimands],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    def to_text(self) -> str:
        def num(v, width=11):
            return ("" if v is None else format(v, ".5g")).rjust(width)

        lines = [
            f"replicates = {self.n_reps}, master seed = {self.master_seed}, "
            f"alpha = {self.alpha}",
            f"weights = {self.weights_kind}, variance = {self.variance}",
            f"activation rate = {self.activation_rate:.4g}, "
            f"errors = {self.error_count} ({self.error_rate:.4g})",
            "",
            f"{'estimand':<14}{'truth':>11}{'n_est':>7}{'mc_mean':>11}"
            f"{'bias':>11}{'emp_se':>11}{'model_se':>11}{'coverage':>11}"
            f"{'reject':>11}",
        ]
        for row in self.estimands:
            lines.append(
                f"{row.estimand:<14}" + num(row.truth)
                + str(row.n_estimable).rjust(7) + num(row.mc_mean)
                + num(row.bias) + num(row.empirical_se)
                + num(row.mean_model_se) + num(row.coverage)
                + num(row.rejection_rate))
        lines.append("")
        lines.append("mean analysis-set cell counts:")
        for label, c in zip(CELL_LABELS, self.mean_cell_counts):
            lines.append(f"  {label:<26}{c:>10.2f}")
        return "\n".join(lines) + "\n"


def _summarize_estimand(name: str, truth: Optional[float],
                        results: Sequence[ReplicateResult],
                        alpha: float) -> EstimandSummary:
    estimates, ses, covered, rejected = [], [], [], []
    for res in results:
        if res.rows is None:
            continue
        row = next(r for r in res.rows if r.estimand == name)
        if row.estimate is None:
            continue
        estimates.append(row.estimate)
        if row.se is not None:
            ses.append(row.se)
            if truth is not None:
                covered.append(row.ci_low <= truth <= row.ci_high)
            rejected.append(row.p_value <= alpha)
    n_est = len(estimates)
    if n_est == 0:
        return EstimandSummary(name, truth, 0, None, None, None, None, None,
                               None, None)
    mc_mean = float(np.mean(estimates))
    emp_se = float(np.std(estimates, ddof=1)) if n_est > 1 else None
    return EstimandSummary(
        estimand=name,
        truth=truth,
        n_estimable=n_est,
        mc_mean=mc_mean,
        bias=None if truth is None else mc_mean - truth,
        mc_se=None if emp_se is None else emp_se / math.sqrt(n_est),
        empirical_se=emp_se,
        mean_model_se=float(np.mean(ses)) if ses else None,
        coverage=float(np.mean(covered)) if covered else None,
        rejection_rate=float(np.mean(rejected)) if rejected else None,
    )


def run_replicates(design: DesignSpec, model: OutcomeModelSpec,
                   analysis: Optional[AnalysisConfig] = None,
                   n_reps: int = 1000, n_jobs: int = 1,
                   keep_replicates: bool = False) -> SimulationSummary:
    """Run ``n_reps`` independent replicates and summarize them.

    Results are identical for any ``n_jobs``: each replicate's random
    streams are keyed by (design.seed, replicate index) alone, and
    replicates are summarized in index order.
    """
    if analysis is None:
        analysis = AnalysisConfig()
    if n_reps < 1:
        raise ConfigurationError(f"n_reps: must be >= 1, got {n_reps}")
    if n_jobs < 1:
        raise ConfigurationError(f"n_jobs: must be >= 1, got {n_jobs}")
    require_valid_design(design)
    model.require_valid()

    worker = partial(run_one_replicate, design, model, analysis)
    if n_jobs == 1:
        results = [worker(rep) for rep in range(n_reps)]
    else:
        chunk = max(1, n_reps // (n_jobs * 8))
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(worker, range(n_reps), chunksize=chunk))

    # Truth is a property of (model, weights); sample-size weights bind to
    # the design's expected cell counts.
    truth_values: dict[str, Optional[float]] = {}
    expected = expected_cell_counts(design)
    for name in ESTIMANDS:
        try:
            truth_values[name] = true_estimands(
                model, analysis.weights, expected)[name]
        except IdentifiabilityError:
            truth_values[name] = None

    ok = [r for r in results if r.error is None]
    summaries = tuple(
        _summarize_estimand(name, truth_values[name], results, analysis.alpha)
        for name in ESTIMANDS)
    counts = (np.mean([r.cell_counts for r in ok], axis=0)
              if ok else np.full(N_CELLS, math.nan))
    return SimulationSummary(
        n_reps=n_reps,
        master_seed=design.seed,
        alpha=analysis.alpha,
        weights_kind=analysis.weights.kind,
        variance=analysis.variance,
        activation_rate=float(np.mean([r.activated for r in results])),
        error_count=len(results) - len(ok),
        mean_cell_counts=counts,
        estimands=summaries,
        replicates=tuple(results) if keep_replicates else None,
    )


def write_replicates_csv(path, summary: SimulationSummary) -> None:
    """Per-replicate, per-estimand long-format export.

    Requires the summary to have been built with ``keep_replicates=True``.
    """
    if summary.replicates is None:
        raise ConfigurationError(
            "summary was built without keep_replicates=True")
    truth = {row.estimand: row.truth for row in summary.estimands}
    with open(path, "w", newline="") as fh:
        fh.write("replicate,estimand,estimate,se,covered,rejected\n")
        for res in summary.replicates:
            for name in ESTIMANDS:
                row = (next((r for r in res.rows if r.estimand == name), None)
                       if res.rows is not None else None)
                est = se = cov = rej = ""
                if row is not None and row.estimate is not None:
                    est = format(row.estimate, ".17g")
                    if row.se is not None:
                        se = format(row.se, ".17g")
                        t = truth[name]
                        if t is not None:
                            cov = str(int(row.ci_low <= t <= row.ci_high))
                        rej = str(int(row.p_value <= summary.alpha))
                fh.write(f"{res.replicate},{name},{est},{se},{cov},{rej}\n")
