"""Data-generating model over the design cells and closed-form truth.

The outcome is continuous and Gaussian: each patient draws covariates from
a per-class normal law, then

    Y = mu(cell) + slopes . covariates + noise,    noise ~ N(0, noise_sd^2)

with a saturated mean per (eligibility x conditions x treatment) cell.  An
intercurrent-event flag is drawn per cell; under the treatment-policy
strategy it is recorded and otherwise ignored, under the composite
strategy it additively shifts Y by ``ice_effect``.

Because the model is saturated in cell means, every estimand has a closed
form: apply its contrast to the effective cell means (cell mean plus
class-level covariate contribution plus any composite ICE shift).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from . import _rng
from .cells import CELL_LABELS, N_CELLS, cell_index_from_label
from .design import Diagnostic, TrialDataset
from .errors import ConfigurationError, StateError
from .estimands import ESTIMANDS, WeightScheme, build_contrast

ICE_STRATEGIES = ("treatment-policy", "composite")


def cell_vector(values: Mapping[str, float] | Sequence[float] | float,
                default: float = 0.0) -> np.ndarray:
    """Coerce per-cell values to an (8,) array in canonical order.

    Accepts a full sequence, a scalar (broadcast), or a mapping from cell
    labels (missing labels fall back to ``default``).
    """
    if isinstance(values, Mapping):
        out = np.full(N_CELLS, float(default))
        for label, v in values.items():
            out[cell_index_from_label(label)] = float(v)
        return out
    if np.isscalar(values):
        return np.full(N_CELLS, float(values))
    arr = np.asarray(values, dtype=float)
    if arr.shape != (N_CELLS,):
        raise ConfigurationError(
            f"per-cell values must have length {N_CELLS}, got shape {arr.shape}")
    return arr.copy()


def _class_vectors(values, k: int, default: float) -> dict[str, np.ndarray]:
    """Per-class length-k covariate parameter vectors."""
    out = {}
    for name in ("eligible", "broader"):
        if isinstance(values, Mapping):
            v = values.get(name, default)
        else:
            v = values if values is not None else default
        arr = np.asarray(v, dtype=float)
        if arr.ndim == 0:
            arr = np.full(k, float(arr))
        out[name] = arr
    return out


@dataclass(frozen=True)
class OutcomeModelSpec:
    """Saturated cell-mean model with shared covariate slopes.

    ``covariate_means``/``covariate_sds`` define the per-class covariate
    law (independent normal components); they may differ between classes
    to make marginals look confounded, but randomization keeps within-cell
    contrasts clean.  ``ice_probability`` is per cell and defaults to 0
    everywhere (RCT conditions are expected to prevent the event).
    """

    cell_means: np.ndarray = field(default_factory=lambda: np.zeros(N_CELLS))
    covariate_slopes: np.ndarray = field(default_factory=lambda: np.zeros(0))
    covariate_means: Optional[object] = None   # per class; see _class_vectors
    covariate_sds: Optional[object] = None
    noise_sd: float = 1.0
    ice_probability: np.ndarray = field(default_factory=lambda: np.zeros(N_CELLS))
    ice_effect: float = 0.0
    ice_strategy: str = "treatment-policy"

    def __post_init__(self):
        object.__setattr__(self, "cell_means", cell_vector(self.cell_means))
        object.__setattr__(self, "covariate_slopes",
                           np.atleast_1d(np.asarray(self.covariate_slopes, dtype=float)))
        object.__setattr__(self, "ice_probability", cell_vector(self.ice_probability))

    @property
    def n_covariates(self) -> int:
        return len(self.covariate_slopes)

    def class_covariate_means(self) -> dict[str, np.ndarray]:
        return _class_vectors(self.covariate_means, self.n_covariates, 0.0)

    def class_covariate_sds(self) -> dict[str, np.ndarray]:
        return _class_vectors(self.covariate_sds, self.n_covariates, 1.0)

    def validate(self) -> list[Diagnostic]:
        diags = []
        if not self.noise_sd > 0.0:
            diags.append(Diagnostic("error", "noise_sd",
                                    f"must be > 0, got {self.noise_sd}"))
        bad = (self.ice_probability < 0.0) | (self.ice_probability > 1.0)
        if bad.any():
            labels = [CELL_LABELS[i] for i in np.flatnonzero(bad)]
            diags.append(Diagnostic("error", "ice_probability",
                                    "must lie in [0, 1] for cell(s) " + ", ".join(labels)))
        if self.ice_strategy not in ICE_STRATEGIES:
            diags.append(Diagnostic(
                "error", "ice_strategy",
                f"unknown strategy {self.ice_strategy!r}; expected one of "
                + ", ".join(ICE_STRATEGIES)))
        k = self.n_covariates
        for label, vecs in (("covariate_means", self.class_covariate_means()),
                            ("covariate_sds", self.class_covariate_sds())):
            for cls, arr in vecs.items():
                if arr.shape != (k,):
                    diags.append(Diagnostic(
                        "error", label,
                        f"{cls}: expected {k} components to match "
                        f"covariate_slopes, got {arr.shape}"))
                elif label == "covariate_sds" and (arr < 0.0).any():
                    diags.append(Diagnostic("error", label,
                                            f"{cls}: components must be >= 0"))
        return diags

    def require_valid(self) -> None:
        errors = [d for d in self.validate() if d.severity == "error"]
        if errors:
            raise ConfigurationError(
                "; ".join(f"{d.field}: {d.message}" for d in errors))

    def effective_cell_means(self) -> np.ndarray:
        """E[Y | cell], folding in covariate-law means and composite ICE."""
        means = self.cell_means.copy()
        if self.n_covariates:
            class_means = self.class_covariate_means()
            for i, label in enumerate(CELL_LABELS):
                cls = "eligible" if label.startswith("eligible") else "broader"
                means[i] += float(self.covariate_slopes @ class_means[cls])
        if self.ice_strategy == "composite":
            means += self.ice_probability * self.ice_effect
        return means


@dataclass(frozen=True)
class TrueEstimands:
    """Closed-form estimand values for one model and weight scheme."""

    theta1: float
    theta1_tilde: float
    theta2: float
    theta3: float
    theta4: float
    theta5: float
    theta6: float
    theta7: float
    theta8: float
    weights_used: WeightScheme = field(default_factory=WeightScheme.equal)

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in ESTIMANDS}

    def __getitem__(self, name: str) -> float:
        if name not in ESTIMANDS:
            raise KeyError(name)
        return getattr(self, name)


def true_estimands(model: OutcomeModelSpec,
                   weights: Optional[WeightScheme] = None,
                   cell_counts: Optional[Sequence[float]] = None) -> TrueEstimands:
    """Evaluate all nine estimands exactly under the model.

    ``cell_counts`` is needed only to bind sample-size weights (e.g. the
    expected counts of a design).
    """
    model.require_valid()
    if weights is None:
        weights = WeightScheme.equal()
    means = model.effective_cell_means()
    values = {name: build_contrast(name, weights, cell_counts).value(means)
              for name in ESTIMANDS}
    return TrueEstimands(weights_used=weights, **values)


def generate_outcomes(data: TrialDataset, model: OutcomeModelSpec,
                      streams: Optional[_rng.CounterStreams] = None) -> TrialDataset:
    """Draw covariates, intercurrent events and outcomes for a cohort.

    A pure function of (data, model, streams); by default streams derive
    from the dataset's design seed and replicate index.  Per-class streams
    keep one class's draws independent of the other class's size.
    """
    if data.has_outcomes:
        raise StateError("dataset already has outcomes")
    model.require_valid()
    if streams is None:
        if data.design is None:
            raise ConfigurationError(
                "dataset has no design provenance; pass streams explicitly")
        streams = _rng.CounterStreams(data.design.seed, data.replicate)

    n = len(data)
    k = model.n_covariates
    cell_idx = data.cell_index()
    class_rows = {"eligible": np.flatnonzero(data.eligible == 1),
                  "broader": np.flatnonzero(data.eligible == 0)}
    planes = {
        "eligible": (_rng.NOISE_ELIGIBLE, _rng.ICE_ELIGIBLE,
                     _rng.COVARIATE_ELIGIBLE_BASE),
        "broader": (_rng.NOISE_BROADER, _rng.ICE_BROADER,
                    _rng.COVARIATE_BROADER_BASE),
    }

    covariates = np.empty((n, k))
    noise = np.empty(n)
    ice = np.zeros(n, dtype=bool)
    class_means = model.class_covariate_means()
    class_sds = model.class_covariate_sds()
    for cls, rows in class_rows.items():
        m = len(rows)
        noise_plane, ice_plane, cov_base = planes[cls]
        noise[rows] = streams.normals(noise_plane, m) * model.noise_sd
        for j in range(k):
            covariates[rows, j] = (streams.normals(cov_base + j, m)
                                   * class_sds[cls][j] + class_means[cls][j])
        if model.ice_probability.any():
            ice[rows] = (streams.uniforms(ice_plane, m)
                         < model.ice_probability[cell_idx[rows]])

    outcome = model.cell_means[cell_idx] + noise
    if k:
        outcome = outcome + covariates @ model.covariate_slopes
    if model.ice_strategy == "composite":
        outcome = outcome + model.ice_effect * ice

    return data.with_outcomes(covariates, outcome, ice)
