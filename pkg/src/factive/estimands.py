"""The nine estimands as weighted linear contrasts over the design cells.

``theta1`` is the conventional RCT estimand (effect under RCT conditions in
eligible patients).  The augmented design adds effects in the broader
population, effects of the treatment conditions themselves, and marginal
versions that combine the two patient classes through convex weights
(w1 on eligible, w2 on broader, w1 + w2 = 1):

=============  ============================================================
theta1         effect under RCT conditions, eligible patients
theta1_tilde   effect under RCT conditions, marginal: w1*theta1 + w2*theta7
theta2         conditions effect on the treated, marginal: w1*theta5 + w2*theta6
theta3         effect difference between condition sets: theta1_tilde - theta8
theta4         treated-mean difference between classes under RCT conditions
theta5         conditions effect on the treated, eligible patients
theta6         conditions effect on the treated, broader patients
theta7         effect under RCT conditions, broader patients
theta8         effect under cRW conditions, marginal over classes
=============  ============================================================

Each estimand is a coefficient vector over the 8 cells; coefficients sum
to zero, so contrasts are invariant to shifting all cell means.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .cells import CELL_LABELS, N_CELLS, cell_index
from .errors import ConfigurationError, IdentifiabilityError

ESTIMANDS: tuple[str, ...] = (
    "theta1", "theta1_tilde", "theta2", "theta3", "theta4",
    "theta5", "theta6", "theta7", "theta8",
)

#: Estimands whose definition involves the class weights.
WEIGHTED_ESTIMANDS = frozenset({"theta1_tilde", "theta2", "theta3", "theta8"})

#: Conditions stratum in which sample-size weights are resolved, per
#: estimand: marginal effects under one condition set use that stratum's
#: realized class split; theta2/theta3 span both sets and use the pooled
#: split.
_SAMPLE_SIZE_STRATUM = {
    "theta1_tilde": "rct",
    "theta8": "crw",
    "theta2": "all",
    "theta3": "all",
}

_WEIGHT_KINDS = ("equal", "sample-size", "target-population", "explicit")


@dataclass(frozen=True)
class WeightScheme:
    """How the eligible and broader classes are combined into marginals.

    ``equal`` resolves to (0.5, 0.5); ``target-population`` to
    (fraction_eligible, 1 - fraction_eligible); ``explicit`` to the given
    pair; ``sample-size`` to realized class proportions and therefore
    needs cell counts, resolved per estimand in its conditions stratum.
    """

    kind: str = "equal"
    fraction_eligible: Optional[float] = None
    w1: Optional[float] = None
    w2: Optional[float] = None

    def __post_init__(self):
        if self.kind not in _WEIGHT_KINDS:
            raise ConfigurationError(
                f"weights.kind: unknown scheme {self.kind!r}; expected one of "
                + ", ".join(_WEIGHT_KINDS))
        if self.kind == "target-population":
            f = self.fraction_eligible
            if f is None or not 0.0 <= f <= 1.0:
                raise ConfigurationError(
                    f"weights.fraction_eligible: must lie in [0, 1], got {f}")
        if self.kind == "explicit":
            if self.w1 is None or self.w2 is None:
                raise ConfigurationError(
                    "weights: explicit scheme needs both w1 and w2")
            if self.w1 < 0.0 or self.w2 < 0.0:
                raise ConfigurationError(
                    f"weights: must be non-negative, got ({self.w1}, {self.w2})")
            if abs(self.w1 + self.w2 - 1.0) > 1e-9:
                raise ConfigurationError(
                    f"weights: w1 + w2 must equal 1, got {self.w1 + self.w2}")

    @classmethod
    def equal(cls) -> "WeightScheme":
        return cls("equal")

    @classmethod
    def sample_size(cls) -> "WeightScheme":
        return cls("sample-size")

    @classmethod
    def target_population(cls, fraction_eligible: float) -> "WeightScheme":
        return cls("target-population", fraction_eligible=fraction_eligible)

    @classmethod
    def explicit(cls, w1: float, w2: float) -> "WeightScheme":
        return cls("explicit", w1=w1, w2=w2)

    @property
    def shared_pair(self) -> bool:
        """True when every estimand resolves to the same (w1, w2)."""
        return self.kind != "sample-size"

    def resolve(self, estimand: str = "theta1_tilde",
                cell_counts: Optional[Sequence[float]] = None) -> tuple[float, float]:
        """Resolved (w1, w2) for one estimand.

        Raises :class:`IdentifiabilityError` when a sample-size scheme
        cannot be bound (no counts, or an empty class in the stratum).
        """
        if self.kind == "equal":
            return 0.5, 0.5
        if self.kind == "target-population":
            return self.fraction_eligible, 1.0 - self.fraction_eligible
        if self.kind == "explicit":
            return self.w1, self.w2
        # sample-size
        if cell_counts is None:
            raise IdentifiabilityError(
                "sample-size weights need realized cell counts to resolve")
        counts = np.asarray(cell_counts, dtype=float)
        if counts.shape != (N_CELLS,):
            raise ConfigurationError(
                f"cell_counts must have length {N_CELLS}, got {counts.shape}")
        stratum = _SAMPLE_SIZE_STRATUM.get(estimand, "all")
        conditions = {"rct": (1,), "crw": (0,), "all": (1, 0)}[stratum]
        n_by_class = {}
        for e, name in ((1, "eligible"), (0, "broader")):
            n_by_class[name] = sum(
                counts[cell_index(e, p, t)] for p in conditions for t in (1, 0))
        for name, n_class in n_by_class.items():
            if n_class == 0:
                raise IdentifiabilityError(
                    f"sample-size weights for {estimand}: no {name} patients "
                    f"in the {stratum} stratum")
        total = n_by_class["eligible"] + n_by_class["broader"]
        return n_by_class["eligible"] / total, n_by_class["broader"] / total


@dataclass(frozen=True)
class EstimandSpec:
    """One estimand bound to concrete contrast coefficients."""

    name: str
    coefficients: np.ndarray  # (8,) over the canonical cell order
    weights: WeightScheme
    resolved: Optional[tuple[float, float]]  # None for unweighted estimands

    def value(self, cell_means: Sequence[float]) -> float:
        """Apply the contrast to a vector of cell means."""
        return float(self.coefficients @ np.asarray(cell_means, dtype=float))


def _delta(plus: tuple[int, int, int], minus: tuple[int, int, int]) -> np.ndarray:
    c = np.zeros(N_CELLS)
    c[cell_index(*plus)] = 1.0
    c[cell_index(*minus)] = -1.0
    return c


# Unweighted two-cell contrasts (eligible, conditions, treatment).
_SIMPLE = {
    "theta1": ((1, 1, 1), (1, 1, 0)),
    "theta4": ((1, 1, 1), (0, 1, 1)),
    "theta5": ((1, 1, 1), (1, 0, 1)),
    "theta6": ((0, 1, 1), (0, 0, 1)),
    "theta7": ((0, 1, 1), (0, 1, 0)),
}


def _weighted_coefficients(name: str, w1: float, w2: float) -> np.ndarray:
    if name == "theta1_tilde":
        return w1 * _delta(*_SIMPLE["theta1"]) + w2 * _delta(*_SIMPLE["theta7"])
    if name == "theta2":
        return w1 * _delta(*_SIMPLE["theta5"]) + w2 * _delta(*_SIMPLE["theta6"])
    if name == "theta8":
        return (w1 * _delta((1, 0, 1), (1, 0, 0))
                + w2 * _delta((0, 0, 1), (0, 0, 0)))
    if name == "theta3":
        return (_weighted_coefficients("theta1_tilde", w1, w2)
                - _weighted_coefficients("theta8", w1, w2))
    raise KeyError(name)


def build_contrast(name: str, weights: WeightScheme,
                   cell_counts: Optional[Sequence[float]] = None) -> EstimandSpec:
    """Coefficient vector for one estimand under a weight scheme.

    ``cell_counts`` is only consulted by sample-size weights.  Raises
    :class:`IdentifiabilityError` when those cannot be resolved.
    """
    if name not in ESTIMANDS:
        raise ConfigurationError(
            f"unknown estimand {name!r}; expected one of " + ", ".join(ESTIMANDS))
    if name in _SIMPLE:
        return EstimandSpec(name, _delta(*_SIMPLE[name]), weights, None)
    w1, w2 = weights.resolve(name, cell_counts)
    return EstimandSpec(name, _weighted_coefficients(name, w1, w2), weights, (w1, w2))


def build_all_contrasts(weights: WeightScheme,
                        cell_counts: Optional[Sequence[float]] = None
                        ) -> dict[str, EstimandSpec]:
    return {name: build_contrast(name, weights, cell_counts) for name in ESTIMANDS}


def contrast_matrix(weights: WeightScheme,
                    cell_counts: Optional[Sequence[float]] = None) -> np.ndarray:
    """(9, 8) coefficient matrix, estimand order by rows."""
    return np.vstack([build_contrast(name, weights, cell_counts).coefficients
                      for name in ESTIMANDS])


def write_contrast_matrix_csv(path, weights: WeightScheme,
                              cell_counts: Optional[Sequence[float]] = None) -> None:
    """Audit export of the full coefficient matrix."""
    matrix = contrast_matrix(weights, cell_counts)
    with open(path, "w", newline="") as fh:
        fh.write("estimand," + ",".join(CELL_LABELS) + "\n")
        for name, row in zip(ESTIMANDS, matrix):
            fh.write(name + "," + ",".join(format(v, ".17g") for v in row) + "\n")


@dataclass(frozen=True)
class IdentityCheck:
    """Result of one coefficient-level identity check.

    ``passed`` is None when the check was skipped because the estimands
    involved resolved to different weight pairs (sample-size schemes).
    """

    name: str
    passed: Optional[bool]
    max_discrepancy: Optional[float]
    note: str = ""


def _check(name: str, lhs: np.ndarray, rhs: np.ndarray, tol: float) -> IdentityCheck:
    disc = float(np.max(np.abs(lhs - rhs)))
    return IdentityCheck(name, disc <= tol, disc)


def verify_identities(weights: WeightScheme,
                      cell_counts: Optional[Sequence[float]] = None,
                      tol: float = 1e-12) -> list[IdentityCheck]:
    """Check the decomposition identities at the coefficient level.

    (a) theta1_tilde = w1*theta1 + w2*theta7
    (b) theta3 = theta1_tilde - theta8
    (c) theta2 = w1*theta5 + w2*theta6

    (a) and (c) use the pair resolved for the left-hand estimand; (b)
    relates three estimands and is skipped with a notice when their
    resolved pairs differ.
    """
    c = build_all_contrasts(weights, cell_counts)
    checks = []

    w1, w2 = c["theta1_tilde"].resolved
    checks.append(_check(
        "theta1_tilde = w1*theta1 + w2*theta7",
        c["theta1_tilde"].coefficients,
        w1 * c["theta1"].coefficients + w2 * c["theta7"].coefficients, tol))

    pairs = {c[name].resolved for name in ("theta1_tilde", "theta3", "theta8")}
    if len(pairs) == 1:
        checks.append(_check(
            "theta3 = theta1_tilde - theta8",
            c["theta3"].coefficients,
            c["theta1_tilde"].coefficients - c["theta8"].coefficients, tol))
    else:
        checks.append(IdentityCheck(
            "theta3 = theta1_tilde - theta8", None, None,
            "skipped: estimands resolved to different weight pairs "
            "(per-stratum sample-size weights)"))

    w1, w2 = c["theta2"].resolved
    checks.append(_check(
        "theta2 = w1*theta5 + w2*theta6",
        c["theta2"].coefficients,
        w1 * c["theta5"].coefficients + w2 * c["theta6"].coefficients, tol))
    return checks
