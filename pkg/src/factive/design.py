"""Population structure and nested randomization for augmented trials.

An augmented trial screens two patient classes: those eligible for the core
RCT and those from a broader population.  Eligible patients are randomized
between Part A (the core RCT, run under strictly controlled conditions) and
Part B (run under close-to-real-world conditions); broader patients enter
Part B only and are randomized between the two condition sets.  Everyone is
then randomized between experimental treatment and control.

Randomization is simple (independent Bernoulli per patient) and fully
deterministic given (spec, seed): each decision reads a dedicated
counter-based stream, so the assignment of one patient never depends on how
many other patients exist or on the order decisions are evaluated in.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from . import _rng
from .cells import CELL_LABELS, CELLS, N_CELLS
from .errors import ConfigurationError, DataError


class EligibilityClass(enum.Enum):
    ELIGIBLE = 1
    BROADER = 0


class Conditions(enum.Enum):
    RCT = 1   # strictly controlled trial conditions
    CRW = 0   # close-to-real-world conditions


class TreatmentArm(enum.Enum):
    EXPERIMENTAL = 1
    CONTROL = 0


class Part(enum.Enum):
    A = "A"
    B = "B"


@dataclass(frozen=True)
class DesignSpec:
    """Cohort sizes, randomization probabilities and the master seed.

    Probabilities default to 0.5; actual ratios are a protocol choice and
    must be set per scenario.  ``part_b_gate`` optionally delays Part B
    behind an interim look at Part A (see :mod:`factive.montecarlo`).
    """

    n_eligible: int = 0
    n_broader: int = 0
    p_part_a: float = 0.5
    p_rct_conditions_broader: float = 0.5
    p_treatment: float = 0.5
    part_b_gate: Optional[object] = None  # montecarlo.GatingRule
    seed: int = 0


@dataclass(frozen=True)
class Diagnostic:
    """One validation finding; ``severity`` is 'error' or 'warning'."""

    severity: str
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.field}: {self.message}"


@dataclass(frozen=True)
class PatientRecord:
    """Row view of one subject."""

    id: int
    eligibility: EligibilityClass
    part: Part
    conditions: Conditions
    treatment: TreatmentArm
    covariates: np.ndarray
    outcome: Optional[float] = None
    ice_occurred: Optional[bool] = None


@dataclass(frozen=True)
class TrialDataset:
    """Columnar store of patient records plus design provenance.

    Arrays are aligned by row and must not be mutated after construction;
    derived datasets are produced by :meth:`with_outcomes` and
    :meth:`subset`.  ``outcome`` and ``ice`` are None until outcomes have
    been generated.
    """

    ids: np.ndarray          # (n,) int64, unique
    eligible: np.ndarray     # (n,) int8 in {1, 0}
    in_part_a: np.ndarray    # (n,) bool
    conditions: np.ndarray   # (n,) int8 in {1, 0}
    treatment: np.ndarray    # (n,) int8 in {1, 0}
    covariates: np.ndarray   # (n, k) float64
    outcome: Optional[np.ndarray] = None  # (n,) float64
    ice: Optional[np.ndarray] = None      # (n,) bool
    design: Optional[DesignSpec] = None
    replicate: int = 0

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]

    @property
    def has_outcomes(self) -> bool:
        return self.outcome is not None

    def cell_index(self) -> np.ndarray:
        """Canonical cell index per row."""
        return ((1 - self.eligible) * 4
                + (1 - self.conditions) * 2
                + (1 - self.treatment)).astype(np.intp)

    def cell_counts(self) -> np.ndarray:
        """Counts for the 8 (eligibility x conditions x treatment) cells."""
        return np.bincount(self.cell_index(), minlength=N_CELLS)

    def patient(self, row: int) -> PatientRecord:
        return PatientRecord(
            id=int(self.ids[row]),
            eligibility=EligibilityClass(int(self.eligible[row])),
            part=Part.A if self.in_part_a[row] else Part.B,
            conditions=Conditions(int(self.conditions[row])),
            treatment=TreatmentArm(int(self.treatment[row])),
            covariates=self.covariates[row],
            outcome=None if self.outcome is None else float(self.outcome[row]),
            ice_occurred=None if self.ice is None else bool(self.ice[row]),
        )

    def __iter__(self) -> Iterator[PatientRecord]:
        return (self.patient(i) for i in range(len(self)))

    def with_outcomes(self, covariates: np.ndarray, outcome: np.ndarray,
                      ice: np.ndarray) -> "TrialDataset":
        return dataclasses.replace(
            self, covariates=covariates, outcome=outcome, ice=ice)

    def subset(self, mask: np.ndarray) -> "TrialDataset":
        return dataclasses.replace(
            self,
            ids=self.ids[mask],
            eligible=self.eligible[mask],
            in_part_a=self.in_part_a[mask],
            conditions=self.conditions[mask],
            treatment=self.treatment[mask],
            covariates=self.covariates[mask],
            outcome=None if self.outcome is None else self.outcome[mask],
            ice=None if self.ice is None else self.ice[mask],
        )


def _probability_error(name: str, value: float, lo: float, hi: float,
                       lo_open: bool = False, hi_open: bool = False) -> Optional[Diagnostic]:
    below = value < lo or (lo_open and value == lo)
    above = value > hi or (hi_open and value == hi)
    if below or above:
        left = "(" if lo_open else "["
        right = ")" if hi_open else "]"
        return Diagnostic("error", name,
                          f"must lie in {left}{lo}, {hi}{right}, got {value}")
    return None


def expected_cell_counts(spec: DesignSpec) -> np.ndarray:
    """Expected count per cell implied by the design's probabilities."""
    ne, nb = spec.n_eligible, spec.n_broader
    pa, pb, pt = spec.p_part_a, spec.p_rct_conditions_broader, spec.p_treatment
    strata = {
        (1, 1): ne * pa,            # eligible under RCT conditions (Part A)
        (1, 0): ne * (1.0 - pa),    # eligible under cRW conditions (Part B)
        (0, 1): nb * pb,            # broader under RCT conditions
        (0, 0): nb * (1.0 - pb),    # broader under cRW conditions
    }
    out = np.empty(N_CELLS)
    for i, cell in enumerate(CELLS):
        base = strata[(cell.eligible, cell.conditions)]
        out[i] = base * (pt if cell.treatment else 1.0 - pt)
    return out


def validate_design(spec: DesignSpec) -> list[Diagnostic]:
    """Check field ranges and enumerate estimands made inestimable by cells
    that are empty in expectation.

    Returns an empty list for a fully valid, fully identified design.
    Warnings assume nonzero weight on both patient classes; degenerate
    weight schemes can rescue individual estimands.
    """
    diags: list[Diagnostic] = []
    for name in ("n_eligible", "n_broader"):
        value = getattr(spec, name)
        if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
            diags.append(Diagnostic("error", name, f"must be an integer, got {value!r}"))
        elif value < 0:
            diags.append(Diagnostic("error", name, f"must be >= 0, got {value}"))
    for name in ("p_part_a", "p_rct_conditions_broader"):
        d = _probability_error(name, getattr(spec, name), 0.0, 1.0)
        if d:
            diags.append(d)
    if spec.p_treatment == 0.0:
        diags.append(Diagnostic(
            "error", "p_treatment",
            "is 0: no experimental arm, so no treatment effect is defined"))
    elif spec.p_treatment == 1.0:
        diags.append(Diagnostic(
            "error", "p_treatment",
            "is 1: no control arm, so no treatment effect is defined"))
    else:
        d = _probability_error("p_treatment", spec.p_treatment, 0.0, 1.0,
                               lo_open=True, hi_open=True)
        if d:
            diags.append(d)
    if not isinstance(spec.seed, (int, np.integer)) or isinstance(spec.seed, bool):
        diags.append(Diagnostic("error", "seed", f"must be an integer, got {spec.seed!r}"))
    elif spec.seed < 0:
        diags.append(Diagnostic("error", "seed", f"must be >= 0, got {spec.seed}"))

    gate = spec.part_b_gate
    if gate is not None:
        f = getattr(gate, "interim_fraction", None)
        if f is None or not 0.0 < f <= 1.0:
            diags.append(Diagnostic("error", "part_b_gate.interim_fraction",
                                    f"must lie in (0, 1], got {f}"))
        sd = getattr(gate, "prior_sd", None)
        if sd is None or not sd > 0.0:
            diags.append(Diagnostic("error", "part_b_gate.prior_sd",
                                    f"must be > 0, got {sd}"))
        thr = getattr(gate, "threshold", None)
        if thr is None or not 0.0 <= thr < 1.0:
            diags.append(Diagnostic("error", "part_b_gate.threshold",
                                    f"must lie in [0, 1), got {thr}"))

    if any(d.severity == "error" for d in diags):
        return diags

    # Identifiability: an estimand whose contrast touches a cell that is
    # empty in expectation cannot be estimated.  Equal weights stand in for
    # any scheme that keeps both classes in play.
    from .estimands import ESTIMANDS, WeightScheme, build_contrast

    expected = expected_cell_counts(spec)
    empty = expected == 0.0
    if empty.any():
        labels = [CELL_LABELS[i] for i in np.flatnonzero(empty)]
        diags.append(Diagnostic(
            "warning", "design",
            "cells empty in expectation: " + ", ".join(labels)))
        equal = WeightScheme.equal()
        for name in ESTIMANDS:
            contrast = build_contrast(name, equal)
            touched = (contrast.coefficients != 0.0) & empty
            if touched.any():
                labels = [CELL_LABELS[i] for i in np.flatnonzero(touched)]
                diags.append(Diagnostic(
                    "warning", name,
                    "inestimable: requires empty cell(s) " + ", ".join(labels)))
    return diags


def require_valid_design(spec: DesignSpec) -> None:
    """Raise :class:`ConfigurationError` naming the first invalid field."""
    errors = [d for d in validate_design(spec) if d.severity == "error"]
    if errors:
        raise ConfigurationError("; ".join(f"{d.field}: {d.message}" for d in errors))


def randomize_cohort(spec: DesignSpec,
                     streams: Optional[_rng.CounterStreams] = None) -> TrialDataset:
    """Run the nested randomization and return the allocated cohort.

    Eligible patients are assigned Part A with probability ``p_part_a``
    (and are then under RCT conditions) or Part B (cRW conditions);
    broader patients all enter Part B and receive RCT conditions with
    probability ``p_rct_conditions_broader``.  Every patient is then
    assigned the experimental arm with probability ``p_treatment``.

    A pure function of (spec, streams); by default streams derive from
    ``spec.seed`` with replicate index 0.
    """
    require_valid_design(spec)
    if streams is None:
        streams = _rng.CounterStreams(spec.seed, 0)

    ne, nb = spec.n_eligible, spec.n_broader
    part_a = streams.uniforms(_rng.PART_ELIGIBLE, ne) < spec.p_part_a
    cond_broader = (streams.uniforms(_rng.CONDITIONS_BROADER, nb)
                    < spec.p_rct_conditions_broader)
    treat_eligible = streams.uniforms(_rng.TREATMENT_ELIGIBLE, ne) < spec.p_treatment
    treat_broader = streams.uniforms(_rng.TREATMENT_BROADER, nb) < spec.p_treatment

    n = ne + nb
    eligible = np.zeros(n, dtype=np.int8)
    eligible[:ne] = 1
    in_part_a = np.zeros(n, dtype=bool)
    in_part_a[:ne] = part_a
    conditions = np.zeros(n, dtype=np.int8)
    conditions[:ne] = part_a          # eligible: P=1 iff Part A
    conditions[ne:] = cond_broader
    treatment = np.zeros(n, dtype=np.int8)
    treatment[:ne] = treat_eligible
    treatment[ne:] = treat_broader

    return TrialDataset(
        ids=np.arange(n, dtype=np.int64),
        eligible=eligible,
        in_part_a=in_part_a,
        conditions=conditions,
        treatment=treatment,
        covariates=np.empty((n, 0)),
        design=spec,
        replicate=streams.replicate,
    )


def ablate_to_plain_rct(spec: DesignSpec) -> DesignSpec:
    """Strip the close-to-real-world components, leaving the core RCT.

    The result enrolls no broader patients and sends every eligible
    patient to Part A; all other fields are preserved.
    """
    require_valid_design(spec)
    return dataclasses.replace(spec, n_broader=0, p_part_a=1.0)


# ---------------------------------------------------------------------------
# CSV interchange.
#
# Header: id,eligible,part,conditions,treatment,x1..xk,y,ice
# eligible/conditions/treatment/ice are 1/0, part is A/B, y and ice are
# empty until outcomes have been generated.  Floats are written with 17
# significant digits so the round trip is lossless.

_FIXED_HEAD = ("id", "eligible", "part", "conditions", "treatment")


def dataset_header(n_covariates: int) -> list[str]:
    return (list(_FIXED_HEAD)
            + [f"x{j + 1}" for j in range(n_covariates)]
            + ["y", "ice"])


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_dataset_csv(data: TrialDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        _write_dataset(data, fh)


def _write_dataset(data: TrialDataset, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(dataset_header(data.n_covariates))
    gen = data.has_outcomes
    for i in range(len(data)):
        row = [
            str(int(data.ids[i])),
            str(int(data.eligible[i])),
            "A" if data.in_part_a[i] else "B",
            str(int(data.conditions[i])),
            str(int(data.treatment[i])),
        ]
        row.extend(_fmt(v) for v in data.covariates[i])
        row.append(_fmt(data.outcome[i]) if gen else "")
        row.append(str(int(data.ice[i])) if gen else "")
        writer.writerow(row)


def _parse_int(text: str, allowed: Sequence[int], line: int, column: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise DataError(f"line {line}: column '{column}': expected an integer, "
                        f"got {text!r}") from None
    if value not in allowed:
        raise DataError(f"line {line}: column '{column}': expected one of "
                        f"{sorted(allowed)}, got {value}")
    return value


def read_dataset_csv(path) -> TrialDataset:
    """Read a dataset written by :func:`write_dataset_csv`.

    Schema and structural invariants are enforced row by row; violations
    raise :class:`DataError` with the offending line and column.
    """
    with open(path, newline="") as fh:
        return _read_dataset(fh)


def _read_dataset(fh) -> TrialDataset:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("line 1: missing header row") from None
    if len(header) < 7 or tuple(header[:5]) != _FIXED_HEAD \
            or header[-2:] != ["y", "ice"]:
        raise DataError(
            "line 1: header must be id,eligible,part,conditions,treatment,"
            "x1..xk,y,ice")
    x_names = header[5:-2]
    expected_x = [f"x{j + 1}" for j in range(len(x_names))]
    if x_names != expected_x:
        raise DataError(f"line 1: covariate columns must be {expected_x}, "
                        f"got {x_names}")
    k = len(x_names)

    ids, eligible, part_a, conditions, treatment = [], [], [], [], []
    covariates, outcomes, ices = [], [], []
    for line, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise DataError(f"line {line}: expected {len(header)} fields, "
                            f"got {len(row)}")
        try:
            ids.append(int(row[0]))
        except ValueError:
            raise DataError(f"line {line}: column 'id': expected an integer, "
                            f"got {row[0]!r}") from None
        e = _parse_int(row[1], (0, 1), line, "eligible")
        if row[2] not in ("A", "B"):
            raise DataError(f"line {line}: column 'part': expected A or B, "
                            f"got {row[2]!r}")
        a = row[2] == "A"
        p = _parse_int(row[3], (0, 1), line, "conditions")
        t = _parse_int(row[4], (0, 1), line, "treatment")
        if a and (e != 1 or p != 1):
            raise DataError(f"line {line}: column 'part': Part A rows must be "
                            "eligible and under RCT conditions")
        if e == 1 and not a and p != 0:
            raise DataError(f"line {line}: column 'conditions': eligible "
                            "Part B rows must be under cRW conditions")
        try:
            covariates.append([float(v) for v in row[5:5 + k]])
        except ValueError:
            raise DataError(f"line {line}: covariate columns must be "
                            "floating point") from None
        y_text, ice_text = row[5 + k], row[6 + k]
        if (y_text == "") != (ice_text == ""):
            raise DataError(f"line {line}: columns 'y' and 'ice' must both be "
                            "present or both be empty")
        if y_text == "":
            outcomes.append(None)
            ices.append(None)
        else:
            try:
                outcomes.append(float(y_text))
            except ValueError:
                raise DataError(f"line {line}: column 'y': expected a float, "
                                f"got {y_text!r}") from None
            ices.append(_parse_int(ice_text, (0, 1), line, "ice"))
        eligible.append(e)
        part_a.append(a)
        conditions.append(p)
        treatment.append(t)

    n = len(ids)
    if len(set(ids)) != n:
        raise DataError("column 'id': patient ids must be unique")
    generated = [y is not None for y in outcomes]
    if any(generated) and not all(generated):
        first = generated.index(False) + 2
        raise DataError(f"line {first}: column 'y': outcomes must be present "
                        "for all rows or none")

    has_y = all(generated)  # vacuously true for a header-only file
    return TrialDataset(
        ids=np.asarray(ids, dtype=np.int64),
        eligible=np.asarray(eligible, dtype=np.int8),
        in_part_a=np.asarray(part_a, dtype=bool),
        conditions=np.asarray(conditions, dtype=np.int8),
        treatment=np.asarray(treatment, dtype=np.int8),
        covariates=np.asarray(covariates, dtype=np.float64).reshape(n, k),
        outcome=np.asarray(outcomes, dtype=np.float64) if has_y else None,
        ice=np.asarray(ices, dtype=bool) if has_y else None,
    )
