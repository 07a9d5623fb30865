"""Simulation and inference for augmented randomized trial designs.

The package models a two-part design: a core randomized trial run under
strictly controlled conditions, augmented by a concurrent part run under
close-to-real-world conditions that also admits a broader patient
population.  It provides the randomization engine, a saturated-cell
outcome model with closed-form truth, contrast-based estimation with
pooled or robust variances, and replicated simulation of operating
characteristics, including an interim Bayesian gate for the augmentation.
"""

from .cells import CELL_LABELS, CELLS, N_CELLS, Cell, cell_index
from .config import Scenario, load_scenario, parse_scenario
from .design import (DesignSpec, Diagnostic, PatientRecord, TrialDataset,
                     ablate_to_plain_rct, dataset_header,
                     expected_cell_counts, randomize_cohort,
                     read_dataset_csv, require_valid_design,
                     validate_design, write_dataset_csv)
from .errors import (ConfigurationError, DataError, EstimationError,
                     FactiveError, IdentifiabilityError, StateError)
from .estimands import (ESTIMANDS, WEIGHTED_ESTIMANDS, EstimandSpec,
                        IdentityCheck, WeightScheme, build_all_contrasts,
                        build_contrast, contrast_matrix, verify_identities,
                        write_contrast_matrix_csv)
from .inference import (AnalysisConfig, DesignMatrixBundle, EstimandEstimate,
                        EstimateReport, FitResult, build_design_matrix,
                        estimate_estimands, estimate_from_csv,
                        estimate_trial, fit_saturated)
from ._rng import CounterStreams
from .montecarlo import (GateDecision, GatingRule, ReplicateResult,
                         SimulationSummary, apply_gate, gate_posterior,
                         interim_rows, run_replicates,
                         write_replicates_csv)
from .outcomes import (OutcomeModelSpec, TrueEstimands, generate_outcomes,
                       true_estimands)

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig", "Cell", "CELL_LABELS", "CELLS", "ConfigurationError",
    "DataError", "DesignSpec", "Diagnostic", "ESTIMANDS", "EstimandEstimate",
    "DesignMatrixBundle",
    "EstimandSpec", "EstimateReport", "EstimationError", "FactiveError",
    "FitResult", "GateDecision", "GatingRule", "IdentifiabilityError",
    "IdentityCheck", "N_CELLS", "OutcomeModelSpec", "PatientRecord",
    "ReplicateResult", "Scenario", "SimulationSummary", "StateError",
    "TrialDataset", "TrueEstimands", "WEIGHTED_ESTIMANDS", "WeightScheme",
    "ablate_to_plain_rct",
    "CounterStreams",
    "apply_gate", "build_all_contrasts", "build_contrast",
    "build_design_matrix", "cell_index",
    "contrast_matrix", "dataset_header", "estimate_estimands",
    "estimate_from_csv",
    "estimate_trial", "expected_cell_counts", "fit_saturated",
    "gate_posterior", "generate_outcomes", "interim_rows",
    "load_scenario", "parse_scenario",
    "randomize_cohort", "read_dataset_csv", "require_valid_design",
    "run_replicates", "true_estimands", "validate_design",
    "verify_identities", "write_contrast_matrix_csv", "write_dataset_csv",
    "write_replicates_csv",
]
