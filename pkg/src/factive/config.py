"""Scenario files: one TOML document describing a full simulation setup.

Sections:

    [design]                cohort sizes, probabilities, seed
    [design.part_b_gate]    optional interim activation rule
    [model]                 noise, slopes, ICE handling
    [model.cell_means]      per-cell means keyed by cell label
    [model.covariate_means] per-class covariate location (and .covariate_sds)
    [model.ice_probability] per-cell event probability (missing cells: 0)
    [analysis]              alpha, variance, covariate adjustment
    [analysis.weights]      class weight scheme
    [simulation]            n_reps, n_jobs, seed (overrides design.seed)
    [output]                directory, format

Parsing is strict: unknown keys and wrong value types are configuration
errors that name the offending section and key.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .cells import CELL_LABELS
from .design import DesignSpec
from .errors import ConfigurationError
from .estimands import WeightScheme
from .inference import AnalysisConfig
from .montecarlo import GatingRule
from .outcomes import OutcomeModelSpec


@dataclass(frozen=True)
class Scenario:
    """Everything a simulation run needs, as parsed from one TOML file."""

    design: DesignSpec
    model: OutcomeModelSpec
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    n_reps: int = 1000
    n_jobs: int = 1
    output_dir: Optional[str] = None
    output_format: str = "json"


def _require_table(raw: dict, name: str) -> dict:
    section = raw.get(name, {})
    if not isinstance(section, dict):
        raise ConfigurationError(f"[{name}] must be a table")
    return section


def _reject_unknown(section: dict, known: tuple, where: str) -> None:
    unknown = sorted(set(section) - set(known))
    if unknown:
        raise ConfigurationError(
            "unknown key(s): " + ", ".join(f"{where}.{k}" for k in unknown))


def _typed(section: dict, key: str, kind, where: str, default):
    if key not in section:
        return default
    value = section[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is int and isinstance(value, bool):
        raise ConfigurationError(f"{where}.{key}: expected an integer, "
                                 f"got {value!r}")
    if not isinstance(value, kind):
        raise ConfigurationError(
            f"{where}.{key}: expected {kind.__name__}, got {value!r}")
    return value


def _float_list(section: dict, key: str, where: str, default):
    if key not in section:
        return default
    value = section[key]
    if not isinstance(value, list) or any(
            isinstance(v, bool) or not isinstance(v, (int, float))
            for v in value):
        raise ConfigurationError(
            f"{where}.{key}: expected a list of numbers, got {value!r}")
    return [float(v) for v in value]


def _cell_table(section: dict, key: str, where: str) -> dict:
    table = section.get(key, {})
    if not isinstance(table, dict):
        raise ConfigurationError(f"[{where}.{key}] must be a table")
    out = {}
    for label, value in table.items():
        if label not in CELL_LABELS:
            raise ConfigurationError(
                f"{where}.{key}.{label}: unknown cell label; expected one of "
                + ", ".join(CELL_LABELS))
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(
                f"{where}.{key}.{label}: expected a number, got {value!r}")
        out[label] = float(value)
    return out


def _class_table(section: dict, key: str, where: str):
    if key not in section:
        return None
    table = section[key]
    if not isinstance(table, dict):
        raise ConfigurationError(f"[{where}.{key}] must be a table")
    _reject_unknown(table, ("eligible", "broader"), f"{where}.{key}")
    return {cls: _float_list(table, cls, f"{where}.{key}", None)
            for cls in table}


def _parse_design(raw: dict) -> DesignSpec:
    section = _require_table(raw, "design")
    known = ("n_eligible", "n_broader", "p_part_a",
             "p_rct_conditions_broader", "p_treatment", "seed", "part_b_gate")
    _reject_unknown(section, known, "design")
    gate = None
    if "part_b_gate" in section:
        sub = section["part_b_gate"]
        if not isinstance(sub, dict):
            raise ConfigurationError("[design.part_b_gate] must be a table")
        gate_keys = ("interim_fraction", "prior_mean", "prior_sd", "threshold")
        _reject_unknown(sub, gate_keys, "design.part_b_gate")
        defaults = GatingRule()
        gate = GatingRule(
            interim_fraction=_typed(sub, "interim_fraction", float,
                                    "design.part_b_gate",
                                    defaults.interim_fraction),
            prior_mean=_typed(sub, "prior_mean", float, "design.part_b_gate",
                              defaults.prior_mean),
            prior_sd=_typed(sub, "prior_sd", float, "design.part_b_gate",
                            defaults.prior_sd),
            threshold=_typed(sub, "threshold", float, "design.part_b_gate",
                             defaults.threshold),
        )
    return DesignSpec(
        n_eligible=_typed(section, "n_eligible", int, "design", 0),
        n_broader=_typed(section, "n_broader", int, "design", 0),
        p_part_a=_typed(section, "p_part_a", float, "design", 0.5),
        p_rct_conditions_broader=_typed(section, "p_rct_conditions_broader",
                                        float, "design", 0.5),
        p_treatment=_typed(section, "p_treatment", float, "design", 0.5),
        part_b_gate=gate,
        seed=_typed(section, "seed", int, "design", 0),
    )


def _parse_model(raw: dict) -> OutcomeModelSpec:
    section = _require_table(raw, "model")
    known = ("cell_means", "covariate_slopes", "covariate_means",
             "covariate_sds", "noise_sd", "ice_probability", "ice_effect",
             "ice_strategy")
    _reject_unknown(section, known, "model")
    return OutcomeModelSpec(
        cell_means=_cell_table(section, "cell_means", "model"),
        covariate_slopes=_float_list(section, "covariate_slopes", "model", []),
        covariate_means=_class_table(section, "covariate_means", "model"),
        covariate_sds=_class_table(section, "covariate_sds", "model"),
        noise_sd=_typed(section, "noise_sd", float, "model", 1.0),
        ice_probability=_cell_table(section, "ice_probability", "model"),
        ice_effect=_typed(section, "ice_effect", float, "model", 0.0),
        ice_strategy=_typed(section, "ice_strategy", str, "model",
                            "treatment-policy"),
    )


def _parse_weights(section: dict) -> WeightScheme:
    if "weights" not in section:
        return WeightScheme.equal()
    sub = section["weights"]
    if not isinstance(sub, dict):
        raise ConfigurationError("[analysis.weights] must be a table")
    _reject_unknown(sub, ("kind", "fraction_eligible", "w1", "w2"),
                    "analysis.weights")
    return WeightScheme(
        kind=_typed(sub, "kind", str, "analysis.weights", "equal"),
        fraction_eligible=_typed(sub, "fraction_eligible", float,
                                 "analysis.weights", None),
        w1=_typed(sub, "w1", float, "analysis.weights", None),
        w2=_typed(sub, "w2", float, "analysis.weights", None),
    )


def _parse_analysis(raw: dict) -> AnalysisConfig:
    section = _require_table(raw, "analysis")
    known = ("weights", "alpha", "adjust_covariates", "variance",
             "ice_strategy")
    _reject_unknown(section, known, "analysis")
    return AnalysisConfig(
        weights=_parse_weights(section),
        alpha=_typed(section, "alpha", float, "analysis", 0.05),
        adjust_covariates=_typed(section, "adjust_covariates", bool,
                                 "analysis", False),
        variance=_typed(section, "variance", str, "analysis", "pooled"),
        ice_strategy=_typed(section, "ice_strategy", str, "analysis",
                            "treatment-policy"),
    )


def parse_scenario(raw: dict) -> Scenario:
    """Build a scenario from an already-decoded TOML document."""
    if not isinstance(raw, dict):
        raise ConfigurationError("scenario must be a TOML document")
    _reject_unknown(raw, ("design", "model", "analysis", "simulation",
                          "output"), "scenario")
    design = _parse_design(raw)
    model = _parse_model(raw)
    analysis = _parse_analysis(raw)

    sim = _require_table(raw, "simulation")
    _reject_unknown(sim, ("n_reps", "n_jobs", "seed"), "simulation")
    if "seed" in sim:
        design = dataclasses.replace(
            design, seed=_typed(sim, "seed", int, "simulation", design.seed))

    out = _require_table(raw, "output")
    _reject_unknown(out, ("directory", "format"), "output")
    output_format = _typed(out, "format", str, "output", "json")
    if output_format not in ("json", "text", "csv"):
        raise ConfigurationError(
            f"output.format: expected json, text or csv, got {output_format!r}")

    return Scenario(
        design=design,
        model=model,
        analysis=analysis,
        n_reps=_typed(sim, "n_reps", int, "simulation", 1000),
        n_jobs=_typed(sim, "n_jobs", int, "simulation", 1),
        output_dir=_typed(out, "directory", str, "output", None),
        output_format=output_format,
    )


def load_scenario(path) -> Scenario:
    """Read and parse a scenario TOML file."""
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as err:
            raise ConfigurationError(f"{path}: {err}") from None
    return parse_scenario(raw)
