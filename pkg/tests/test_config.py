"""Scenario TOML parsing: happy path, defaults, and strictness."""

import textwrap

import numpy as np
import pytest

import factive as fv
from factive.config import tomllib


def parse(text):
    return fv.parse_scenario(tomllib.loads(textwrap.dedent(text)))


FULL = """
    [design]
    n_eligible = 120
    n_broader = 80
    p_part_a = 0.6
    p_rct_conditions_broader = 0.3
    p_treatment = 0.5
    seed = 7

    [design.part_b_gate]
    interim_fraction = 0.4
    prior_mean = 0.1
    prior_sd = 2.0
    threshold = 0.9

    [model]
    noise_sd = 0.8
    covariate_slopes = [0.5, -0.25]
    ice_effect = -1.5
    ice_strategy = "composite"

    [model.cell_means]
    eligible_rct_treated = 1.0
    broader_crw_control = -0.5

    [model.ice_probability]
    eligible_crw_treated = 0.25

    [model.covariate_means]
    eligible = [0.0, 1.0]
    broader = [0.5, 1.5]

    [model.covariate_sds]
    eligible = [1.0, 1.0]
    broader = [2.0, 0.5]

    [analysis]
    alpha = 0.1
    adjust_covariates = true
    variance = "robust"

    [analysis.weights]
    kind = "target-population"
    fraction_eligible = 0.7

    [simulation]
    n_reps = 50
    n_jobs = 2
    seed = 99

    [output]
    directory = "out"
    format = "text"
"""


def test_full_scenario_parses():
    sc = parse(FULL)

    assert sc.design.n_eligible == 120
    assert sc.design.n_broader == 80
    assert sc.design.p_part_a == 0.6
    assert sc.design.p_rct_conditions_broader == 0.3
    assert sc.design.seed == 99          # [simulation].seed wins
    gate = sc.design.part_b_gate
    assert (gate.interim_fraction, gate.prior_mean,
            gate.prior_sd, gate.threshold) == (0.4, 0.1, 2.0, 0.9)

    assert sc.model.noise_sd == 0.8
    assert sc.model.cell_means[fv.cell_index(1, 1, 1)] == 1.0
    assert sc.model.cell_means[fv.cell_index(0, 0, 0)] == -0.5
    assert sc.model.cell_means[fv.cell_index(1, 0, 1)] == 0.0
    assert sc.model.ice_probability[fv.cell_index(1, 0, 1)] == 0.25
    assert sc.model.ice_effect == -1.5
    assert sc.model.ice_strategy == "composite"
    assert np.array_equal(sc.model.covariate_slopes, [0.5, -0.25])
    assert np.array_equal(sc.model.class_covariate_means()["broader"],
                          [0.5, 1.5])
    assert np.array_equal(sc.model.class_covariate_sds()["eligible"],
                          [1.0, 1.0])

    assert sc.analysis.alpha == 0.1
    assert sc.analysis.adjust_covariates is True
    assert sc.analysis.variance == "robust"
    assert sc.analysis.weights.kind == "target-population"
    assert sc.analysis.weights.fraction_eligible == 0.7

    assert sc.n_reps == 50
    assert sc.n_jobs == 2
    assert sc.output_dir == "out"
    assert sc.output_format == "text"


def test_empty_document_gives_defaults():
    sc = parse("")
    assert sc.design == fv.DesignSpec()
    assert sc.analysis.weights.kind == "equal"
    assert sc.analysis.alpha == 0.05
    assert sc.n_reps == 1000
    assert sc.n_jobs == 1
    assert sc.output_dir is None
    assert sc.output_format == "json"
    assert np.array_equal(sc.model.cell_means, np.zeros(8))


def test_design_seed_used_when_simulation_seed_absent():
    sc = parse("[design]\nseed = 3\n")
    assert sc.design.seed == 3


def test_explicit_weights_parse():
    sc = parse("""
        [analysis.weights]
        kind = "explicit"
        w1 = 0.25
        w2 = 0.75
    """)
    assert sc.analysis.weights.resolve() == (0.25, 0.75)


@pytest.mark.parametrize("snippet,where", [
    ("nonsense = 1", "scenario.nonsense"),
    ("[design]\nn_patients = 4", "design.n_patients"),
    ("[design.part_b_gate]\nlook = 0.5", "design.part_b_gate.look"),
    ("[model]\nsigma = 1.0", "model.sigma"),
    ("[model.covariate_means]\nmiddle = [1.0]", "model.covariate_means.middle"),
    ("[analysis]\nlevel = 0.05", "analysis.level"),
    ("[analysis.weights]\nfraction = 0.5", "analysis.weights.fraction"),
    ("[simulation]\nreps = 10", "simulation.reps"),
    ("[output]\npath = \"x\"", "output.path"),
])
def test_unknown_keys_are_named(snippet, where):
    with pytest.raises(fv.ConfigurationError, match="unknown key"):
        parse(snippet)
    with pytest.raises(fv.ConfigurationError, match=where.replace(".", r"\.")):
        parse(snippet)


@pytest.mark.parametrize("snippet,match", [
    ("[design]\nn_eligible = 1.5", "design.n_eligible"),
    ("[design]\nn_eligible = true", "design.n_eligible"),
    ("[design]\np_part_a = \"half\"", "design.p_part_a"),
    ("[simulation]\nn_reps = \"many\"", "simulation.n_reps"),
    ("[analysis]\nadjust_covariates = 1", "analysis.adjust_covariates"),
    ("[model]\ncovariate_slopes = [1.0, \"a\"]", "model.covariate_slopes"),
    ("[model.cell_means]\neligible_rct_treated = \"big\"",
     r"model.cell_means.eligible_rct_treated"),
])
def test_wrong_types_are_named(snippet, match):
    with pytest.raises(fv.ConfigurationError, match=match.replace(".", r"\.")):
        parse(snippet)


def test_unknown_cell_label_lists_the_valid_ones():
    with pytest.raises(fv.ConfigurationError,
                       match="unknown cell label") as err:
        parse("[model.cell_means]\neligible_rct_dosed = 1.0")
    assert "eligible_rct_treated" in str(err.value)


def test_bad_gate_values_are_rejected_at_parse_time():
    with pytest.raises(fv.ConfigurationError, match="threshold"):
        parse("[design.part_b_gate]\nthreshold = 1.0")


def test_bad_weight_kind_is_rejected():
    with pytest.raises(fv.ConfigurationError, match="unknown scheme"):
        parse("[analysis.weights]\nkind = \"optimal\"")


def test_bad_output_format_is_rejected():
    with pytest.raises(fv.ConfigurationError, match="output.format"):
        parse("[output]\nformat = \"yaml\"")


def test_section_must_be_a_table():
    with pytest.raises(fv.ConfigurationError, match="must be a table"):
        parse("design = 4")
    with pytest.raises(fv.ConfigurationError, match="must be a table"):
        parse("[analysis]\nweights = 3")


def test_load_scenario_from_file(tmp_path):
    path = tmp_path / "scenario.toml"
    path.write_text(textwrap.dedent(FULL))
    sc = fv.load_scenario(path)
    assert sc.design.n_eligible == 120
    assert sc.output_format == "text"


def test_load_scenario_reports_syntax_errors(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text("[design\nseed = 1\n")
    with pytest.raises(fv.ConfigurationError, match="broken.toml"):
        fv.load_scenario(path)
