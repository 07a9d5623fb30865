"""Shared builders for the test suite."""

import numpy as np
import pytest

import factive as fv

# An interaction-rich set of cell means used across tests: treatment,
# conditions and eligibility all matter.
RICH_CELL_MEANS = {
    "eligible_rct_treated": 2.0,
    "eligible_rct_control": 0.2,
    "eligible_crw_treated": 1.2,
    "eligible_crw_control": -0.1,
    "broader_rct_treated": 1.5,
    "broader_rct_control": 0.0,
    "broader_crw_treated": 0.8,
    "broader_crw_control": -0.2,
}

# Closed-form values under equal weights for RICH_CELL_MEANS.
RICH_TRUTH_EQUAL = {
    "theta1": 1.8,
    "theta1_tilde": 1.65,
    "theta2": 0.75,
    "theta3": 0.5,
    "theta4": 0.5,
    "theta5": 0.8,
    "theta6": 0.7,
    "theta7": 1.5,
    "theta8": 1.15,
}


def make_design(n_eligible=240, n_broader=160, seed=0, **kw):
    return fv.DesignSpec(n_eligible=n_eligible, n_broader=n_broader,
                         seed=seed, **kw)


def make_rich_model(**kw):
    return fv.OutcomeModelSpec(cell_means=RICH_CELL_MEANS, **kw)


def make_dataset(seed=0, n_eligible=240, n_broader=160, model=None, **kw):
    """One simulated dataset with outcomes attached."""
    design = make_design(n_eligible, n_broader, seed=seed, **kw)
    if model is None:
        model = make_rich_model()
    return fv.generate_outcomes(fv.randomize_cohort(design), model)


@pytest.fixture
def rich_model():
    return make_rich_model()


@pytest.fixture
def rich_dataset():
    return make_dataset(seed=20)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
