"""Closed-form estimand values and the algebra connecting them.

Nine estimands are defined as contrasts over the eight cell means: five
simple two-cell differences (theta1, theta4..theta7) and four weighted
combinations (theta1_tilde, theta2, theta3, theta8).  With one shared
(w1, w2) pair, theta1_tilde = w1*theta1 + w2*theta7 and
theta3 = theta1_tilde - theta8 hold as exact identities.

The script evaluates truth under several weight schemes and shows how a
composite intercurrent-event strategy folds the event into the cell
means while a treatment-policy strategy leaves them alone.
"""

import factive as fv

CELL_MEANS = {
    "eligible_rct_treated": 2.0,
    "eligible_rct_control": 0.2,
    "eligible_crw_treated": 1.2,
    "eligible_crw_control": -0.1,
    "broader_rct_treated": 1.5,
    "broader_rct_control": 0.0,
    "broader_crw_treated": 0.8,
    "broader_crw_control": -0.2,
}


def print_truth(label, truth):
    print(f"\n{label}")
    for name, value in truth.as_dict().items():
        print(f"  {name:>12}: {value: .4f}")


def main():
    model = fv.OutcomeModelSpec(cell_means=CELL_MEANS, noise_sd=1.0)

    for scheme in (fv.WeightScheme.equal(),
                   fv.WeightScheme.target_population(0.8),
                   fv.WeightScheme.explicit(0.3, 0.7)):
        truth = fv.true_estimands(model, scheme)
        print_truth(f"weights = {scheme.kind}", truth)
        for check in fv.verify_identities(scheme):
            print(f"  identity holds: {check.name}")

    # sample-size weights only resolve against realized or expected counts
    design = fv.DesignSpec(600, 400, seed=7)
    truth = fv.true_estimands(model, fv.WeightScheme.sample_size(),
                              fv.expected_cell_counts(design))
    print_truth("weights = sample-size (bound to expected counts)", truth)

    # an intercurrent event hitting treated eligible cRW patients:
    # composite folds the penalty into the estimand, policy does not
    ice = {"eligible_crw_treated": 0.4}
    for strategy in ("composite", "treatment-policy"):
        model_ice = fv.OutcomeModelSpec(cell_means=CELL_MEANS, noise_sd=1.0,
                                        ice_probability=ice, ice_effect=-2.0,
                                        ice_strategy=strategy)
        truth = fv.true_estimands(model_ice)
        print(f"\nice_strategy={strategy}: theta5 = {truth.theta5:.3f}, "
              f"theta8 = {truth.theta8:.3f}")


if __name__ == "__main__":
    main()
