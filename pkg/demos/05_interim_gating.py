"""Gate Part B activation on an interim look at Part A.

A conjugate normal prior on the Part A treatment effect is updated with
the interim difference in arm means; Part B activates when the
posterior probability of a positive effect clears a threshold.  When
the gate stays closed, the replicate is analyzed on Part A alone and
the real-world estimands are reported inestimable.
"""

import numpy as np

import factive as fv


def main():
    rule = fv.GatingRule(interim_fraction=0.5, prior_mean=0.0, prior_sd=1.0,
                         threshold=0.975)

    # the conjugate update on one worked interim result
    post_mean, post_sd, prob = fv.gate_posterior(0.5, 0.5, rule)
    print("interim estimate 0.5 (se 0.5) under a N(0, 1) prior:")
    print(f"  posterior N({post_mean:.4f}, {post_sd:.4f}^2), "
          f"Pr(effect > 0) = {prob:.4f} -> "
          f"{'activate' if prob >= rule.threshold else 'hold'} Part B")

    # activation is a power curve in the true Part A effect
    design = fv.DesignSpec(n_eligible=400, n_broader=260, seed=99,
                           part_b_gate=rule)
    print(f"\nactivation rate vs true effect ({design.n_eligible} eligible, "
          "interim at 50%, threshold 0.975):")
    for effect in (0.0, 0.2, 0.4, 0.6):
        means = {label: effect for label in
                 ("eligible_rct_treated", "eligible_crw_treated",
                  "broader_rct_treated", "broader_crw_treated")}
        model = fv.OutcomeModelSpec(cell_means=means)
        summary = fv.run_replicates(design, model, n_reps=400)
        print(f"  effect {effect:.1f}: {summary.activation_rate:5.1%}")

    # one closed-gate replicate up close: only Part A cells remain
    skeptical = fv.GatingRule(prior_mean=-2.0, prior_sd=0.1, threshold=0.975)
    closed = fv.DesignSpec(n_eligible=400, n_broader=260, seed=99,
                           part_b_gate=skeptical)
    data = fv.generate_outcomes(fv.randomize_cohort(closed),
                                fv.OutcomeModelSpec())
    rows = fv.interim_rows(data, skeptical.interim_fraction)
    decision = fv.apply_gate(data.outcome[rows], data.treatment[rows],
                             skeptical)
    print(f"\nskeptical prior N(-2, 0.1^2): Pr(effect > 0) = "
          f"{decision.prob_positive:.2e} -> gate stays closed")

    part_a_only = data.subset(data.in_part_a)
    report = fv.estimate_trial(part_a_only, fv.AnalysisConfig())
    occupied = [c.label for c, n in zip(fv.CELLS, part_a_only.cell_counts())
                if n > 0]
    print(f"analysis set keeps {occupied} only")
    for row in report.estimates:
        if row.estimate is None:
            print(f"  {row.estimand:>12}: inestimable "
                  f"({row.inestimable_reason})")
        else:
            print(f"  {row.estimand:>12}: {row.estimate: .3f} "
                  f"(se {row.se:.3f})")


if __name__ == "__main__":
    main()
