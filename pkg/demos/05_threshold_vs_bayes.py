"""Head-to-head: threshold analysis against the Bayesian posterior.

Runs the conventional pipeline (threshold, run histograms, exponential
fits) over a sweep of thresholds and bin counts on an easy trace with well
separated on and off bands, then checks the sweep's scatter against the
Bayesian credible regions for the same data.
"""

import numpy as np

from blinkinfer import (
    EmissionRates,
    GridAxis,
    GridSpec,
    SwitchProbs,
    credible_regions,
    evaluate_grid,
    inference_error,
    literature_thresholds,
    sim_dtmc_single,
    threshold_sweep,
)

TRUE_ALPHA, TRUE_BETA = 0.02, 0.05


def main():
    emissions = EmissionRates(mu=2.0, lam=30.0)
    res = sim_dtmc_single(SwitchProbs(TRUE_ALPHA, TRUE_BETA, 1), emissions, 5000, seed=101)

    rules = literature_thresholds(res.trace)
    print("threshold rules found in use:")
    print(f"  minimum between peaks : {rules.min_between_peaks}")
    print(f"  background + 2 sigma  : {rules.bg_mean_plus_2sd:.2f}")
    print(f"  background tail < 1   : {rules.bg_tail_below_one}")
    print(f"  midpoint of peaks     : {rules.midpoint_of_peaks:.2f}")

    sweep = threshold_sweep(res.trace, range(15, 25), range(8, 13),
                            summary_range=(17, 21))
    s = sweep.summary
    print(f"sweep over 10 thresholds x 5 binnings ({len(sweep.rows)} rows):")
    print(f"  alpha: {s.alpha_mean:.4f} +- {s.alpha_std:.4f}  (truth {TRUE_ALPHA})")
    print(f"  beta : {s.beta_mean:.4f} +- {s.beta_std:.4f}  (truth {TRUE_BETA})")

    grid = GridSpec(
        axes=(GridAxis("alpha", 0.001, 0.2, 80), GridAxis("beta", 0.001, 0.2, 80)),
        fixed={"lambda": 30.0, "mu": 2.0},
    )
    posterior = evaluate_grid(res.trace, "single", grid)
    bayes_err = inference_error((TRUE_ALPHA, TRUE_BETA), posterior)
    print(f"bayesian mode ({posterior.mode[0]:.4f}, {posterior.mode[1]:.4f}), "
          f"error {bayes_err:.4f}")

    region = credible_regions(posterior.switch_marginal(), [0.99])[0]
    av = grid.axis("alpha").values
    bv = grid.axis("beta").values
    inside = 0
    for row in sweep.rows:
        ia = int(np.argmin(np.abs(av - row.alpha_hat)))
        ib = int(np.argmin(np.abs(bv - row.beta_hat)))
        inside += bool(region.mask[ia, ib])
    print(f"sweep estimates inside the 99% credible region: {inside}/{len(sweep.rows)}")
    worse = sum(
        np.hypot(r.alpha_hat - TRUE_ALPHA, r.beta_hat - TRUE_BETA) > bayes_err
        for r in sweep.rows
    )
    print(f"sweep estimates with larger error than the mode: {worse}/{len(sweep.rows)}")


if __name__ == "__main__":
    main()
