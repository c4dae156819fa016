"""Show the stepped model converging to the continuous-time kernel.

Doubling the number of sub-steps halves the gap between the convolution
construction and the exact integral kernel, and the inference error of the
stepped model shrinks accordingly.
"""

import numpy as np

from blinkinfer import (
    EmissionRates,
    GridAxis,
    GridSpec,
    QuadratureSpec,
    SwitchRates,
    count_state_prob_ctmc,
    evaluate_grid,
    inference_error,
    interval_distributions,
    sim_ctmc,
)


def main():
    rates = SwitchRates(2.0, 2.0)
    emissions = EmissionRates(mu=2.0, lam=20.0)
    quad = QuadratureSpec()

    reference = np.empty((2, 2, 61))
    for a in (0, 1):
        for b in (0, 1):
            for c in range(61):
                reference[a, b, c] = count_state_prob_ctmc(
                    c, a, b, rates, emissions, quad
                )

    print("kernel distance to the continuous model:")
    for d in (1, 2, 4, 8, 16, 32):
        dist = interval_distributions(d, rates, emissions, 127)
        sup = float(np.max(np.abs(dist.probs[:, :, :61] - reference)))
        print(f"  d={d:3d}: sup-norm {sup:.2e}")

    res = sim_ctmc(rates, emissions, 3000, seed=77)
    grid = GridSpec(
        axes=(
            GridAxis("r_alpha", 0.5, 4.0, 57),
            GridAxis("r_beta", 0.5, 4.0, 57),
        ),
        fixed={"lambda": 20.0, "mu": 2.0},
    )
    print("inference error on one fast-switching trace:")
    for d in (1, 2, 4, 8, 16):
        posterior = evaluate_grid(res.trace, "multistep", grid, d=d)
        err = inference_error((2.0, 2.0), posterior)
        print(f"  d={d:3d}: mode ({posterior.mode[0]:.2f}, {posterior.mode[1]:.2f}),"
              f" error {err:.3f}")


if __name__ == "__main__":
    main()
