"""Generate example traces under the three switching models.

Shows the characteristic regimes: clearly separated on/off stretches at low
rates, noisy overlap when the fluorescence is weak, and washed-out traces
when the switching is fast compared to the detector interval.
"""

import numpy as np

from blinkinfer import (
    EmissionRates,
    SwitchProbs,
    SwitchRates,
    probs_from_rates,
    sim_ctmc,
    sim_dtmc_multi,
    sim_dtmc_single,
)


def describe(label, result):
    counts = result.trace.counts
    on = result.on_fractions.mean()
    print(f"{label:34s} N={counts.size}  counts {counts.min():3d}..{counts.max():3d}"
          f"  mean {counts.mean():6.2f}  time on {on:5.1%}")


def main():
    n = 2000

    # slow blinking, bright emitter: the classic two-band trace
    bright = EmissionRates(mu=2.0, lam=30.0)
    res = sim_dtmc_single(SwitchProbs(0.02, 0.05, 1), bright, n, seed=1)
    describe("slow blinking, bright", res)

    # same switching, dim fluorescence: the count bands overlap
    dim = EmissionRates(mu=6.0, lam=8.0)
    res = sim_dtmc_single(SwitchProbs(0.02, 0.05, 1), dim, n, seed=1)
    describe("slow blinking, dim", res)

    # continuous switching about twice per interval: no visible structure
    fast = EmissionRates(mu=2.0, lam=20.0)
    res = sim_ctmc(SwitchRates(2.0, 2.0), fast, n, seed=2)
    describe("fast continuous switching", res)
    interior = np.mean((res.on_fractions > 0) & (res.on_fractions < 1))
    print(f"    intervals containing a switch: {interior:.1%}")

    # stepped approximation to the same physics with 16 sub-steps
    probs = probs_from_rates(SwitchRates(2.0, 2.0), 16)
    res = sim_dtmc_multi(probs, fast, n, seed=2)
    describe("16 sub-step approximation", res)


if __name__ == "__main__":
    main()
