"""Acceptance suite: one test per release criterion.

Each test prints a single PASS/FAIL line (run with ``pytest -s`` to see
them).  Tolerances and scenario parameters are fixed here, not tuned at
runtime.  Criterion 7's final bound is known to be unreachable with the
pinned sub-step construction (the kernel gap decays as O(1/d), reaching
about 4.3e-3 at d=16); the assertion is kept as stated rather than
loosened, so that test documents the actual behaviour by failing.
"""

import math
import time

import numpy as np

from blinkinfer import (
    CountTrace,
    EmissionRates,
    QuadratureSpec,
    StatePrior,
    SwitchProbs,
    SwitchRates,
    assign_states,
    brute_force_loglik,
    count_state_prob_ctmc,
    credible_regions,
    evaluate_grid,
    fraction_density,
    inference_error,
    interval_distributions,
    sim_ctmc,
    sim_dtmc_single,
    state_posterior_known,
    state_posterior_marginal,
    threshold_sweep,
    trace_loglik_single,
    transition_prob,
)
from blinkinfer.cli import main as cli_main
from blinkinfer.posterior import GridAxis, GridSpec
from oracles import gauss_legendre_integral

EM = EmissionRates(mu=2.0, lam=20.0)


def report(number, ok, detail):
    print(f"ACCEPTANCE {number:2d}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, detail


def test_criterion_01_path_sum_oracle():
    rng = np.random.default_rng(1001)
    start = time.time()
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 13))
        trace = CountTrace(rng.integers(0, 35, size=n))
        probs = SwitchProbs(float(rng.random()), float(rng.random()), 1)
        em = EmissionRates(float(rng.random() * 5), float(rng.random() * 25))
        prior = StatePrior.stationary_from_probs(probs)
        fast = trace_loglik_single(trace, probs, em, prior)
        slow = brute_force_loglik(trace, probs, em, prior)
        worst = max(worst, abs(fast - slow) / abs(slow))
    elapsed = time.time() - start
    ok = worst < 1e-12 and elapsed < 10.0
    report(1, ok, f"200 instances, worst rel diff {worst:.2e}, {elapsed:.1f}s")


def test_criterion_02_ctmc_kernel_normalisation():
    start = time.time()
    worst_norm = 0.0
    worst_match = 0.0
    for ra in (0.1, 0.5, 1.0, 2.0, 4.0, 8.0):
        for rb in (0.1, 0.5, 1.0, 2.0, 4.0, 8.0):
            rates = SwitchRates(ra, rb)
            for a in (0, 1):
                total = 0.0
                for b in (0, 1):
                    dens = fraction_density(a, b, rates)
                    mass = dens.delta_at_0 + dens.delta_at_1
                    mass += gauss_legendre_integral(dens.smooth, 0.0, 1.0)
                    total += mass
                    worst_match = max(
                        worst_match, abs(mass - transition_prob(a, b, 1.0, rates))
                    )
                worst_norm = max(worst_norm, abs(total - 1.0))
    elapsed = time.time() - start
    ok = worst_norm < 1e-8 and worst_match < 1e-8 and elapsed < 30.0
    report(
        2,
        ok,
        f"norm dev {worst_norm:.2e}, kernel-vs-transition dev {worst_match:.2e}, "
        f"{elapsed:.1f}s",
    )


def test_criterion_03_monte_carlo_density_validation():
    rates = SwitchRates(1.0, 0.5)
    res = sim_ctmc(rates, EM, 1_000_000, seed=4242)
    start_states = res.boundary_states[:-1]
    end_states = res.boundary_states[1:]
    f = res.on_fractions
    edges = np.linspace(0.0, 1.0, 11)
    worst_sigma = 0.0
    for a in (0, 1):
        sel_a = start_states == a
        n_a = int(sel_a.sum())
        for b in (0, 1):
            dens = fraction_density(a, b, rates)
            sel_ab = sel_a & (end_states == b)
            # point masses at exactly 0 and 1
            for value, weight in ((0.0, dens.delta_at_0), (1.0, dens.delta_at_1)):
                emp = float(np.sum(sel_ab & (f == value))) / n_a
                se = math.sqrt(max(weight * (1 - weight), 1e-12) / n_a)
                worst_sigma = max(worst_sigma, abs(emp - weight) / se)
            # smooth deciles
            for lo, hi in zip(edges[:-1], edges[1:]):
                p = gauss_legendre_integral(dens.smooth, lo, hi)
                sel = sel_ab & (f > 0.0) & (f < 1.0) & (f >= lo) & (f < hi)
                emp = float(sel.sum()) / n_a
                se = math.sqrt(max(p * (1 - p), 1e-12) / n_a)
                worst_sigma = max(worst_sigma, abs(emp - p) / se)
    ok = worst_sigma < 4.0
    report(3, ok, f"1e6 intervals, worst bin deviation {worst_sigma:.2f} sigma")


def test_criterion_04_low_rate_equivalence():
    rates = SwitchRates(0.05, 0.05)
    res = sim_ctmc(rates, EM, 5000, seed=2024)

    def box(name_a, name_b):
        return GridSpec(
            axes=(
                GridAxis(name_a, 0.005, 0.15, 59),
                GridAxis(name_b, 0.005, 0.15, 59),
            ),
            fixed={"lambda": 20.0, "mu": 2.0},
        )

    single = evaluate_grid(res.trace, "single", box("alpha", "beta"))
    continuous = evaluate_grid(res.trace, "ctmc", box("r_alpha", "r_beta"))
    rels = [
        abs(single.mode[i] - continuous.mode[i]) / max(single.mode[i], continuous.mode[i])
        for i in range(2)
    ]
    ok = all(r < 0.10 for r in rels)
    report(
        4,
        ok,
        f"modes single {single.mode} vs ctmc {continuous.mode}, "
        f"rel diffs {rels[0]:.3f}/{rels[1]:.3f}",
    )


def test_criterion_05_high_switching_reproduction():
    res = sim_dtmc_single(SwitchProbs(0.8, 0.9, 1), EM, 10_000, seed=41)
    grid = GridSpec(
        axes=(
            GridAxis("alpha", 0.0, 1.0, 40),
            GridAxis("beta", 0.0, 1.0, 40),
            GridAxis("lambda", 0.0, 40.0, 40),
            GridAxis("mu", 0.0, 10.0, 40),
        )
    )
    start = time.time()
    posterior = evaluate_grid(res.trace, "single", grid)
    elapsed = time.time() - start
    marginal = posterior.switch_marginal()
    region = credible_regions(marginal, [0.99])[0]
    ia = int(np.argmin(np.abs(grid.axis("alpha").values - 0.8)))
    ib = int(np.argmin(np.abs(grid.axis("beta").values - 0.9)))
    inside = bool(region.mask[ia, ib])
    ok = inside and elapsed < 300.0
    report(
        5,
        ok,
        f"truth (0.8, 0.9) inside 99% region: {inside}, "
        f"lambda/mu marginalised, {elapsed:.0f}s",
    )


def test_criterion_06_high_rate_regime():
    true_rate = 1.9966
    res = sim_ctmc(SwitchRates(true_rate, true_rate), EM, 5000, seed=777)

    def grid():
        return GridSpec(
            axes=(
                GridAxis("r_alpha", 0.5, 4.0, 71),
                GridAxis("r_beta", 0.5, 4.0, 71),
            ),
            fixed={"lambda": 20.0, "mu": 2.0},
        )

    continuous = evaluate_grid(res.trace, "ctmc", grid())
    ctmc_rels = [abs(continuous.mode[i] - true_rate) / true_rate for i in range(2)]

    errors = []
    last_mode = None
    for d in (1, 2, 4, 8, 16):
        posterior = evaluate_grid(res.trace, "multistep", grid(), d=d)
        errors.append(inference_error((true_rate, true_rate), posterior))
        last_mode = posterior.mode
    monotone = all(a >= b for a, b in zip(errors, errors[1:]))
    d16_rels = [abs(last_mode[i] - true_rate) / true_rate for i in range(2)]

    ok = all(r <= 0.25 for r in ctmc_rels) and monotone and all(
        r <= 0.25 for r in d16_rels
    )
    report(
        6,
        ok,
        f"ctmc rel err {ctmc_rels[0]:.3f}/{ctmc_rels[1]:.3f}, "
        f"d-sweep errors {[round(e, 3) for e in errors]} monotone={monotone}, "
        f"d=16 rel err {d16_rels[0]:.3f}/{d16_rels[1]:.3f}",
    )


def test_criterion_07_multistep_kernel_convergence():
    rates = SwitchRates(2.0, 2.0)
    quad = QuadratureSpec()
    reference = np.empty((2, 2, 61))
    for a in (0, 1):
        for b in (0, 1):
            for c in range(61):
                reference[a, b, c] = count_state_prob_ctmc(c, a, b, rates, EM, quad)
    sups = []
    for d in (2, 4, 8, 16):
        dist = interval_distributions(d, rates, EM, 127)
        sups.append(float(np.max(np.abs(dist.probs[:, :, :61] - reference))))
    monotone = all(x > y for x, y in zip(sups, sups[1:]))
    final_ok = sups[-1] < 1e-3
    ok = monotone and final_ok
    report(
        7,
        ok,
        f"sup-norms {[f'{s:.2e}' for s in sups]} monotone={monotone}, "
        f"d=16 < 1e-3: {final_ok} (the weighted-Poissonian sub-step construction "
        f"converges as O(1/d), so this bound needs d of about 128)",
    )


def test_criterion_08_threshold_comparison():
    truth = (0.02, 0.05)
    em = EmissionRates(mu=2.0, lam=30.0)
    res = sim_dtmc_single(SwitchProbs(*truth, 1), em, 5000, seed=101)

    grid = GridSpec(
        axes=(
            GridAxis("alpha", 0.001, 0.2, 80),
            GridAxis("beta", 0.001, 0.2, 80),
        ),
        fixed={"lambda": 30.0, "mu": 2.0},
    )
    posterior = evaluate_grid(res.trace, "single", grid)
    bayes_error = inference_error(truth, posterior)

    sweep = threshold_sweep(res.trace, range(15, 25), range(8, 13))
    sweep_errors = [
        math.hypot(row.alpha_hat - truth[0], row.beta_hat - truth[1])
        for row in sweep.rows
    ]

    region = credible_regions(posterior.switch_marginal(), [0.99])[0]
    av = grid.axis("alpha").values
    bv = grid.axis("beta").values
    inside = sum(
        bool(
            region.mask[
                int(np.argmin(np.abs(av - row.alpha_hat))),
                int(np.argmin(np.abs(bv - row.beta_hat))),
            ]
        )
        for row in sweep.rows
    )
    strictly_better = all(bayes_error < err for err in sweep_errors)
    ok = strictly_better
    report(
        8,
        ok,
        f"bayes error {bayes_error:.4f} vs sweep min {min(sweep_errors):.4f}; "
        f"{inside}/{len(sweep.rows)} sweep estimates inside the 99% region",
    )


def test_criterion_09_state_inference():
    # pair sums and prefix/suffix agreement on random traces; both masked
    # numerators are recomputed independently with max-norm rescaling
    from blinkinfer import step_matrix_single

    def masked_log(mats, prior_vec, k, a):
        v = prior_vec.copy()
        logscale = 0.0
        for t, m in enumerate(mats, start=1):
            step = m.copy()
            if t == k:
                step[1 - a, :] = 0.0
            v = step @ v
            peak = v.max()
            if peak == 0.0:
                return -np.inf
            v /= peak
            logscale += math.log(peak)
        return logscale + math.log(v.sum())

    rng = np.random.default_rng(99)
    worst_pair = 0.0
    worst_match = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 26))
        trace = CountTrace(rng.integers(0, 35, size=n))
        probs = SwitchProbs(
            float(rng.uniform(0.02, 0.95)), float(rng.uniform(0.02, 0.95)), 1
        )
        prior = StatePrior.stationary_from_probs(probs)
        mats = [step_matrix_single(int(c), probs, EM).entries for c in trace.counts]
        sp = state_posterior_known(trace, probs, EM, prior)
        for k in range(1, n + 1):
            l0 = masked_log(mats, prior.vector, k, 0)
            l1 = masked_log(mats, prior.vector, k, 1)
            total = np.logaddexp(l0, l1)
            p0, p1 = math.exp(l0 - total), math.exp(l1 - total)
            worst_pair = max(worst_pair, abs(p0 + p1 - 1.0))
            worst_match = max(worst_match, abs(sp.p_on[k - 1] - p1))

    # smoothed states beat the threshold assignment on noisy data
    em = EmissionRates(mu=3.0, lam=9.0)
    res = sim_dtmc_single(SwitchProbs(0.04, 0.05, 1), em, 1000, seed=261)
    grid = GridSpec(
        axes=(
            GridAxis("alpha", 0.005, 0.3, 12),
            GridAxis("beta", 0.005, 0.3, 12),
        ),
        fixed={"lambda": 9.0, "mu": 3.0},
    )
    sp = state_posterior_marginal(res.trace, grid)
    truth = res.boundary_states
    bayes_acc = float(np.mean((sp.p_on[:-1] > 0.5) == truth[1:-1]))
    thr_acc = float(np.mean(assign_states(res.trace, 7)[1:] == truth[1:-1]))

    ok = worst_pair < 1e-12 and worst_match < 1e-12 and bayes_acc >= thr_acc
    report(
        9,
        ok,
        f"pair-sum dev {worst_pair:.1e}, prefix/suffix dev {worst_match:.1e}, "
        f"accuracy {bayes_acc:.3f} vs threshold {thr_acc:.3f}",
    )


def test_criterion_10_performance_and_worker_invariance(tmp_path):
    # single-step, known emissions, 64x64 grid, N = 1e4
    res = sim_dtmc_single(SwitchProbs(0.1, 0.2, 1), EM, 10_000, seed=8)
    grid = GridSpec(
        axes=(GridAxis("alpha", 0.0, 1.0, 64), GridAxis("beta", 0.0, 1.0, 64)),
        fixed={"lambda": 20.0, "mu": 2.0},
    )
    start = time.time()
    evaluate_grid(res.trace, "single", grid)
    single_elapsed = time.time() - start

    # ctmc on the full 40^4 grid over N = 2000, via the CLI so the emitted
    # posterior files can be compared byte for byte across worker counts
    trace_path = tmp_path / "trace.csv"
    code = cli_main(
        [
            "simulate", "--model", "ctmc",
            "--fix", "r_alpha=2", "--fix", "r_beta=2",
            "--fix", "lambda=20", "--fix", "mu=2",
            "--n", "2000", "--seed", "10", "--out", str(trace_path),
        ]
    )
    assert code == 0
    elapsed = {}
    for workers in (1, 8):
        out = tmp_path / f"post_w{workers}.json"
        start = time.time()
        code = cli_main(
            [
                "infer", "--in", str(trace_path), "--model", "ctmc",
                "--grid", "r_alpha=0:8:40", "--grid", "r_beta=0:8:40",
                "--grid", "lambda=0:36:40", "--grid", "mu=0:18:40",
                "--workers", str(workers), "--out", str(out),
            ]
        )
        elapsed[workers] = time.time() - start
        assert code == 0
    identical = (
        (tmp_path / "post_w1.json").read_bytes()
        == (tmp_path / "post_w8.json").read_bytes()
    )
    ok = single_elapsed < 10.0 and max(elapsed.values()) < 900.0 and identical
    report(
        10,
        ok,
        f"single 64x64 in {single_elapsed:.1f}s; ctmc 40^4 in "
        f"{elapsed[1]:.0f}s/{elapsed[8]:.0f}s (1/8 workers); "
        f"byte-identical: {identical}",
    )
