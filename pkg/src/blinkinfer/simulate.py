"""Seeded trace generators for the three switching models.

Each generator returns the observable count trace together with the hidden
truth (states at interval boundaries, per-interval on-fractions) so tests
and demos can score inference output against ground truth.

All generators use ``numpy.random.default_rng`` (PCG64), drawing in a fixed
order, so a given seed reproduces the same trace bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import CountTrace, EmissionRates, StatePrior, SwitchProbs, SwitchRates

__all__ = ["SimResult", "sim_dtmc_single", "sim_dtmc_multi", "sim_ctmc"]


@dataclass(frozen=True)
class SimResult:
    """A simulated trace plus the hidden truth that produced it.

    ``boundary_states`` holds the state at the N+1 interval boundaries;
    ``on_fractions[k]`` is the fraction of interval k spent in the on state
    (exactly 0.0 or 1.0 whenever the interval contains no switch).
    ``switch_times`` is populated only by :func:`sim_ctmc` on request.
    """

    trace: CountTrace
    boundary_states: np.ndarray
    on_fractions: np.ndarray
    seed: int
    switch_times: np.ndarray | None = None


def _draw_initial_state(rng: np.random.Generator, prior: StatePrior) -> int:
    return 0 if rng.random() < prior.p_off else 1


def _geometric_switch_positions(rng, s0: int, alpha: float, beta: float, total_steps: int):
    """Sub-step boundaries (1-based positions <= total_steps) where the state flips.

    Run lengths are geometric with the switching probability of the current
    state; states strictly alternate.  A zero probability freezes the chain.
    """
    p_first = alpha if s0 == 0 else beta
    p_second = beta if s0 == 0 else alpha
    if p_first == 0.0:
        return np.empty(0, dtype=np.int64)
    if p_second == 0.0:
        first = int(rng.geometric(p_first))
        if first <= total_steps:
            return np.array([first], dtype=np.int64)
        return np.empty(0, dtype=np.int64)

    batch = max(64, int(total_steps * (p_first + p_second) / 2) + 16)
    positions = np.empty(0, dtype=np.int64)
    last = 0
    while last < total_steps:
        # each batch holds an even number of runs, so every batch starts in
        # the initial state's phase
        draws = np.empty(2 * batch, dtype=np.int64)
        draws[0::2] = rng.geometric(p_first, size=batch)
        draws[1::2] = rng.geometric(p_second, size=batch)
        positions = np.concatenate([positions, last + np.cumsum(draws)])
        last = int(positions[-1])
    return positions[positions <= total_steps].copy()


def _on_count_at_marks(switch_positions, s0: int, marks, closing):
    """Cumulative time in the on state evaluated at each mark.

    ``switch_positions`` and ``marks`` may be integer sub-step positions or
    float times; ``closing`` is the end of the observation window.  Exact in
    integer arithmetic when the inputs are integers.
    """
    inner = switch_positions[switch_positions < closing]
    run_bounds = np.concatenate([inner, [closing]])
    run_starts = np.concatenate([[marks.dtype.type(0)], inner])
    run_states = (s0 + np.arange(run_bounds.size)) % 2
    cum_on = np.concatenate(
        [[marks.dtype.type(0)], np.cumsum((run_bounds - run_starts) * run_states)]
    )
    j = np.searchsorted(run_bounds, marks, side="right")
    j_run = np.minimum(j, run_states.size - 1)
    start = np.where(j > 0, run_bounds[np.maximum(j - 1, 0)], marks.dtype.type(0))
    partial = np.where(run_states[j_run] == 1, marks - start, marks.dtype.type(0))
    partial = np.where(j >= run_bounds.size, marks.dtype.type(0), partial)
    return cum_on[j] + partial


def sim_dtmc_multi(
    probs: SwitchProbs,
    emissions: EmissionRates,
    n_intervals: int,
    initial: StatePrior | None = None,
    seed: int = 0,
) -> SimResult:
    """Simulate the stepped model with ``probs.d`` switching points per interval.

    The state is constant over each sub-step and may switch at sub-step
    boundaries.  Sub-step counts are Poisson at rate mu/d (off) or
    (mu+lam)/d (on); independent Poisson counts add, so the interval total
    is drawn in a single Poisson draw at rate mu + f*lam with f the
    interval's on-fraction.
    """
    if n_intervals < 1:
        raise ValueError("n_intervals must be >= 1")
    rng = np.random.default_rng(seed)
    if initial is None:
        initial = StatePrior.stationary_from_probs(probs)
    s0 = _draw_initial_state(rng, initial)

    d = probs.d
    total_steps = n_intervals * d
    switches = _geometric_switch_positions(rng, s0, probs.alpha, probs.beta, total_steps)

    marks = np.arange(n_intervals + 1, dtype=np.int64) * d
    on_cum = _on_count_at_marks(switches, s0, marks, total_steps)
    on_fractions = np.diff(on_cum) / d

    flips_by_mark = np.searchsorted(switches, marks, side="right")
    boundary_states = ((s0 + flips_by_mark) % 2).astype(np.int8)

    counts = rng.poisson(emissions.mu + on_fractions * emissions.lam)
    return SimResult(
        trace=CountTrace(counts),
        boundary_states=boundary_states,
        on_fractions=on_fractions,
        seed=seed,
    )


def sim_dtmc_single(
    probs: SwitchProbs,
    emissions: EmissionRates,
    n_intervals: int,
    initial: StatePrior | None = None,
    seed: int = 0,
) -> SimResult:
    """Simulate the single-step model: one switching point per interval.

    The state holds for the whole interval and may change only at interval
    boundaries, so counts are Poisson(mu) or Poisson(mu+lam) depending on
    the state at the interval's start.
    """
    if probs.d != 1:
        raise ValueError("single-step simulation requires d = 1")
    return sim_dtmc_multi(probs, emissions, n_intervals, initial=initial, seed=seed)


def _exponential_switch_times(rng, s0: int, rates: SwitchRates, horizon: float):
    r_first = rates.r_alpha if s0 == 0 else rates.r_beta
    r_second = rates.r_beta if s0 == 0 else rates.r_alpha
    if r_first == 0.0:
        return np.empty(0)
    if r_second == 0.0:
        t = rng.standard_exponential() / r_first
        return np.array([t]) if t < horizon else np.empty(0)

    batch = max(64, int(horizon * (r_first + r_second) / 2) + 16)
    times = np.empty(0)
    last = 0.0
    while last < horizon:
        # even number of runs per batch keeps the rate alternation aligned
        draws = rng.standard_exponential(2 * batch)
        scales = np.empty_like(draws)
        scales[0::2] = 1.0 / r_first
        scales[1::2] = 1.0 / r_second
        times = np.concatenate([times, last + np.cumsum(draws * scales)])
        last = float(times[-1])
    return times[times < horizon].copy()


def sim_ctmc(
    rates: SwitchRates,
    emissions: EmissionRates,
    n_intervals: int,
    initial: StatePrior | None = None,
    seed: int = 0,
    return_path: bool = False,
) -> SimResult:
    """Simulate continuous switching: exponential holding times in each state.

    The hidden path switches at arbitrary times; each interval records the
    fraction f spent on and draws Poisson(mu + f*lam) counts.  Pass
    ``return_path=True`` to also get the raw switch times.
    """
    if n_intervals < 1:
        raise ValueError("n_intervals must be >= 1")
    rng = np.random.default_rng(seed)
    if initial is None:
        initial = StatePrior.stationary_from_rates(rates)
    s0 = _draw_initial_state(rng, initial)

    horizon = float(n_intervals)
    times = _exponential_switch_times(rng, s0, rates, horizon)

    marks = np.arange(n_intervals + 1, dtype=float)
    flips_by_mark = np.searchsorted(times, marks, side="right")
    boundary_states = ((s0 + flips_by_mark) % 2).astype(np.int8)

    on_cum = _on_count_at_marks(times, s0, marks, horizon)
    on_fractions = np.clip(np.diff(on_cum), 0.0, 1.0)
    # intervals without a switch get an exact 0.0 or 1.0, immune to float
    # cancellation in the cumulative sums
    no_switch = np.diff(flips_by_mark) == 0
    on_fractions[no_switch] = boundary_states[:-1][no_switch]

    counts = rng.poisson(emissions.mu + on_fractions * emissions.lam)
    return SimResult(
        trace=CountTrace(counts),
        boundary_states=boundary_states,
        on_fractions=on_fractions,
        seed=seed,
        switch_times=times if return_path else None,
    )
