"""Posterior probability of the hidden state at each interval boundary.

Zeroing one row of an interval matrix restricts the matrix-product
likelihood to paths passing through that state, so the ratio of a masked
product to the full product is the state's posterior probability given the
whole trace.  Computed for every position in two passes: forward prefix
vectors and backward suffix vectors, each renormalised per step.  The
rescaling factors of the two passes are identical for both states at a
given position, so they cancel in the ratio and never need exponentiating.

Exposed for the single-step model; with parameters unknown the masked
products are averaged over a parameter grid weighted by each cell's
likelihood (flat priors).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .kernels import CountTrace, EmissionRates, StatePrior, SwitchProbs
from .posterior import GridSpec, _EngineContext
from .single_step import StepMatrix, step_matrix_single

__all__ = [
    "StatePosterior",
    "masked_matrices",
    "state_posterior_known",
    "state_posterior_marginal",
]

_CHUNK_CELLS = 8192


@dataclass(frozen=True)
class StatePosterior:
    """Per-position on-state probabilities given the entire trace.

    ``p_on[k-1]`` is P(state at boundary k = on | all counts) for
    k = 1..N; boundary k is the end of interval k.  ``context`` records the
    model and parameters (or grid) used.
    """

    p_on: np.ndarray
    model: str = "single"
    context: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.p_on.size)


def masked_matrices(step: StepMatrix) -> tuple[StepMatrix, StepMatrix]:
    """Split an interval matrix by the end state.

    Returns (kept end state 0, kept end state 1); the two masked matrices
    sum back to the original, and inserting one of them into the matrix
    product restricts the path sum to histories with that end state at the
    masked position.
    """
    m0 = step.entries.copy()
    m1 = step.entries.copy()
    m0[1, :] = 0.0
    m1[0, :] = 0.0
    return (
        StepMatrix(m0, log_scale=step.log_scale),
        StepMatrix(m1, log_scale=step.log_scale),
    )


def state_posterior_known(
    trace: CountTrace,
    probs: SwitchProbs,
    emissions: EmissionRates,
    prior: StatePrior | None = None,
) -> StatePosterior:
    """State posterior with all four parameters known.

    One forward pass stores the normalised prefix vectors; one backward
    pass rolls the suffix vectors; position k's numerators are the
    elementwise products, equal (up to common factors) to the masked
    matrix products.
    """
    if prior is None:
        prior = StatePrior.stationary_from_probs(probs)
    n = len(trace)
    mats = {
        int(c): step_matrix_single(int(c), probs, emissions).entries
        for c in np.unique(trace.counts)
    }

    fwd = np.empty((n + 1, 2))
    fwd[0] = prior.vector
    for t, c in enumerate(trace.counts, start=1):
        w = mats[int(c)] @ fwd[t - 1]
        s = w.sum()
        if s <= 0.0:
            raise ValueError("trace has zero probability under these parameters")
        fwd[t] = w / s

    p_on = np.empty(n)
    g = np.array([1.0, 1.0])
    for k in range(n, 0, -1):
        num = g * fwd[k]
        p_on[k - 1] = num[1] / num.sum()
        g = g @ mats[int(trace.counts[k - 1])]
        g /= g.sum()

    return StatePosterior(
        p_on=p_on,
        model="single",
        context={"probs": probs, "emissions": emissions, "prior": prior},
    )


def state_posterior_marginal(
    trace: CountTrace,
    grid: GridSpec,
    prior: StatePrior | None = None,
) -> StatePosterior:
    """State posterior with unknown parameters marginalised over a grid.

    Averages each grid cell's masked-product numerators with weights
    proportional to the cell's likelihood (flat priors on the box), the
    grid realisation of integrating the parameters out.  Only the
    single-step model is supported.
    """
    ctx = _EngineContext(trace, "single", grid, prior, None, None)
    n = len(trace)
    n_pairs = ctx.n_pairs()
    cells = n_pairs * ctx.n_em
    inv = ctx.inv

    a_all, b_all = ctx.pair_params(0, n_pairs)
    m00, m01, m10, m11 = ctx._entries_single(a_all, b_all)

    if prior is None:
        total = a_all + b_all
        safe = np.where(total > 0, total, 1.0)
        p_off_pair = np.where(total > 0, b_all / safe, 0.5)
    else:
        p_off_pair = np.full(n_pairs, prior.p_off)
    v0_init = np.repeat(p_off_pair, ctx.n_em)

    # pass 1: per-cell log-likelihood, to anchor the weights
    loglik = np.zeros(cells)
    dead = np.zeros(cells, dtype=bool)
    v0, v1 = v0_init.copy(), 1.0 - v0_init
    for t in inv:
        w0 = m00[t] * v0 + m01[t] * v1
        w1 = m10[t] * v0 + m11[t] * v1
        s = w0 + w1
        bad = s <= 0.0
        if bad.any():
            dead |= bad
            s = np.where(bad, 1.0, s)
        v0, v1 = w0 / s, w1 / s
        loglik += np.log(s)
    loglik[dead] = -np.inf
    peak = loglik.max()
    if not np.isfinite(peak):
        raise ValueError("trace has zero probability everywhere on the grid")

    # pass 2: per-chunk smoother, accumulating weighted numerators; chunks
    # sized so the stored prefix vectors stay within ~64 MB
    chunk = max(256, min(_CHUNK_CELLS, 4_000_000 // (n + 1)))
    sum_w_pon = np.zeros(n)
    sum_w = 0.0
    for start in range(0, cells, chunk):
        stop = min(start + chunk, cells)
        sl = slice(start, stop)
        w_cell = np.exp(loglik[sl] - peak)
        if not w_cell.any():
            continue
        width = stop - start
        fwd = np.empty((n + 1, 2, width))
        fwd[0, 0] = v0_init[sl]
        fwd[0, 1] = 1.0 - v0_init[sl]
        for k, t in enumerate(inv, start=1):
            w0 = m00[t][sl] * fwd[k - 1, 0] + m01[t][sl] * fwd[k - 1, 1]
            w1 = m10[t][sl] * fwd[k - 1, 0] + m11[t][sl] * fwd[k - 1, 1]
            s = w0 + w1
            s = np.where(s > 0, s, 1.0)
            fwd[k, 0] = w0 / s
            fwd[k, 1] = w1 / s
        g0 = np.ones(width)
        g1 = np.ones(width)
        for k in range(n, 0, -1):
            num0 = g0 * fwd[k, 0]
            num1 = g1 * fwd[k, 1]
            tot = num0 + num1
            tot = np.where(tot > 0, tot, 1.0)
            sum_w_pon[k - 1] += np.dot(w_cell, num1 / tot)
            t = inv[k - 1]
            h0 = g0 * m00[t][sl] + g1 * m10[t][sl]
            h1 = g0 * m01[t][sl] + g1 * m11[t][sl]
            s = h0 + h1
            s = np.where(s > 0, s, 1.0)
            g0, g1 = h0 / s, h1 / s
        sum_w += float(w_cell.sum())

    return StatePosterior(
        p_on=sum_w_pon / sum_w,
        model="single",
        context={"grid": grid, "prior": prior},
    )
