"""Bayesian switching-rate inference for two-state blinking emitters.

Infers switching and emission rates, hidden states, and credible regions
directly from a photon-count time series, under three hidden-Markov models
of the switching (single-step, continuous-time, multi-step), with a
threshold-analysis baseline for comparison.
"""

from .kernels import (
    CountTrace,
    EmissionRates,
    StatePrior,
    SwitchProbs,
    SwitchRates,
    log_poisson_pmf,
    poisson_pmf,
    probs_from_rates,
    rates_from_probs,
)
from .simulate import SimResult, sim_ctmc, sim_dtmc_multi, sim_dtmc_single
from .single_step import (
    StepMatrix,
    brute_force_loglik,
    step_matrix_single,
    trace_loglik_single,
)
from .ctmc import (
    FractionDensity,
    QuadratureConvergenceError,
    QuadratureSpec,
    avg_count_prob,
    check_quadrature_convergence,
    count_state_prob_ctmc,
    fraction_density,
    trace_loglik_ctmc,
    transition_prob,
)
from .multistep import (
    JointCountDist,
    base_distributions,
    choose_subinterval_count,
    convolve_halving,
    default_c_max,
    interval_distributions,
    trace_loglik_multistep,
)
from .posterior import (
    CredibleRegion,
    GridAxis,
    GridSpec,
    PosteriorGrid,
    credible_regions,
    evaluate_grid,
    inference_error,
    marginalize,
    mode,
)
from .state_inference import (
    StatePosterior,
    masked_matrices,
    state_posterior_known,
    state_posterior_marginal,
)
from .threshold import (
    PoissonMixture,
    RateEstimate,
    SweepResult,
    ThresholdConfig,
    ThresholdRules,
    assign_states,
    fit_exponential_prob,
    fit_poisson_mixture,
    fit_switch_probs,
    literature_thresholds,
    run_durations,
    threshold_sweep,
)

__version__ = "0.1.0"
