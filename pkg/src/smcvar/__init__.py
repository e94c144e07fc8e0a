"""Sequential Monte Carlo filters with exact asymptotic-variance tooling.

The package has three layers:

* simulation -- particle systems, selection schemes and filter drivers
  (:mod:`smcvar.core`, :mod:`smcvar.resampling`, :mod:`smcvar.engine`);
* exact computation -- model families with oracles and the exact
  asymptotic-variance machinery on finite models (:mod:`smcvar.models`,
  :mod:`smcvar.variance`);
* experiments -- the ``smcvar`` command-line harness tying both together
  (:mod:`smcvar.harness`).
"""

from .core import (DegenerateWeightsError, Functional,
                   NonFiniteFunctionalError, ParticleSystem, RngStream,
                   effective_sample_size, normalize_weights,
                   unweighted_estimate, weighted_estimate)
from .engine import (FilterConfig, FilterTrace, ModelSpec, ReplicateSummary,
                     WeightCollapseError, run_filter, run_marginal_pair,
                     run_replicates, run_sis)
from .models import (BetaBernoulliModel, FiniteHMM, ImpossibleObservationError,
                     LinearGaussianSSM, MarginalPairModel, beta_posterior,
                     finite_hmm_forward, hmm_filter_model, kalman_filter,
                     lgssm_filter_model, marginal_pair_models,
                     model_from_config, parameter_model_specs, simulate_data,
                     stationary_distribution)
from .resampling import (SelectionCounts, SelectionScheme, apply_selection,
                         multinomial_counts, residual_counts, sample_counts,
                         systematic_counts)
from .variance import (QuadratureError, StabilityParams, VarianceReport,
                       WeightOperator, closed_form_variance,
                       conditional_contraction_profile, dobrushin_coefficient,
                       hmm_chain_view, marginal_pair_chain_views,
                       operator_variation_profile,
                       posterior_ratio_integrality_gap, recursion_variances,
                       residual_gap, sir_fixed_param_variance, sis_variance,
                       stability_bound, stability_bound_limit,
                       variation_product_check, weight_operators)

__version__ = "0.1.0"
