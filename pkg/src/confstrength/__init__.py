"""Consistent estimation of confounding strength in high-dimensional
linear-Gaussian causal models, with a synthetic-model generator, limit
oracles, and a Monte Carlo experiment harness.
"""

from .errors import (
    ConfstrengthError,
    Degenerate,
    InvalidInput,
    NoSolution,
    RankDeficient,
    SingularPoint,
)
from .spectral import (
    Spectrum,
    eta_derivative,
    min_norm_regress,
    solve_eta,
    spectrum_of_gram,
    stieltjes,
)
from .models import (
    CausalModel,
    GroundTruth,
    ObservationalData,
    build_model,
    draw_observations,
    ground_truth,
    haar_semi_orthogonal,
    mp_density,
    mp_support,
    sample_mp_eigenvalues,
    statistical_noise_limit_check,
)
from .estimators import (
    ConfoundingEstimate,
    DatasetCache,
    EstimatorConfig,
    PopulationCache,
    ThetaObjective,
    estimate_all,
    h_rmt,
    logdet_estimate_g1,
    logprob_plugin,
    logprob_pop,
    logprob_rmt,
    noise_estimate_S,
    quadform_derivative_estimate,
    quadform_estimate,
    solve_theta,
    stieltjes_estimate,
    tau_plugin,
    tau_rmt,
)
from .limits import (
    LimitSpectrum,
    f_plugin_limit,
    f_pop_limit,
    mixed_trace_limits,
    mp_moment,
    plugin_consistency_condition,
)
from .harness import ExperimentGrid, GridRow, run_grid, summarize

__version__ = "0.1.0"
