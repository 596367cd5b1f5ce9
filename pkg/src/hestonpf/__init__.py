"""Heston/Bates calibration from price series.

Simulates Heston and Bates paths, estimates every model parameter and the
latent volatility path from prices alone via conjugate Bayesian regression
interleaved with SIR particle filtering (continuous-CDF resampling, jump
neutralization).
"""

from .bayes import (
    PriorConfig,
    RegressionDraw,
    ReturnSeries,
    VolPath,
    beta_to_kappa_theta,
    build_beta_design,
    build_eta_design,
    compute_residuals,
    eta_to_mu,
    posterior_beta,
    posterior_psi_omega,
    posterior_scalar_normal,
    posterior_sigma2,
    rho_from_psi_omega,
    sample_beta,
    sample_eta,
    sample_rho,
    sample_sigma2,
)
from .calibrate import (
    CalibrationReport,
    ChainRecord,
    calibrate,
    experiment_pf_budget,
    experiment_prior_shift,
    experiment_sigma_dispersion,
    priors_centered_on,
    summarize,
)
from .errors import (
    CalibrationError,
    ConfigError,
    DegenerateDrawError,
    DegenerateWeightsError,
    DomainError,
    IngestionError,
    NumericError,
    ParameterError,
    PriceStepRejected,
    SimulationError,
    SingularDesignError,
)
from .particles import (
    FilterOutput,
    ParticleCloud,
    PiecewiseLinearCDF,
    aggregate_jump_params,
    build_cdf,
    estimate_vol,
    init_jump_particles,
    init_particles,
    neutralize_returns,
    normalize,
    propagate,
    resample,
    run_filter,
    sample_cdf,
    step_jump_prob,
    weight_jump,
    weight_nojump,
)
from .rng import (
    Phase,
    StreamKey,
    Substreams,
    draw_bernoulli,
    draw_inverse_gamma,
    draw_standard_normal,
    draw_uniform,
    inverse_gamma,
    substream,
)
from .sde import (
    HestonParams,
    JumpParams,
    SimulatedPath,
    TimeGrid,
    correlate_noise,
    simulate_bates,
    simulate_heston,
    step_price,
    step_volatility,
)

__version__ = "0.1.0"
