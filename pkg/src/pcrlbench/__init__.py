"""Posterior Cramer-Rao lower bounds for joint state/parameter estimation,
a sequential Monte Carlo identifier with artificial parameter dynamics, and
bias/MSE/efficiency auditing of the identifier against the bound."""

from pcrlbench.models import (
    ConfigurationError,
    DegeneracyError,
    ExtendedState,
    ModelEvaluationError,
    NumericalError,
    SsmModel,
    TrajectoryEnsemble,
    log_measurement_density,
    log_transition_density,
    sample_prior,
    simulate_ensemble,
    step_measurement,
    step_state,
)
from pcrlbench.pcrlb import (
    BoundSeries,
    HBlocks,
    PimState,
    estimate_h_blocks,
    extract_param_bound,
    initial_pim,
    pim_step,
    run_pcrlb,
)
from pcrlbench.registry import available_models, build_model
from pcrlbench.smc import (
    AdaSchedule,
    IdentifyResult,
    ParticleCloud,
    ada_step,
    identify,
    init_cloud,
    posterior_mean,
    resample_systematic,
)
from pcrlbench.analysis import (
    BiasRecord,
    ConjugateToy,
    MseSeries,
    Verdict,
    classify,
    conditional_bias,
    decomposition_check,
    mse_mc,
    psd_gap,
    reference_posterior_mean,
)

__version__ = "0.1.0"

__all__ = [
    "AdaSchedule",
    "BiasRecord",
    "BoundSeries",
    "ConfigurationError",
    "ConjugateToy",
    "DegeneracyError",
    "ExtendedState",
    "HBlocks",
    "IdentifyResult",
    "ModelEvaluationError",
    "MseSeries",
    "NumericalError",
    "ParticleCloud",
    "PimState",
    "SsmModel",
    "TrajectoryEnsemble",
    "Verdict",
    "ada_step",
    "available_models",
    "build_model",
    "classify",
    "conditional_bias",
    "decomposition_check",
    "estimate_h_blocks",
    "extract_param_bound",
    "identify",
    "init_cloud",
    "initial_pim",
    "log_measurement_density",
    "log_transition_density",
    "mse_mc",
    "pim_step",
    "posterior_mean",
    "psd_gap",
    "reference_posterior_mean",
    "resample_systematic",
    "run_pcrlb",
    "sample_prior",
    "simulate_ensemble",
    "step_measurement",
    "step_state",
]
