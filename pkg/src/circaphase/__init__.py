"""Circadian phase estimation from wearable heart-rate and step data.

The estimator assimilates minute-resolution wearable data into a stochastic
limit-cycle clock model: a level-set Kalman filter propagates a Gaussian
belief over the clock state, a Bayesian harmonic-AR(1) fit extracts one
heart-rate phase measurement per day, and a Monte Carlo transform maps the
corrected belief onto the 24-hour clock with a credible interval.
"""

from .errors import (
    CircaphaseError,
    ConfigurationError,
    CovarianceDegeneracyError,
    DegenerateBeliefError,
    DegenerateCycleError,
    InputDomainError,
    InstabilityError,
    NumericalError,
    UndefinedAngleError,
    ValidationError,
)
from .hrmcmc import (
    HRPhaseEstimate,
    HRPriors,
    HRWindow,
    MCMCConfig,
    WalkerEnsemble,
    ar1_loglik,
    extract_hr_phase,
    log_posterior,
    stretch_move,
)
from .lskf import (
    Measurement,
    ProcessNoise,
    SqrtGaussian,
    cubature_points,
    level_set_rhs,
    measurement_update,
    time_update,
)
from .metrics import EvaluationReport, evaluate, ncr, rmse, sweep_aggregate
from .model import (
    ActivityTrace,
    ClockParams,
    ClockState,
    HRModelParams,
    clock_drift,
    hr_forward,
    integrate_clock,
    photic_alpha,
    photic_drive,
    steps_to_light,
)
from .phasemap import (
    DayPhaseMap,
    PhasePosterior,
    build_day_map,
    mc_transform,
    measurement_fn,
    predicted_phase,
    state_angle,
)
from .pipeline import (
    DailyResult,
    RunConfig,
    evaluate_run,
    extract_measurements,
    run,
    run_filter,
    run_hr_only,
    run_model_only,
    sweep,
)
from .scenarios import (
    ScenarioConfig,
    SyntheticDataset,
    gen_activity,
    gen_dataset,
    gen_sleep_times,
    mean_light_profile,
    simulate_truth_sde,
)

__version__ = "0.1.0"
