"""steerlab: curved-tunnel steering tasks end to end.

Curve generation with curvature targets, movement-time model fitting and
comparison, trajectory analytics, repeated-measures inference, a deterministic
synthetic steering agent, and the experiment session service consumed by the
browser runner.
"""

__version__ = "0.1.0"

from .geometry import CurveSamples, Tunnel, arc_length, nl_integral, sample_curve, total_curvature
from .curvegen import SinusoidSpec, TrialSpec, assemble_trialset, grid_search, realize, solve_amplitude
from .models import Coefficients, ModelForm, TrialFeatures, predict
from .fitting import FitResult, aic, adjusted_r2, cross_validate, fit_model, rank_models
from .inference import RmDataset, fit_power_law_of_practice, rm_anova
from .metrics import Trajectory, TrialMeasures, resample, trial_measures
from .simulator import AgentConfig, simulate_corpus, simulate_trial
from .session import SessionPlan, SessionState, advance, make_plan, tutorial_step

__all__ = [
    "CurveSamples", "Tunnel", "arc_length", "total_curvature", "nl_integral", "sample_curve",
    "SinusoidSpec", "TrialSpec", "realize", "solve_amplitude", "grid_search", "assemble_trialset",
    "ModelForm", "Coefficients", "TrialFeatures", "predict",
    "FitResult", "fit_model", "aic", "adjusted_r2", "cross_validate", "rank_models",
    "RmDataset", "rm_anova", "fit_power_law_of_practice",
    "Trajectory", "TrialMeasures", "resample", "trial_measures",
    "AgentConfig", "simulate_trial", "simulate_corpus",
    "SessionPlan", "SessionState", "make_plan", "tutorial_step", "advance",
]
