"""Kalman-filter estimation and thresholded judgment of a care recipient's cooperativeness."""

from .evaluation import (
    ConfusionMatrix,
    EvaluationReport,
    conditional_by_estimated,
    conditional_by_requested,
    confusion_matrix,
    evaluate_suite,
)
from .judgment import JudgmentConfig, Verdict, detect_cue_onset, judge
from .kalman import FilterTrace, StateEstimate, filter_trial, initial_estimate, predict, update
from .model import (
    CueSample,
    ModelError,
    ModelParams,
    NoiseDraw,
    StateVector,
    TransitionMatrices,
    assemble_transition,
    measure,
    step_truth,
)
from .simulator import (
    BehaviorMode,
    CueTrace,
    PhysicalIntensity,
    TrialRecord,
    TrialSpec,
    VerbalCue,
    generate_cue_schedule,
    generate_trial_suite,
    simulate_trial,
)
from .trial_io import read_params, read_trial, write_params, write_trial

__version__ = "0.1.0"
