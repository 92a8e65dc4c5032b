"""Temporal multiplexing of heralded single photons: analytic model,
Monte Carlo simulator and switch-controller timing checks."""

from .analytic import (
    ModelPrediction,
    NoSolution,
    calibrate_roundtrip,
    enhancement,
    exact_probabilities,
    heralded_probability,
    heralding_probability,
    optimal_n,
    predict,
    predict_sweep,
)
from .controller import route, switch_rise_time, timing_feasible
from .montecarlo import SimResult, compare_to_analytic, estimate_g2_heralded, simulate
from .params import (
    ChannelParams,
    ClockConfig,
    ExperimentParams,
    Policy,
    SourceParams,
    SwitchSpec,
    TimingParams,
    ValidationError,
    paper_params,
    validate,
)
from .photon_stats import PairNumberDistribution, StatsModel

__version__ = "0.1.0"
