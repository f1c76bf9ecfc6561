"""Dead-time-distorted photon timestamp simulation and Gaussian-uniform mixture fitting."""
from .emfit import FitResult, SufficientStats, e_step, fit, init_params, m_step, posterior
from .evalkit import SCENARIOS, ScenarioReport, mse, run_scenario, scenario_config, simulate
from .histkit import Histogram, average_histograms, build_histogram
from .mixture import GummParams, log_likelihood, pdf, sample
from .padding import PaddingPlan, select_offset, unwrap_pdf, wrap_shift
from .simkit import (
    Frame,
    ScenarioConfig,
    TimestampSet,
    censor_dead_time,
    sample_arrivals,
    simulate_replication,
    to_absolute,
    to_relative,
)

__version__ = "0.1.0"
