"""Frame-error-rate analysis of selective-combining hybrid AF/DF relay networks."""

from .analytic import (RateParams, SchcnCdf, build_schcn_cdf, fer_asymptotic, fer_closed_form,
                       lambda_eq_bounds, relay_link_cdf, schcn_cdf_asymptotic, schcn_cdf_eval)
from .errors import DegenerateRates, GridMismatch, InvalidConfig, NoBracket, NonConvergent, SchcnError
from .experiments import FerCurve, SweepConfig, compare_report, emit_curves, parse_curves, run_sweep
from .mimo import MimoConfig, mimo_fer_approx, mimo_fer_exact, mimo_optimal_threshold, simulate_mimo_fer
from .scenario import Scenario, load_scenario, named_scenario
from .simulator import SimEstimate, simulate_fer
from .threshold import (BPSK, ModulationSpec, ThresholdTable, average_fer_exact, average_fer_outage,
                        instantaneous_fer_awgn, snr_threshold_prior, snr_threshold_proposed)
from .units import db_to_linear, linear_to_db

__version__ = "0.1.0"

__all__ = [
    "BPSK", "DegenerateRates", "FerCurve", "GridMismatch", "InvalidConfig", "MimoConfig",
    "ModulationSpec", "NoBracket", "NonConvergent", "RateParams", "Scenario", "SchcnCdf",
    "SchcnError", "SimEstimate", "SweepConfig", "ThresholdTable", "average_fer_exact",
    "average_fer_outage", "build_schcn_cdf", "compare_report", "db_to_linear", "emit_curves",
    "fer_asymptotic", "fer_closed_form", "instantaneous_fer_awgn", "lambda_eq_bounds",
    "linear_to_db", "load_scenario", "mimo_fer_approx", "mimo_fer_exact", "mimo_optimal_threshold",
    "named_scenario", "parse_curves", "relay_link_cdf", "run_sweep", "schcn_cdf_asymptotic",
    "schcn_cdf_eval", "simulate_fer", "simulate_mimo_fer", "snr_threshold_prior",
    "snr_threshold_proposed",
]
