"""Certification of a zonal congestion controller's safety probability.

Brute-force Monte Carlo against a proxy-based process that replaces most
simulations by multivariate Gaussian process predictions and widens the
confidence interval for the prediction uncertainty.
"""

from proxycert.certify import IterationLog, moving_average, run_brute_force, run_proxy_process
from proxycert.config import ConfigError, RunConfig, load_run_config
from proxycert.intervals import (ConfidenceInterval, DecisionThresholds, Estimator, OutcomeRecord,
                                 classic_interval, clt_summary, draw_prediction, uncertainty_interval)
from proxycert.mgp import KernelParams, LocalityConfig, MGPProxy, OutputCovariance
from proxycert.mvncdf import prediction_entropy, safe_probability
from proxycert.netsim import (ZoneConfig, build_history, classify, load_zone, make_reference_zone,
                              simulate)
from proxycert.sampler import SamplerConfig, Scenario, sample_batch, sample_scenario

__all__ = [
    "ConfidenceInterval", "ConfigError", "DecisionThresholds", "Estimator", "IterationLog",
    "KernelParams", "LocalityConfig", "MGPProxy", "OutcomeRecord", "OutputCovariance", "RunConfig",
    "SamplerConfig", "Scenario", "ZoneConfig", "build_history", "classic_interval", "classify",
    "clt_summary",
    "draw_prediction", "load_run_config", "load_zone", "make_reference_zone", "moving_average",
    "prediction_entropy", "run_brute_force", "run_proxy_process", "safe_probability",
    "sample_batch", "sample_scenario", "simulate", "uncertainty_interval",
]

__version__ = "0.1.0"
