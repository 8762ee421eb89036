"""Random walk Metropolis samplers, diagnostics and an experiment harness
for Bayesian inference on Markov modulated Poisson processes."""

from .datasets import DATASETS, DatasetSpec, get_dataset
from .diagnostics import act_window, autocorrelation, cpu_adjusted_act, diagnose, ess, msejd, msjd, qq_compare
from .linalg import diffusion_speed, mat_exp, mwg_efficiency_ratio, stationary_dist
from .mmpp import (
    EventData,
    MmppParams,
    MmppPosterior,
    PriorSpec,
    canonicalize,
    from_reparam,
    log_likelihood,
    log_posterior,
    simulate,
    to_reparam,
)

__version__ = "0.1.0"
