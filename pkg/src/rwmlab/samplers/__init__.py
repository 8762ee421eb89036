"""Metropolis-type samplers over an arbitrary log-density."""

from .adaptive import adaptive_multiplicative_run, trailing_adaptive_acceptance
from .core import (
    ALGORITHMS,
    FAMILIES,
    TRANSFORMS,
    AdaptConstants,
    ChainOutput,
    ProposalSpec,
    RunConfig,
    Target,
    Transform,
    as_target,
    derived_seed,
    sample_shaped_cauchy,
    shape_factor,
    signed_log,
    signed_log_inv,
)
from .rwm import (
    independence_sampler_run,
    mwg_reparam_run,
    mwg_sweep,
    rwm_block,
    rwm_multiplicative,
)
from .tuning import TuneResult, bisect_scale, bisect_scales, minimize_act, tune_scale

__all__ = [
    "ALGORITHMS",
    "FAMILIES",
    "TRANSFORMS",
    "AdaptConstants",
    "ChainOutput",
    "ProposalSpec",
    "RunConfig",
    "Target",
    "Transform",
    "TuneResult",
    "adaptive_multiplicative_run",
    "as_target",
    "bisect_scale",
    "bisect_scales",
    "derived_seed",
    "independence_sampler_run",
    "minimize_act",
    "mwg_reparam_run",
    "mwg_sweep",
    "rwm_block",
    "rwm_multiplicative",
    "sample_shaped_cauchy",
    "shape_factor",
    "signed_log",
    "signed_log_inv",
    "trailing_adaptive_acceptance",
    "tune_scale",
]
