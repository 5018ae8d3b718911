"""Tail probabilities of weighted series of i.i.d. absolute values."""

from .errors import SeriesTailError
from .gauss import GaussianParams, lifshits_log_tail, scaled_threshold, scaled_threshold_p
from .laws import Exponential, FoldedGaussian, WeibullType, law_from_dict, power_transform
from .ldp import RateProblem, log_ratio_asymptote, log_tail_asymptote, rate_infimum
from .mc import SamplerConfig, empirical_log_slope, sample_is, sample_naive, tilt_parameter
from .seqspec import Explicit, Geometric, Perturbed, Polynomial, Scaled, SignedForm, sequence_from_dict

__version__ = "0.1.0"

__all__ = [
    "SeriesTailError",
    "GaussianParams",
    "lifshits_log_tail",
    "scaled_threshold",
    "scaled_threshold_p",
    "Exponential",
    "FoldedGaussian",
    "WeibullType",
    "law_from_dict",
    "power_transform",
    "RateProblem",
    "log_ratio_asymptote",
    "log_tail_asymptote",
    "rate_infimum",
    "SamplerConfig",
    "empirical_log_slope",
    "sample_is",
    "sample_naive",
    "tilt_parameter",
    "Explicit",
    "Geometric",
    "Perturbed",
    "Polynomial",
    "Scaled",
    "SignedForm",
    "sequence_from_dict",
]
