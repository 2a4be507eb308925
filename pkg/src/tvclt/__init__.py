"""Total-variation distances between iid sums and their matched normal laws."""

__version__ = "0.1.0"

from .convolve import convolve_pair, self_convolve
from .decompose import build_certificate
from .dichotomy import delta_series, fit_rate
from .distkit import (
    MixtureDistribution,
    bernoulli,
    classify,
    from_spec,
    gaussian,
    mixture,
    moments,
    point_mass,
    triangular,
    uniform,
)
from .shiftbound import lemma3_bound
from .stein import solve_stein, theorem_bound_rhs
from .tvmetric import kolmogorov_distance, shift_tv, tv_distance, tv_to_matched_normal

__all__ = [
    "MixtureDistribution",
    "bernoulli",
    "build_certificate",
    "classify",
    "convolve_pair",
    "delta_series",
    "fit_rate",
    "from_spec",
    "gaussian",
    "kolmogorov_distance",
    "lemma3_bound",
    "mixture",
    "moments",
    "point_mass",
    "self_convolve",
    "shift_tv",
    "solve_stein",
    "theorem_bound_rhs",
    "triangular",
    "tv_distance",
    "tv_to_matched_normal",
    "uniform",
]
