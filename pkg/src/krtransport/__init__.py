"""Exact and sparse-approximate Knothe-Rosenblatt triangular transports
between analytic densities on truncations of [-1,1]^N."""

from .banach import FunctionBasis, phi_expand, sample_banach
from .errors import (
    CapabilityError,
    ConfigError,
    ConvergenceError,
    DomainError,
    IntegrationError,
    ModelError,
    TransportError,
)
from .indexsets import IndexSetFamily, WeightSequence, build_index_sets, cardinality_scaling, gamma
from .legendre import LegendreExpansion, legendre_eval, project, squared_slice_marginal
from .metrics import (
    ProductMetric,
    RateReport,
    RateRow,
    component_sup_error,
    fit_rate,
    sorted_sample_w1,
    statistical_distances,
    wasserstein_upper_bound,
)
from .models import (
    BasisDecay,
    DensityModel,
    eval_density,
    linear_tilt_model,
    posterior_model,
    truncate,
    uniform_model,
)
from .oracle import ExactTransport, conditional_cdf, marginal_density
from .quadrature import MonteCarloScheme, QuadratureRule, TensorScheme, gauss_legendre, integrate
from .rational import ApproxTransport, RationalComponent, build_component, build_transport

__version__ = "0.1.0"

__all__ = [
    "ApproxTransport", "BasisDecay", "CapabilityError", "ConfigError",
    "ConvergenceError", "DensityModel", "DomainError", "ExactTransport",
    "FunctionBasis", "IndexSetFamily", "IntegrationError", "LegendreExpansion",
    "ModelError", "MonteCarloScheme", "ProductMetric", "QuadratureRule",
    "RateReport", "RateRow", "RationalComponent", "TensorScheme",
    "TransportError", "WeightSequence", "build_component", "build_index_sets",
    "build_transport", "cardinality_scaling", "component_sup_error",
    "conditional_cdf", "eval_density", "fit_rate", "gamma", "gauss_legendre",
    "integrate", "legendre_eval", "linear_tilt_model", "marginal_density",
    "phi_expand", "posterior_model", "project", "sample_banach",
    "sorted_sample_w1", "squared_slice_marginal", "statistical_distances",
    "truncate", "uniform_model", "wasserstein_upper_bound",
]
