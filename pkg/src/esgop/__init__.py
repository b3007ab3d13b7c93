"""Central mean subspace estimation via smoothed gradient outer products."""

from .baselines import BaselineEstimate, SliceSpec, egop, save, save_counterexample_demo, sir
from .errors import (
    CapabilityError,
    ConditioningError,
    ConfigError,
    DataError,
    EsgopError,
    EstimationError,
    ParameterError,
    ParseError,
    PartitionError,
    ShapeError,
    SupportError,
)
from .estimator import (
    EsgopConfig,
    RatioEstimatorSpec,
    SmoothedGradientPair,
    SubspaceEstimate,
    assemble_cross_outer,
    bandwidth_for_bounded_support,
    default_sigma_theta,
    design_log_ratio,
    estimate_lle_gradient,
    estimate_smoothed_gradient,
    fit,
    fit_plugin,
    gaussian_ratio_fit,
    mom_partition_count,
    mom_select,
)
from .metrics import (
    MomentDiagnostics,
    RateFit,
    SubspaceDistanceReport,
    estimate_moments,
    fit_rate,
    subspace_distance,
)
from .model import (
    Dataset,
    DesignDistribution,
    LinkFunction,
    MultiIndexModel,
    NoiseSpec,
    SmoothedGradient,
    cauchy_design,
    product_cauchy_design,
    construct_save_counterexample_link,
    custom_design,
    custom_link,
    density_ratio,
    gaussian_design,
    generate,
    linear_link,
    make_design,
    minimum_signal_strength,
    model_preset,
    moment_mu_rho_closed_form,
    polynomial_link,
    smoothed_index_gradient,
    true_smoothed_gradient,
    truncated_gaussian_design,
)
from .numkit import RngStream, SymEigen, sample_cauchy, sample_gaussian, sym_eigen, thin_svd

__version__ = "0.1.0"
