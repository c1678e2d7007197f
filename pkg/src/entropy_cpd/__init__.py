"""Offline change-point detection with the empirical relative entropy of categorical data."""

from ._version import __version__
from .bounds import (
    BetaMode,
    BoundSpec,
    Envelope,
    Family,
    agrawal_bound,
    asymptotic_threshold,
    be2_quadratic_error,
    be_envelope,
    be_error_term,
    bound_quantile,
    bound_value,
    kappa,
    mardia_bound,
    sanov_bound,
    twosample_bound,
    twosample_sigma,
)
from .categorical import (
    BinningScheme,
    CategoricalDistribution,
    SignTripleEncoding,
    aggregate_series,
    discretize,
    empirical_distribution,
    encode_sign_triples,
    quantile_bins,
    ranked_exponential,
    read_series_csv,
    sample_categorical,
    sample_counts,
)
from .detect import (
    ScanResult,
    TestResult,
    aic_equivalent_threshold,
    delta_aic,
    f_test,
    re_test,
    rolling_scan,
    t_test,
)
from .divergence import (
    DivergenceValue,
    l1_distance,
    relative_entropy,
    reverse_pinsker_coefficient,
    shannon_entropy,
    triangle_surrogate_bound,
)
from .estimators import QuantileBinner, RollingEntropyScanner, SignTripleEncoder
from .exceptions import (
    ConfigError,
    DataError,
    DomainError,
    EntropyCPDError,
    NumericalValidityError,
    ZeroProbabilityError,
)
from .harness import (
    ExperimentConfig,
    ResultTable,
    run_cdf_envelope,
    run_equal_mean_experiment,
    run_experiment,
    run_power_experiment,
    run_quantile_experiment,
    trajectory_stream,
)
from .numerics import Branch, CubicRoots, chi2_cdf, chi2_quantile, chi2_sf, ln_gamma, solve_cubic

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
