"""Exception types shared across the package.

Configuration problems (bad values, malformed config files) and runtime
estimation failures (degenerate denominators, singular ratios) are kept
on separate branches so the CLI can map them to distinct exit codes.
"""


class ParameterError(ValueError):
    """A numeric argument violates its contract (range, sign, finiteness)."""


class ConfigError(ParameterError):
    """A scenario configuration file or override is invalid."""


class EstimationError(ArithmeticError):
    """Base class for runtime estimator failures."""


class UndefinedEstimateError(EstimationError):
    """An estimator denominator is zero; no estimate can be formed."""


class DegenerateChainError(ParameterError):
    """The optical chain can never deliver a photon to the sample."""


class SingularGammaError(EstimationError):
    """The analytic precision ratio diverges (eta_sample * eta_probe >= 1)."""


class DegenerateSeriesError(EstimationError):
    """An estimate series has zero variance or too few entries."""
