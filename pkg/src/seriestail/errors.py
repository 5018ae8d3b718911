"""Exception hierarchy shared by all modules.

Every error carries a short machine-readable ``code`` so the CLI can
report it without string matching.
"""


class SeriesTailError(Exception):
    code = "ERROR"


class DivergentNormError(SeriesTailError):
    code = "DIVERGENT_NORM"


class ThresholdTooSmallError(SeriesTailError):
    code = "THRESHOLD_TOO_SMALL"


class BadExponentError(SeriesTailError):
    code = "BAD_EXPONENT"


class HypothesisViolatedError(SeriesTailError):
    code = "HYPOTHESIS_VIOLATED"


class NonpositiveFactorError(SeriesTailError):
    code = "NONPOSITIVE_FACTOR"


class ZeroFactorError(NonpositiveFactorError):
    code = "ZERO_FACTOR"


class InfeasibleError(SeriesTailError):
    code = "INFEASIBLE"


class NonconvergedError(SeriesTailError):
    code = "NONCONVERGED"


class BelowMeanError(SeriesTailError):
    code = "BELOW_MEAN"


class DomainError(SeriesTailError):
    code = "DOMAIN"


class NotMonotoneError(SeriesTailError):
    code = "NOT_MONOTONE"


class NoValidLambdaError(SeriesTailError):
    code = "NO_VALID_LAMBDA"


class ConfigError(SeriesTailError, ValueError):
    code = "CONFIG"
