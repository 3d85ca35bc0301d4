"""Exception types raised across the package."""


class HessMCError(Exception):
    """Base class; ``exit_code`` is used by the command line front end."""

    exit_code = 1


class NotPositiveDefinite(HessMCError, ValueError):
    exit_code = 3

    def __init__(self, index, msg=None):
        self.index = index
        super().__init__(msg or f"matrix is not positive definite (pivot {index})")


class ConvergenceFailure(HessMCError, RuntimeError):
    exit_code = 3


class NonPositiveParameter(HessMCError, ValueError):
    exit_code = 2


class RankOutOfRange(HessMCError, ValueError):
    exit_code = 2


class DimensionMismatch(HessMCError, ValueError):
    exit_code = 2


class OutOfSupport(HessMCError, ValueError):
    exit_code = 3

    def __init__(self, index, msg=None):
        self.index = index
        super().__init__(msg or f"point outside the target support (component {index})")


class ModeUnsupported(HessMCError, ValueError):
    exit_code = 2


class HessianUnavailable(HessMCError, ValueError):
    exit_code = 2


class ForwardSolveFailure(HessMCError, RuntimeError):
    exit_code = 4

    def __init__(self, step, msg=None):
        self.step = step
        super().__init__(msg or f"forward solve failed at time step {step}")


class PointOutsideDomain(HessMCError, ValueError):
    exit_code = 2

    def __init__(self, index, msg=None):
        self.index = index
        super().__init__(msg or f"observation point {index} lies outside the domain")


class OutOfSupportStart(HessMCError, ValueError):
    exit_code = 2


class TooFewSamples(HessMCError, ValueError):
    exit_code = 2


class ConstantSeries(HessMCError, ValueError):
    exit_code = 2


class ConfigError(HessMCError, ValueError):
    exit_code = 2
