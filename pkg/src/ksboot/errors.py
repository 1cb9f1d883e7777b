"""Exception types shared across the package."""


class KsbootError(Exception):
    """Base class for all ksboot errors."""


class ParameterError(KsbootError, ValueError):
    """Parameters outside the family's domain (e.g. non-positive variance)."""


class SupportError(KsbootError, ValueError):
    """Data outside the support of the family (e.g. x <= 0 for Gamma)."""


class DegenerateSampleError(KsbootError, ValueError):
    """Sample carries no usable variation (constant, or too short)."""


class ConvergenceError(KsbootError, RuntimeError):
    """Iterative fit did not converge within its iteration cap.

    ``trace`` holds per-iteration diagnostics for post-mortem inspection.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class BlockLengthError(KsbootError, ValueError):
    """Invalid or unselectable block length."""


class NearUnitRootError(KsbootError, ValueError):
    """Estimated AR(1) coefficient too close to the unit root."""


class BootstrapAbort(KsbootError, RuntimeError):
    """Too many bootstrap replicates failed to fit; test aborted."""

    def __init__(self, message, failures=0, total=0, causes=None):
        super().__init__(message)
        self.failures = failures
        self.total = total
        self.causes = list(causes) if causes is not None else []


class ConfigError(KsbootError, ValueError):
    """Invalid experiment or CLI configuration."""


class DataFormatError(KsbootError, ValueError):
    """Malformed input data file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
