"""Exception types shared across the package."""


class RmtGapsError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(RmtGapsError, ValueError):
    """A parameter violates a documented constraint; message names it."""


class DegenerateSigmaError(ParameterError):
    """Two scale parameters coincide: the correlated kernels hit a 0/0 limit."""


class ConvergenceError(RmtGapsError, RuntimeError):
    """A series or quadrature failed to reach the requested tolerance."""


class NumericalError(RmtGapsError, RuntimeError):
    """A computed value is outside its mathematically allowed range."""


class NotDirectlyConstructible(RmtGapsError, RuntimeError):
    """No explicit matrix model exists for these parameters; use the log-gas sampler."""
