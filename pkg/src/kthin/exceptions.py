"""Exception types raised by kthin."""


class DomainError(ValueError):
    """Argument outside the supported numerical envelope."""


class UnsupportedKernelError(ValueError):
    """Kernel family or parameters have no supported construction."""


class QuadratureError(RuntimeError):
    """A numerical quadrature failed to converge under refinement."""


class DegenerateBandwidthWarning(RuntimeWarning):
    """Median heuristic found no spread in the data."""
