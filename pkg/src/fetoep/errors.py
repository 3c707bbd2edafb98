"""Exception types raised across the package."""


class InvalidParameterError(ValueError):
    pass


class MeshFormatError(ValueError):
    """Malformed Triangle ``.node``/``.ele`` input."""

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}"
        if line is not None:
            where += f" line {line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class UnsupportedMeshError(ValueError):
    pass


class DegenerateElementError(ValueError):
    pass


class CoefficientError(ValueError):
    """Diffusion coefficient not strictly positive where it is sampled."""


class SizeError(ValueError):
    """Problem too large for the requested (usually dense) operation."""


class NotPositiveDefiniteError(ArithmeticError):
    pass


class BreakdownError(ArithmeticError):
    """Krylov recurrence hit a nonpositive curvature or inner product."""
