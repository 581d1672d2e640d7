"""Exception hierarchy shared by all modules."""


class DHSError(Exception):
    """Base class for library errors."""


class DimensionError(DHSError, ValueError):
    pass


class TopologyError(DHSError, ValueError):
    pass


class GeometryError(DHSError, ValueError):
    pass


class DegreeError(DHSError, ValueError):
    pass


class ShapeError(DHSError, ValueError):
    pass


class InputError(DHSError, ValueError):
    pass


class PreconditionError(DHSError, ValueError):
    pass


class InfeasibleInputsError(DHSError, ValueError):
    """Inputs cannot come from any spectrum satisfying the inequality."""


class CapabilityError(DHSError):
    """The backend cannot supply a quantity the caller asked for."""


class OracleUnavailableError(DHSError):
    pass


class SolverError(DHSError, RuntimeError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class IdentityViolationError(DHSError, ArithmeticError):
    pass
