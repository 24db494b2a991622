"""Exception hierarchy shared by all modules."""


class TunnelError(Exception):
    """Base class for every error raised by this package."""


class DomainError(TunnelError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class SingularityError(TunnelError, ValueError):
    """Evaluation at a pole was requested without a limit rule."""


class InsufficientDataError(TunnelError, ValueError):
    pass


class ConstructionError(TunnelError, RuntimeError):
    pass


class NoPositiveSolution(TunnelError, RuntimeError):
    """The Green equation has no positive solution for the requested data."""


class SolverDiverged(TunnelError, RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class RadiusTooLarge(TunnelError, RuntimeError):
    pass


class PreconditionError(TunnelError, ValueError):
    pass


class AssemblyError(TunnelError, RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


class NotAdmissible(TunnelError, RuntimeError):
    def __init__(self, message, tested=None):
        super().__init__(message)
        self.tested = tested or []


class ConfigError(TunnelError, ValueError):
    pass


class SchemaMismatch(TunnelError, ValueError):
    pass
