"""Exception hierarchy shared by all modules."""


class ZygcommError(Exception):
    """Base class for every error raised by this package."""


class DomainError(ZygcommError, ValueError):
    pass


class SingularityError(ZygcommError, ArithmeticError):
    """Kernel or multiplier evaluated on its singular set."""


class SeparationError(ZygcommError, ValueError):
    """Target points are not coordinate-wise separated from a support."""


class AdmissibilityError(ZygcommError, ValueError):
    pass


class DegenerateError(ZygcommError, ValueError):
    pass


class WitnessFailure(ZygcommError):
    """A non-degeneracy witness does not satisfy the kernel lower bound."""


class CalibrationFailure(ZygcommError):
    pass


class DivisionHazard(ZygcommError, ArithmeticError):
    """A node value of T*1 fell below the guarded lower bracket."""


class PositivityError(ZygcommError, ValueError):
    pass


class ClearanceError(ZygcommError, ValueError):
    """Finite-difference stencil too close to the singular set."""


class SelectionFailure(ZygcommError):
    pass


class GeometryError(ZygcommError):
    pass


class ConfigError(ZygcommError, ValueError):
    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
