"""Exception hierarchy shared by all modules."""


class CornerMoserError(Exception):
    """Base class for every error raised by this package."""


class ResolutionError(CornerMoserError, ValueError):
    pass


class DomainError(CornerMoserError, ValueError):
    pass


class DegreeError(CornerMoserError, ValueError):
    pass


class SupportError(CornerMoserError, ValueError):
    """A field that must be compactly supported is non-zero on a truncation face."""


class ParameterError(CornerMoserError, ValueError):
    pass


class ConfigurationError(CornerMoserError, ValueError):
    pass


class PositivityError(CornerMoserError, ValueError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class MassError(CornerMoserError, ValueError):
    pass


class DegeneracyError(CornerMoserError, ValueError):
    pass


class IntegrationError(CornerMoserError, RuntimeError):
    def __init__(self, message, seed=None):
        super().__init__(message)
        self.seed = seed
