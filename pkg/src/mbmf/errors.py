"""Exception hierarchy shared by all analysis stages."""


class MBMFError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


class InputError(MBMFError):
    """Unreadable or malformed input (bad record, missing file)."""

    exit_code = 2

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyDataError(InputError):
    pass


class ParameterError(MBMFError):
    """A parameter lies outside its admissible domain."""

    exit_code = 2


class ScaleOutOfRangeError(MBMFError):
    """A scale that leaves some window without events, or does not tile the session."""

    def __init__(self, message, day=None, window=None):
        super().__init__(message)
        self.day = day
        self.window = window


class FitError(MBMFError):
    def __init__(self, message, residual_norm=None):
        super().__init__(message)
        self.residual_norm = residual_norm


class SingularMomentError(MBMFError):
    def __init__(self, message, day=None):
        super().__init__(message)
        self.day = day


class DegenerateEnsembleError(MBMFError):
    pass


class ResolutionError(MBMFError):
    pass


class DomainError(ParameterError):
    pass
