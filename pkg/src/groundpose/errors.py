"""Exception hierarchy shared across the package."""


class GroundPoseError(Exception):
    """Base class for all errors raised by groundpose."""


class InvalidInputError(GroundPoseError, ValueError):
    pass


class InvalidHomographyError(GroundPoseError, ValueError):
    """A ground homography violates the unit trigonometric constraint."""


class DegenerateScaleError(GroundPoseError, ValueError):
    """h1 = h2 = 0, so the homography scale cannot be fixed."""


class DegenerateConfigurationError(GroundPoseError):
    """The minimal sample does not determine a finite solution set."""


class GenerationFailureError(GroundPoseError):
    pass


class NoModelError(GroundPoseError):
    """RANSAC never produced a candidate model."""


class ParseError(GroundPoseError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DataError(GroundPoseError, ValueError):
    pass


class ConfigurationError(GroundPoseError, ValueError):
    pass
