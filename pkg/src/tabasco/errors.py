"""Exception hierarchy shared by the library and the CLI."""


class TabascoError(Exception):
    """Base class. ``exit_code`` is what the CLI returns when this escapes."""

    exit_code = 3
    code = "internal"

    def __init__(self, message, *, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code


class ValidationError(TabascoError, ValueError):
    exit_code = 1
    code = "validation"


class DegenerateConfidenceError(ValidationError):
    code = "degenerate_confidence"


class EmptyClassError(ValidationError):
    code = "empty_class"


class ZeroNormError(ValidationError):
    code = "zero_norm"


class MissingTruthError(ValidationError):
    code = "missing_truth"


class TooFewSamplesError(ValidationError):
    code = "too_few_samples"


class DataIOError(TabascoError, OSError):
    exit_code = 2
    code = "io"
