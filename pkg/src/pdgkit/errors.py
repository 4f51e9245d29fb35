"""Exception hierarchy.

Two broad families matter for the CLI exit-code contract: ValidationError
(semantic problems in otherwise readable inputs, exit 1) and InputError
(missing or unreadable files, exit 2).
"""


class PdgKitError(Exception):
    pass


class ValidationError(PdgKitError):
    pass


class InputError(PdgKitError):
    pass


class GraphValidationError(ValidationError):
    """Raised when an operation requires a clean graph but violations exist."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"invalid proxy dynamic graph: {lines}")


class ParamRangeError(ValidationError, ValueError):
    pass


class UnknownNodeError(ValidationError, KeyError):
    pass


class DocumentError(ValidationError):
    pass


class SceneError(ValidationError):
    pass


class DimensionMismatchError(SceneError):
    pass


class MaskOverlapError(SceneError):
    pass


class InvalidDepthError(SceneError):
    pass


class SynthSpecError(ValidationError):
    pass


class ManifestError(InputError):
    pass


class TensorFormatError(InputError):
    pass


class ChecksumError(InputError):
    pass


class UndefinedMetricError(PdgKitError):
    """A metric has no defined value on the given inputs (reported, never silently 0)."""
