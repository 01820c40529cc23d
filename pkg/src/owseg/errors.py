"""Exception types shared across the toolkit.

Every error raised by the library derives from OwsegError so callers (and the
CLI) can distinguish library failures from programming errors.
"""


class OwsegError(Exception):
    """Base class for all owseg errors."""


class ShapeMismatchError(OwsegError):
    """Two rasters (or label sets) with incompatible dimensions were combined."""


class EmptyInputError(OwsegError):
    """An operation that needs at least one element received none."""


class RleCodecError(OwsegError):
    """Run-length payload is inconsistent (counts do not sum to h*w, bad string)."""


class ScoreRangeError(OwsegError):
    """A score component fell outside [0, 1]."""


class DegenerateBoxError(OwsegError):
    """A box with non-positive area where positive area is required."""


class PyramidFormatError(OwsegError):
    """Feature pyramid file has a malformed or truncated header/payload."""


class PyramidShapeError(OwsegError):
    """Feature pyramid violates stride/shape invariants."""


class ZeroNormFeatureError(OwsegError):
    """A feature vector with zero L2 norm cannot enter affinity computation."""

    def __init__(self, index: int):
        self.index = index
        super().__init__(f"feature vector at index {index} has zero norm")


class AffinityMatrixError(OwsegError):
    """Affinity matrix is not symmetric / lacks a unit diagonal."""


class PredictionOrderError(OwsegError):
    """Predictions handed to the evaluator are not sorted by descending score."""


class UnknownImageError(OwsegError):
    """Predictions reference image ids absent from the ground truth."""

    def __init__(self, image_ids):
        self.image_ids = sorted(image_ids)
        super().__init__(f"predictions reference unknown image ids: {self.image_ids}")


class SchemaError(OwsegError):
    """A JSON artifact violates the expected schema."""


class InputFileError(OwsegError):
    """A referenced input file is missing or unreadable."""


class ConfigError(OwsegError):
    """Pipeline configuration is invalid."""
