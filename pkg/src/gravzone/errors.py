"""Exception hierarchy shared by all gravzone modules.

Every data-level failure raises a subclass of :class:`GravzoneError` so
callers (and the CLI) can distinguish validation problems (exit code 2)
from programming errors. Messages carry enough context (line numbers,
coordinates, offending keys) to be actionable on their own.
"""


class GravzoneError(Exception):
    """Base class for all data/validation errors raised by this package."""


# --- grid ingestion and synthesis ---------------------------------------

class MalformedRecord(GravzoneError):
    """A CSV record has the wrong arity or a non-numeric field."""


class IrregularGrid(GravzoneError):
    """Records do not form a complete regular grid (spacing or coverage)."""


class EmptyInput(GravzoneError):
    """An input stream contained no data records."""


class InvalidConfig(GravzoneError):
    """A synthesis or grid configuration violates its invariants."""


class InvalidFraction(GravzoneError):
    """A sampling fraction lies outside (0, 1]."""


# --- kriging -------------------------------------------------------------

class TooFewSamples(GravzoneError):
    """Not enough samples for the requested operation."""


class NoPairsInRange(GravzoneError):
    """All sample pairs are farther apart than the maximum lag."""


class TooFewBins(GravzoneError):
    """Variogram fitting needs at least three occupied lag bins."""


class SingularSystem(GravzoneError):
    """A kriging system stayed singular after diagonal regularization."""


# --- window features -----------------------------------------------------

class CenterOutOfBounds(GravzoneError):
    """A window center index lies outside the grid."""


class GridTooSmall(GravzoneError):
    """The grid is too small for gradient computation (needs 2x2)."""


# --- fusion and learners -------------------------------------------------

class DimensionMismatch(GravzoneError):
    """Input dimensionality does not match the model or weight matrix."""


class SingleClassInput(GravzoneError):
    """A training set contains only one class."""


class NonFiniteLoss(GravzoneError):
    """Training loss became non-finite even after step-size backtracking."""


class EmptyDataset(GravzoneError):
    """A training set contains no samples."""


class LabelArityError(GravzoneError):
    """Labels are not binary {0, 1}."""


class NotStandardized(GravzoneError):
    """A feature column's variance is not within tolerance of 1."""


# --- pipeline ------------------------------------------------------------

class DegenerateLabels(GravzoneError):
    """Quantile labeling produced a single class over the whole grid."""


class LengthMismatch(GravzoneError):
    """Prediction and truth vectors differ in length."""


# --- CLI / config --------------------------------------------------------

class ConfigError(GravzoneError):
    """Base class for run-configuration file problems."""


class UnknownKey(ConfigError):
    """A configuration file names a key that does not exist."""


class InvalidConfigValue(ConfigError):
    """A configuration value failed type or range validation."""


class EmptyGrid(GravzoneError):
    """Rendering was asked to draw a grid with no cells."""
