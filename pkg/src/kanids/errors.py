"""Exception types shared across the toolkit."""


class ModelFileError(ValueError):
    """Model file is unreadable, truncated, or structurally invalid."""


class VersionMismatchError(ModelFileError):
    """Model file was written by a newer, unsupported format version."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss."""


class DegenerateDataError(ValueError):
    """Data cannot support the requested operation (e.g. only one class present)."""


class FeatureMismatchError(ValueError):
    """A model expects feature columns the dataset does not provide."""
