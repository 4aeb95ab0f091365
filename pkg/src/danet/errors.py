"""Exception hierarchy shared across the package."""


class DanetError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(DanetError, ValueError):
    """Operand shapes are incompatible for the requested operation."""


class NumericError(DanetError, ArithmeticError):
    """A tensor contains NaN or infinite values."""


class ContractError(DanetError, ValueError):
    """A precondition of an API call was violated."""


class IngestError(DanetError):
    """Raised when a series file is malformed or not hour-continuous."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TrainingError(DanetError):
    """Training diverged; ``epoch`` holds the failing epoch index."""

    def __init__(self, message, epoch):
        self.epoch = epoch
        super().__init__(f"epoch {epoch}: {message}")


class ModelFileError(DanetError):
    """A model file is corrupt, truncated or written by another format version."""


class MetricDomainError(DanetError, ValueError):
    """Metric is undefined for some samples (e.g. MAPE with a zero actual)."""

    def __init__(self, message, indices):
        self.indices = list(indices)
        super().__init__(f"{message}: indices {self.indices}")


class ConfigError(DanetError):
    """Configuration is invalid; ``problems`` lists every offending field."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))
