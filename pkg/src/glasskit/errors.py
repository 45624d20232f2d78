"""Exception types shared across the toolkit."""


class GlasskitError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(GlasskitError, ValueError):
    """Malformed caller input: bad shapes, values outside contracts, empty data."""


class FileFormatError(InvalidInputError, OSError):
    """A file exists but cannot be parsed (PNG, sidecar, ...); maps to I/O exits."""


class CheckpointError(GlasskitError):
    """Unreadable, truncated, or incompatible checkpoint file."""


class ConfigError(GlasskitError, ValueError):
    """Bad key, value, or combination in a config file."""


class TrainingDivergedError(GlasskitError):
    """Non-finite loss encountered; carries the iteration and term values."""

    def __init__(self, iteration, terms):
        self.iteration = iteration
        self.terms = dict(terms)
        detail = " ".join(f"{k}={v}" for k, v in self.terms.items())
        super().__init__(f"non-finite loss at iteration {iteration}: {detail}")
