"""Exception hierarchy shared across cowkit modules."""


class CowkitError(Exception):
    """Base class for all cowkit errors."""


class ParameterError(CowkitError, ValueError):
    """A physical parameter or function argument violates its invariants."""


class ConfigError(CowkitError):
    """A configuration document failed to parse or validate."""


class KeyConsumedError(CowkitError):
    """A one-time-pad key was offered for combination a second time."""


class QberThresholdError(CowkitError):
    """At least one link's estimated QBER exceeded the configured threshold."""
