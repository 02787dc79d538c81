"""Exception hierarchy shared by every module."""


class QboundError(Exception):
    """Base class for all library errors."""


class ContractError(QboundError, ValueError):
    """An input violated a documented precondition or type invariant."""


class DimensionError(ContractError):
    """Operand shapes are inconsistent or exceed the dense-size cap."""


class RankDeficiencyError(ContractError):
    """A Fisher matrix is too ill-conditioned to invert."""


class ConfigError(QboundError):
    """A scenario configuration could not be parsed or is inconsistent."""
