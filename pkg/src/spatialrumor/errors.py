"""Exception types shared across the package.

The CLI maps these onto process exit codes (see ``spatialrumor.cli``).
"""


class RumorError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class UsageError(RumorError, ValueError):
    """Invalid argument, e.g. a site index outside the lattice."""

    exit_code = 2


class ConfigError(UsageError):
    """Invalid or incomplete run configuration."""

    exit_code = 2


class ContractError(RumorError):
    """A call violated an operation's precondition (e.g. a 0 -> 2 move)."""

    exit_code = 3


class InvariantError(RumorError):
    """An internal invariant failed. Always indicates a bug."""

    exit_code = 3


class CapacityError(RumorError):
    """The requested problem does not fit the configured size cap."""

    exit_code = 4


class StepSizeError(RumorError):
    """ODE integration left the probability simplex."""

    exit_code = 3
