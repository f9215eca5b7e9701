"""Exception hierarchy shared across the package.

The three branches map onto the CLI exit codes: configuration problems
(exit 2), infeasible plans (exit 3) and violated numerical preconditions
(exit 4).
"""


class ConfigError(ValueError):
    """Invalid configuration value or inconsistent inputs."""


class OutOfBoundsError(ConfigError):
    """A shape or coordinate falls outside the device footprint."""


class EmptyTrapError(ConfigError):
    """A potential offered for in-trap sampling has no bound region."""


class InfeasiblePlanError(RuntimeError):
    """A transport or rearrangement request cannot be satisfied."""


class ChannelConflictError(InfeasiblePlanError):
    """Two simultaneous transport channels overlap on the device."""

    def __init__(self, pair, message=None):
        self.pair = tuple(pair)
        super().__init__(message or f"channel footprints of plans {self.pair} overlap")


class PreconditionError(RuntimeError):
    """A numerical precondition (sampling, resolution, stability) is violated."""


class FitFailureError(RuntimeError):
    """A model fit did not converge or the data do not support the model."""


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_PRECONDITION = 4


def exit_code_for(exc: BaseException) -> int:
    """Exit code the CLI should use for a raised exception."""
    if isinstance(exc, InfeasiblePlanError):
        return EXIT_INFEASIBLE
    if isinstance(exc, PreconditionError):
        return EXIT_PRECONDITION
    if isinstance(exc, (ConfigError, ValueError, KeyError, TypeError)):
        return EXIT_CONFIG
    return 1
