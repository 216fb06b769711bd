"""
core/errors.py
Exception hierarchy shared by the engine and the CLI.

The CLI maps ConfigError to exit code 2 and InvariantViolation to exit code 3.
"""


class WampError(Exception):
    """Base class for every error raised by WAMP itself."""


class ConfigError(WampError, ValueError):
    """A parameter is outside its allowed range or cannot be parsed."""


class FockError(WampError, ValueError):
    """Misuse of the sparse Fock-state engine."""


class OverlappingSupportError(FockError):
    """tensor() was asked to combine states that both occupy a mode."""


class NonUnitaryError(FockError):
    """A two-mode transformation matrix is not unitary."""


class UnregisteredModeError(FockError, KeyError):
    """A mode label was used before being registered."""

    def __str__(self):
        # KeyError would otherwise wrap the message in quotes
        return str(self.args[0]) if self.args else ""


class OccupancyOverflowError(FockError):
    """A mode exceeded the configured occupancy cap."""


class EnsembleError(WampError, ValueError):
    """Ensemble weights or branch norms are not normalised."""


class InvariantViolation(WampError, RuntimeError):
    """A physics or wiring invariant failed at runtime."""
