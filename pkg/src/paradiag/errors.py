"""Exception hierarchy shared across the package."""


class ParadiagError(Exception):
    """Base class for all errors raised by :mod:`paradiag`."""


class SingularSystemError(ParadiagError, ArithmeticError):
    """A linear system that has to be solved is (numerically) singular."""


class PoleError(SingularSystemError):
    """The stability function has a pole at the requested argument."""


class DegenerateLeadingCoefficientError(ParadiagError, ValueError):
    """The characteristic polynomial drops degree at the requested ``z``."""


class DivergenceError(ParadiagError, ArithmeticError):
    """The preconditioned iteration diverged.

    The partial :class:`~paradiag.solver.IterationHistory` is attached as
    ``history``.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history


class ConfigError(ParadiagError, ValueError):
    """Invalid experiment configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


class RoundoffError(ParadiagError, ArithmeticError):
    """Imaginary residue after a real-to-real transform exceeded its threshold."""
