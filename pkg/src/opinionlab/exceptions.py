"""Exception hierarchy shared by every opinionlab module."""


class OpinionLabError(Exception):
    """Base class for all errors raised by opinionlab."""


class InvalidSize(OpinionLabError, ValueError):
    pass


class InvalidNetwork(OpinionLabError, ValueError):
    pass


class NotStronglyConnected(OpinionLabError, ValueError):
    pass


class MissingNetwork(OpinionLabError, ValueError):
    pass


class ZeroSeedWeight(OpinionLabError, ZeroDivisionError):
    pass


class AllDeGroot(OpinionLabError, ValueError):
    """Every player has m_i = 0, so noisy opinions have no finite limit."""


class Singular(OpinionLabError, ArithmeticError):
    pass


class Degenerate(OpinionLabError, ValueError):
    pass


class NonConvergence(OpinionLabError, RuntimeError):
    pass


class NoConvergence(NonConvergence):
    """Raised by the equilibrium and optimum solvers; carries the iterate trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class NoRoot(OpinionLabError, ArithmeticError):
    pass


class UnsupportedNetwork(OpinionLabError, ValueError):
    pass


class GammaOutOfRange(OpinionLabError, ValueError):
    pass


class ConfigError(OpinionLabError, ValueError):
    pass
