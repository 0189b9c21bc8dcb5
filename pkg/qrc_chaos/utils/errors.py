"""
Exception hierarchy shared by services and the CLI
"""


class QRCError(Exception):
    """Base class for all errors raised by qrc_chaos"""


class ConfigError(QRCError, ValueError):
    """Invalid user input: config file, CLI flags or operation arguments"""


class NumericalGuardError(QRCError, ArithmeticError):
    """A numerical invariant (trace, Hermiticity, finiteness) was violated"""


class DivergentOrbitError(NumericalGuardError):
    """A map orbit left the finite/bounded region"""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step
