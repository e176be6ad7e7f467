"""Exception hierarchy.

Every error raised on purpose by the library derives from
:class:`QhoFilterError`, so callers (the CLI in particular) can map them
to exit codes without catching unrelated bugs.
"""


class QhoFilterError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(QhoFilterError, ValueError):
    pass


class InvalidSpec(QhoFilterError, ValueError):
    """A model field violates its invariant.

    ``field`` carries the dotted path of the offending field
    (e.g. ``"plant.k_energy"``) when it is known.
    """

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class NotHurwitz(QhoFilterError, ValueError):
    pass


class EigenFailure(QhoFilterError, ArithmeticError):
    pass


class NotPositiveSemidefinite(QhoFilterError, ValueError):
    pass


class DefectiveMatrix(QhoFilterError, ArithmeticError):
    pass


class TauTooLarge(QhoFilterError, ValueError):
    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class NotAdmissible(TauTooLarge):
    pass


class QuadratureNotConverged(QhoFilterError, ArithmeticError):
    pass


class DegreeMismatch(QhoFilterError, ValueError):
    pass


class SingularTheta(QhoFilterError, ArithmeticError):
    pass


class SingularP22(QhoFilterError, ArithmeticError):
    pass


class SingularCommutatorBlock(QhoFilterError, ArithmeticError):
    pass


class InitNotAdmissible(NotAdmissible):
    pass


class NoDescentDirection(QhoFilterError, ArithmeticError):
    """Line search exhausted at machine precision.

    The best iterate reached so far is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NoBracket(QhoFilterError, RuntimeError):
    def __init__(self, message, scan=None):
        super().__init__(message)
        self.scan = scan


class ConfigError(QhoFilterError, ValueError):
    """Config file could not be parsed (as opposed to failing validation)."""


class ReportFormatError(QhoFilterError, ValueError):
    """A report file does not match the current schema."""
