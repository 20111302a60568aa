"""Exception types shared across modules."""


class QleError(Exception):
    """Base class."""


class InvalidArgument(QleError, ValueError):
    pass


class SingularArgument(InvalidArgument):
    pass


class OutOfDomain(InvalidArgument):
    pass


class OutOfRange(InvalidArgument):
    pass


class Inconsistent(InvalidArgument):
    pass


class TooLarge(InvalidArgument):
    pass


class InvalidCurve(InvalidArgument):
    pass


class TerminalState(QleError):
    pass


class DegenerateDomain(QleError):
    pass


class NonIntegrableAtom(QleError):
    pass


class NumericalFailure(QleError):
    pass
