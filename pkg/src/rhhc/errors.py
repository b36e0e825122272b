"""Exception types shared across the solver."""


class RhhcError(Exception):
    """Base class for all library errors."""


class ParseError(RhhcError):
    """Instance or plan file is not syntactically valid."""


class ValidationError(RhhcError):
    """A domain invariant is violated; the message names the first violation."""


class UnknownPatient(RhhcError):
    pass


class UnknownCaregiver(RhhcError):
    pass


class CaregiverUnavailable(RhhcError):
    pass


class RouteTooLong(RhhcError):
    """The brute-force adversary only handles short routes."""


class TooManyPatients(RhhcError):
    pass


class IncompatiblePatient(RhhcError):
    pass


class Incompatible(RhhcError):
    pass


class NumericalFailure(RhhcError):
    """LP pivot breakdown that survived a refactorization restart."""


class MissingInitialColumn(RhhcError):
    pass


class NoFractionalPatient(RhhcError):
    """Raised by the branching rules when the LP solution is already integral."""


class InvalidPattern(RhhcError):
    pass


class InvalidPlan(RhhcError):
    pass


class InfeasibleInstance(RhhcError):
    """The mandatory (pre-assigned) visits cannot be robustly scheduled."""


class TooLarge(RhhcError):
    """The exhaustive oracle refuses instances beyond its enumeration budget."""
