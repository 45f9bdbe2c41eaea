"""Exception types shared across the package."""


class ConfstrengthError(Exception):
    """Base class for all package errors."""


class InvalidInput(ConfstrengthError):
    """Input violates a precondition (non-finite values, bad shapes, bad ranges)."""


class SingularPoint(ConfstrengthError):
    """A Stieltjes transform was evaluated at an eigenvalue."""


class NoSolution(ConfstrengthError):
    """A root-finding problem has no solution in the admissible domain."""


class RankDeficient(ConfstrengthError):
    """A matrix that must be invertible is numerically singular."""


class Degenerate(ConfstrengthError):
    """A denominator fell below the noise floor; the quantity is not identifiable."""
