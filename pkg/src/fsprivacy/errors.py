"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 for usage/domain errors, 3 for data errors, 1 for failed self-checks.
"""


class FSPrivacyError(ValueError):
    exit_code = 2


# -- domain errors -----------------------------------------------------------

class DimensionMismatch(FSPrivacyError):
    pass


class PositivityViolation(FSPrivacyError):
    def __init__(self, message, categories=()):
        super().__init__(message)
        self.categories = tuple(categories)


class SupportViolation(FSPrivacyError):
    pass


class InvariantViolation(FSPrivacyError):
    pass


class RateOutOfRange(FSPrivacyError):
    pass


class DegenerateInput(FSPrivacyError):
    pass


class RegionError(FSPrivacyError):
    pass


class FeasibilityViolation(FSPrivacyError):
    pass


class DimensionTooLarge(FSPrivacyError):
    pass


class InfeasibleU(FSPrivacyError):
    pass


class NonConvergence(FSPrivacyError):
    """Iteration budget exhausted; ``result`` holds the best iterate."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


# -- data errors -------------------------------------------------------------

class DataError(FSPrivacyError):
    exit_code = 3


class MalformedLine(DataError):
    def __init__(self, message, line_number=None):
        super().__init__(message if line_number is None else f"line {line_number}: {message}")
        self.line_number = line_number


class UnknownGenre(DataError):
    pass


class UnknownMovie(DataError):
    pass


class PopulationDegenerate(DataError):
    pass


class EmptyPopulation(DataError):
    pass


class UserNotFound(DataError):
    pass


class SelfCheckFailed(FSPrivacyError):
    exit_code = 1
