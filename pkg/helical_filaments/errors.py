'''
Exceptions raised by the numerical modules

Each error carries a `payload` dict with the numbers needed to diagnose the failure
(residuals, last iterates, brackets). The CLI serializes the payload to JSON
and maps numerical failures to exit code 1 and validation failures to exit code 2.

'''

from helical_filaments import utils


class HelicalFilamentsError(Exception):

    # the CLI exit code for this kind of failure
    exit_code = 1

    def __init__(self, message, **payload):
        super().__init__(message)
        self.message = message
        self.payload = payload

    def to_dict(self):
        return {
            'error': self.__class__.__name__,
            'message': self.message,
            'payload': {key: utils.to_jsonable(value) for key, value in self.payload.items()},
        }


class ValidationError(HelicalFilamentsError):
    exit_code = 2


class AssumptionError(ValidationError):
    pass


class CompatibilityError(ValidationError):
    pass


class DomainError(HelicalFilamentsError):
    pass


class PlacementError(DomainError):
    pass


class ResolutionError(HelicalFilamentsError):
    pass


class FactorizationError(HelicalFilamentsError):
    pass


class SingularityError(HelicalFilamentsError):
    pass


class CollisionError(SingularityError):
    pass


class NumericalBlowupError(HelicalFilamentsError):
    pass


class SolverError(HelicalFilamentsError):
    pass


class NoSolutionError(SolverError):
    pass


class AmbiguityError(SolverError):
    pass


class ConvergenceError(SolverError):
    pass


class FixedPointError(ConvergenceError):
    pass

