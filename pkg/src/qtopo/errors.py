"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class QTopoError(Exception):
    exit_code = 1


class ValidationError(QTopoError, ValueError):
    exit_code = 2


class StructuralError(ValidationError):
    pass


class ParameterError(ValidationError):
    pass


class ChannelError(ValidationError):
    pass


class RegimeError(ValidationError):
    """E_J/E_C below the transmon validity floor."""


class ComparabilityError(ValidationError):
    pass


class UndefinedLTDError(ValidationError):
    pass


class ModelValidityError(ValidationError):
    pass


class BucketingError(ValidationError):
    pass


class AggregationError(ValidationError):
    pass


class MissingCellError(ValidationError):
    pass


class NumericalError(QTopoError, ArithmeticError):
    exit_code = 3


class ConditioningError(NumericalError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class NearResonanceError(NumericalError):
    pass


class NormalizationError(NumericalError):
    pass


class DomainError(NumericalError, ZeroDivisionError):
    pass


class IntegrationError(NumericalError):
    pass


class CollinearityError(NumericalError):
    pass


class CapacityError(QTopoError):
    exit_code = 4
