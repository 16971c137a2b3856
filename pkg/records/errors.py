from records.utils import ErrorLevel, ErrorRecord, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO


class MacsimError(Exception):
    """ Base class for errors that stop an assessment (or a part of one). """
    message: str
    level: ErrorLevel = ErrorLevel.ERROR
    exit_code: int = EXIT_CONFIG

    def __init__(self, message, level=None):
        super().__init__(message)
        self.message = message
        if level: self.level = level

    @property
    def error_response(self):
        return ErrorRecord(level=self.level, message=self.message)


class ConfigurationError(MacsimError):
    exit_code = EXIT_CONFIG


class AlignmentError(MacsimError):
    exit_code = EXIT_CONFIG


class PlanError(ConfigurationError):
    """ A perturbation plan that the generator's value spaces cannot honour. """


class UndefinedAgreementError(MacsimError):
    """ Agreement asked of a missing comparison. """


class DimensionMismatchError(MacsimError):
    pass


class EstimationError(MacsimError):
    level = ErrorLevel.EMPTY


class InfeasibleMarginalsError(MacsimError):
    exit_code = EXIT_INFEASIBLE


class WeightDomainError(MacsimError):
    exit_code = EXIT_INFEASIBLE


class AssessmentError(MacsimError):
    pass


class ReportIOError(MacsimError):
    exit_code = EXIT_IO
