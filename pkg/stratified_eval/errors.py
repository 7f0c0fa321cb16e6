from typing import Optional


class StratifiedEvalError(Exception):
    """Base class of all errors raised by stratified_eval."""


################
# Config errors #
################


class ConfigError(StratifiedEvalError):
    pass


##############
# Data errors #
##############


class DataError(StratifiedEvalError):
    pass


class ColumnMissing(DataError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Column {name!r} not found in the input header.")


class DataValidationError(DataError, ValueError):
    """A row of the input table violates the EvalTable contract."""

    def __init__(self, row: int, reason: str):
        self.row = row
        self.reason = reason
        super().__init__(f"row {row}: {reason}")


class EmptySelection(DataError):
    pass


class EmptyInput(DataError):
    pass


class NonFiniteValue(DataError):
    pass


class UnknownAttribute(DataError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Attribute {name!r} is not a column of the table.")


################
# Metric errors #
################


class MetricError(StratifiedEvalError):
    pass


class OneClassOnly(MetricError):
    def __init__(self, message: str = "only one class present"):
        super().__init__(message)


class TooFewSamples(MetricError):
    pass


class DomainError(MetricError, ValueError):
    pass


class DegenerateBaseRate(DomainError):
    pass


class MetricUndefined(MetricError):
    def __init__(self, metric_id: str, reason: str):
        self.metric_id = metric_id
        self.reason = reason
        super().__init__(f"{metric_id} undefined: {reason}")


class EvaluationError(StratifiedEvalError):
    def __init__(self, message: str, subgroup: Optional[str] = None):
        self.subgroup = subgroup
        if subgroup is not None:
            message = f"[{subgroup}] {message}"
        super().__init__(message)
