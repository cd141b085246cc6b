"""Exception hierarchy. The CLI maps these onto exit codes:
ValidationError -> 1, NumericalError -> 2, FileFormatError -> 3."""


class NodeThinError(Exception):
    pass


class ValidationError(NodeThinError):
    """Bad inputs: invariant violations, size errors, missing collocation."""


class SizeError(ValidationError):
    pass


class CollocationError(ValidationError):
    """Coarse nodes that do not exist (bit-exactly) in the fine set."""

    def __init__(self, message, offending=None):
        super().__init__(message)
        self.offending = offending if offending is not None else []


class CapacityError(ValidationError):
    pass


class NumericalError(NodeThinError):
    pass


class ConditioningError(NumericalError):
    pass


class SmootherError(NumericalError):
    pass


class DivergenceError(NumericalError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class FileFormatError(NodeThinError):
    """Malformed node file; carries the 1-based line number."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
