"""Exception hierarchy shared by every flowcast module.

The CLI maps each family onto an exit code: :class:`DataError` subclasses
exit with 2 and :class:`ComputationError` subclasses with 3.
"""


class FlowcastError(Exception):
    """Base class for all flowcast errors."""

    kind = "error"


class DataError(FlowcastError):
    kind = "data-error"


class ComputationError(FlowcastError):
    kind = "computation-failure"


class InsufficientDataError(DataError):
    kind = "insufficient-data"


class AnchorMismatchError(DataError):
    kind = "anchor-mismatch"


class AlignmentError(DataError):
    kind = "alignment"


class InputError(DataError):
    kind = "input"


class ConfigurationError(DataError):
    kind = "configuration"


class DegenerateInputError(DataError):
    kind = "degenerate-input"


class ParseError(DataError):
    """Malformed file content; ``line`` is 1-based and counts the header."""

    kind = "parse"

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class EmptyReportError(DataError):
    kind = "empty-report"


class DegenerateSeriesError(ComputationError):
    kind = "degenerate-series"


class InvalidParameterError(ComputationError):
    kind = "invalid-parameter"


class FitFailedError(ComputationError):
    kind = "fit-failed"

    def __init__(self, message, best_objective=float("nan")):
        self.best_objective = best_objective
        super().__init__(f"{message} (best objective {best_objective!r})")


class SelectionFailedError(ComputationError):
    kind = "selection-failed"
