"""Exception types shared across the package."""


class InsufficientDataError(ValueError):
    """Raised when an operation receives fewer observations than it needs."""


class UndefinedMetricError(ValueError):
    """Raised when a metric is undefined for the given inputs (e.g. ROC with no positives)."""


class CohortValidationError(ValueError):
    """Raised when ingested rows violate the cohort schema (e.g. one-sided missing scores)."""


class CsvParseError(ValueError):
    """Raised on a malformed CSV row; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number
