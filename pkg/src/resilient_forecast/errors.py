"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: :class:`ValidationError` and its
subclasses exit 2, :class:`DivergenceError` exits 3 and
:class:`SelectionInfeasibleError` exits 4.
"""


class ForecastError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(ForecastError, ValueError):
    """Input or configuration violates a documented precondition."""


class ParseError(ValidationError):
    """Malformed load CSV. ``line`` is 1-based, or ``None`` for whole-file problems."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GapError(ValidationError):
    """Hourly coverage has holes; ``missing`` lists the absent (date, hour) pairs."""

    def __init__(self, missing):
        self.missing = list(missing)
        shown = ", ".join(f"{d.isoformat()} h{h}" for d, h in self.missing[:6])
        more = f" (+{len(self.missing) - 6} more)" if len(self.missing) > 6 else ""
        super().__init__(f"{len(self.missing)} missing hourly timestamps: {shown}{more}")


class RangeError(ValidationError):
    """Requested period is not covered by the series."""


class InsufficientDataError(ValidationError):
    """Too few complete days to build even one sample."""


class DivergenceError(ForecastError):
    """Training loss became non-finite."""

    def __init__(self, epoch):
        self.epoch = epoch
        super().__init__(f"training diverged: non-finite loss at epoch {epoch}")


class SelectionInfeasibleError(ForecastError):
    """No adversarial-training configuration met the clean-data threshold."""
