"""Exception hierarchy shared by all caplab modules.

Exit-code mapping used by the CLI: ValidationError -> 1,
NumericalError -> 2, OutputError -> 3.
"""


class CaplabError(Exception):
    """Base class for all caplab errors."""


class ValidationError(CaplabError):
    """Bad user input: dimensions, index ranges, config values.

    Carries a list of individual violations so callers can report
    all of them at once instead of the first one found.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NumericalError(CaplabError):
    """Solver non-convergence, quadrature failure, kernel-accuracy regression."""


class OutputError(CaplabError):
    """I/O failure while writing campaign artifacts."""
