"""Exception hierarchy."""


class MaxStabError(Exception):
    """Base class for errors raised by this package."""


class InvalidArgument(MaxStabError, ValueError):
    pass


class NumericFailure(MaxStabError, RuntimeError):
    """A factorization or density evaluation could not be completed.

    ``diagnostics`` holds whatever numbers help locate the problem
    (condition estimates, jitter tried, mass outside a bracket, ...).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class UnsupportedRepresentation(MaxStabError, ValueError):
    pass


class DegenerateRequest(MaxStabError, ValueError):
    pass


class RunawayStop(MaxStabError, RuntimeError):
    """The iteration cap was hit before the stopping rule fired.

    The partially built field and counters are attached so callers can
    inspect how far the run got.
    """

    def __init__(self, message, values=None, draws=0, gaussian_draws=0):
        super().__init__(message)
        self.values = values
        self.draws = draws
        self.gaussian_draws = gaussian_draws
