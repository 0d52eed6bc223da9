"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: 2 for input validation problems,
3 for estimation-validity failures (empty window, no instrument
variation, ...) and 4 for internal numeric failures.
"""


class WarnRddError(Exception):
    exit_code = 1


class InputError(WarnRddError):
    """Malformed files, out-of-range values, bad configuration."""

    exit_code = 2


class EstimationError(WarnRddError):
    """A fit that cannot validly be run on the data at hand."""

    exit_code = 3


class NumericError(WarnRddError):
    """Numerical breakdown inside an otherwise valid computation."""

    exit_code = 4


class SeparationError(NumericError):
    """Quasi-separation in the logit fit; carries the diverging fit."""

    def __init__(self, message, partial_fit=None):
        super().__init__(message)
        self.partial_fit = partial_fit
