"""Exception types shared across the package."""


class NumericOverflowError(ArithmeticError):
    """A recursion or simulation produced a non-finite value.

    ``step`` is the (1-based) recursion step or state index where the first
    non-finite entry appeared; ``trial`` is filled in by the trial loop.
    """

    def __init__(self, message, step=None, trial=None):
        super().__init__(message)
        self.step = step
        self.trial = trial

    def __str__(self):
        msg = super().__str__()
        if self.trial is not None:
            msg = f"{msg} (trial {self.trial})"
        return msg


class SizeCapError(ValueError):
    """A dense oracle was asked for a matrix above the allocation cap."""


class ConfigError(ValueError):
    """Experiment configuration failed validation.

    All problems found are collected in ``errors`` rather than stopping at
    the first one.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
