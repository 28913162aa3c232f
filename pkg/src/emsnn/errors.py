"""Exception hierarchy. The CLI maps each class onto an exit code."""


class EmsnnError(Exception):
    exit_code = 4


class ConfigError(EmsnnError, ValueError):
    """Parameters that cannot produce a feasible run (tile size 0, M < 2B, k > N...)."""

    exit_code = 2


class FormatError(EmsnnError):
    """A file on disk does not match its declared layout."""

    exit_code = 3


class BudgetError(EmsnnError):
    """A pin would push resident bytes past the memory budget.

    Raised by the store, never by user input: it means a tile size was
    computed wrong.
    """

    exit_code = 4


class BoundsError(EmsnnError, IndexError):
    exit_code = 4
