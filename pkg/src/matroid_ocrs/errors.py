"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so library code should raise
the most specific type that applies.
"""


class InputError(ValueError):
    """Malformed arguments or files: bad element ids, bad probabilities, bad JSON."""


class InfeasibleError(RuntimeError):
    """A vector is not in the required polytope, or a feasibility LP failed to close."""


class SchemeMismatchError(RuntimeError):
    """A scheme was asked to run on an instance outside its preconditions."""


class BuildStalledError(RuntimeError):
    """The cutting-plane build stopped below its target constant.

    Carries the best certified value so callers can report it.
    """

    def __init__(self, message, best_c=None):
        super().__init__(message)
        self.best_c = best_c
