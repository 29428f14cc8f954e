class BeltramiError(Exception):
    """Base class for numerical failures raised by this package."""


class NonConvergenceError(BeltramiError):
    """An iterative solve ran out of iterations before reaching its tolerance."""


class InvariantError(BeltramiError, ValueError):
    """A structural invariant (sup-norm, support, singularity guard...) was violated."""


class DegenerateNormalizationError(InvariantError):
    """The raw solution is too close to zero at 1 to be normalised."""
