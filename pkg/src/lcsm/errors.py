"""Exception hierarchy shared by all modules."""


class LCSMError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(LCSMError, ValueError):
    """Malformed arguments: wrong shapes, non-symmetric matrices, bad sizes."""


class DegenerateDataError(LCSMError, ValueError):
    """Data carry no signal for the requested operation (e.g. lambda_max == 0)."""


class DependencyError(LCSMError):
    """A set of basis matrices is linearly dependent.

    Attributes
    ----------
    index : int or None
        Position of the first matrix that lies in the span of its predecessors.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NonConvergenceError(LCSMError):
    """Coordinate descent hit ``max_iter`` before converging.

    Attributes
    ----------
    coef : ndarray
        Last iterate.
    n_iter : int
        Number of full cycles performed.
    lambda_index : int or None
        Grid position when raised from a path fit.
    """

    def __init__(self, message, coef=None, n_iter=None, lambda_index=None):
        super().__init__(message)
        self.coef = coef
        self.n_iter = n_iter
        self.lambda_index = lambda_index
