"""Exception types shared by the analysis modules."""


class CatewsError(Exception):
    """Base class for analysis errors."""


class InputError(CatewsError, ValueError):
    """Malformed or inconsistent user input."""


class ParseError(InputError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateDateError(InputError):
    pass


class InsufficientDataError(CatewsError, ValueError):
    pass


class DomainError(CatewsError, ValueError):
    """Argument outside the mathematical domain of a function."""


class RangeError(CatewsError, ValueError):
    """Requested time range not covered by a model or series."""


class ConvergenceError(CatewsError, RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SingularityError(CatewsError, ArithmeticError):
    pass


class UndefinedMomentError(CatewsError, ArithmeticError):
    pass


class DegenerateRootsError(CatewsError, ValueError):
    pass


class InconsistencyError(CatewsError, ValueError):
    pass


class OutsideFoldError(CatewsError, ValueError):
    pass


class DivergenceError(CatewsError, RuntimeError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class InsufficientStructureError(CatewsError, ValueError):
    pass
