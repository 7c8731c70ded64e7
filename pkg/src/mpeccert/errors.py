"""Exception hierarchy shared by every stage of the verifier."""


class MPECError(Exception):
    """Base class for all verifier errors."""


class DimensionMismatch(MPECError, ValueError):
    pass


class DimensionTooLarge(MPECError, ValueError):
    pass


class DomainError(MPECError, ArithmeticError):
    """An expression cannot be evaluated at the requested point."""


class DivisionByZero(DomainError, ZeroDivisionError):
    pass


class RuleFailure(MPECError):
    """No calculus rule produces a tangential subdifferential.

    ``function`` names the offending function when known, so callers can
    ask for a manual subdifferential for exactly that entry.
    """

    def __init__(self, reason, function=None):
        self.reason = reason
        self.function = function
        msg = reason if function is None else f"{function}: {reason}"
        super().__init__(msg)

    def with_function(self, function):
        return RuleFailure(self.reason, function)


class FeasibilityError(MPECError):
    def __init__(self, violations):
        self.violations = list(violations)
        names = ", ".join(v.constraint for v in self.violations)
        super().__init__(f"point is infeasible ({names})")


class AllPoolsEmpty(MPECError):
    """Every generator pool of a linearization cone is empty."""


class BranchCapExceeded(MPECError):
    def __init__(self, size, cap):
        self.size = size
        self.cap = cap
        super().__init__(f"|Omega| = {size} exceeds branch cap {cap}")


class ParseError(MPECError):
    def __init__(self, reason, line=None, column=None):
        self.reason = reason
        self.line = line
        self.column = column
        where = "" if line is None else f"line {line}, column {column}: "
        super().__init__(where + reason)


class ValidationError(MPECError):
    def __init__(self, reason, path=None):
        self.reason = reason
        self.path = path
        super().__init__(reason if path is None else f"{path}: {reason}")
