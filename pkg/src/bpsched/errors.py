"""Exception types shared across the package."""


class BpschedError(Exception):
    """Base class for all package errors."""


# model
class InfeasibleHorizon(BpschedError):
    pass


class NotDedicated(BpschedError):
    pass


class InternalPrecedenceViolated(BpschedError):
    pass


class HorizonViolated(BpschedError):
    pass


# parser
class ParseError(BpschedError):
    def __init__(self, message, line=None, section=None):
        where = []
        if section is not None:
            where.append(f"section {section!r}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.section = section


class CountMismatch(ParseError):
    pass


# lp / mip
class NumericalBreakdown(BpschedError):
    pass


class DimensionMismatch(BpschedError):
    pass


class TooLarge(BpschedError):
    pass


# compact / dw / pricing / branching
class InfeasibleWindows(BpschedError):
    pass


class FlagMismatch(BpschedError):
    pass


class MasterInfeasible(BpschedError):
    pass


class ShapeMismatch(BpschedError):
    pass


class NonIntegralLpVertex(BpschedError):
    pass


class MipBudget(BpschedError):
    pass


class EmptyDomain(BpschedError):
    pass


class NoFractionalTarget(BpschedError):
    pass
