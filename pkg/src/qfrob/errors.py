"""Exception hierarchy.

Three families matter to callers (and map to CLI exit codes): spec errors
(bad input text or definitions), numerical failures, and property
violations detected by a check.
"""

from __future__ import annotations


class QfrobError(Exception):
    pass


class SpecError(QfrobError):
    """Malformed field definition, catalog name or spec file."""


class ParseError(SpecError):
    def __init__(self, msg: str, pos: int, text: str = ""):
        self.msg = msg
        self.pos = pos
        self.text = text
        super().__init__(f"{msg} at position {pos}")


class UnknownIdentifierError(ParseError):
    def __init__(self, name: str, pos: int, text: str = ""):
        self.name = name
        super().__init__(f"unknown identifier '{name}'", pos, text)


class ArityError(SpecError):
    pass


class NumericalError(QfrobError):
    """A computation could not be carried out."""


class DomainError(NumericalError):
    """Point outside the domain box of a field."""


class EvaluationSingularity(NumericalError):
    """Non-finite field values where a finite one was required."""


class DomainExitError(NumericalError):
    def __init__(self, time: float, point, msg: str = "trajectory left the domain"):
        self.time = time
        self.point = point
        super().__init__(f"{msg} at t={time:.6g}, x={list(map(float, point))}")


class StepUnderflowError(NumericalError):
    def __init__(self, time: float, point):
        self.time = time
        self.point = point
        super().__init__(f"step size underflow at t={time:.6g}, x={list(map(float, point))}")


class DegenerateFrameError(NumericalError):
    pass


class NotInImageError(NumericalError):
    pass


class InjectivityError(NumericalError):
    pass


class PropertyViolation(QfrobError):
    """A checked property failed (e.g. the involutivity gate)."""


class InvolutivityError(PropertyViolation):
    pass
