"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class QpaError(Exception):
    """Base class for all errors raised by qpa."""


class ParseError(QpaError):
    """Syntax or declaration error in a program text."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: {message}" if line else message)


class EvaluationError(QpaError):
    """Concrete evaluation hit an unbound variable or an ill-formed node."""


class StructureError(QpaError):
    """A structural precondition was violated (cyclic binding, invalid path, ...)."""


class UnsupportedStructure(StructureError):
    """The program is outside the class the analysis accepts."""

    def __init__(self, message: str, witness=None):
        self.witness = witness
        super().__init__(message)


class BudgetExceeded(QpaError):
    """A configured resource budget (paths, decisions, time, size) was exceeded."""


class SupportViolation(QpaError):
    """A bit outside the declared counting variables is semantically relevant."""
