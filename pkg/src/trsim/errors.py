"""Exception types raised by the simulator."""

from __future__ import annotations


class TrsimError(Exception):
    """Base class for all simulator errors."""


class ParseError(TrsimError):
    """Scenario text is not well-formed JSON."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ValidationError(TrsimError):
    """Scenario content violates the schema or a model invariant."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class UnknownNode(TrsimError, LookupError):
    def __init__(self, node: str):
        super().__init__(f"unknown node {node!r}")
        self.node = node


class DisconnectedGraph(TrsimError):
    pass


class NoTrustedRoute(TrsimError):
    pass


class NotZombifiable(TrsimError):
    pass


class ZombifyDisabled(TrsimError):
    pass


class InvalidForMode(TrsimError):
    pass
