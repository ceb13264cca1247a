"""Exception types shared across the toolchain.

Every error carries a short upper-case ``code`` so callers (and the CLI)
can branch on the failure kind without parsing messages.
"""


class TmkitError(Exception):
    code = "ERROR"

    def __init__(self, message, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code

    @property
    def message(self):
        return self.args[0]


class ParseError(TmkitError):
    """Syntax error with a 1-based source position."""

    code = "PARSE_ERROR"

    def __init__(self, message, line=1, column=1, expected=(), origin="<memory>"):
        super().__init__(message)
        self.line = line
        self.column = column
        self.expected = list(expected)
        self.origin = origin

    def __str__(self):
        text = f"{self.origin}:{self.line}:{self.column}: {self.message}"
        if self.expected:
            text += " (expected " + ", ".join(self.expected) + ")"
        return text


class EvalError(TmkitError):
    """Runtime fault while evaluating an expression (e.g. division by zero)."""

    code = "EVAL_ERROR"


class ExprTypeError(TmkitError):
    code = "TYPE_ERROR"


class ModelError(TmkitError):
    """Structural problem with a TM model (path resolution, invalid model)."""


class DynamicsError(TmkitError):
    pass


class SimulationError(TmkitError):
    pass


class MachineError(TmkitError):
    """Problem with an Event-B-lite machine or its exploration."""


class CaseError(TmkitError):
    pass
