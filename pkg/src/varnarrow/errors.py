"""Exception types shared across the engine."""


class VarnarrowError(Exception):
    """Base class for engine errors."""


class SignatureError(VarnarrowError):
    """A term mentions an operator or sort the theory does not declare."""


class ParseError(VarnarrowError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class UnsupportedFeature(ParseError):
    """A module uses a construct outside the supported subset (ceq, mb, rl, ...)."""

    def __init__(self, construct, line=None, column=None):
        self.construct = construct
        super().__init__(f"unsupported construct: {construct}", line, column)


class UnsupportedAxioms(VarnarrowError):
    """Unification requested for an axiom combination the solver does not handle."""


class ResourceLimit(VarnarrowError):
    """A configurable bound (Diophantine basis size, ...) was exceeded."""


class NonTermination(VarnarrowError):
    """normalize() exceeded its rewrite step limit; the equations likely do not terminate."""


class InvalidExpansion(VarnarrowError):
    """expandNode was called on a node that is not in the frontier."""
