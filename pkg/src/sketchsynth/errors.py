"""Exception hierarchy shared across the package."""


class SketchSynthError(Exception):
    """Base class for all package errors."""


class ContractViolation(SketchSynthError, ValueError):
    """An operation was called outside its documented preconditions."""


class GrammarError(SketchSynthError, ValueError):
    """A grammar definition is malformed."""


class ParseError(SketchSynthError, ValueError):
    """Text could not be parsed into a program or grammar."""


class EvalError(SketchSynthError):
    """A DSL program could not be evaluated in the given context.

    ``node`` is the offending program node when known.
    """

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class StrategyFault(SketchSynthError):
    """A strategy failed to produce an action for a state."""
