"""Shared exception types."""


class ContractError(ValueError):
    """A caller violated an operation's precondition."""


class RangeError(ContractError):
    """An index or interval fell outside the sequence domain."""


class ConstructionBug(RuntimeError):
    """A construction procedure violated its own guarantees.

    Carries the annotation stack active at the point of failure so the
    offending step of a long run can be located.
    """

    def __init__(self, message, annotation_stack=(), flip=None):
        super().__init__(message)
        self.annotation_stack = tuple(annotation_stack)
        self.flip = flip

    def __str__(self):
        base = super().__str__()
        if self.annotation_stack:
            base += " [at: " + " > ".join(self.annotation_stack) + "]"
        return base


class RefusalError(RuntimeError):
    """Work was refused by a resource guard, not because it is invalid."""
