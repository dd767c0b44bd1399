"""Exception types shared across the package."""


class ConvergenceError(RuntimeError):
    """A certified stopping rule could not be satisfied within its budget."""


class ResourceLimitError(RuntimeError):
    """A computation was refused because it exceeds a configured size guard."""
