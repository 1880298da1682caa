"""Exception types shared across the package."""


class StefanLabError(Exception):
    pass


class InvalidSpecError(StefanLabError, ValueError):
    """Problem data outside the admissible class."""


class CorruptedStateError(StefanLabError):
    pass


class StepFailure(StefanLabError):
    """A single time step could not be completed; the caller may retry with smaller dt."""

    NEWTON_DIVERGED = "NewtonDiverged"
    POSITIVITY_LOST = "PositivityLost"

    def __init__(self, reason, detail=""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


class NotComputable(StefanLabError):
    """A diagnostic lacks the data it needs (missing checkpoint, too short a run, ...)."""


class BadBracketError(StefanLabError, ValueError):
    pass


class ConfigError(StefanLabError, ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
