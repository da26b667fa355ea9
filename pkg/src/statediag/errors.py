"""Exception hierarchy shared by every stage of the pipeline."""


class StatediagError(Exception):
    """Base class; ``phase`` names the pipeline stage that failed."""

    phase = "analysis"


class ParseError(StatediagError):
    phase = "parse"

    def __init__(self, line, message):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


class LinkError(StatediagError):
    phase = "link"


class ScopeError(StatediagError):
    phase = "parse"


class ProgramError(StatediagError):
    """Raised by the interpreter; ``point`` is the offending statement."""

    phase = "run"

    def __init__(self, point, message):
        self.point = point
        super().__init__(f"{point}: {message}")


class DepthExceeded(ProgramError):
    pass


class NotAParameter(StatediagError):
    phase = "instrument"


class LiteralArgument(StatediagError):
    phase = "instrument"


class FormatError(StatediagError):
    phase = "io"

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class MissingValue(StatediagError):
    phase = "check"


class InvariantViolation(StatediagError):
    phase = "diagnose"
