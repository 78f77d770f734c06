"""Exception types shared across the pipeline.

Everything raised on purpose derives from PipelineError so the CLI can map
failures to exit codes without enumerating modules.
"""


class PipelineError(Exception):
    pass


class ParseError(PipelineError):
    """Malformed input bytes or text. Carries enough context to locate the spot."""

    def __init__(self, message, *, offset=None, line=None, path=None):
        loc = []
        if path is not None:
            loc.append(str(path))
        if line is not None:
            loc.append(f"line {line}")
        if offset is not None:
            loc.append(f"offset {offset}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.offset = offset
        self.line = line
        self.path = path


class ConfigError(PipelineError):
    pass


class BoundsError(PipelineError):
    pass


class InsufficientData(PipelineError):
    pass


class InsufficientOverlap(InsufficientData):
    pass


class TimeRegression(PipelineError):
    pass


class RoutingError(PipelineError):
    pass


class SequencingError(PipelineError):
    pass


class DegeneratePairs(PipelineError):
    pass


class UndefinedCorrelation(PipelineError):
    pass


class IncompleteDesign(PipelineError):
    pass
