"""Exception hierarchy for demobench."""


class DemobenchError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(DemobenchError, ValueError):
    """Input violates a type invariant."""


class InvalidSchema(ValidationError):
    pass


class EmptyCohort(ValidationError):
    pass


class NoPositives(ValidationError):
    pass


class ZeroMass(ValidationError):
    pass


class NegativeInput(ValidationError):
    pass


class PercentSumOutOfBand(ValidationError):
    """Published percentages sum too far from 100 to be a rounding artefact."""


class CountInconsistency(ValidationError):
    pass


class UnknownAttributeValue(ValidationError):
    pass


class UnknownGroup(ValidationError):
    pass


class DuplicateGroup(ValidationError):
    pass


class MixedLabels(ValidationError):
    pass


class ParseError(ValidationError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source:
            where += f"{source}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(f"{where}{message}")


class SchemaMismatch(ValidationError):
    pass


class GroupMismatch(ValidationError):
    pass


class AllGroupsSkipped(ValidationError):
    pass


class MissingLabels(ValidationError):
    pass


class PhaseMismatch(ValidationError):
    pass


class UnorderedWindows(ValidationError):
    pass


class EmptyWindow(ValidationError):
    pass


class StoreError(DemobenchError):
    pass


class VersionCollision(StoreError):
    pass


class BenchmarkNotFound(StoreError):
    pass
