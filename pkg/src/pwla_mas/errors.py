"""Exception hierarchy.

Every failure the framework can report is a subclass of :class:`DomainError`
(command-line exit code 2) except :class:`StepLimitExceeded`, which signals a
runaway agent schedule (exit code 3).
"""


class DomainError(Exception):
    """Base class for recoverable data/model errors."""

    @property
    def name(self):
        return type(self).__name__


# dataset ------------------------------------------------------------------

class InvalidDataset(DomainError):
    pass


class MissingColumn(DomainError):
    def __init__(self, name):
        super().__init__(f"column {name!r} not found")
        self.column = name


class NonNumericCell(DomainError):
    def __init__(self, row, col, value=None):
        super().__init__(f"row {row}, column {col!r}: not a finite number ({value!r})")
        self.row = row
        self.col = col
        self.value = value


class EmptyDataset(DomainError):
    pass


class InvalidLabel(DomainError):
    def __init__(self, row, value):
        super().__init__(f"row {row}: label {value!r} is not 1 or 2")
        self.row = row
        self.value = value


class IdMismatch(DomainError):
    def __init__(self, instance_id, missing_table):
        super().__init__(f"instance {instance_id!r} missing from table {missing_table!r}")
        self.instance_id = instance_id
        self.missing_table = missing_table


class DuplicateAttribute(DomainError):
    def __init__(self, name):
        super().__init__(f"attribute {name!r} appears more than once")
        self.attribute = name


class DegenerateSplit(DomainError):
    pass


# pwla / smffnn ------------------------------------------------------------

class DimensionMismatch(DomainError):
    def __init__(self, expected, got):
        super().__init__(f"expected {expected} values, got {got}")
        self.expected = expected
        self.got = got


class AllWeightsZero(DomainError):
    pass


class BadIndex(DomainError):
    pass


class BadPolicy(DomainError):
    pass


class SingleClassTraining(DomainError):
    pass


class EmptyTestSet(DomainError):
    pass


class SnapshotFormatError(DomainError):
    pass


# agents -------------------------------------------------------------------

class DuplicateAgent(DomainError):
    pass


class UnknownAgent(DomainError):
    pass


class ProtocolViolation(DomainError):
    def __init__(self, transition):
        super().__init__(f"transition not allowed by protocol: {transition}")
        self.transition = transition


class StepLimitExceeded(Exception):
    """Raised when the scheduler hits ``max_steps`` with events still pending."""

    def __init__(self, max_steps, trace):
        super().__init__(f"step limit {max_steps} reached with events pending")
        self.max_steps = max_steps
        self.trace = trace

    @property
    def name(self):
        return type(self).__name__


# case study ---------------------------------------------------------------

class BadCounts(DomainError):
    pass


class NoMainZone(DomainError):
    pass


class ExportError(DomainError):
    pass
