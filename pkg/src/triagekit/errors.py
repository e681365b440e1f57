"""Exception hierarchy shared across the package."""

from __future__ import annotations


class TriageError(Exception):
    """Base class for all triagekit errors."""


# --- corpus ---------------------------------------------------------------


class MalformedRecord(TriageError):
    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number
        self.reason = reason


class DuplicateTicketId(TriageError):
    def __init__(self, ticket_id: str):
        super().__init__(f"duplicate ticket_id {ticket_id!r}")
        self.ticket_id = ticket_id


class UnknownLabel(TriageError):
    def __init__(self, name: str):
        super().__init__(f"label {name!r} is not in the registry")
        self.name = name


class DuplicateLabelName(TriageError):
    def __init__(self, name: str):
        super().__init__(f"label {name!r} already exists")
        self.name = name


# --- builder --------------------------------------------------------------


class NoEligibleUpdate(TriageError):
    def __init__(self, ticket_id: str, min_chars: int):
        super().__init__(
            f"ticket {ticket_id!r} has no update with >= {min_chars} cleaned characters"
        )
        self.ticket_id = ticket_id
        self.min_chars = min_chars


class EmptyDataset(TriageError):
    pass


class MissingLabel(TriageError):
    def __init__(self, ticket_id: str):
        super().__init__(f"ticket {ticket_id!r} has no gold label")
        self.ticket_id = ticket_id


# --- features / classifiers ------------------------------------------------


class EmptyDescription(TriageError):
    pass


class EmptyTrainingSet(TriageError):
    pass


class DimensionMismatch(TriageError):
    def __init__(self, expected: int, got: int, what: str = "dimension"):
        super().__init__(f"{what}: expected {expected}, got {got}")
        self.expected = expected
        self.got = got


# --- artifacts --------------------------------------------------------------


class IncompatibleVersion(TriageError):
    def __init__(self, version: object):
        super().__init__(f"unsupported artifact format version {version!r}")
        self.version = version


class CorruptArtifact(TriageError):
    pass


# --- backends ---------------------------------------------------------------


class BackendUnreachable(TriageError):
    pass


class BackendTimeout(TriageError):
    pass


# --- active learning --------------------------------------------------------


class EmptyPool(TriageError):
    pass


class InvalidBatchSize(TriageError):
    def __init__(self, k: int):
        super().__init__(f"batch size must be >= 1, got {k}")
        self.k = k


class UnknownInstance(TriageError):
    def __init__(self, instance_id: str):
        super().__init__(f"instance {instance_id!r} is not in the unlabeled pool")
        self.instance_id = instance_id


class StaleBatch(TriageError):
    pass


# --- evalkit ----------------------------------------------------------------


class LengthMismatch(TriageError):
    pass


class LabelOutOfRange(TriageError):
    pass


class RegistryMismatch(TriageError):
    pass


# --- service ----------------------------------------------------------------


class NoModelLoaded(TriageError):
    pass


class UnknownTask(TriageError):
    def __init__(self, task_id: str):
        super().__init__(f"unknown task {task_id!r}")
        self.task_id = task_id


class AlreadyResolved(TriageError):
    def __init__(self, task_id: str):
        super().__init__(f"task {task_id!r} was already resolved")
        self.task_id = task_id


class StepInProgress(TriageError):
    pass
