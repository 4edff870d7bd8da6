"""Exception hierarchy. Every error raised by the package derives from ReshiError."""


class ReshiError(Exception):
    """Base class; ``code`` is the machine-readable name used by the CLI."""

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self)}


class ParseError(ReshiError):
    def __init__(self, reason: str, row: int | None = None, column: str | None = None, path=None):
        self.reason = reason
        self.row = row
        self.column = column
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if row is not None:
            where.append(f"line {row}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {reason}" if prefix else reason)


class EmptyDataset(ReshiError):
    pass


class DimensionMismatch(ReshiError):
    pass


class CycleDetected(ReshiError):
    def __init__(self, edge):
        self.edge = edge
        super().__init__(f"cycle through edge {edge[0]} -> {edge[1]}")


class UnknownTask(ReshiError):
    pass


class UnknownMachineType(ReshiError):
    pass


class EmptyTrainingSet(ReshiError):
    pass


class NoAllocatableNode(ReshiError):
    def __init__(self, task_id: str, resource: str | None = None):
        self.task_id = task_id
        self.resource = resource
        msg = f"no node can host task {task_id!r}"
        if resource:
            msg += f" (insufficient {resource})"
        super().__init__(msg)


class NoFit(ReshiError):
    pass


class MissingPrediction(ReshiError):
    pass


class MissingHistoricalRuntime(ReshiError):
    pass


class MissingRuntime(ReshiError):
    def __init__(self, task_id: str, machine_type: str):
        self.task_id = task_id
        self.machine_type = machine_type
        super().__init__(f"no runtime for task {task_id!r} on machine type {machine_type!r}")


class NonPositiveRuntime(ReshiError):
    pass


class Deadlock(ReshiError):
    pass


class SchedulerError(ReshiError):
    """A strategy emitted a decision the cluster cannot honour."""


class EmptyCatalog(ReshiError):
    pass


class EmptyCell(ReshiError):
    pass


class ValidationError(ReshiError):
    pass


class IncompatibleModel(ReshiError):
    pass
