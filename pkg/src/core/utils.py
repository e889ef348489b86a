from typing import Literal, Optional

DefectKind = Literal[
    "orphan_rgb",
    "orphan_masks",
    "missing_semantic",
    "empty_mask",
    "unreadable",
    "too_many_submasks",
    "semantic_mismatch",
    "size_mismatch",
]


class Defect:
    """
    Represents a non-fatal dataset problem found while scanning or loading.

    Attributes:
        message (str): Description of the defect.
        record_id (str): Id of the record the defect belongs to.
        kind (str): Defect class, one of `DefectKind`.
        path (str, optional): File or folder the defect points at.
    """

    def __init__(
        self,
        message,
        record_id,
        kind: DefectKind,
        path=None,
    ):
        self.message = message
        self.record_id = record_id
        self.kind = kind
        self.path = path

    def __repr__(self):
        return f"DEFECT({self.kind.upper()}): {self.message} in record {self.record_id}" + (
            f". At: {self.path}" if self.path else ""
        )

    def exact(self):
        """
        Returns a concise string representation of the defect.
        """
        return f"Defect({self.message}, record_id={self.record_id}, kind={self.kind})"

    def to_dict(self):
        return {
            "message": self.message,
            "record_id": self.record_id,
            "kind": self.kind,
            "path": None if self.path is None else str(self.path),
        }

    def __eq__(self, other):
        return (
            self.message == other.message
            and self.record_id == other.record_id
            and self.kind == other.kind
        )


class AdapterError(Exception):
    """Base class of every fatal error raised by the toolkit."""

    exit_code = 1


class ConfigError(AdapterError):
    """Invalid configuration, missing dataset paths, bad CLI input."""

    exit_code = 2


class BackboneUnavailableError(ConfigError):
    """A real backbone checkpoint or package cannot be found."""


class CheckpointMismatchError(AdapterError):
    """Adapter checkpoint does not agree with the requested hyperparameters."""

    exit_code = 3


class RasterIOError(AdapterError):
    """An image or mask raster cannot be read or written."""

    exit_code = 4


class RecordError(AdapterError):
    """
    Record-level failure raised by the loader.

    Carries the record id and the defect kind so scanners can turn it back
    into a `Defect` instead of crashing.
    """

    def __init__(self, message: str, record_id: str, kind: DefectKind, path=None):
        super().__init__(f"{message} (record {record_id})")
        self.record_id = record_id
        self.kind = kind
        self.path = path

    def to_defect(self) -> Defect:
        return Defect(str(self.args[0]), self.record_id, self.kind, self.path)


class ShapeError(AdapterError, ValueError):
    """A tensor does not have the expected extent along a named axis."""

    def __init__(self, what: str, axis: str, expected, got):
        super().__init__(f"{what}: axis '{axis}' expected {expected}, got {got}")
        self.axis = axis


class CapacityError(AdapterError, ValueError):
    """More ground-truth submasks than prompt batches."""


class NonFiniteLossError(AdapterError):
    """Training produced a NaN or infinite loss."""

    def __init__(self, message: str, dump_path: Optional[str] = None):
        super().__init__(message if dump_path is None else f"{message}; state dumped to {dump_path}")
        self.dump_path = dump_path


def check_axis(what: str, axis: str, expected: int, got: int):
    """Raise a `ShapeError` naming `axis` when `got != expected`."""
    if expected != got:
        raise ShapeError(what, axis, expected, got)
