from __future__ import annotations


def get_message(e: Exception) -> str:
    return e.args[0] if e.args else ""


def set_message(e: Exception, value: str) -> None:
    args = list(e.args)
    if args:
        args[0] = value
    else:
        args.append(value)
    e.args = tuple(args)


class VbcdhmmError(Exception):
    message = property(get_message, set_message)


class ValidationError(VbcdhmmError):
    """Input that violates a precondition."""


class DimensionMismatchError(ValidationError):
    """Shapes or feature dimensions that do not agree."""


class DatasetError(ValidationError):
    """Malformed dataset content.

    :param message: what is wrong
    :param line: 1-based line number in the dataset file, if known
    :param record_id: id of the offending record, if known
    """

    def __init__(
        self, message: str, *, line: int | None = None, record_id: str | None = None
    ):
        self.line = line
        self.record_id = record_id
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if record_id is not None:
            prefix += f"record {record_id!r}: "
        super().__init__(prefix + message)


class SchemaVersionError(ValidationError):
    """Model file written with an unsupported schema version."""

    def __init__(self, found: object, expected: int):
        self.found = found
        self.expected = expected
        super().__init__(
            f"unsupported model schema version {found!r} (expected {expected})"
        )


class UnknownLabelError(ValidationError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"unknown class label {label!r}")


class DegenerateDataError(VbcdhmmError):
    """Data or posterior too degenerate to factorize (non-SPD, too few frames)."""


class NumericalError(VbcdhmmError):
    """A message-passing step lost all probability mass."""
