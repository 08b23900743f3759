"""Exception types shared across the pipeline.

Every error raised by a loader names the offending input (file, line,
column, record id) so CLI stages can surface machine-readable diagnostics.
"""

from __future__ import annotations


class ChronicleError(Exception):
    """Base class for all pipeline errors."""


class SpecError(ChronicleError):
    """Error in an ontology / message / relation spec file."""

    def __init__(self, message: str, path: str | None = None,
                 line: int | None = None, column: int | None = None):
        self.path = path
        self.line = line
        self.column = column
        loc = ""
        if path is not None:
            loc = f"{path}:"
        if line is not None:
            loc += f"{line}:"
            if column is not None:
                loc += f"{column}:"
        super().__init__(f"{loc} {message}" if loc else message)


class DslSyntaxError(SpecError):
    pass


class CycleInTaxonomy(SpecError):
    pass


class UnknownConcept(SpecError):
    pass


class UnknownInstance(SpecError):
    pass


class DuplicateInstance(SpecError):
    pass


class DuplicateMessageType(SpecError):
    pass


class UnknownMessageType(SpecError):
    pass


class UnknownSlot(SpecError):
    pass


class ScaleRequired(SpecError):
    """Ordered comparison requested on a concept without an ordered scale."""


class CorpusError(ChronicleError):
    """Error in a corpus file or record."""


class MalformedRecord(CorpusError):
    def __init__(self, reason: str, path: str | None = None, line: int | None = None):
        self.reason = reason
        self.path = path
        self.line = line
        loc = f"{path}:{line}: " if path is not None and line is not None else ""
        super().__init__(f"{loc}{reason}")


class DuplicateDocId(CorpusError):
    def __init__(self, doc_id: str):
        self.doc_id = doc_id
        super().__init__(f"duplicate doc_id {doc_id!r}")


class UnparsableTimestamp(CorpusError):
    def __init__(self, value: str):
        self.value = value
        super().__init__(f"unparsable timestamp {value!r}")


class UnresolvableExpression(ChronicleError):
    """A temporal pattern matched but no resolution rule applies."""

    def __init__(self, raw: str, pattern_id: str):
        self.raw = raw
        self.pattern_id = pattern_id
        super().__init__(f"cannot resolve {raw!r} (pattern {pattern_id})")


class GoldMessageError(ChronicleError):
    """Error in a gold-message file."""


class SlotTypeViolation(GoldMessageError):
    def __init__(self, msg_type: str, slot: str, value: str, expected: str):
        self.msg_type = msg_type
        self.slot = slot
        self.value = value
        self.expected = expected
        super().__init__(
            f"{msg_type}.{slot}: {value!r} is not an instance of {expected}")


class UnparsableAnchor(GoldMessageError):
    def __init__(self, value: str):
        self.value = value
        super().__init__(f"unparsable time anchor {value!r}")


class EmptyTrainingSet(ChronicleError):
    pass


class TooFewPoints(ChronicleError):
    def __init__(self, got: int, need: int = 3):
        self.got = got
        self.need = need
        super().__init__(f"need at least {need} timestamps, got {got}")


class MissingTemplate(ChronicleError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"no template for relation {name!r}")
