"""Exception hierarchy.

``DataError`` subclasses describe problems with user-supplied data and map to
CLI exit status 2; anything else escaping a subcommand is an internal error.
"""

from __future__ import annotations


class GadgetForgeError(Exception):
    pass


class DataError(GadgetForgeError):
    pass


class MalformedRecord(DataError):
    def __init__(self, block_index: int, reason: str, line: int | None = None):
        self.block_index = block_index
        self.reason = reason
        self.line = line
        where = f"block {block_index}"
        if line is not None:
            where += f" (line {line})"
        super().__init__(f"{where}: {reason}")


class IoFailure(DataError):
    def __init__(self, path, cause: Exception | None = None):
        self.path = path
        super().__init__(f"cannot read {path}: {cause}")


class UnterminatedComment(DataError):
    def __init__(self, line: int):
        self.line = line
        super().__init__(f"unterminated block comment starting at line {line}")


class RecursionLimit(GadgetForgeError):
    def __init__(self, function: str, depth: int):
        self.function = function
        self.depth = depth
        super().__init__(f"caller back-tracking through {function!r} exceeded depth {depth}")


class UnlabeledRecord(DataError):
    def __init__(self, record_id: int):
        self.record_id = record_id
        super().__init__(f"record {record_id} has no label")


class UnknownCategory(DataError):
    def __init__(self, tag):
        self.tag = tag
        super().__init__(f"unknown vulnerability category {tag!r}")


class EmptyGroup(DataError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"group {name!r} matched no records")


class TooFewRecords(DataError):
    pass


class ShapeMismatch(GadgetForgeError, ValueError):
    pass


class OddModelDim(GadgetForgeError, ValueError):
    pass


class EmptySequence(GadgetForgeError, ValueError):
    pass


class ConfigMismatch(GadgetForgeError, ValueError):
    pass


class LabelOutOfRange(DataError, ValueError):
    pass


class StepOutOfRange(GadgetForgeError, ValueError):
    pass


class NonFiniteLoss(GadgetForgeError):
    def __init__(self, step: int, loss: float):
        self.step = step
        self.loss = loss
        super().__init__(f"non-finite loss {loss!r} at step {step}")


class LengthMismatch(DataError, ValueError):
    pass


class NoVulnerableClasses(DataError, ValueError):
    pass
