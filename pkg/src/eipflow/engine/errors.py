"""Engine error types.

:class:`InvalidMessage` subclasses mean "this message cannot be processed";
the runtime routes such messages to the invalid-message channel instead of
failing the instance. Everything else surfaces as an :class:`ExecutorFault`.
"""

from __future__ import annotations


class EngineError(Exception):
    pass


class InvalidMessage(EngineError):
    """The message, not the process, is at fault."""


class TypeMismatch(InvalidMessage):
    pass


class CorrelationError(InvalidMessage):
    pass


class MissingSequenceNumber(InvalidMessage):
    pass


class UnknownKey(InvalidMessage):
    pass


class MissingHeader(InvalidMessage):
    pass


class RoutingError(InvalidMessage):
    """No outgoing flow could be selected."""


class MappingError(EngineError):
    def __init__(self, path: str, transform: str, value=None, reason: str = ""):
        super().__init__(f"{transform} at {path}: {reason or 'failed'} (value={value!r})")
        self.path = path
        self.transform = transform
        self.value = value


class SplitError(EngineError):
    pass


class DuplicateRecord(EngineError):
    pass


class NotFound(EngineError):
    pass


class Crash(EngineError):
    """Simulated process crash used by robustness tests."""


class ExecutorFault(EngineError):
    def __init__(self, node: str, cause: BaseException | str, code: str = "fault"):
        super().__init__(f"{node}: {cause}")
        self.node = node
        self.cause = cause
        self.code = code
