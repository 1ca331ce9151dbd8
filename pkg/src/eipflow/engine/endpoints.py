"""Simulated external endpoints.

A handler takes ``(request, deadline)`` and returns :class:`Reply`,
:class:`Fault` or :class:`TimedOut`. Scripted behaviours cover the common
cases; latency is logical, so a reply that would arrive after the deadline
is reported as a timeout.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Union

from eipflow import body as bt
from eipflow.body import Tree
from eipflow.message import IdProvider, Message, default_ids

log = logging.getLogger(__name__)

DEFAULT_DEADLINE = 30.0


@dataclass(frozen=True)
class Reply:
    message: Message
    latency: float = 0.0


@dataclass(frozen=True)
class Fault:
    code: str
    text: str = ""
    latency: float = 0.0


@dataclass(frozen=True)
class TimedOut:
    after: float


Result = Union[Reply, Fault, TimedOut]
Handler = Callable[[Message, float], Result]


def _reply(request: Message, body: Tree | None, body_type: str | None, ids: IdProvider, latency: float) -> Reply:
    msg = Message(ids(), body, body_type or request.body_type, correlation_id=request.id)
    return Reply(msg, latency)


class Behavior:
    """Base for scripted endpoint behaviours."""

    def __call__(self, request: Message, deadline: float, ids: IdProvider) -> Result:  # pragma: no cover
        raise NotImplementedError


@dataclass
class Echo(Behavior):
    def __call__(self, request, deadline, ids):
        return _reply(request, request.body, None, ids, 0.0)


@dataclass
class FixedReply(Behavior):
    body: Tree | None = None
    body_type: str | None = None

    def __call__(self, request, deadline, ids):
        return _reply(request, self.body, self.body_type, ids, 0.0)


@dataclass
class FaultBehavior(Behavior):
    code: str = "fault"
    text: str = ""

    def __call__(self, request, deadline, ids):
        return Fault(self.code, self.text)


@dataclass
class Delay(Behavior):
    d: float
    then: Behavior = field(default_factory=Echo)

    def __call__(self, request, deadline, ids):
        res = self.then(request, deadline, ids)
        if isinstance(res, Reply):
            return Reply(res.message, res.latency + self.d)
        if isinstance(res, Fault):
            return Fault(res.code, res.text, res.latency + self.d)
        return res


@dataclass
class Sequence(Behavior):
    """Each call uses the next behaviour; the last one repeats."""

    steps: list[Behavior]
    _i: int = 0

    def __call__(self, request, deadline, ids):
        step = self.steps[min(self._i, len(self.steps) - 1)]
        self._i += 1
        return step(request, deadline, ids)


def behavior_from_obj(obj: Any) -> Behavior:
    """Scenario form: ``echo``, ``{fixed: {body, body_type}}``, ``{fault: code}``,
    ``{delay: d, then: ...}``, ``{sequence: [...]}``."""
    if obj == "echo" or obj == {"echo": None}:
        return Echo()
    if isinstance(obj, Mapping):
        if "fixed" in obj:
            spec = obj["fixed"] or {}
            body = spec.get("body")
            if body is not None and not isinstance(body, Tree):
                (root, inner), = body.items()
                body = bt.from_plain(root, inner)
            return FixedReply(body, spec.get("body_type"))
        if "fault" in obj:
            f = obj["fault"]
            if isinstance(f, Mapping):
                return FaultBehavior(str(f.get("code", "fault")), str(f.get("text", "")))
            return FaultBehavior(str(f))
        if "delay" in obj:
            return Delay(float(obj["delay"]), behavior_from_obj(obj.get("then", "echo")))
        if "sequence" in obj:
            return Sequence([behavior_from_obj(x) for x in obj["sequence"]])
    raise ValueError(f"unknown endpoint behaviour {obj!r}")


class UnknownEndpoint(KeyError):
    pass


class EndpointRegistry:
    def __init__(self, ids: IdProvider | None = None, default_deadline: float = DEFAULT_DEADLINE):
        self.ids = ids or default_ids()
        self.default_deadline = default_deadline
        self._handlers: dict[str, Handler] = {}
        self.calls: list[tuple[str, str]] = []  # (endpoint, request id)
        self._lock = threading.Lock()

    def register(self, name: str, handler: Handler | Behavior) -> None:
        if isinstance(handler, Behavior):
            beh = handler
            handler = lambda req, deadline: beh(req, deadline, self.ids)  # noqa: E731
        self._handlers[name] = handler

    def __contains__(self, name: str) -> bool:
        return name in self._handlers

    @property
    def names(self) -> list[str]:
        return sorted(self._handlers)

    def call_sync(self, name: str, request: Message, deadline: float | None = None) -> Result:
        """Run the handler; replies slower than the deadline become :class:`TimedOut`."""
        deadline = self.default_deadline if deadline is None else deadline
        with self._lock:
            handler = self._handlers.get(name)
            self.calls.append((name, request.id))
        if handler is None:
            raise UnknownEndpoint(name)
        res = handler(request, deadline)
        latency = getattr(res, "latency", 0.0)
        if isinstance(res, (Reply, Fault)) and latency > deadline:
            return TimedOut(deadline)
        return res


CORRELATION_HEADER = "correlation"


@dataclass(order=True)
class _Pending:
    at: float
    seq: int
    key: str = field(compare=False)
    message: Message = field(compare=False)


class Correlator:
    """Asynchronous request/reply: replies are matched strictly on correlation key."""

    def __init__(self, endpoints: EndpointRegistry):
        self.endpoints = endpoints
        self._inflight: list[_Pending] = []
        self._arrived: dict[str, Message] = {}
        self._waiting: set[str] = set()
        self.invalid: list[Message] = []
        self.faults: dict[str, Fault] = {}
        self._seq = itertools.count()
        self._lock = threading.Lock()

    def send_async(self, name: str, request: Message, key: str, now: float) -> float | None:
        """Fire the request; returns the logical arrival time of the reply (None on fault)."""
        res = self.endpoints.call_sync(name, request, float("inf"))
        with self._lock:
            self._waiting.add(key)
            if isinstance(res, Fault):
                self.faults[key] = res
                return None
            if isinstance(res, TimedOut):
                return None
            reply = res.message.evolve(correlation_id=key).with_header(CORRELATION_HEADER, key)
            heapq.heappush(self._inflight, _Pending(now + res.latency, next(self._seq), key, reply))
            return now + res.latency

    def deliver(self, reply: Message) -> bool:
        """An externally arriving reply; unmatched keys are invalid-routed."""
        key = reply.header(CORRELATION_HEADER) or reply.correlation_id
        with self._lock:
            if key is None or key not in self._waiting:
                self.invalid.append(reply)
                return False
            self._arrived[key] = reply
            return True

    def advance(self, now: float) -> list[str]:
        """Move replies due by ``now`` into the arrived set; returns their keys."""
        keys = []
        with self._lock:
            while self._inflight and self._inflight[0].at <= now:
                p = heapq.heappop(self._inflight)
                self._arrived[p.key] = p.message
                keys.append(p.key)
        return keys

    def next_arrival(self) -> float | None:
        return self._inflight[0].at if self._inflight else None

    def await_reply(self, key: str, deadline: float, now: float) -> Message | Fault | TimedOut | None:
        """The reply for ``key`` if it is there; TimedOut once ``now`` reaches the deadline; else None."""
        self.advance(now)
        with self._lock:
            if key in self._arrived:
                self._waiting.discard(key)
                return self._arrived.pop(key)
            if key in self.faults:
                self._waiting.discard(key)
                return self.faults.pop(key)
            if now >= deadline:
                self._waiting.discard(key)
                return TimedOut(deadline)
            return None
