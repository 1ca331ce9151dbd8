"""Messages and message identifiers."""

from __future__ import annotations

import itertools
import json
import threading
import uuid
from dataclasses import dataclass, replace
from typing import Any, Callable, Iterable, Mapping

from eipflow import body as bt
from eipflow.body import Tree

UNTYPED = "untyped"


class IdGenerator:
    """Reproducible ids of the form ``run-<seed>-<n>``.

    Thread-safe. Several generators may share a seed, so use distinct
    ``prefix`` values when ids from different generators must not collide.
    """

    def __init__(self, seed: int = 0, prefix: str = "run"):
        self.seed = seed
        self.prefix = prefix
        self._counter = itertools.count(1)
        self._lock = threading.Lock()

    def __call__(self) -> str:
        with self._lock:
            n = next(self._counter)
        return f"{self.prefix}-{self.seed}-{n}"


class UuidIds:
    """Non-reproducible ids for live (wall clock) runs."""

    def __call__(self) -> str:
        return uuid.uuid4().hex


IdProvider = Callable[[], str]

_default_ids: IdProvider = IdGenerator(0, prefix="msg")


def default_ids() -> IdProvider:
    return _default_ids


@dataclass(frozen=True)
class Message:
    id: str
    body: Tree | None = None
    body_type: str = UNTYPED
    headers: tuple[tuple[str, str], ...] = ()
    correlation_id: str | None = None
    sequence_number: int | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("message id must be non-empty")
        if self.sequence_number is not None and self.sequence_number < 1:
            raise ValueError(f"sequence numbers start at 1, got {self.sequence_number}")
        if isinstance(self.headers, Mapping):
            object.__setattr__(self, "headers", tuple((str(k), str(v)) for k, v in self.headers.items()))

    def header(self, name: str, default: str | None = None) -> str | None:
        for k, v in self.headers:
            if k == name:
                return v
        return default

    def with_header(self, name: str, value: str) -> "Message":
        out, done = [], False
        for k, v in self.headers:
            if k == name:
                if not done:
                    out.append((k, value))
                    done = True
                continue
            out.append((k, v))
        if not done:
            out.append((name, value))
        return replace(self, headers=tuple(out))

    def without_header(self, name: str) -> "Message":
        return replace(self, headers=tuple((k, v) for k, v in self.headers if k != name))

    def evolve(self, **changes: Any) -> "Message":
        return replace(self, **changes)

    @property
    def lineage(self) -> str:
        """Correlation key used by default: the correlation id, else the message id."""
        return self.correlation_id if self.correlation_id is not None else self.id


def make_message(
    body: Tree | Mapping | None = None,
    *,
    id: str | None = None,
    body_type: str = UNTYPED,
    headers: Mapping[str, str] | Iterable[tuple[str, str]] = (),
    correlation_id: str | None = None,
    sequence_number: int | None = None,
    root: str = "body",
    ids: IdProvider | None = None,
) -> Message:
    if body is not None and not isinstance(body, Tree):
        if isinstance(body, Mapping) and len(body) == 1:
            (root, inner), = body.items()
            body = bt.from_plain(root, inner)
        else:
            body = bt.from_plain(root, body)
    if isinstance(headers, Mapping):
        headers = headers.items()
    return Message(
        id=id or (ids or _default_ids)(),
        body=body,
        body_type=body_type,
        headers=tuple((str(k), str(v)) for k, v in headers),
        correlation_id=correlation_id,
        sequence_number=sequence_number,
    )


def copy_with_new_id(msg: Message, ids: IdProvider | None = None) -> Message:
    """Same content under a fresh id, correlated back to the original."""
    return replace(msg, id=(ids or _default_ids)(), correlation_id=msg.lineage)


# -- canonical form ----------------------------------------------------------------


def to_obj(msg: Message) -> dict:
    return {
        "id": msg.id,
        "correlation_id": msg.correlation_id,
        "sequence_number": msg.sequence_number,
        "headers": [list(h) for h in msg.headers],
        "body_type": msg.body_type,
        "body": bt.to_obj(msg.body),
    }


def from_obj(obj: Mapping) -> Message:
    return Message(
        id=obj["id"],
        correlation_id=obj.get("correlation_id"),
        sequence_number=obj.get("sequence_number"),
        headers=tuple((k, v) for k, v in obj.get("headers", ())),
        body_type=obj.get("body_type", UNTYPED),
        body=bt.from_obj(obj.get("body")),
    )


def canonical_bytes(msg: Message) -> bytes:
    return json.dumps(to_obj(msg), sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode()


def from_bytes(data: bytes) -> Message:
    return from_obj(json.loads(data.decode()))


def message_size(msg: Message) -> int:
    """Canonical body bytes plus header key/value bytes."""
    size = len(bt.to_json(msg.body).encode())
    for k, v in msg.headers:
        size += len(k.encode()) + len(v.encode())
    return size
