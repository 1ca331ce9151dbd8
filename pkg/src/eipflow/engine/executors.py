"""One executor per pattern.

Executors are plain functions over messages plus whatever state container
the pattern needs; the runtime and the conformance probes both call them.
Stateless executors never receive a store.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

from eipflow import body as bt
from eipflow.body import Tree
from eipflow.channels import Broker, SendFailure
from eipflow.engine.errors import Crash, InvalidMessage, MissingHeader, RoutingError, SplitError
from eipflow.engine.mapping import Mapping, translate
from eipflow.engine.state import ClaimCheckStore, ClaimEntry, MessageStore, RecipientJournal, StoreRecord
from eipflow.expr import EvalError, Expression, Functions, evaluate, evaluate_condition
from eipflow.message import IdProvider, Message, copy_with_new_id, default_ids

log = logging.getLogger(__name__)

CLAIM_HEADER = "claim-check"


# -- routing ------------------------------------------------------------------------------


def exec_content_based_router(conditions: Sequence[tuple[str, Expression | str]], default: str | None,
                              msg: Message, functions: Functions | None = None) -> str:
    """First flow (in the given order) whose condition holds, else ``default``.

    EvalError propagates; the runtime routes the message to the invalid channel.
    """
    for flow_id, cond in conditions:
        if evaluate_condition(cond, msg, functions):
            return flow_id
    if default is None:
        raise RoutingError("no condition holds and there is no default flow")
    return default


@dataclass(frozen=True)
class Pass:
    message: Message


@dataclass(frozen=True)
class Drop:
    message_id: str


def exec_message_filter(condition: Expression | str, msg: Message, functions: Functions | None = None) -> Pass | Drop:
    return Pass(msg) if evaluate_condition(condition, msg, functions) else Drop(msg.id)


def exec_join_router(msg: Message) -> Message:
    return msg


# -- copies: recipient list, multicast, wire tap ----------------------------------------------


class RecipientMode(str, Enum):
    STATELESS = "Stateless"
    SINGLE_TRANSACTION = "SingleTransaction"
    PERSISTENT_LIST = "PersistentList"
    IDEMPOTENT_RESEND = "IdempotentResend"


@dataclass(frozen=True)
class Outcome:
    recipient: str
    status: str  # sent | failed | skipped | rolled-back
    message_id: str | None = None
    detail: str = ""


def recipients_from(spec: str, msg: Message) -> tuple[list[str], Message]:
    """Resolve ``a,b,c`` or ``header:<name>``; a header list is removed from the message."""
    spec = spec.strip()
    if spec.startswith("header:"):
        name = spec[len("header:"):]
        value = msg.header(name)
        if value is None:
            raise MissingHeader(f"recipient header {name!r} missing")
        return [r.strip() for r in value.split(",") if r.strip()], msg.without_header(name)
    return [r.strip() for r in spec.split(",") if r.strip()], msg


def exec_recipient_list(msg: Message, recipients: Sequence[str], mode: RecipientMode | str, broker: Broker, *,
                        now: float = 0.0, ids: IdProvider | None = None, journal: RecipientJournal | None = None,
                        fault: Callable[[str], bool] | None = None, crash_after: int | None = None) -> list[Outcome]:
    """Send one copy per recipient channel, in list order.

    ``fault(recipient)`` injects a send failure; ``crash_after=k`` raises
    :class:`Crash` after ``k`` successful sends in this call.
    """
    mode = RecipientMode(mode)
    ids = ids or default_ids()
    fault = fault or (lambda r: False)

    if mode == RecipientMode.SINGLE_TRANSACTION:
        staged = []
        try:
            with broker.transaction(now) as tx:
                for r in recipients:
                    copy = copy_with_new_id(msg, ids)
                    if fault(r):
                        tx.fail(r, "injected")
                    tx.send(r, copy)
                    staged.append((r, copy.id))
        except SendFailure as exc:
            return [Outcome(r, "rolled-back", None, str(exc)) for r in recipients]
        return [Outcome(r, "sent", mid) for r, mid in staged]

    if mode == RecipientMode.PERSISTENT_LIST and journal is None:
        raise ValueError("PersistentList needs a recipient journal")

    out: list[Outcome] = []
    sent_now = 0
    for r in recipients:
        if mode == RecipientMode.PERSISTENT_LIST and journal.was_sent(msg.id, r):
            out.append(Outcome(r, "skipped", None, "already sent"))
            continue
        if crash_after is not None and sent_now >= crash_after:
            raise Crash(f"crash after {sent_now} sends")
        copy = copy_with_new_id(msg, ids)
        if fault(r):
            out.append(Outcome(r, "failed", None, "injected"))
            continue
        res = broker.send(r, copy, now)
        if not res.ok:
            out.append(Outcome(r, "failed", None, res.reason))
            continue
        if mode == RecipientMode.PERSISTENT_LIST:
            journal.record(msg.id, r)
        out.append(Outcome(r, "sent", copy.id))
        sent_now += 1
    return out


def exec_multicast(msg: Message, branches: Sequence[str], deliver: Callable[[str, Message], None],
                   ids: IdProvider | None = None) -> list[Outcome]:
    """One copy per branch; an exception in one branch never stops the others."""
    out = []
    for b in branches:
        copy = copy_with_new_id(msg, ids)
        try:
            deliver(b, copy)
        except Exception as exc:  # branch isolation is the point
            log.info("multicast branch %s failed: %s", b, exc)
            out.append(Outcome(b, "failed", copy.id, str(exc)))
        else:
            out.append(Outcome(b, "sent", copy.id))
    return out


def exec_wire_tap(msg: Message, tap: Callable[[Message], None], ids: IdProvider | None = None) -> tuple[Message, Message, bool]:
    """Primary output is ``msg`` itself; a copy goes to ``tap``. Tap failures are swallowed."""
    copy = copy_with_new_id(msg, ids)
    try:
        tap(copy)
        ok = True
    except Exception as exc:
        log.warning("wire tap failed for %s: %s", msg.id, exc)
        ok = False
    return msg, copy, ok


# -- splitter -----------------------------------------------------------------------------


def exec_splitter(msg: Message, split: str | None = None, *, parts: Sequence[Sequence[str]] | None = None,
                  ids: IdProvider | None = None) -> list[Message]:
    """Iterative (``split`` path) or static (``parts``: one keep-path list per part).

    Iterative parts keep everything outside the split region, so common
    elements are duplicated into each part.
    """
    ids = ids or default_ids()
    if parts is not None:
        bodies = []
        for spec in parts:
            for p in spec:
                if not bt.exists(msg.body, p):
                    raise SplitError(f"static part path {p} does not resolve")
            bodies.append(bt.project(msg.body, spec))
    else:
        if split is None:
            raise SplitError("either a split path or static parts are required")
        hits = bt.locate(msg.body, split)
        bodies = []
        for i, keep in enumerate(hits):
            body = msg.body
            for j in range(len(hits) - 1, -1, -1):  # back to front keeps indices valid
                if j != i:
                    body = bt.remove(body, hits[j])
            bodies.append(body)
    return [Message(ids(), b, msg.body_type, msg.headers, correlation_id=msg.id, sequence_number=k)
            for k, b in enumerate(bodies, 1)]


# -- transformation ------------------------------------------------------------------------


def exec_translator(msg: Message, mapping: Mapping) -> Message:
    return translate(msg, mapping)


def exec_content_filter(msg: Message, keep: Iterable[str], flatten: bool = False) -> Message:
    keep = list(keep)
    if msg.body is None:
        return msg
    return msg.evolve(body=bt.project(msg.body, keep, flatten))


def exec_content_enricher(msg: Message, placement: str, source: Callable[[Message], Tree | None],
                          ids: IdProvider | None = None) -> Message:
    """Merge ``source(msg)`` at ``placement``; the result is a new message correlated to ``msg``.

    ``source`` may raise (endpoint fault); nothing is merged in that case.
    """
    addition = source(msg)
    body = msg.body
    if addition is not None:
        p = bt.parse_path(placement)
        name = p.last[0] if p.segments else addition.name
        node = bt.Tree(name, addition.value, addition.children)
        if len(p.segments) <= 1:
            body = node
        elif bt.exists(body, p):
            body = bt.replace(body, p, node)
        else:
            body = bt.insert(body, p.parent, node)
    return Message((ids or default_ids)(), body, msg.body_type, msg.headers, correlation_id=msg.id,
                   sequence_number=msg.sequence_number)


def exec_correlation_identifier(msg: Message, key: Expression | str | None = None,
                                functions: Functions | None = None) -> Message:
    """Stamp the correlation id (default: the message's own lineage)."""
    value = str(evaluate(key, msg, functions)) if key is not None else msg.lineage
    return msg.evolve(correlation_id=value)


# -- claim check / message store -----------------------------------------------------------


def claim_check_store(store: ClaimCheckStore, msg: Message, extract: str = "/", retain: bool = False) -> Message:
    """Move (or with ``retain`` copy) the sub-tree at ``extract`` into ``store``."""
    p = bt.parse_path(extract)
    body = msg.body
    whole = len(p.segments) <= 1 or body is None
    if whole:
        entry = ClaimEntry(body, "/", 0, msg.body_type, retain)
        new_body = body if retain else (bt.Tree(body.name) if body is not None else None)
    else:
        hits = bt.locate(body, p)
        if not hits:
            raise InvalidMessage(f"nothing to extract at {extract}")
        full = hits[0]
        node = bt.select(body, full)[0]
        parent = bt.select(body, full.parent)[0]
        pos = next(i for i, c in enumerate(parent.children) if c is node)
        entry = ClaimEntry(node, str(full), pos, msg.body_type, retain)
        new_body = body if retain else bt.remove(body, full)
    key = store.put(entry)
    return msg.evolve(body=new_body).with_header(CLAIM_HEADER, key)


def claim_check_retrieve(store: ClaimCheckStore, msg: Message, key: str | None = None) -> Message:
    """Re-attach the stored payload, drop the header, delete the entry; the id stays."""
    key = key or msg.header(CLAIM_HEADER)
    if key is None:
        raise MissingHeader(f"message {msg.id} carries no {CLAIM_HEADER} header")
    entry = store.take(key)
    if entry.path == "/":
        body, body_type = entry.payload, entry.body_type
    else:
        full = bt.parse_path(entry.path)
        body = msg.body
        if entry.retained and bt.exists(body, full):
            body = bt.replace(body, full, entry.payload)
        else:
            body = bt.insert(body, full.parent, entry.payload, entry.position)
        body_type = msg.body_type
    return msg.evolve(body=body, body_type=body_type).without_header(CLAIM_HEADER)


def exec_message_store(store: MessageStore, msg: Message, tag: str = "", now: float = 0.0) -> tuple[Message, StoreRecord]:
    rec = store.persist(msg, tag, now)
    return msg, rec


def query_by_header(name: str, value: str) -> Callable[[StoreRecord], bool]:
    return lambda r: r.message.header(name) == value


__all__ = [
    "CLAIM_HEADER", "Drop", "EvalError", "Outcome", "Pass", "RecipientMode",
    "claim_check_retrieve", "claim_check_store", "exec_content_based_router", "exec_content_enricher",
    "exec_content_filter", "exec_correlation_identifier", "exec_join_router", "exec_message_filter",
    "exec_message_store", "exec_multicast", "exec_recipient_list", "exec_splitter", "exec_translator",
    "exec_wire_tap", "query_by_header", "recipients_from",
]
