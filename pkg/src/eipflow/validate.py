"""Structural validation of process models and collaborations.

Violations are data, not exceptions. Every finding carries a stable rule id:

========== ==========================================================
N-EMPTY     process has no nodes
SF-EMPTY    process has no sequence flows
ID-DUP      node, flow or data object id used twice
SF-REF      sequence flow endpoint does not resolve
SF-DOMAIN   flow leaves an end event or enters a start event
SF-DEFAULT  default flow also carries a condition
XOR-DEFAULT exclusive gateway with >= 2 conditional outflows lacks
            exactly one default flow
EXPR-PARSE  a condition does not parse
ENTRY       no message start event or receive task to instantiate
DO-ITEM     data object references an unknown item definition
DA-ENDPOINT data association endpoints are not one data element + one node
ITEM-PATH   item definition field path is malformed
BOUNDARY    error boundary not attached to an activity
MF-POOLS    message flow connects elements of the same pool
MF-REF      message flow endpoint does not resolve (black-box pools have
            no nodes, so a flow into one can only name the pool itself)
========== ==========================================================
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from eipflow import body as bt
from eipflow.expr import ExprSyntaxError, parse
from eipflow.model import (
    ACTIVITIES, START_KINDS, Collaboration, NodeKind, ProcessModel,
)


@dataclass(frozen=True, order=True)
class Violation:
    rule: str
    ref: str
    text: str
    severity: str = "error"

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def validate_graph(model: ProcessModel, *, nested: bool = False, prefix: str = "") -> list[Violation]:
    """Check the process-model invariants; an empty list means well-formed.

    ``nested`` relaxes the entry rule for sub-process bodies, which may also
    be started by timer or escalation start events.
    """
    out: list[Violation] = []

    def report(rule, ref, text, severity="error"):
        out.append(Violation(rule, prefix + ref, text, severity))

    nodes = model.node_map
    if not model.nodes:
        report("N-EMPTY", model.id, "process has no nodes")
    if not model.flows:
        report("SF-EMPTY", model.id, "process has no sequence flows")

    seen: dict[str, str] = {}
    for kind, ids in (("node", [n.id for n in model.nodes]), ("flow", [f.id for f in model.flows]),
                      ("data object", [d.id for d in model.data_objects]),
                      ("data store", [s for s, _ in model.data_stores])):
        for i in ids:
            if i in seen:
                report("ID-DUP", i, f"{kind} id {i!r} already used by a {seen[i]}")
            seen[i] = kind

    for f in model.flows:
        src, tgt = nodes.get(f.source), nodes.get(f.target)
        if src is None or tgt is None:
            missing = f.source if src is None else f.target
            report("SF-REF", f.id, f"endpoint {missing!r} does not resolve")
            continue
        if src.kind == NodeKind.END_EVENT:
            report("SF-DOMAIN", f.id, f"flow leaves end event {src.id!r}")
        if tgt.kind in START_KINDS:
            report("SF-DOMAIN", f.id, f"flow enters start event {tgt.id!r}")
        if f.is_default and f.condition is not None:
            report("SF-DEFAULT", f.id, "default flow carries a condition")
        if f.condition is not None:
            try:
                parse(f.condition)
            except ExprSyntaxError as exc:
                report("EXPR-PARSE", f.id, str(exc))

    for n in model.nodes:
        if n.kind == NodeKind.EXCLUSIVE_GATEWAY:
            outs = model.outgoing(n.id)
            conditional = [f for f in outs if f.condition is not None]
            defaults = [f for f in outs if f.is_default]
            if len(conditional) >= 2 and len(defaults) != 1:
                report("XOR-DEFAULT", n.id, f"{len(conditional)} conditional outflows, {len(defaults)} default flows")
        if n.kind == NodeKind.ERROR_BOUNDARY:
            host = nodes.get(n.param("attached_to") or "")
            if host is None or host.kind not in ACTIVITIES:
                report("BOUNDARY", n.id, "error boundary must be attached to an activity")

    if model.nodes:
        if nested:
            has_entry = any(n.kind in START_KINDS or n.kind == NodeKind.RECEIVE_TASK for n in model.nodes)
        else:
            has_entry = bool(model.entries())
        if not has_entry:
            report("ENTRY", model.id, "no message start event or receive task")

    items = {i.name for i in model.items}
    for i in model.items:
        for path, _ in i.fields:
            try:
                bt.parse_path(path)
            except bt.PathError as exc:
                report("ITEM-PATH", i.name, str(exc))
    dos = model.data_object_map
    for d in model.data_objects:
        if d.item not in items and d.item != "untyped":
            report("DO-ITEM", d.id, f"item {d.item!r} is not declared")

    data_ids = set(dos) | model.store_ids
    for a in model.data_flow:
        ends = [a.source in data_ids, a.target in data_ids]
        known = [a.source in data_ids or a.source in nodes, a.target in data_ids or a.target in nodes]
        if not all(known):
            report("DA-ENDPOINT", f"{a.source}->{a.target}", "association endpoint does not resolve")
        elif sum(ends) != 1:
            report("DA-ENDPOINT", f"{a.source}->{a.target}", "exactly one endpoint must be a data object or store")

    for node_id, sub in model.sub_processes:
        if node_id not in nodes or nodes[node_id].kind != NodeKind.SUB_PROCESS:
            report("SF-REF", node_id, "nested model attached to a non-sub-process node")
        # sub-process bodies see the parent's items
        sub = sub if sub.items else _with_items(sub, model.items)
        out.extend(validate_graph(sub, nested=True, prefix=f"{prefix}{node_id}/"))

    return sorted(out)


def _with_items(sub: ProcessModel, items) -> ProcessModel:
    from dataclasses import replace
    return replace(sub, items=items)


def validate_collaboration(collab: Collaboration) -> list[Violation]:
    out: list[Violation] = []
    for pool in collab.pools:
        if pool.process is not None:
            out.extend(validate_graph(pool.process, prefix=""))
    for mf in collab.message_flows:
        src, tgt = collab.owner(mf.source), collab.owner(mf.target)
        if src is None or tgt is None:
            out.append(Violation("MF-REF", mf.id, "message flow endpoint does not resolve"))
            continue
        if src.id == tgt.id:
            out.append(Violation("MF-POOLS", mf.id, f"both ends inside pool {src.id!r}"))
        if mf.item and collab.item(mf.item) is None:
            out.append(Violation("DO-ITEM", mf.id, f"item {mf.item!r} is not declared"))
    return sorted(out)
