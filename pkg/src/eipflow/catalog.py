"""Integration pattern profiles and structural recognition.

:data:`PROFILES` is the static characteristics table (one row per pattern
kind); ``data/profiles.csv`` is its checked-in transcription and the two must
stay byte-identical (see :func:`profiles_csv`).

:func:`recognize` matches subgraph templates (node kinds, sequence flows,
data associations, message flows, node params) and returns every match.
:func:`check_semantics` checks a match against its profile row.
"""

from __future__ import annotations

import csv
import io
import json
from collections import deque
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Iterable

from eipflow import body as bt
from eipflow.expr import ExprSyntaxError, parse
from eipflow.model import GATEWAYS, TASKS, Collaboration, Node, NodeKind, ProcessModel


class PatternKind(str, Enum):
    REQUEST_REPLY_SYNC = "RequestReplySync"
    REQUEST_REPLY_ASYNC = "RequestReplyAsync"
    SYNCH_ASYNCH_BRIDGE = "SynchAsynchBridge"
    ASYNCH_SYNCH_BRIDGE = "AsynchSynchBridge"
    CORRELATION_IDENTIFIER = "CorrelationIdentifier"
    CONTENT_BASED_ROUTER = "ContentBasedRouter"
    MESSAGE_FILTER = "MessageFilter"
    RECIPIENT_LIST = "RecipientList"
    SPLITTER = "Splitter"
    AGGREGATOR = "Aggregator"
    RESEQUENCER = "Resequencer"
    MESSAGE_TRANSLATOR = "MessageTranslator"
    CONTENT_ENRICHER = "ContentEnricher"
    CONTENT_FILTER = "ContentFilter"
    CLAIM_CHECK = "ClaimCheck"
    WIRE_TAP = "WireTap"
    MESSAGE_STORE = "MessageStore"
    JOIN_ROUTER = "JoinRouter"
    EXTERNAL_SERVICE = "ExternalService"
    MULTICAST = "Multicast"

    def __str__(self) -> str:
        return self.value


class Cardinality(str, Enum):
    ONE_TO_ONE = "one_to_one"
    ONE_TO_N = "one_to_n"
    N_TO_ONE = "n_to_one"
    ONE_TO_ZERO_OR_ONE = "one_to_zero_or_one"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class PatternProfile:
    kind: PatternKind
    message_cardinality: Cardinality
    channel_cardinality: Cardinality
    message_generating: bool
    stateful: bool
    required_params: tuple[str, ...]


K, C = PatternKind, Cardinality
_1, _N, _N1 = C.ONE_TO_ONE, C.ONE_TO_N, C.N_TO_ONE

PROFILES: dict[PatternKind, PatternProfile] = {p.kind: p for p in (
    PatternProfile(K.REQUEST_REPLY_SYNC, _1, _1, True, False, ("endpoint",)),
    PatternProfile(K.REQUEST_REPLY_ASYNC, _1, _1, True, False, ("endpoint", "correlation")),
    PatternProfile(K.SYNCH_ASYNCH_BRIDGE, _1, _1, True, False, ("endpoint", "correlation")),
    PatternProfile(K.ASYNCH_SYNCH_BRIDGE, _1, _1, True, False, ("endpoint",)),
    PatternProfile(K.CORRELATION_IDENTIFIER, _1, _1, False, False, ("correlation",)),
    PatternProfile(K.CONTENT_BASED_ROUTER, _N, _N, False, False, ("conditions",)),
    PatternProfile(K.MESSAGE_FILTER, _1, _1, False, False, ("condition",)),
    PatternProfile(K.RECIPIENT_LIST, _N, _N, True, False, ("recipients",)),
    PatternProfile(K.SPLITTER, _N, _1, True, False, ("split",)),
    PatternProfile(K.AGGREGATOR, _N1, _1, True, True, ("algorithm", "completion", "correlation")),
    PatternProfile(K.RESEQUENCER, _1, _1, False, True, ()),
    PatternProfile(K.MESSAGE_TRANSLATOR, _1, _1, False, False, ("mapping",)),
    PatternProfile(K.CONTENT_ENRICHER, _1, _1, True, False, ("placement",)),
    PatternProfile(K.CONTENT_FILTER, _1, _1, False, False, ("keep",)),
    PatternProfile(K.CLAIM_CHECK, _1, _1, False, True, ("extract", "store")),
    PatternProfile(K.WIRE_TAP, _1, _N, True, False, ("tap",)),
    PatternProfile(K.MESSAGE_STORE, _1, _1, False, True, ("store",)),
    PatternProfile(K.JOIN_ROUTER, _1, _N1, False, False, ()),
    PatternProfile(K.EXTERNAL_SERVICE, _1, _1, True, False, ("endpoint",)),
    PatternProfile(K.MULTICAST, _N, _N, True, False, ("branches",)),
)}

EXPRESSION_PARAMS = frozenset({"condition", "correlation"})
PATH_PARAMS = frozenset({"split", "keep", "extract", "placement"})

CSV_HEADER = ("kind", "message_cardinality", "channel_cardinality", "message_generating", "stateful", "required_params")


def profiles_csv() -> str:
    """The profile table rendered exactly as ``data/profiles.csv`` is stored."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for p in PROFILES.values():
        w.writerow((p.kind.value, p.message_cardinality.value, p.channel_cardinality.value,
                    str(p.message_generating).lower(), str(p.stateful).lower(), ";".join(p.required_params)))
    return buf.getvalue()


def load_profiles_csv() -> dict[PatternKind, PatternProfile]:
    text = resources.files("eipflow.data").joinpath("profiles.csv").read_text()
    rows = list(csv.DictReader(io.StringIO(text)))
    return {PatternKind(r["kind"]): PatternProfile(
        PatternKind(r["kind"]), Cardinality(r["message_cardinality"]), Cardinality(r["channel_cardinality"]),
        r["message_generating"] == "true", r["stateful"] == "true",
        tuple(x for x in r["required_params"].split(";") if x)) for r in rows}


@dataclass(frozen=True)
class PatternInstance:
    kind: PatternKind
    anchor: str
    satellites: tuple[str, ...] = ()
    params: tuple[tuple[str, str], ...] = ()
    strength: str = "strong"
    process: str = ""

    @property
    def nodes(self) -> tuple[str, ...]:
        return (self.anchor,) + self.satellites

    def param(self, key: str, default: str | None = None) -> str | None:
        return dict(self.params).get(key, default)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "anchor": self.anchor, "satellites": list(self.satellites),
                "params": dict(self.params), "strength": self.strength, "process": self.process}


def _inst(kind, anchor, satellites=(), params=None, strength="strong", process=""):
    params = {k: v for k, v in (params or {}).items() if v is not None}
    return PatternInstance(kind, anchor, tuple(dict.fromkeys(satellites)), tuple(sorted(params.items())), strength, process)


# -- recognition ---------------------------------------------------------------------------


class _View:
    """Indexed read-only view of one process inside its collaboration."""

    def __init__(self, model: ProcessModel, collab: Collaboration | None):
        self.m = model
        self.collab = collab
        self.nodes = model.node_map
        self.outs: dict[str, list] = {n: [] for n in self.nodes}
        self.ins: dict[str, list] = {n: [] for n in self.nodes}
        for f in model.flows:
            self.outs.setdefault(f.source, []).append(f)
            self.ins.setdefault(f.target, []).append(f)
        self.stores = model.store_ids
        self.dos = model.data_object_map
        self.pool = collab.owner(model.nodes[0].id) if collab and model.nodes else None

    def writes_store(self, n: str) -> list[str]:
        return [t for t in self.m.outputs_of(n) if t in self.stores]

    def reads_store(self, n: str) -> list[str]:
        return [s for s in self.m.inputs_of(n) if s in self.stores]

    def in_dos(self, n: str):
        return [self.dos[s] for s in self.m.inputs_of(n) if s in self.dos]

    def out_dos(self, n: str):
        return [self.dos[t] for t in self.m.outputs_of(n) if t in self.dos]

    def partner(self, ref: str, outgoing: bool) -> str | None:
        """Pool id on the other end of a message flow leaving (or reaching) ``ref``."""
        if self.collab is None:
            return None
        flows = self.collab.flows_from(ref) if outgoing else self.collab.flows_to(ref)
        for mf in flows:
            other = self.collab.owner(mf.target if outgoing else mf.source)
            if other is not None and (self.pool is None or other.id != self.pool.id):
                return other.id
        return None

    def pool_name(self, pool_id: str | None) -> str | None:
        if pool_id is None or self.collab is None:
            return None
        return self.collab.pool(pool_id).name or pool_id

    def exchange(self, n: str) -> str | None:
        """Endpoint of a request/reply exchange at ``n``: explicit param or both-way message flows."""
        node = self.nodes[n]
        if node.param("endpoint"):
            return node.param("endpoint")
        out_p, in_p = self.partner(n, True), self.partner(n, False)
        if out_p is not None and out_p == in_p:
            return self.pool_name(out_p)
        return None

    def downstream(self, start: str) -> list[str]:
        seen, order, q = {start}, [], deque([start])
        while q:
            cur = q.popleft()
            for f in self.outs.get(cur, ()):
                if f.target not in seen:
                    seen.add(f.target)
                    order.append(f.target)
                    q.append(f.target)
        return order

    def branch(self, flow) -> list[str]:
        """Nodes along a branch until it ends or merges."""
        out, cur, seen = [], flow.target, set()
        while cur in self.nodes and cur not in seen:
            seen.add(cur)
            out.append(cur)
            nxt = self.outs.get(cur, [])
            if len(nxt) != 1 or len(self.ins.get(nxt[0].target, [])) > 1:
                break
            cur = nxt[0].target
        return out

    def flow_order(self) -> dict[str, int]:
        """Breadth-first rank from the entry nodes; unreachable nodes follow by id."""
        rank: dict[str, int] = {}
        starts = sorted(n.id for n in self.m.nodes if not self.ins.get(n.id))
        q = deque(starts)
        for s in starts:
            rank[s] = len(rank)
        while q:
            cur = q.popleft()
            for f in self.outs.get(cur, ()):
                if f.target not in rank:
                    rank[f.target] = len(rank)
                    q.append(f.target)
        for n in sorted(self.nodes):
            rank.setdefault(n, len(rank))
        return rank


def recognize(model: ProcessModel, collab: Collaboration | None = None) -> list[PatternInstance]:
    """All pattern occurrences in ``model``, ordered along the control flow."""
    v = _View(model, collab)
    found: list[PatternInstance] = []
    for node in model.nodes:
        found.extend(_match_node(v, node))
    rank = v.flow_order()
    found.sort(key=lambda i: (rank.get(i.anchor, 1 << 30), i.anchor, i.kind.value))
    pattern_subs = {i.anchor for i in found if i.kind in (K.AGGREGATOR, K.RESEQUENCER)}
    for node_id, sub in model.sub_processes:
        if node_id not in pattern_subs:
            found.extend(recognize(sub, collab))
    return found


def _match_node(v: _View, node: Node) -> list[PatternInstance]:
    n = node.id
    outs, ins = v.outs.get(n, []), v.ins.get(n, [])
    pid = v.m.id
    res: list[PatternInstance] = []
    k = node.kind

    if k == NodeKind.EXCLUSIVE_GATEWAY and len(outs) >= 2:
        conds = [f for f in outs if f.condition is not None]
        defaults = [f for f in outs if f.is_default]
        discard = [f for f in defaults if v.nodes.get(f.target) is not None
                   and v.nodes[f.target].kind == NodeKind.END_EVENT and not v.nodes[f.target].is_message_event]
        if len(outs) == 2 and len(conds) == 1 and len(defaults) == 1 and discard:
            res.append(_inst(K.MESSAGE_FILTER, n, [discard[0].target],
                             {"condition": conds[0].condition.source, "pass": conds[0].id, "discard": discard[0].id}, process=pid))
        elif conds and len(defaults) == 1:
            res.append(_inst(K.CONTENT_BASED_ROUTER, n, [d.id for d in v.out_dos(n)],
                             {"conditions": json.dumps([[f.id, f.condition.source] for f in conds]),
                              "default": defaults[0].id}, process=pid))

    if k == NodeKind.PARALLEL_GATEWAY and len(outs) >= 2:
        tap = [f for f in outs if any(v.writes_store(x) for x in v.branch(f))]
        recipients = node.param("recipients") or _recipients_object(v, n)
        if len(outs) == 2 and len(tap) == 1:
            primary = next(f for f in outs if f is not tap[0])
            store_node = next(x for x in v.branch(tap[0]) if v.writes_store(x))
            res.append(_inst(K.WIRE_TAP, n, [store_node] + v.writes_store(store_node),
                             {"tap": tap[0].id, "primary": primary.id}, process=pid))
        elif recipients:
            res.append(_rl(v, node, outs, recipients))
        else:
            res.append(_inst(K.MULTICAST, n, [d.id for d in v.out_dos(n)],
                             {"branches": json.dumps([f.id for f in outs]), "mode": node.param("mode")}, process=pid))

    if k == NodeKind.INCLUSIVE_GATEWAY:
        if len(outs) >= 2 and len(ins) <= 1:
            res.append(_rl(v, node, outs, node.param("recipients") or _recipients_object(v, n)))
        elif len(ins) >= 2 and len(outs) == 1:
            res.append(_inst(K.JOIN_ROUTER, n, [], {"inbound": json.dumps([f.id for f in ins])}, process=pid))
    elif len(ins) >= 2 and len(outs) <= 1 and k != NodeKind.PARALLEL_GATEWAY:
        res.append(_inst(K.JOIN_ROUTER, n, [], {"inbound": json.dumps([f.id for f in ins])}, strength="weak", process=pid))

    if k in TASKS:
        res.extend(_match_task(v, node))

    if k == NodeKind.SEND_TASK:
        endpoint_pool = v.partner(n, True)
        for succ in v.downstream(n):
            sn = v.nodes[succ]
            if sn.kind == NodeKind.RECEIVE_TASK:
                back = v.partner(succ, False)
                if node.param("endpoint") or (endpoint_pool is not None and back == endpoint_pool):
                    res.append(_inst(K.REQUEST_REPLY_ASYNC, n, [succ], {
                        "endpoint": node.param("endpoint") or v.pool_name(endpoint_pool),
                        "correlation": node.param("correlation") or sn.param("correlation"),
                        "reply_correlation": sn.param("correlation"),
                    }, process=pid))
                break

    if k == NodeKind.MESSAGE_THROW:
        endpoint_pool = v.partner(n, True)
        for f in outs:
            c = v.nodes.get(f.target)
            if c is not None and c.kind == NodeKind.MESSAGE_CATCH:
                back = v.partner(c.id, False)
                if node.param("endpoint") or (endpoint_pool is not None and back == endpoint_pool):
                    res.append(_inst(K.SYNCH_ASYNCH_BRIDGE, n, [c.id], {
                        "endpoint": node.param("endpoint") or v.pool_name(endpoint_pool),
                        "correlation": node.param("correlation") or c.param("correlation"),
                        "reply_correlation": c.param("correlation"),
                    }, process=pid))

    if k == NodeKind.SUB_PROCESS:
        res.extend(_match_sub_process(v, node))
    return res


def _recipients_object(v: _View, n: str) -> str | None:
    for d in v.in_dos(n):
        if d.name.lower() == "recipients" or d.item.lower() in ("recipients", "recipientlist"):
            return f"object:{d.id}"
    return None


def _rl(v: _View, node: Node, outs, recipients) -> PatternInstance:
    sats = [d.id for d in v.in_dos(node.id)] + [d.id for d in v.out_dos(node.id)]
    sats += v.writes_store(node.id) + v.reads_store(node.id)
    return _inst(K.RECIPIENT_LIST, node.id, sats, {
        "recipients": recipients or json.dumps([f.id for f in outs]),
        "mode": node.param("mode", "Stateless"),
        "store": (v.writes_store(node.id) or v.reads_store(node.id) or [None])[0],
    }, process=v.m.id)


SPLIT_PREFIX = "split:"


def _split_from_data(v: _View, n: str) -> str | None:
    """Split path carried by an input data object named ``split: <path>`` (task config wins)."""
    for d in v.in_dos(n):
        if d.name.startswith(SPLIT_PREFIX):
            return d.name[len(SPLIT_PREFIX):].strip() or None
    return None


def _match_task(v: _View, node: Node) -> list[PatternInstance]:
    n, pid = node.id, v.m.id
    res = []
    dos = [d.id for d in v.in_dos(n) + v.out_dos(n)]
    if node.param("mapping"):
        res.append(_inst(K.MESSAGE_TRANSLATOR, n, dos, {"mapping": node.param("mapping"), "target": node.param("target")}, process=pid))
    if node.param("keep"):
        res.append(_inst(K.CONTENT_FILTER, n, dos, {"keep": node.param("keep"), "flatten": node.param("flatten")}, process=pid))
    split = node.param("split") or node.param("parts") or _split_from_data(v, n)
    if split:
        res.append(_inst(K.SPLITTER, n, dos, {"split": split,
                                              "variant": "static" if node.param("parts") else "iterative"}, process=pid))

    written = v.writes_store(n)
    if written:
        retriever = None
        if node.param("extract"):
            names = {v.m.store_name(s) for s in written}
            for succ in v.downstream(n):
                if any(v.m.store_name(s) in names for s in v.reads_store(succ)):
                    retriever = succ
                    break
        if retriever is not None:
            res.append(_inst(K.CLAIM_CHECK, n, [retriever] + written, {
                "extract": node.param("extract"), "store": v.m.store_name(written[0]),
                "retain": node.param("retain"), "retriever": retriever}, process=pid))
        else:
            res.append(_inst(K.MESSAGE_STORE, n, written, {"store": v.m.store_name(written[0]),
                                                          "tag": node.param("tag")}, process=pid))

    if node.kind == NodeKind.SERVICE_TASK:
        endpoint = v.exchange(n)
        if endpoint is not None:
            boundaries = [b.id for b in v.m.boundary_of(n)]
            if node.param("placement"):
                res.append(_inst(K.CONTENT_ENRICHER, n, dos + boundaries, {
                    "placement": node.param("placement"), "endpoint": endpoint, "source": "endpoint"}, process=pid))
            elif boundaries:
                res.append(_inst(K.REQUEST_REPLY_SYNC, n, dos + boundaries, {"endpoint": endpoint}, process=pid))
            else:
                res.append(_inst(K.EXTERNAL_SERVICE, n, dos, {"endpoint": endpoint}, process=pid))
            bridge = _async_requester(v, endpoint)
            if bridge is not None:
                res.append(_inst(K.ASYNCH_SYNCH_BRIDGE, n, list(bridge), {"endpoint": endpoint}, process=pid))
    if node.param("placement") and v.exchange(n) is None and not v.reads_store(n):
        res.append(_inst(K.CONTENT_ENRICHER, n, dos, {"placement": node.param("placement"), "source": "local"}, process=pid))
    return res


def _async_requester(v: _View, endpoint: str) -> tuple[str, str] | None:
    """Entry and reply nodes when the process is called asynchronously and answers the caller."""
    for entry in v.m.entries():
        caller = v.partner(entry.id, False)
        if caller is None or v.pool_name(caller) == endpoint:
            continue
        for node in v.m.nodes:
            if node.kind in (NodeKind.END_EVENT, NodeKind.SEND_TASK, NodeKind.MESSAGE_THROW) and v.partner(node.id, True) == caller:
                return entry.id, node.id
    return None


def _match_sub_process(v: _View, node: Node) -> list[PatternInstance]:
    n, pid = node.id, v.m.id
    sub = v.m.sub_process(n)
    kinds = {x.kind for x in sub.nodes} if sub is not None else set()
    starts = {x.kind for x in sub.nodes if x.kind == NodeKind.START_EVENT and x.is_message_event} if sub else set()
    expanded = bool(starts) and NodeKind.ESCALATION_START in kinds and NodeKind.TIMER_START in kinds
    outs = v.outs.get(n, [])
    collapsed = bool(node.param("completion")) and any(
        v.nodes[f.target].kind == NodeKind.ESCALATION_THROW for f in outs if f.target in v.nodes)
    sats = [d.id for d in v.in_dos(n) + v.out_dos(n)] + v.writes_store(n) + v.reads_store(n)
    if expanded or collapsed:
        params = {"correlation": node.param("correlation"), "completion": node.param("completion"),
                  "algorithm": node.param("algorithm")}
        if sub is not None:
            for x in sub.nodes:
                if x.kind == NodeKind.TIMER_START and x.param("duration") and not params["completion"]:
                    params["completion"] = f"timeout({x.param('duration')})"
            sats += [x.id for x in sub.nodes if x.kind in (NodeKind.ESCALATION_START, NodeKind.TIMER_START)]
        sats += [f.target for f in outs if v.nodes.get(f.target) and v.nodes[f.target].kind == NodeKind.ESCALATION_THROW]
        return [_inst(K.AGGREGATOR, n, sats, params, process=pid)]
    if any(d.is_collection for d in v.in_dos(n)):
        stores = list(v.writes_store(n)) + list(v.reads_store(n))
        if sub is not None:
            for x in sub.nodes:
                for s in sub.outputs_of(x.id) + sub.inputs_of(x.id):
                    if s in sub.store_ids:
                        stores.append(s)
        return [_inst(K.RESEQUENCER, n, sats + stores, {
            "mode": node.param("mode", "streaming"), "size": node.param("size"),
            "store": stores[0] if stores else None}, process=pid)]
    return []


def recognize_collaboration(collab: Collaboration) -> list[PatternInstance]:
    out = []
    for model in collab.processes:
        out.extend(recognize(model, collab))
    return out


# -- conformance -----------------------------------------------------------------------------


@dataclass(frozen=True)
class Finding:
    pattern: str
    anchor: str
    rule: str
    severity: str
    text: str = ""

    def to_dict(self) -> dict:
        return {"pattern": self.pattern, "anchor": self.anchor, "rule": self.rule, "severity": self.severity}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _find_model(model: ProcessModel, pid: str) -> ProcessModel:
    if not pid or model.id == pid:
        return model
    for _, sub in model.sub_processes:
        hit = _find_model(sub, pid)
        if hit is not None and hit.id == pid:
            return hit
    return model


def _channel_ok(card: Cardinality, n_in: int, n_out: int) -> bool:
    if card == C.ONE_TO_ONE:
        return n_in == 1 and n_out == 1
    if card == C.ONE_TO_N:
        return n_in == 1 and n_out >= 1
    if card == C.N_TO_ONE:
        return n_in >= 1 and n_out == 1
    return n_in == 1 and n_out <= 1


def check_semantics(instance: PatternInstance, model: ProcessModel) -> list[Finding]:
    """Structural facts implied by the profile row of ``instance.kind``."""
    model = _find_model(model, instance.process)
    prof = PROFILES[instance.kind]
    out: list[Finding] = []

    def report(rule, text, severity="error"):
        out.append(Finding(instance.kind.value, instance.anchor, rule, severity, text))

    n_in = len(model.incoming(instance.anchor))
    outs = model.outgoing(instance.anchor)
    if instance.kind == PatternKind.MESSAGE_FILTER:
        # the discard flow is a sink, not an outbound channel
        outs = [f for f in outs if f.id != instance.param("discard")]
    n_out = len(outs)
    if not _channel_ok(prof.channel_cardinality, n_in, n_out):
        report("CHANNEL-CARD", f"{n_in} in / {n_out} out flows do not fit {prof.channel_cardinality}")

    params = dict(instance.params)
    for name in prof.required_params:
        if not params.get(name):
            report("PARAM-MISSING", f"required parameter {name!r} is missing")
            continue
        value = params[name]
        try:
            if name in EXPRESSION_PARAMS:
                parse(value)
            elif name in PATH_PARAMS:
                for p in _paths(value):
                    bt.parse_path(p)
        except (ExprSyntaxError, bt.PathError) as exc:
            report("PARAM-EXPR", f"{name}: {exc}")
    if instance.kind == K.CONTENT_BASED_ROUTER and params.get("conditions"):
        for flow_id, text in json.loads(params["conditions"]):
            try:
                parse(text)
            except ExprSyntaxError as exc:
                report("PARAM-EXPR", f"condition on {flow_id}: {exc}")

    stores = model.store_ids
    bound_store = any(s in stores for s in instance.satellites)
    needs_store = prof.stateful or (instance.kind == K.RECIPIENT_LIST and params.get("mode") == "PersistentList")
    if needs_store:
        anchor_kind = model.node(instance.anchor).kind
        carrier = bound_store or (instance.kind == K.AGGREGATOR and anchor_kind == NodeKind.SUB_PROCESS)
        if not carrier:
            report("STATEFUL-STORE", "stateful pattern has no data store bound")

    if instance.kind == K.SPLITTER and params.get("variant") == "iterative":
        outs = [model.data_object_map.get(s) for s in model.outputs_of(instance.anchor)]
        if not any(d is not None and d.is_collection for d in outs):
            report("SPLIT-COLLECTION", "iterative splitter output is not a data object collection", "warning")
    if instance.kind in (K.REQUEST_REPLY_ASYNC, K.SYNCH_ASYNCH_BRIDGE):
        reply = params.get("reply_correlation")
        if reply and params.get("correlation") and reply != params["correlation"]:
            report("CORRELATION", "request and reply use different correlation definitions")
    if instance.kind == K.JOIN_ROUTER:
        types = set()
        for f in model.incoming(instance.anchor):
            types.update(d.item for d in (model.data_object_map.get(x) for x in model.outputs_of(f.source)) if d)
        if len(types) > 1:
            report("JOIN-TYPES", f"inbound message types differ: {sorted(types)}", "warning")
        if instance.strength == "weak":
            report("JOIN-WEAK", "plain merge without an inclusive gateway", "warning")
    return out


def _paths(value: str) -> list[str]:
    value = value.strip()
    if value.startswith("["):
        parts = json.loads(value)
        return [p for part in parts for p in (part if isinstance(part, list) else [part])]
    return [p for p in value.split(",") if p.strip()]


def check_all(collab: Collaboration) -> list[Finding]:
    out = []
    for model in collab.processes:
        for inst in recognize(model, collab):
            out.extend(check_semantics(inst, model))
    return out


def findings_jsonl(findings: Iterable[Finding]) -> str:
    return "".join(f.to_json() + "\n" for f in findings)
