"""Process execution.

Tokens carry a message through the graph. The engine keeps one agenda
ordered by (logical time, insertion order); each agenda entry either
instantiates/correlates an ingress message, advances one token by one node,
or fires a timer. With the logical clock and a fixed seed every run is
reproducible down to the trace bytes.

Pattern behaviour comes from the recognizer: when a token enters a node that
anchors a recognized pattern the matching executor runs and a ``pattern``
event is traced. Satellite nodes (claim-check retriever, tap store, ...) only
trace ``enter``.
"""

from __future__ import annotations

import heapq
import itertools
import json
import logging
import math
import time as _time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Mapping

from eipflow import body as bt
from eipflow.body import Tree
from eipflow.catalog import PatternInstance, PatternKind, recognize
from eipflow.channels import Broker
from eipflow.engine import executors as ex
from eipflow.engine.endpoints import Correlator, EndpointRegistry, Fault, Reply, TimedOut
from eipflow.engine.errors import (
    EngineError, ExecutorFault, InvalidMessage, MappingError, RoutingError, TypeMismatch,
)
from eipflow.engine.mapping import Mapping as MsgMapping, resolve as resolve_mapping
from eipflow.engine.state import AggregatorState, Resequencer, Stores, parse_algorithm, parse_strategy
from eipflow.engine.trace import TraceLog
from eipflow.expr import EvalError, Functions, evaluate, evaluate_condition
from eipflow.message import IdGenerator, Message, UNTYPED, copy_with_new_id
from eipflow.model import Collaboration, Node, NodeKind, ProcessModel, START_KINDS, single_process

log = logging.getLogger(__name__)

K = PatternKind


class Status(str, Enum):
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class Token:
    id: int
    node: str
    msg: Message
    scope: tuple[str, ...] = ()  # enclosing sub-process node ids
    branch: str | None = None  # set inside multicast branches: faults stay local


@dataclass
class ProcessInstance:
    id: str
    process: str
    key: str
    status: Status = Status.RUNNING
    tokens: dict[int, Token] = field(default_factory=dict)
    bindings: dict[str, Any] = field(default_factory=dict)
    vars: dict[str, Any] = field(default_factory=dict)
    started_at: float = 0.0
    ended_at: float | None = None
    waits: int = 0  # tokens parked on a reply

    @property
    def active_nodes(self) -> set[str]:
        return {t.node for t in self.tokens.values()}


@dataclass
class EngineConfig:
    seed: int = 0
    default_deadline: float = 30.0
    invalid_channel: str = "invalid"
    closed_cap: int = 10_000
    closed_horizon: float = math.inf
    on_error: str = "stop"  # stop | continue (per-node on_error param wins)
    max_events: int = 1_000_000
    clock: str = "logical"  # logical | wall


class _Scope:
    """Process model plus the patterns recognized in it."""

    def __init__(self, model: ProcessModel, collab: Collaboration, root: ProcessModel):
        self.model = model
        self.root = root
        self.nodes = model.node_map
        self.outs = {n: model.outgoing(n) for n in self.nodes}
        self.ins = {n: model.incoming(n) for n in self.nodes}
        self.anchored: dict[str, list[PatternInstance]] = {}
        self.satellite: dict[str, PatternInstance] = {}
        pats = [p for p in recognize(model, collab) if p.process == model.id]
        for p in pats:
            self.anchored.setdefault(p.anchor, []).append(p)
            if p.kind == K.CLAIM_CHECK:
                self.satellite[p.param("retriever")] = p
        self.collab = collab

    def pattern(self, node: str, kind: PatternKind) -> PatternInstance | None:
        for p in self.anchored.get(node, ()):
            if p.kind == kind:
                return p
        return None


class Engine:
    def __init__(self, model: Collaboration | ProcessModel, *, config: EngineConfig | None = None,
                 broker: Broker | None = None, endpoints: EndpointRegistry | None = None,
                 stores: Stores | None = None, mappings: Mapping[str, MsgMapping] | None = None,
                 functions: Functions | None = None, trace: TraceLog | None = None):
        self.collab = model if isinstance(model, Collaboration) else single_process(model)
        self.config = config or EngineConfig()
        self.ids = IdGenerator(self.config.seed)
        self.broker = broker or Broker(ids=self.ids)
        if self.broker.ids is None:
            self.broker.ids = self.ids
        self.endpoints = endpoints or EndpointRegistry(self.ids, self.config.default_deadline)
        self.correlator = Correlator(self.endpoints)
        self.stores = stores or Stores(self.config.seed)
        self.mappings = dict(mappings or {})
        self.functions = functions or Functions()
        self.trace = trace or TraceLog()
        self.instances: dict[str, ProcessInstance] = {}
        self._running: dict[tuple[str, str], str] = {}
        self._scopes: dict[str, _Scope] = {}
        self._roots: dict[str, ProcessModel] = {}
        for proc in self.collab.processes:
            self._index(proc, proc)
        self._aggs: dict[tuple[str, str], AggregatorState] = {}
        self._reseq: dict[tuple[str, str], Resequencer] = {}
        self._agenda: list = []
        self._seq = itertools.count()
        self._token_ids = itertools.count(1)
        self._inst_ids = itertools.count(1)
        self.now = 0.0
        self._wall_start: float | None = None
        self.audit: list[tuple[float, str]] = []

    def _index(self, model: ProcessModel, root: ProcessModel) -> None:
        self._scopes[model.id] = _Scope(model, self.collab, root)
        self._roots[model.id] = root
        for _, sub in model.sub_processes:
            self._index(sub, root)

    # -- public API ------------------------------------------------------------------------

    @property
    def processes(self) -> list[ProcessModel]:
        return self.collab.processes

    def inject(self, msg: Message, at: float = 0.0, process: str | None = None, entry: str | None = None) -> None:
        """Schedule an ingress message."""
        self._push(at, "ingress", (msg, process, entry))

    def run(self, until: float | None = None) -> TraceLog:
        """Process agenda entries (up to logical time ``until``)."""
        n = 0
        while self._agenda:
            t = self._agenda[0][0]
            if until is not None and t > until:
                break
            if self.config.clock == "wall":
                self._sleep_until(t)
            at, _, kind, payload = heapq.heappop(self._agenda)
            self.now = max(self.now, at)
            self._dispatch(kind, payload)
            n += 1
            if n > self.config.max_events:
                raise EngineError("event budget exhausted (livelock?)")
        if until is not None:
            self.now = max(self.now, until)
        return self.trace

    def step(self, instance_id: str) -> list:
        """Advance exactly one pending token of one instance; returns the new trace events."""
        before = len(self.trace)
        for i, (at, seq, kind, payload) in enumerate(sorted(self._agenda)):
            if kind == "token" and payload[0] == instance_id:
                self._agenda.remove((at, seq, kind, payload))
                heapq.heapify(self._agenda)
                self.now = max(self.now, at)
                self._dispatch(kind, payload)
                break
        return self.trace.events[before:]

    def instantiate_or_correlate(self, msg: Message, process: str | None = None, entry: str | None = None,
                                 now: float | None = None) -> ProcessInstance | None:
        """Deliver ``msg`` to the running instance with its key, or start a new one.

        Returns None when the message was routed away (invalid, or closed key).
        """
        now = self.now if now is None else now
        proc = self._pick_process(process, msg)
        scope = self._scopes[proc.id]
        entry_node = self._pick_entry(proc, entry, msg)
        try:
            self._check_type(proc, entry_node, msg)
            key = self._process_key(proc, msg)
        except InvalidMessage as exc:
            self._invalid(None, entry_node.id, msg, str(exc))
            return None
        iid = self._running.get((proc.id, key))
        if iid is not None:
            inst = self.instances[iid]
            self.trace.emit(now, inst.id, entry_node.id, "correlate", msg.id, key=key)
        else:
            agg = self._closed_for(proc, key)
            if agg:
                self.audit.append((now, f"late message {msg.id} for closed key {key}"))
                self.trace.emit(now, None, entry_node.id, "discard", msg.id, key=key, reason="closed aggregate")
                return None
            inst = ProcessInstance(f"i{next(self._inst_ids)}", proc.id, key, started_at=now)
            self.instances[inst.id] = inst
            self._running[(proc.id, key)] = inst.id
            self.trace.emit(now, inst.id, entry_node.id, "instantiate", msg.id, key=key, process=proc.id)
        self._bind(inst, scope.model, entry_node.id, msg)
        self._spawn(inst, entry_node.id, msg, (), None, now)
        return inst

    def deliveries(self, channel: str) -> list[Message]:
        if channel not in self.broker:
            return []
        return self.broker.channel(channel).peek_all()

    def aggregator(self, process: str, node: str) -> AggregatorState:
        return self._agg_state(self._scopes[process], self._scopes[process].nodes[node])

    # -- agenda -------------------------------------------------------------------------------

    def _push(self, at: float, kind: str, payload) -> None:
        heapq.heappush(self._agenda, (float(at), next(self._seq), kind, payload))

    def _sleep_until(self, t: float) -> None:
        if self._wall_start is None:
            self._wall_start = _time.monotonic()
        delay = t - (_time.monotonic() - self._wall_start)
        if delay > 0:
            _time.sleep(delay)

    def _dispatch(self, kind: str, payload) -> None:
        if kind == "ingress":
            msg, process, entry = payload
            self.instantiate_or_correlate(msg, process, entry, self.now)
        elif kind == "token":
            iid, tid = payload
            inst = self.instances[iid]
            tok = inst.tokens.get(tid)
            if tok is not None and inst.status == Status.RUNNING:
                self._execute(inst, tok)
                self._maybe_complete(inst)
        elif kind == "agg-timer":
            proc_id, node_id, key = payload
            scope = self._scopes[proc_id]
            state = self._agg_state(scope, scope.nodes[node_id])
            for done in state.on_timeout(key, self.now):
                self._aggregate_done(scope, node_id, done)
        elif kind == "wait":
            iid, tid = payload
            inst = self.instances[iid]
            tok = inst.tokens.get(tid)
            if tok is not None and inst.status == Status.RUNNING:
                inst.waits -= 1
                self._execute(inst, tok)
                self._maybe_complete(inst)

    # -- instances ---------------------------------------------------------------------------

    def _pick_process(self, process: str | None, msg: Message) -> ProcessModel:
        procs = self.collab.processes
        if process is not None:
            for p in procs:
                if p.id == process:
                    return p
            raise EngineError(f"unknown process {process!r}")
        if len(procs) != 1:
            raise EngineError("several processes: name the target process")
        return procs[0]

    def _pick_entry(self, proc: ProcessModel, entry: str | None, msg: Message) -> Node:
        entries = proc.entries()
        if entry is not None:
            for n in entries:
                if n.id == entry:
                    return n
            raise EngineError(f"{entry!r} is not an entry of {proc.id!r}")
        if not entries:
            raise EngineError(f"process {proc.id!r} has no entry")
        return entries[0]

    def _check_type(self, proc: ProcessModel, entry: Node, msg: Message) -> None:
        for d in proc.outputs_of(entry.id):
            do = proc.data_object_map.get(d)
            if do is None or do.item == UNTYPED or msg.body_type == UNTYPED:
                continue
            if do.item != msg.body_type:
                raise TypeMismatch(f"entry {entry.id} expects {do.item!r}, got {msg.body_type!r}")

    def _aggregator_node(self, proc: ProcessModel) -> tuple[_Scope, Node] | None:
        scope = self._scopes[proc.id]
        for anchor, pats in scope.anchored.items():
            if any(p.kind == K.AGGREGATOR for p in pats):
                return scope, scope.nodes[anchor]
        return None

    def _process_key(self, proc: ProcessModel, msg: Message) -> str:
        hit = self._aggregator_node(proc)
        if hit is not None:
            return self._agg_state(*hit).key_of(msg)
        return msg.lineage

    def _closed_for(self, proc: ProcessModel, key: str) -> bool:
        hit = self._aggregator_node(proc)
        if hit is None:
            return False
        state = self._agg_state(*hit)
        state.purge(self.now)
        return key in state.closed

    def _spawn(self, inst: ProcessInstance, node: str, msg: Message, scope: tuple[str, ...],
               branch: str | None, at: float) -> Token:
        tok = Token(next(self._token_ids), node, msg, scope, branch)
        inst.tokens[tok.id] = tok
        self._push(at, "token", (inst.id, tok.id))
        return tok

    def _maybe_complete(self, inst: ProcessInstance) -> None:
        if inst.status != Status.RUNNING or inst.tokens:
            return
        if self._holds_state(inst):
            return
        inst.status = Status.COMPLETED
        inst.ended_at = self.now
        self._running.pop((inst.process, inst.key), None)
        self.trace.emit(self.now, inst.id, None, "complete")

    def _holds_state(self, inst: ProcessInstance) -> bool:
        for (pid, _), st in self._aggs.items():
            if self._roots[pid].id == inst.process and inst.key in st.open:
                return True
        for (pid, _), rs in self._reseq.items():
            if self._roots[pid].id == inst.process and rs.buffered(inst.key):
                return True
        return False

    def _fail(self, inst: ProcessInstance, node: str, cause: str) -> None:
        inst.status = Status.FAILED
        inst.ended_at = self.now
        inst.tokens.clear()
        self._running.pop((inst.process, inst.key), None)
        self.trace.emit(self.now, inst.id, node, "fail", cause=cause)

    def _bind(self, inst: ProcessInstance, model: ProcessModel, node: str, msg: Message | list[Message]) -> None:
        dos = model.data_object_map
        for target in model.outputs_of(node):
            do = dos.get(target)
            if do is None:
                continue
            if do.is_collection:
                inst.bindings.setdefault(target, [])
                inst.bindings[target].extend(msg if isinstance(msg, list) else [msg])
            else:
                inst.bindings[target] = msg

    # -- node execution -------------------------------------------------------------------------

    def _execute(self, inst: ProcessInstance, tok: Token) -> None:
        scope = self._scopes[self._model_id(inst, tok)]
        node = scope.nodes[tok.node]
        self.trace.emit(self.now, inst.id, node.id, "enter", tok.msg.id, kind=node.kind.value)
        for p in scope.anchored.get(node.id, ()):
            self.trace.emit(self.now, inst.id, node.id, "pattern", tok.msg.id, kind=p.kind.value)
        try:
            moves = self._run_node(inst, tok, scope, node)
        except (InvalidMessage, EvalError) as exc:
            del inst.tokens[tok.id]
            self._invalid(inst, node.id, tok.msg, str(exc))
            return
        except ExecutorFault as exc:
            self._fault(inst, tok, scope, node, exc)
            return
        except (EngineError, KeyError, ValueError) as exc:
            self._fault(inst, tok, scope, node, ExecutorFault(node.id, exc))
            return
        if moves is None:  # token parked (waiting) and rescheduled
            return
        del inst.tokens[tok.id]
        for target, msg, tscope, branch in moves:
            self._spawn(inst, target, msg, tscope, branch, self.now)

    def _model_id(self, inst: ProcessInstance, tok: Token) -> str:
        model = self._scopes[inst.process].model
        for sp in tok.scope:
            model = model.sub_process(sp)
        return model.id

    def _fault(self, inst: ProcessInstance, tok: Token, scope: _Scope, node: Node, exc: ExecutorFault) -> None:
        del inst.tokens[tok.id]
        self.trace.emit(self.now, inst.id, node.id, "fault", tok.msg.id, cause=str(exc.cause), code=exc.code)
        boundary = scope.model.boundary_of(node.id)
        if boundary:
            b = boundary[0]
            self._spawn(inst, b.id, tok.msg, tok.scope, tok.branch, self.now)
            return
        policy = node.param("on_error", self.config.on_error)
        if tok.branch is not None or policy == "continue":
            return
        self._fail(inst, node.id, str(exc.cause))

    def _invalid(self, inst: ProcessInstance | None, node: str, msg: Message, reason: str) -> None:
        self.trace.emit(self.now, inst.id if inst else None, node, "invalid", msg.id, reason=reason)
        self.broker.channel(self.config.invalid_channel).send(msg, self.now)

    def _follow(self, scope: _Scope, node: Node, msg: Message, tok: Token, flows=None, branch=None):
        flows = scope.outs[node.id] if flows is None else flows
        return [(f.target, msg, tok.scope, branch if branch is not None else tok.branch) for f in flows]

    def _run_node(self, inst: ProcessInstance, tok: Token, scope: _Scope, node: Node):
        k = node.kind
        msg = tok.msg
        outs = scope.outs[node.id]

        if k in START_KINDS or k == NodeKind.ERROR_BOUNDARY:
            return self._follow(scope, node, msg, tok)

        if k == NodeKind.END_EVENT:
            if node.is_message_event:
                self._emit(inst, scope, node, msg)
            if tok.scope:  # leave the sub-process
                parent_scope = self._scopes[self._parent_model_id(inst, tok)]
                sp = parent_scope.nodes[tok.scope[-1]]
                return [(f.target, msg, tok.scope[:-1], tok.branch) for f in parent_scope.outs[sp.id]]
            return []

        if k == NodeKind.EXCLUSIVE_GATEWAY and len(outs) >= 2:
            filt = scope.pattern(node.id, K.MESSAGE_FILTER)
            if filt is not None:
                res = ex.exec_message_filter(filt.param("condition"), msg, self.functions)
                chosen = filt.param("pass") if isinstance(res, ex.Pass) else filt.param("discard")
                if isinstance(res, ex.Drop):
                    self.trace.emit(self.now, inst.id, node.id, "drop", msg.id)
            else:
                conds = [(f.id, f.condition) for f in outs if f.condition is not None]
                default = next((f.id for f in outs if f.is_default), None)
                chosen = ex.exec_content_based_router(conds, default, msg, self.functions)
            return self._follow(scope, node, msg, tok, [f for f in outs if f.id == chosen])

        if k == NodeKind.PARALLEL_GATEWAY and len(outs) >= 2:
            tap = scope.pattern(node.id, K.WIRE_TAP)
            if tap is not None:
                primary = next(f for f in outs if f.id == tap.param("primary"))
                tap_flow = next(f for f in outs if f.id == tap.param("tap"))
                copy = copy_with_new_id(msg, self.ids)
                return [(primary.target, msg, tok.scope, tok.branch), (tap_flow.target, copy, tok.scope, tap_flow.id)]
            moves = []
            ex.exec_multicast(msg, [f.id for f in outs],
                              lambda b, c: moves.append((next(f.target for f in outs if f.id == b), c, tok.scope, b)),
                              self.ids)
            return moves

        if k == NodeKind.INCLUSIVE_GATEWAY and len(outs) >= 2:
            chosen = []
            for f in outs:
                if f.is_default:
                    continue
                if f.condition is None or evaluate_condition(f.condition, msg, self.functions):
                    chosen.append(f)
            if not chosen:
                chosen = [f for f in outs if f.is_default]
            if not chosen:
                raise RoutingError(f"inclusive gateway {node.id}: no flow selected")
            return [(f.target, copy_with_new_id(msg, self.ids), tok.scope, tok.branch) for f in chosen]

        if k in (NodeKind.EXCLUSIVE_GATEWAY, NodeKind.PARALLEL_GATEWAY, NodeKind.INCLUSIVE_GATEWAY):
            # merges pass tokens straight through (join router semantics, no synchronization)
            return self._follow(scope, node, ex.exec_join_router(msg), tok)

        if k == NodeKind.SUB_PROCESS:
            return self._sub_process(inst, tok, scope, node)

        if k == NodeKind.TIMER:
            d = float(node.param("duration", "0"))
            del inst.tokens[tok.id]
            for target, m, sc, br in self._follow(scope, node, msg, tok):
                self._spawn(inst, target, m, sc, br, self.now + d)
            return None

        if k == NodeKind.ESCALATION_THROW:
            self.trace.emit(self.now, inst.id, node.id, "escalation", msg.id)
            return self._follow(scope, node, msg, tok)

        if k in (NodeKind.SEND_TASK, NodeKind.MESSAGE_THROW):
            out = self._task_ops(inst, tok, scope, node, msg) if k == NodeKind.SEND_TASK else [msg]
            pat = scope.pattern(node.id, K.REQUEST_REPLY_ASYNC) or scope.pattern(node.id, K.SYNCH_ASYNCH_BRIDGE)
            for o in out:
                if pat is None:
                    self._emit(inst, scope, node, o)
                    continue
                corr = pat.param("correlation")
                key = str(evaluate(corr, o, self.functions)) if corr else o.id
                deadline = self.now + float(node.param("deadline", self.config.default_deadline))
                self.trace.emit(self.now, inst.id, node.id, "call", o.id, endpoint=pat.param("endpoint"), key=key,
                                mode="async")
                self.correlator.send_async(pat.param("endpoint"), o, key, self.now)
                inst.vars[f"await:{pat.satellites[0]}"] = (key, deadline)
            return [m for o in out for m in self._follow(scope, node, o, tok)]

        if k in (NodeKind.RECEIVE_TASK, NodeKind.MESSAGE_CATCH):
            wait = inst.vars.get(f"await:{node.id}")
            if wait is None:
                return self._follow(scope, node, msg, tok)
            key, deadline = wait
            res = self.correlator.await_reply(key, deadline, self.now)
            if res is None:
                nxt = self.correlator.next_arrival()
                at = deadline if nxt is None else min(max(nxt, self.now), deadline)
                inst.waits += 1
                self._push(at, "wait", (inst.id, tok.id))
                return None
            del inst.vars[f"await:{node.id}"]
            if isinstance(res, (Fault, TimedOut)):
                code = res.code if isinstance(res, Fault) else "timeout"
                raise ExecutorFault(node.id, f"async reply {code} for key {key}", code)
            self.trace.emit(self.now, inst.id, node.id, "reply", res.id, key=key)
            out = self._task_ops(inst, tok, scope, node, res) if k == NodeKind.RECEIVE_TASK else [res]
            return [m for o in out for m in self._follow(scope, node, o, tok)]

        # service and script tasks
        out = self._task_ops(inst, tok, scope, node, msg)
        for o in out:
            self._bind(inst, scope.model, node.id, o)
        return [m for o in out for m in self._follow(scope, node, o, tok)]

    def _parent_model_id(self, inst: ProcessInstance, tok: Token) -> str:
        model = self._scopes[inst.process].model
        for sp in tok.scope[:-1]:
            model = model.sub_process(sp)
        return model.id

    def _emit(self, inst: ProcessInstance, scope: _Scope, node: Node, msg: Message) -> None:
        channel = node.param("channel") or self._channel_for(node.id) or node.id
        res = self.broker.send(channel, msg, self.now)
        self.trace.emit(self.now, inst.id, node.id, "emit", msg.id, channel=channel, accepted=res.ok,
                        body_type=msg.body_type)

    def _channel_for(self, node_id: str) -> str | None:
        for mf in self.collab.flows_from(node_id):
            pool = self.collab.owner(mf.target)
            if pool is not None:
                return pool.name or pool.id
        return None

    # -- tasks ------------------------------------------------------------------------------------

    def _task_ops(self, inst: ProcessInstance, tok: Token, scope: _Scope, node: Node, msg: Message) -> list[Message]:
        model = scope.model
        reads = [s for s in model.inputs_of(node.id) if s in model.store_ids]
        writes = [s for s in model.outputs_of(node.id) if s in model.store_ids]

        claim = scope.satellite.get(node.id)
        if claim is not None:
            store = self.stores.claim(claim.param("store"))
            key = msg.header(ex.CLAIM_HEADER) or inst.vars.get(f"claim:{claim.anchor}")
            msg = ex.claim_check_retrieve(store, msg, key)
            inst.vars.pop(f"claim:{claim.anchor}", None)
            self.trace.emit(self.now, inst.id, node.id, "claim", msg.id, op="retrieve", key=key, store=store.name)
        elif reads and node.param("placement"):
            store = self.stores.message(model.store_name(reads[0]))
            recs = [r for r in store.query(lambda r: r.message.lineage == msg.lineage)]
            payload = recs[-1].message.body if recs else None
            msg = ex.exec_content_enricher(msg, node.param("placement"), lambda m: payload, self.ids)

        if node.param("keep"):
            keep = [p for p in node.param("keep").split(",") if p.strip()]
            msg = ex.exec_content_filter(msg, keep, node.param("flatten") == "true")

        if node.param("mapping"):
            try:
                mapping = resolve_mapping(node.param("mapping"), self.mappings)
            except (ValueError, json.JSONDecodeError) as exc:
                raise ExecutorFault(node.id, exc, "mapping") from exc
            try:
                msg = ex.exec_translator(msg, mapping)
            except MappingError as exc:
                raise ExecutorFault(node.id, exc, "mapping") from exc

        endpoint = self._endpoint(scope, node)
        if node.param("placement") and not reads:
            if endpoint is not None:
                source = lambda m: self._call(inst, node, endpoint, m).body  # noqa: E731
            else:
                source = lambda m: self._local_value(node, m)  # noqa: E731
            msg = ex.exec_content_enricher(msg, node.param("placement"), source, self.ids)
        elif endpoint is not None and node.kind == NodeKind.SERVICE_TASK:
            msg = self._call(inst, node, endpoint, msg)

        if writes:
            name = model.store_name(writes[0])
            if node.param("extract") and scope.pattern(node.id, K.CLAIM_CHECK) is not None:
                msg = ex.claim_check_store(self.stores.claim(name), msg, node.param("extract"),
                                           retain=node.param("retain") == "true")
                inst.vars[f"claim:{node.id}"] = msg.header(ex.CLAIM_HEADER)
                self.trace.emit(self.now, inst.id, node.id, "claim", msg.id, op="store",
                                key=msg.header(ex.CLAIM_HEADER), store=name)
            else:
                msg, _ = ex.exec_message_store(self.stores.message(name), msg, node.param("tag", node.id), self.now)

        if node.param("script"):
            fn = self.functions.get(node.param("script"))
            if fn is None:
                raise ExecutorFault(node.id, f"unknown script {node.param('script')!r}")
            res = fn(msg)
            msg = res if isinstance(res, Message) else msg.evolve(body=res)

        split = scope.pattern(node.id, K.SPLITTER)
        if split is not None:
            if split.param("variant") == "static":
                parts = [[p for p in part.split(",") if p] for part in split.param("split").split(";")]
                return ex.exec_splitter(msg, parts=parts, ids=self.ids)
            return ex.exec_splitter(msg, split.param("split"), ids=self.ids)
        return [msg]

    def _endpoint(self, scope: _Scope, node: Node) -> str | None:
        for kind in (K.EXTERNAL_SERVICE, K.REQUEST_REPLY_SYNC, K.CONTENT_ENRICHER):
            p = scope.pattern(node.id, kind)
            if p is not None and p.param("endpoint"):
                return p.param("endpoint")
        return node.param("endpoint")

    def _local_value(self, node: Node, msg: Message) -> Tree:
        expr = node.param("value")
        value = evaluate(expr, msg, self.functions) if expr else self.now
        if isinstance(value, float):
            value = bt.coerce_scalar(value)
        return Tree("value", value)

    def _call(self, inst: ProcessInstance, node: Node, endpoint: str, msg: Message) -> Message:
        deadline = float(node.param("deadline", self.config.default_deadline))
        self.trace.emit(self.now, inst.id, node.id, "call", msg.id, endpoint=endpoint, mode="sync")
        try:
            res = self.endpoints.call_sync(endpoint, msg, deadline)
        except KeyError as exc:
            raise ExecutorFault(node.id, f"unknown endpoint {endpoint!r}", "unknown-endpoint") from exc
        if isinstance(res, Fault):
            raise ExecutorFault(node.id, f"{res.code}: {res.text}".rstrip(": "), res.code)
        if isinstance(res, TimedOut):
            raise ExecutorFault(node.id, f"no reply within {res.after}", "timeout")
        self.trace.emit(self.now, inst.id, node.id, "reply", res.message.id, endpoint=endpoint)
        return res.message

    # -- sub-processes ------------------------------------------------------------------------------

    def _agg_state(self, scope: _Scope, node: Node) -> AggregatorState:
        key = (scope.model.id, node.id)
        if key not in self._aggs:
            pat = scope.pattern(node.id, K.AGGREGATOR)
            completion = (pat.param("completion") if pat else None) or node.param("completion") or "wait_for_all(1)"
            self._aggs[key] = AggregatorState(
                parse_strategy(completion), parse_algorithm(pat.param("algorithm") if pat else None),
                correlation=(pat.param("correlation") if pat else None), ids=self.ids,
                closed_horizon=float(node.param("closed_horizon", self.config.closed_horizon)),
                closed_cap=int(node.param("closed_cap", self.config.closed_cap)),
                functions=self.functions, body_type=node.param("body_type"))
        return self._aggs[key]

    def _sub_process(self, inst: ProcessInstance, tok: Token, scope: _Scope, node: Node):
        if scope.pattern(node.id, K.AGGREGATOR) is not None:
            state = self._agg_state(scope, node)
            key = state.key_of(tok.msg)
            fresh = key not in state.open
            done = state.offer(tok.msg, self.now)
            agg = state.open.get(key)
            if fresh and agg is not None and agg.deadline is not None:
                self._push(agg.deadline, "agg-timer", (scope.model.id, node.id, key))
                self.trace.emit(self.now, inst.id, node.id, "timer-armed", tok.msg.id, key=key, at=agg.deadline)
            del inst.tokens[tok.id]
            for d in done:
                self._aggregate_done(scope, node.id, d, tok.scope)
            return None
        if scope.pattern(node.id, K.RESEQUENCER) is not None:
            rs = self._reseq.get((scope.model.id, node.id))
            if rs is None:
                size = node.param("size")
                rs = self._reseq[(scope.model.id, node.id)] = Resequencer(node.param("mode", "streaming"),
                                                                         int(size) if size else None)
            emitted = rs.offer(tok.msg)
            return [m for e in emitted for m in self._follow(scope, node, e, tok)]
        sub = scope.model.sub_process(node.id)
        if sub is None:
            return self._follow(scope, node, tok.msg, tok)
        starts = [n for n in sub.nodes if n.kind == NodeKind.START_EVENT]
        return [(s.id, tok.msg, tok.scope + (node.id,), tok.branch) for s in starts]

    def _aggregate_done(self, scope: _Scope, node_id: str, done, tscope: tuple[str, ...] = ()) -> None:
        iid = self._running.get((self._roots[scope.model.id].id, done.key))
        self.trace.emit(done.time, iid, node_id, "aggregate", done.message.id, key=done.key, reason=done.reason,
                        size=len(done.message.body.children) if done.message.body is not None else 0)
        if iid is None:
            self.audit.append((done.time, f"aggregate {done.key} completed without an instance"))
            return
        inst = self.instances[iid]
        self._bind(inst, scope.model, node_id, done.message)
        for f in scope.outs[node_id]:
            self._spawn(inst, f.target, done.message, tscope, None, done.time)
        self._maybe_complete(inst)
