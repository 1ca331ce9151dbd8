"""Process graphs: nodes, sequence flows, data objects and collaborations.

A process model is the tuple (nodes, flows, data objects, data flow) plus
data stores and nested sub-process models. Everything here is immutable;
build models with the constructors or :class:`ModelBuilder`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

from eipflow.body import KINDS
from eipflow.expr import Expression


class NodeKind(str, Enum):
    SERVICE_TASK = "ServiceTask"
    SCRIPT_TASK = "ScriptTask"
    SEND_TASK = "SendTask"
    RECEIVE_TASK = "ReceiveTask"
    SUB_PROCESS = "SubProcess"
    EXCLUSIVE_GATEWAY = "ExclusiveGateway"
    PARALLEL_GATEWAY = "ParallelGateway"
    INCLUSIVE_GATEWAY = "InclusiveGateway"
    START_EVENT = "StartEvent"
    END_EVENT = "EndEvent"
    MESSAGE_THROW = "IntermediateMessageThrow"
    MESSAGE_CATCH = "IntermediateMessageCatch"
    TIMER = "IntermediateTimer"
    ESCALATION_THROW = "IntermediateEscalationThrow"
    ESCALATION_START = "EscalationStartEvent"
    TIMER_START = "TimerStartEvent"
    ERROR_BOUNDARY = "ErrorBoundary"

    def __str__(self) -> str:
        return self.value


ACTIVITIES = frozenset({
    NodeKind.SERVICE_TASK, NodeKind.SCRIPT_TASK, NodeKind.SEND_TASK,
    NodeKind.RECEIVE_TASK, NodeKind.SUB_PROCESS,
})
GATEWAYS = frozenset({NodeKind.EXCLUSIVE_GATEWAY, NodeKind.PARALLEL_GATEWAY, NodeKind.INCLUSIVE_GATEWAY})
EVENTS = frozenset(set(NodeKind) - ACTIVITIES - GATEWAYS)
TASKS = ACTIVITIES - {NodeKind.SUB_PROCESS}
START_KINDS = frozenset({NodeKind.START_EVENT, NodeKind.ESCALATION_START, NodeKind.TIMER_START})


def category(kind: NodeKind) -> str:
    if kind in ACTIVITIES:
        return "activity"
    if kind in GATEWAYS:
        return "gateway"
    return "event"


def _frozen_map(m: Mapping[str, str] | Iterable[tuple[str, str]] | None) -> tuple[tuple[str, str], ...]:
    if m is None:
        return ()
    items = m.items() if isinstance(m, Mapping) else m
    return tuple(sorted((str(k), str(v)) for k, v in items))


@dataclass(frozen=True)
class ItemDefinition:
    name: str
    fields: tuple[tuple[str, str], ...] = ()  # (path, scalar kind)

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(sorted(tuple(f) for f in self.fields)))
        for _, kind in self.fields:
            if kind not in KINDS:
                raise ValueError(f"unknown scalar kind {kind!r} in item {self.name!r}")


@dataclass(frozen=True)
class Node:
    id: str
    kind: NodeKind
    label: str = ""
    config: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", NodeKind(self.kind))
        object.__setattr__(self, "config", _frozen_map(self.config))

    def param(self, key: str, default: str | None = None) -> str | None:
        for k, v in self.config:
            if k == key:
                return v
        return default

    @property
    def params(self) -> dict[str, str]:
        return dict(self.config)

    @property
    def is_message_event(self) -> bool:
        return self.param("message") == "true"


@dataclass(frozen=True)
class SequenceFlow:
    id: str
    source: str
    target: str
    condition: Expression | None = None
    is_default: bool = False

    def __post_init__(self):
        if isinstance(self.condition, str):
            object.__setattr__(self, "condition", Expression(self.condition.strip()))


@dataclass(frozen=True)
class DataObject:
    id: str
    item: str
    is_collection: bool = False
    name: str = ""


@dataclass(frozen=True)
class DataAssociation:
    source: str
    target: str


@dataclass(frozen=True)
class ProcessModel:
    id: str
    nodes: tuple[Node, ...] = ()
    flows: tuple[SequenceFlow, ...] = ()
    data_objects: tuple[DataObject, ...] = ()
    data_flow: tuple[DataAssociation, ...] = ()
    data_stores: tuple[tuple[str, str], ...] = ()  # (reference id, shared store name)
    sub_processes: tuple[tuple[str, "ProcessModel"], ...] = ()
    items: tuple[ItemDefinition, ...] = ()
    name: str = ""

    def __post_init__(self):
        # canonical ordering keeps equality independent of construction order
        object.__setattr__(self, "nodes", tuple(sorted(self.nodes, key=lambda n: n.id)))
        object.__setattr__(self, "data_objects", tuple(sorted(self.data_objects, key=lambda d: d.id)))
        object.__setattr__(self, "data_flow", tuple(sorted(set(self.data_flow), key=lambda a: (a.source, a.target))))
        object.__setattr__(self, "data_stores", _frozen_map(self.data_stores))
        object.__setattr__(self, "sub_processes", tuple(sorted(self.sub_processes, key=lambda s: s[0])))
        object.__setattr__(self, "items", tuple(sorted(self.items, key=lambda i: i.name)))
        # flows keep document order: routers rely on it

    # lookups -------------------------------------------------------------------

    @property
    def node_map(self) -> dict[str, Node]:
        return {n.id: n for n in self.nodes}

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def outgoing(self, node_id: str) -> list[SequenceFlow]:
        return [f for f in self.flows if f.source == node_id]

    def incoming(self, node_id: str) -> list[SequenceFlow]:
        return [f for f in self.flows if f.target == node_id]

    @property
    def store_ids(self) -> set[str]:
        return {k for k, _ in self.data_stores}

    def store_name(self, ref: str) -> str:
        return dict(self.data_stores).get(ref, ref)

    @property
    def data_object_map(self) -> dict[str, DataObject]:
        return {d.id: d for d in self.data_objects}

    def inputs_of(self, node_id: str) -> list[str]:
        """Data objects/stores read by ``node_id``."""
        return [a.source for a in self.data_flow if a.target == node_id]

    def outputs_of(self, node_id: str) -> list[str]:
        return [a.target for a in self.data_flow if a.source == node_id]

    def sub_process(self, node_id: str) -> "ProcessModel | None":
        return dict(self.sub_processes).get(node_id)

    def item(self, name: str) -> ItemDefinition | None:
        for i in self.items:
            if i.name == name:
                return i
        return None

    def entries(self) -> list[Node]:
        """Nodes that can instantiate the process."""
        return [n for n in self.nodes if n.kind == NodeKind.START_EVENT
                or (n.kind == NodeKind.RECEIVE_TASK and not self.incoming(n.id))]

    def boundary_of(self, node_id: str) -> list[Node]:
        return [n for n in self.nodes if n.kind == NodeKind.ERROR_BOUNDARY and n.param("attached_to") == node_id]


@dataclass(frozen=True)
class Pool:
    id: str
    name: str
    process: ProcessModel | None = None

    @property
    def is_black_box(self) -> bool:
        return self.process is None


@dataclass(frozen=True)
class MessageFlow:
    id: str
    source: str  # pool id or node id
    target: str
    item: str = ""
    initiating: bool = False
    name: str = ""


@dataclass(frozen=True)
class Collaboration:
    id: str = "collaboration"
    pools: tuple[Pool, ...] = ()
    message_flows: tuple[MessageFlow, ...] = ()
    items: tuple[ItemDefinition, ...] = ()
    data_store_names: tuple[tuple[str, str], ...] = ()  # (store id, name)
    extensions: tuple[str, ...] = ()  # opaque pass-through XML (diagram layout)

    def __post_init__(self):
        object.__setattr__(self, "pools", tuple(sorted(self.pools, key=lambda p: p.id)))
        object.__setattr__(self, "message_flows", tuple(sorted(self.message_flows, key=lambda m: m.id)))
        object.__setattr__(self, "items", tuple(sorted(self.items, key=lambda i: i.name)))
        object.__setattr__(self, "data_store_names", _frozen_map(self.data_store_names))

    def pool(self, pool_id: str) -> Pool:
        for p in self.pools:
            if p.id == pool_id:
                return p
        raise KeyError(pool_id)

    @property
    def processes(self) -> list[ProcessModel]:
        return [p.process for p in self.pools if p.process is not None]

    def owner(self, ref: str) -> Pool | None:
        """The pool that is ``ref`` or contains node ``ref`` (nested sub-processes included)."""
        for p in self.pools:
            if p.id == ref:
                return p
            if p.process is not None and _contains(p.process, ref):
                return p
        return None

    def flows_from(self, ref: str) -> list[MessageFlow]:
        return [m for m in self.message_flows if m.source == ref]

    def flows_to(self, ref: str) -> list[MessageFlow]:
        return [m for m in self.message_flows if m.target == ref]

    def item(self, name: str) -> ItemDefinition | None:
        for i in self.items:
            if i.name == name:
                return i
        return None


def _contains(model: ProcessModel, ref: str) -> bool:
    if any(n.id == ref for n in model.nodes):
        return True
    return any(_contains(sub, ref) for _, sub in model.sub_processes)


def single_process(model: ProcessModel, name: str = "process", items: Iterable[ItemDefinition] = ()) -> Collaboration:
    """Wrap one process into a one-pool collaboration."""
    return Collaboration(pools=(Pool(f"{model.id}_pool", name, model),), items=tuple(items) or model.items)


class ModelBuilder:
    """Small fluent helper for assembling models in code and tests."""

    def __init__(self, process_id: str = "process", items: Iterable[ItemDefinition] = ()):
        self.id = process_id
        self.nodes: list[Node] = []
        self.flows: list[SequenceFlow] = []
        self.data_objects: list[DataObject] = []
        self.data_flow: list[DataAssociation] = []
        self.stores: list[tuple[str, str]] = []
        self.subs: list[tuple[str, ProcessModel]] = []
        self.items = list(items)

    def node(self, node_id: str, kind: NodeKind | str, label: str = "", **config: str) -> "ModelBuilder":
        self.nodes.append(Node(node_id, NodeKind(kind), label, {k: str(v) for k, v in config.items()}))
        return self

    def flow(self, source: str, target: str, condition: str | None = None, default: bool = False,
             flow_id: str | None = None) -> "ModelBuilder":
        fid = flow_id or f"f_{source}_{target}"
        self.flows.append(SequenceFlow(fid, source, target, Expression(condition) if condition else None, default))
        return self

    def chain(self, *node_ids: str) -> "ModelBuilder":
        for a, b in zip(node_ids, node_ids[1:]):
            self.flow(a, b)
        return self

    def data(self, do_id: str, item: str, collection: bool = False, name: str = "") -> "ModelBuilder":
        self.data_objects.append(DataObject(do_id, item, collection, name))
        return self

    def store(self, ref: str, name: str | None = None) -> "ModelBuilder":
        self.stores.append((ref, name or ref))
        return self

    def assoc(self, source: str, target: str) -> "ModelBuilder":
        self.data_flow.append(DataAssociation(source, target))
        return self

    def sub(self, node_id: str, model: ProcessModel) -> "ModelBuilder":
        self.subs.append((node_id, model))
        return self

    def item(self, name: str, fields: Mapping[str, str] | None = None) -> "ModelBuilder":
        self.items.append(ItemDefinition(name, tuple((fields or {}).items())))
        return self

    def build(self) -> ProcessModel:
        return ProcessModel(self.id, tuple(self.nodes), tuple(self.flows), tuple(self.data_objects),
                            tuple(self.data_flow), tuple(self.stores), tuple(self.subs), tuple(self.items))
