"""BPMN 2.0 XML subset reader and writer.

Supported: collaborations with participants and message flows, processes and
sub-processes, service/script/send/receive tasks, exclusive/parallel/
inclusive gateways, start/end/intermediate/boundary events with message,
timer, escalation and error definitions, sequence flows with condition
expressions and defaults, data objects (incl. collections), data object and
data store references, data associations and item definitions.

Pattern parameters live in ``extensionElements`` as
``<eip:param name=".." value=".."/>``; item definition fields as
``<eip:field path=".." kind=".."/>``. Diagram interchange (``BPMNDiagram``)
is carried through untouched. Anything else is dropped with a warning.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.etree import ElementTree as ET
from xml.parsers import expat

from eipflow.expr import Expression
from eipflow.model import (
    Collaboration, DataAssociation, DataObject, ItemDefinition, MessageFlow, Node, NodeKind,
    Pool, ProcessModel, SequenceFlow,
)

BPMN = "http://www.omg.org/spec/BPMN/20100524/MODEL"
BPMNDI = "http://www.omg.org/spec/BPMN/20100524/DI"
DC = "http://www.omg.org/spec/DD/20100524/DC"
DI = "http://www.omg.org/spec/DD/20100524/DI"
XSI = "http://www.w3.org/2001/XMLSchema-instance"
EIP = "urn:eipflow:bpmn-ext:1"
EXPR_LANGUAGE = "urn:eipflow:expr:1"

for _prefix, _uri in (("bpmn", BPMN), ("bpmndi", BPMNDI), ("dc", DC), ("di", DI), ("xsi", XSI), ("eip", EIP)):
    ET.register_namespace(_prefix, _uri)


def _q(local: str, ns: str = BPMN) -> str:
    return f"{{{ns}}}{local}"


class XmlError(ValueError):
    pass


class UnsupportedRoot(ValueError):
    pass


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    line: int
    column: int
    element: str
    reason: str

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.severity}: <{self.element}> {self.reason}"


@dataclass
class ParseDiagnostics:
    warnings: list[Diagnostic] = field(default_factory=list)
    errors: list[Diagnostic] = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.warnings or self.errors)


SUPPORTED = frozenset({
    "definitions", "itemDefinition", "message", "dataStore", "collaboration", "participant",
    "messageFlow", "process", "subProcess", "serviceTask", "scriptTask", "script", "sendTask",
    "receiveTask", "startEvent", "endEvent", "intermediateThrowEvent", "intermediateCatchEvent",
    "boundaryEvent", "messageEventDefinition", "timerEventDefinition", "timeDuration",
    "escalationEventDefinition", "errorEventDefinition", "exclusiveGateway", "parallelGateway",
    "inclusiveGateway", "sequenceFlow", "conditionExpression", "dataObject", "dataObjectReference",
    "dataStoreReference", "dataInputAssociation", "dataOutputAssociation", "sourceRef", "targetRef",
    "extensionElements", "incoming", "outgoing",
})
EIP_SUPPORTED = frozenset({"param", "field"})

_TASKS = {
    "serviceTask": NodeKind.SERVICE_TASK,
    "scriptTask": NodeKind.SCRIPT_TASK,
    "sendTask": NodeKind.SEND_TASK,
    "receiveTask": NodeKind.RECEIVE_TASK,
    "subProcess": NodeKind.SUB_PROCESS,
}
_GATEWAYS = {
    "exclusiveGateway": NodeKind.EXCLUSIVE_GATEWAY,
    "parallelGateway": NodeKind.PARALLEL_GATEWAY,
    "inclusiveGateway": NodeKind.INCLUSIVE_GATEWAY,
}
_EVENTS = {"startEvent", "endEvent", "intermediateThrowEvent", "intermediateCatchEvent", "boundaryEvent"}
_FLOW_ELEMENTS = set(_TASKS) | set(_GATEWAYS) | _EVENTS
_BODY_TAGS = {(BPMN, t) for t in _FLOW_ELEMENTS | {"sequenceFlow", "dataObject", "dataObjectReference", "dataStoreReference"}}
# config keys that map onto BPMN structure rather than eip:param
_STRUCTURAL_KEYS = {"message", "duration", "attached_to", "script", "escalation", "error", "cancel"}


def _split(tag: str) -> tuple[str, str]:
    if tag.startswith("{"):
        ns, local = tag[1:].split("}", 1)
        return ns, local
    return "", tag


# -- XML reading with positions -----------------------------------------------------------


def _read_xml(data: bytes) -> tuple[ET.Element, dict[int, tuple[int, int]]]:
    positions: dict[int, tuple[int, int]] = {}
    builder = ET.TreeBuilder()
    parser = expat.ParserCreate(namespace_separator="}")

    def fix(name: str) -> str:
        return "{" + name if "}" in name else name

    def start(tag, attrs):
        el = builder.start(fix(tag), {fix(k): v for k, v in attrs.items()})
        positions[id(el)] = (parser.CurrentLineNumber, parser.CurrentColumnNumber + 1)

    parser.StartElementHandler = start
    parser.EndElementHandler = lambda tag: builder.end(fix(tag))
    parser.CharacterDataHandler = builder.data
    try:
        parser.Parse(data, True)
    except expat.ExpatError as exc:
        raise XmlError(str(exc)) from exc
    return builder.close(), positions


class _Reader:
    def __init__(self, root: ET.Element, positions):
        self.root = root
        self.pos = positions
        self.diag = ParseDiagnostics()
        self.items: list[ItemDefinition] = []

    def warn(self, el: ET.Element, reason: str):
        line, col = self.pos.get(id(el), (0, 0))
        self.diag.warnings.append(Diagnostic("warning", line, col, _split(el.tag)[1], reason))

    def error(self, el: ET.Element, reason: str):
        line, col = self.pos.get(id(el), (0, 0))
        self.diag.errors.append(Diagnostic("error", line, col, _split(el.tag)[1], reason))

    def supported(self, el: ET.Element) -> bool:
        """Warn for (and skip) an unsupported element together with its whole subtree."""
        ns, local = _split(el.tag)
        if ns == BPMN and local in SUPPORTED:
            return True
        if ns == EIP and local in EIP_SUPPORTED:
            return True
        for e in el.iter():
            self.warn(e, "unsupported element ignored")
        return False

    # -- top level ------------------------------------------------------------------

    def read(self) -> Collaboration:
        root = self.root
        messages: dict[str, str] = {}
        store_names: list[tuple[str, str]] = []
        processes: dict[str, ProcessModel] = {}
        process_order: list[str] = []
        collab_el = None
        extensions: list[str] = []

        for el in root:
            ns, local = _split(el.tag)
            if ns == BPMNDI and local == "BPMNDiagram":
                extensions.append(_blob(el))
                continue
            if not self.supported(el):
                continue
            if local == "itemDefinition":
                self.items.append(self.item_definition(el))
            elif local == "message":
                messages[el.get("id", "")] = el.get("itemRef", "")
            elif local == "dataStore":
                store_names.append((el.get("id", ""), el.get("name", el.get("id", ""))))
            elif local == "collaboration":
                collab_el = el
            elif local == "process":
                process_order.append(el.get("id", ""))
            else:
                self.warn(el, "element not allowed at definitions level")
        # processes need the item definitions, which may come later in the document
        for el in root:
            if _split(el.tag) == (BPMN, "process"):
                processes[el.get("id", "")] = self.process(el)

        pools: list[Pool] = []
        flows: list[MessageFlow] = []
        collab_id = "collaboration"
        referenced: set[str] = set()
        if collab_el is not None:
            collab_id = collab_el.get("id", collab_id)
            for el in collab_el:
                if not self.supported(el):
                    continue
                local = _split(el.tag)[1]
                if local == "participant":
                    ref = el.get("processRef")
                    proc = None
                    if ref:
                        proc = processes.get(ref)
                        referenced.add(ref)
                        if proc is None:
                            self.error(el, f"processRef {ref!r} does not resolve")
                    pools.append(Pool(el.get("id", ""), el.get("name", ""), proc))
                elif local == "messageFlow":
                    flows.append(MessageFlow(
                        el.get("id", ""), el.get("sourceRef", ""), el.get("targetRef", ""),
                        item=messages.get(el.get("messageRef", ""), ""),
                        initiating=el.get(_q("initiating", EIP)) == "true",
                        name=el.get("name", ""),
                    ))
                elif local == "extensionElements":
                    self.extension_params(el)
                else:
                    self.warn(el, "element not allowed in a collaboration")
        for pid in process_order:
            if pid not in referenced:
                proc = processes[pid]
                pools.append(Pool(f"{pid}_pool", proc.name or pid, proc))
        return Collaboration(collab_id, tuple(pools), tuple(flows), tuple(self.items),
                             tuple(store_names), tuple(extensions))

    def item_definition(self, el: ET.Element) -> ItemDefinition:
        fields = []
        for child in el:
            if not self.supported(child):
                continue
            if _split(child.tag)[1] == "extensionElements":
                for f in child:
                    if not self.supported(f):
                        continue
                    if _split(f.tag) == (EIP, "field"):
                        fields.append((f.get("path", ""), f.get("kind", "string")))
                    else:
                        self.warn(f, "only eip:field is read inside an item definition")
            else:
                self.warn(child, "element not allowed in an item definition")
        try:
            return ItemDefinition(el.get("id", ""), tuple(fields))
        except ValueError as exc:
            self.error(el, str(exc))
            return ItemDefinition(el.get("id", ""))

    def extension_params(self, el: ET.Element) -> dict[str, str]:
        out = {}
        for p in el:
            if not self.supported(p):
                continue
            if _split(p.tag) == (EIP, "param"):
                out[p.get("name", "")] = p.get("value", p.text or "")
            else:
                self.warn(p, "unexpected extension element")
        return out

    # -- processes ------------------------------------------------------------------------

    def process(self, el: ET.Element, nested: bool = False) -> ProcessModel:
        nodes: list[Node] = []
        flows: list[tuple[ET.Element, SequenceFlow]] = []
        dos: list[DataObject] = []
        do_defs: dict[str, ET.Element] = {}
        do_refs: list[ET.Element] = []
        stores: list[tuple[str, str]] = []
        assocs: list[DataAssociation] = []
        subs: list[tuple[str, ProcessModel]] = []
        defaults: dict[str, str] = {}

        for child in el:
            if nested and _split(child.tag) not in _BODY_TAGS:
                continue  # the sub-process element's own children are read by flow_node()
            if not self.supported(child):
                continue
            local = _split(child.tag)[1]
            if local in _FLOW_ELEMENTS:
                node, node_assocs, default = self.flow_node(child)
                nodes.append(node)
                assocs.extend(node_assocs)
                if default:
                    defaults[node.id] = default
                if local == "subProcess":
                    subs.append((node.id, self.process(child, nested=True)))
            elif local == "sequenceFlow":
                flows.append((child, self.sequence_flow(child)))
            elif local == "dataObject":
                do_defs[child.get("id", "")] = child
            elif local == "dataObjectReference":
                do_refs.append(child)
            elif local == "dataStoreReference":
                stores.append((child.get("id", ""), child.get("dataStoreRef") or child.get("id", "")))
            elif local in ("extensionElements", "incoming", "outgoing"):
                continue
            else:
                self.warn(child, "element not allowed in a process")

        referenced_defs = {r.get("dataObjectRef") for r in do_refs}
        for do_id, d in do_defs.items():
            if do_id not in referenced_defs:
                dos.append(DataObject(do_id, d.get("itemSubjectRef", "untyped"),
                                      d.get("isCollection") == "true", d.get("name", "")))
        for r in do_refs:
            target = do_defs.get(r.get("dataObjectRef", ""))
            if target is None:
                self.error(r, f"dataObjectRef {r.get('dataObjectRef')!r} does not resolve")
            item = r.get("itemSubjectRef") or (target.get("itemSubjectRef") if target is not None else None)
            coll = target is not None and target.get("isCollection") == "true"
            dos.append(DataObject(r.get("id", ""), item or "untyped", coll, r.get("name", "")))

        seq = []
        for _, f in flows:
            if defaults.get(f.source) == f.id:
                f = SequenceFlow(f.id, f.source, f.target, f.condition, True)
            seq.append(f)
        known_flows = {f.id for f in seq}
        for node_id, flow_id in defaults.items():
            if flow_id not in known_flows:
                self.diag.errors.append(Diagnostic("error", 0, 0, "default", f"default flow {flow_id!r} of {node_id!r} does not exist"))
        return ProcessModel(el.get("id", ""), tuple(nodes), tuple(seq), tuple(dos), tuple(assocs),
                            tuple(stores), tuple(subs), tuple(self.items), el.get("name", ""))

    def flow_node(self, el: ET.Element):
        local = _split(el.tag)[1]
        node_id = el.get("id", "")
        config: dict[str, str] = {}
        assocs: list[DataAssociation] = []
        defs: list[str] = []

        for child in el:
            c_ns, c_local = _split(child.tag)
            if local == "subProcess" and (c_ns, c_local) in _BODY_TAGS:
                continue  # read by process()
            if not self.supported(child):
                continue
            if c_local.endswith("EventDefinition"):
                defs.append(c_local)
                if c_local == "timerEventDefinition":
                    for t in child:
                        if self.supported(t) and _split(t.tag)[1] == "timeDuration":
                            config["duration"] = (t.text or "").strip()
                if c_local == "escalationEventDefinition" and child.get("escalationRef"):
                    config["escalation"] = child.get("escalationRef")
                if c_local == "errorEventDefinition" and child.get("errorRef"):
                    config["error"] = child.get("errorRef")
            elif c_local == "extensionElements":
                config.update(self.extension_params(child))
            elif c_local == "script":
                config["script"] = child.text or ""
            elif c_local == "dataInputAssociation":
                for src in child.findall(_q("sourceRef")):
                    assocs.append(DataAssociation((src.text or "").strip(), node_id))
                for t in child:
                    if _split(t.tag)[1] not in ("sourceRef", "targetRef"):
                        self.supported(t)
            elif c_local == "dataOutputAssociation":
                for tgt in child.findall(_q("targetRef")):
                    assocs.append(DataAssociation(node_id, (tgt.text or "").strip()))
                for t in child:
                    if _split(t.tag)[1] not in ("sourceRef", "targetRef"):
                        self.supported(t)
            elif c_local in ("incoming", "outgoing"):
                continue
            else:
                self.warn(child, f"element not allowed in {local}")

        if local in _TASKS:
            kind = _TASKS[local]
        elif local in _GATEWAYS:
            kind = _GATEWAYS[local]
        else:
            kind = self.event_kind(el, local, defs, config)
        if local == "boundaryEvent":
            config["attached_to"] = el.get("attachedToRef", "")
            if el.get("cancelActivity") == "false":
                config["cancel"] = "false"
        return Node(node_id, kind, el.get("name", ""), config), assocs, el.get("default")

    def event_kind(self, el, local: str, defs: list[str], config: dict[str, str]) -> NodeKind:
        has = set(defs)
        if local == "startEvent":
            if "timerEventDefinition" in has:
                return NodeKind.TIMER_START
            if "escalationEventDefinition" in has:
                return NodeKind.ESCALATION_START
            if "messageEventDefinition" in has:
                config["message"] = "true"
            return NodeKind.START_EVENT
        if local == "endEvent":
            if "messageEventDefinition" in has:
                config["message"] = "true"
            return NodeKind.END_EVENT
        if local == "intermediateThrowEvent":
            if "escalationEventDefinition" in has:
                return NodeKind.ESCALATION_THROW
            if "messageEventDefinition" not in has:
                self.warn(el, "intermediate throw event without message definition read as message throw")
            return NodeKind.MESSAGE_THROW
        if local == "intermediateCatchEvent":
            if "timerEventDefinition" in has:
                return NodeKind.TIMER
            if "messageEventDefinition" not in has:
                self.warn(el, "intermediate catch event without message definition read as message catch")
            return NodeKind.MESSAGE_CATCH
        if "errorEventDefinition" not in has:
            self.warn(el, "boundary event without error definition read as error boundary")
        return NodeKind.ERROR_BOUNDARY

    def sequence_flow(self, el: ET.Element) -> SequenceFlow:
        condition = None
        for child in el:
            if not self.supported(child):
                continue
            local = _split(child.tag)[1]
            if local == "conditionExpression":
                lang = child.get("language")
                if lang and lang != EXPR_LANGUAGE:
                    self.warn(child, f"condition language {lang!r} read with the built-in syntax")
                text = (child.text or "").strip()
                condition = Expression(text) if text else None
            elif local == "extensionElements":
                self.extension_params(child)
            else:
                self.warn(child, "element not allowed in a sequence flow")
        return SequenceFlow(el.get("id", ""), el.get("sourceRef", ""), el.get("targetRef", ""), condition)


def _strip_tails(el: ET.Element) -> ET.Element:
    for e in el.iter():
        e.tail = None
        if e.text is not None and not e.text.strip():
            e.text = None
    return el


def _blob(el: ET.Element) -> str:
    return ET.tostring(_strip_tails(el), encoding="unicode")


def parse(document: bytes | str) -> tuple[Collaboration, ParseDiagnostics]:
    """Read a BPMN definitions document. Raises :class:`XmlError` or :class:`UnsupportedRoot`."""
    if isinstance(document, str):
        document = document.encode()
    root, positions = _read_xml(document)
    if root.tag != _q("definitions"):
        raise UnsupportedRoot(f"expected bpmn:definitions, got {root.tag}")
    reader = _Reader(root, positions)
    collab = reader.read()
    return collab, reader.diag


def parse_file(path) -> tuple[Collaboration, ParseDiagnostics]:
    with open(path, "rb") as fh:
        return parse(fh.read())


# -- writing -------------------------------------------------------------------------------

_EVENT_TAGS = {
    NodeKind.START_EVENT: ("startEvent", None),
    NodeKind.TIMER_START: ("startEvent", "timerEventDefinition"),
    NodeKind.ESCALATION_START: ("startEvent", "escalationEventDefinition"),
    NodeKind.END_EVENT: ("endEvent", None),
    NodeKind.MESSAGE_THROW: ("intermediateThrowEvent", "messageEventDefinition"),
    NodeKind.ESCALATION_THROW: ("intermediateThrowEvent", "escalationEventDefinition"),
    NodeKind.MESSAGE_CATCH: ("intermediateCatchEvent", "messageEventDefinition"),
    NodeKind.TIMER: ("intermediateCatchEvent", "timerEventDefinition"),
    NodeKind.ERROR_BOUNDARY: ("boundaryEvent", "errorEventDefinition"),
}
_TASK_TAGS = {v: k for k, v in _TASKS.items()}
_GATEWAY_TAGS = {v: k for k, v in _GATEWAYS.items()}


def _sub(parent: ET.Element, local: str, ns: str = BPMN, **attrs: str) -> ET.Element:
    return ET.SubElement(parent, _q(local, ns), {k: v for k, v in attrs.items() if v is not None})


def _write_params(parent: ET.Element, params: dict[str, str]):
    if not params:
        return
    ext = _sub(parent, "extensionElements")
    for k in sorted(params):
        _sub(ext, "param", EIP, name=k, value=params[k])


def _write_node(parent: ET.Element, node: Node, model: ProcessModel):
    cfg = node.params
    defaults = [f.id for f in model.outgoing(node.id) if f.is_default]
    if node.kind in _TASK_TAGS:
        tag, definition = _TASK_TAGS[node.kind], None
    elif node.kind in _GATEWAY_TAGS:
        tag, definition = _GATEWAY_TAGS[node.kind], None
    else:
        tag, definition = _EVENT_TAGS[node.kind]
    attrs = {"id": node.id, "name": node.label or None}
    if defaults:
        attrs["default"] = defaults[0]
    if node.kind == NodeKind.ERROR_BOUNDARY:
        attrs["attachedToRef"] = cfg.get("attached_to", "")
        if cfg.get("cancel") == "false":
            attrs["cancelActivity"] = "false"
    el = _sub(parent, tag, **attrs)
    _write_params(el, {k: v for k, v in cfg.items() if k not in _STRUCTURAL_KEYS})
    for src in sorted(model.inputs_of(node.id)):
        a = _sub(el, "dataInputAssociation")
        _sub(a, "sourceRef").text = src
    for tgt in sorted(model.outputs_of(node.id)):
        a = _sub(el, "dataOutputAssociation")
        _sub(a, "targetRef").text = tgt
    if node.kind == NodeKind.SCRIPT_TASK and "script" in cfg:
        _sub(el, "script").text = cfg["script"]
    if cfg.get("message") == "true" and node.kind in (NodeKind.START_EVENT, NodeKind.END_EVENT):
        definition = "messageEventDefinition"
    if definition:
        d = _sub(el, definition)
        if definition == "timerEventDefinition" and "duration" in cfg:
            _sub(d, "timeDuration").text = cfg["duration"]
        if definition == "escalationEventDefinition" and "escalation" in cfg:
            d.set("escalationRef", cfg["escalation"])
        if definition == "errorEventDefinition" and "error" in cfg:
            d.set("errorRef", cfg["error"])
    if node.kind == NodeKind.SUB_PROCESS:
        sub = model.sub_process(node.id)
        if sub is not None:
            _write_process_body(el, sub)


def _write_process_body(el: ET.Element, model: ProcessModel):
    for d in model.data_objects:
        _sub(el, "dataObject", id=d.id, name=d.name or None, itemSubjectRef=d.item,
             isCollection="true" if d.is_collection else None)
    for ref, store in model.data_stores:
        _sub(el, "dataStoreReference", id=ref, dataStoreRef=store)
    for n in model.nodes:
        _write_node(el, n, model)
    # flows keep model order: exclusive gateways evaluate conditions in this order
    for f in model.flows:
        fe = _sub(el, "sequenceFlow", id=f.id, sourceRef=f.source, targetRef=f.target)
        if f.condition is not None:
            c = _sub(fe, "conditionExpression", language=EXPR_LANGUAGE)
            c.set(_q("type", XSI), "bpmn:tFormalExpression")
            c.text = f.condition.source


def serialize(collab: Collaboration) -> bytes:
    """Canonical document: ids sorted within each section, flows in model order."""
    root = ET.Element(_q("definitions"), {"id": f"{collab.id}_definitions", "targetNamespace": "urn:eipflow:model"})
    for item in collab.items:
        el = _sub(root, "itemDefinition", id=item.name, structureRef=item.name)
        if item.fields:
            ext = _sub(el, "extensionElements")
            for path, kind in item.fields:
                _sub(ext, "field", EIP, path=path, kind=kind)
    for mf in collab.message_flows:
        if mf.item:
            _sub(root, "message", id=f"{mf.id}_message", itemRef=mf.item)
    for store_id, name in collab.data_store_names:
        _sub(root, "dataStore", id=store_id, name=name)
    c = _sub(root, "collaboration", id=collab.id)
    for pool in collab.pools:
        _sub(c, "participant", id=pool.id, name=pool.name,
             processRef=pool.process.id if pool.process is not None else None)
    for mf in collab.message_flows:
        attrs = {"id": mf.id, "sourceRef": mf.source, "targetRef": mf.target,
                 "messageRef": f"{mf.id}_message" if mf.item else None, "name": mf.name or None}
        el = _sub(c, "messageFlow", **attrs)
        if mf.initiating:
            el.set(_q("initiating", EIP), "true")
    for pool in collab.pools:
        if pool.process is None:
            continue
        p = _sub(root, "process", id=pool.process.id, name=pool.process.name or None, isExecutable="true")
        _write_process_body(p, pool.process)
    for blob in collab.extensions:
        root.append(ET.fromstring(blob))
    ET.indent(root, space="  ")
    return ET.tostring(root, encoding="UTF-8", xml_declaration=True) + b"\n"


def write_file(collab: Collaboration, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize(collab))
