"""Reference models, one per pattern kind plus the business-monitoring flow.

The ``.bpmn`` files next to this module are generated from the builders below
by ``scripts/make_fixtures.py``; a test keeps the two in sync.
"""

from __future__ import annotations

import json
from dataclasses import replace
from importlib import resources
from typing import Callable

from eipflow import bpmn
from eipflow.catalog import PatternKind
from eipflow.model import Collaboration, ItemDefinition, MessageFlow, ModelBuilder, Pool, ProcessModel

K = PatternKind

FSN_TO_CDM = {
    "target": "FSN:CDM",
    "transforms": [
        {"op": "rename_root", "to": "cdm", "was": "fsn"},
        {"op": "rename", "path": "/cdm/amt", "to": "amount"},
        {"op": "convert", "path": "/cdm/amount", "to": "decimal"},
        {"op": "map", "path": "/cdm/cur", "table": {"EUR": "978", "USD": "840", "GBP": "826"}},
    ],
}

CDM_TO_ISO = {
    "target": "FSN-ISO",
    "transforms": [
        {"op": "rename_root", "to": "Document", "was": "cdm"},
        {"op": "rename", "path": "/Document/account", "to": "IBAN"},
        {"op": "convert", "path": "/Document/date", "to": "date", "from_format": "%d.%m.%Y", "to_format": "%Y-%m-%d"},
    ],
}

ITEMS = (
    ItemDefinition("FSN", (("/fsn/account", "string"), ("/fsn/amt", "string"), ("/fsn/cur", "string"), ("/fsn/date", "string"))),
    ItemDefinition("FSN:CDM", (("/cdm/account", "string"), ("/cdm/amount", "decimal"), ("/cdm/cur", "string"), ("/cdm/date", "string"))),
    ItemDefinition("FSN-ISO", (("/Document/IBAN", "string"), ("/Document/amount", "decimal"), ("/Document/cur", "string"), ("/Document/date", "string"))),
    ItemDefinition("Order", (("/order/id", "integer"), ("/order/item/sku", "string"), ("/order/total", "decimal"))),
)


def _with_items(model: ProcessModel, items) -> ProcessModel:
    subs = tuple((k, _with_items(v, items)) for k, v in model.sub_processes)
    return replace(model, items=items, sub_processes=subs)


def _sub_model(b: ModelBuilder, node_id: str, label: str) -> ProcessModel:
    return replace(b.build(), id=node_id, name=label)


def _collab(model: ProcessModel, name: str, partners=(), flows=(), items=ITEMS) -> Collaboration:
    model = _with_items(model, tuple(items))
    pools = [Pool(f"{model.id}_pool", name, model)] + [Pool(pid, pname) for pid, pname in partners]
    return Collaboration(f"{model.id}_collaboration", tuple(pools),
                         tuple(MessageFlow(*f) if isinstance(f, tuple) else f for f in flows), tuple(items))


def business_monitoring() -> Collaboration:
    """Corporate -> FSN:CDM translation -> claim check -> bank -> restore -> FSN-ISO -> ODC."""
    b = ModelBuilder("cod_integration")
    b.node("start", "StartEvent", "FSN received", message="true")
    b.node("to_cdm", "ScriptTask", "Translate FSN to FSN:CDM", mapping=json.dumps(FSN_TO_CDM, sort_keys=True))
    b.node("check_in", "ScriptTask", "Claim check", extract="/", retain="true")
    b.node("bank_call", "ServiceTask", "Send to bank")
    b.node("check_out", "ScriptTask", "Restore from claim check")
    b.node("to_iso", "ScriptTask", "Translate FSN:CDM to FSN-ISO", mapping=json.dumps(CDM_TO_ISO, sort_keys=True))
    b.node("end", "EndEvent", "Send to ODC", message="true")
    b.chain("start", "to_cdm", "check_in", "bank_call", "check_out", "to_iso", "end")
    b.data("do_fsn", "FSN", name="FSN").data("do_cdm", "FSN:CDM", name="FSN:CDM").data("do_iso", "FSN-ISO", name="FSN-ISO")
    b.store("ds_claims", "claims")
    b.assoc("start", "do_fsn").assoc("do_fsn", "to_cdm").assoc("to_cdm", "do_cdm")
    b.assoc("check_in", "ds_claims").assoc("ds_claims", "check_out")
    b.assoc("to_iso", "do_iso")
    return _collab(b.build(), "Business Monitoring",
                   partners=[("corporate", "Corporate"), ("bank", "Bank"), ("odc", "ODC")],
                   flows=[("mf_fsn", "corporate", "start", "FSN", True, "FSN"),
                          ("mf_bank_req", "bank_call", "bank", "FSN:CDM", False, "payment request"),
                          ("mf_bank_rep", "bank", "bank_call", "", False, "bank reply"),
                          ("mf_odc", "end", "odc", "FSN-ISO", False, "to ODC")])


def content_based_router() -> Collaboration:
    b = ModelBuilder("cbr")
    b.node("start", "StartEvent", message="true").node("route", "ExclusiveGateway", "Route by total")
    b.node("big", "EndEvent", message="true", channel="big").node("medium", "EndEvent", message="true", channel="medium")
    b.node("small", "EndEvent", message="true", channel="small")
    b.flow("start", "route")
    b.flow("route", "big", "/order/total > 100").flow("route", "medium", "/order/total > 10")
    b.flow("route", "small", default=True)
    b.data("do_order", "Order").assoc("start", "do_order")
    return _collab(b.build(), "Content-based Router")


def message_filter() -> Collaboration:
    b = ModelBuilder("filter")
    b.node("start", "StartEvent", message="true").node("filter", "ExclusiveGateway", "Filter")
    b.node("pass", "EndEvent", message="true", channel="accepted").node("discard", "EndEvent", "Discard")
    b.flow("start", "filter").flow("filter", "pass", "/order/total >= 50").flow("filter", "discard", default=True)
    return _collab(b.build(), "Message Filter")


def recipient_list() -> Collaboration:
    b = ModelBuilder("recipients")
    b.node("start", "StartEvent", message="true").node("fan", "InclusiveGateway", "Recipient list", mode="Stateless")
    for r in ("a", "b", "c"):
        b.node(f"to_{r}", "EndEvent", message="true", channel=f"recipient_{r}")
    b.flow("start", "fan")
    b.flow("fan", "to_a", "exists(/order/item)").flow("fan", "to_b", "/order/total > 10").flow("fan", "to_c", default=True)
    b.data("do_recipients", "untyped", name="recipients").assoc("do_recipients", "fan")
    return _collab(b.build(), "Recipient List")


def splitter() -> Collaboration:
    b = ModelBuilder("splitter")
    b.node("start", "StartEvent", message="true").node("split", "ScriptTask", "Split items", split="/order/item")
    b.node("end", "EndEvent", message="true", channel="items")
    b.chain("start", "split", "end")
    b.data("do_order", "Order").data("do_items", "Order", collection=True)
    b.assoc("start", "do_order").assoc("do_order", "split").assoc("split", "do_items")
    return _collab(b.build(), "Splitter")


def aggregator() -> Collaboration:
    inner = ModelBuilder("aggregate_body")
    inner.node("msg_start", "StartEvent", "Contribution", message="true")
    inner.node("collect", "ScriptTask", "Add to aggregate")
    inner.node("inner_end", "EndEvent")
    inner.node("esc_start", "EscalationStartEvent", "Complete")
    inner.node("timer_start", "TimerStartEvent", "Timeout", duration="10")
    inner.node("close", "EndEvent")
    inner.chain("msg_start", "collect", "inner_end").flow("esc_start", "close").flow("timer_start", "close")
    b = ModelBuilder("aggregator")
    b.node("start", "StartEvent", message="true")
    b.node("agg", "SubProcess", "Aggregate", completion="wait_for_all(3)", algorithm="collect",
           correlation="correlation_id()")
    b.node("done", "IntermediateEscalationThrow", "Aggregate complete")
    b.node("end", "EndEvent", message="true", channel="aggregates")
    b.chain("start", "agg", "done", "end")
    b.sub("agg", _sub_model(inner, "agg", "Aggregate"))
    return _collab(b.build(), "Aggregator")


def resequencer() -> Collaboration:
    inner = ModelBuilder("resequence_body")
    inner.node("in", "StartEvent", message="true").node("buffer", "ScriptTask", "Buffer").node("out", "EndEvent")
    inner.chain("in", "buffer", "out")
    inner.store("ds_sequence", "sequence").assoc("buffer", "ds_sequence")
    b = ModelBuilder("resequencer")
    b.node("start", "StartEvent", message="true").node("reseq", "SubProcess", "Resequence", mode="streaming")
    b.node("end", "EndEvent", message="true", channel="ordered")
    b.chain("start", "reseq", "end")
    b.data("do_stream", "untyped", collection=True, name="messages").assoc("do_stream", "reseq")
    b.store("ds_sequence", "sequence").assoc("reseq", "ds_sequence")
    b.sub("reseq", _sub_model(inner, "reseq", "Resequence"))
    return _collab(b.build(), "Resequencer")


def message_translator() -> Collaboration:
    b = ModelBuilder("translator")
    b.node("start", "StartEvent", message="true")
    b.node("translate", "ScriptTask", "Translate", mapping=json.dumps(FSN_TO_CDM, sort_keys=True))
    b.node("end", "EndEvent", message="true", channel="cdm")
    b.chain("start", "translate", "end")
    b.data("do_in", "FSN").data("do_out", "FSN:CDM")
    b.assoc("start", "do_in").assoc("do_in", "translate").assoc("translate", "do_out")
    return _collab(b.build(), "Message Translator")


def content_enricher() -> Collaboration:
    b = ModelBuilder("enricher")
    b.node("start", "StartEvent", message="true")
    b.node("enrich", "ServiceTask", "Add address", placement="/order/shipping/address")
    b.node("end", "EndEvent", message="true", channel="enriched")
    b.chain("start", "enrich", "end")
    return _collab(b.build(), "Content Enricher", partners=[("crm", "CRM")],
                   flows=[("mf_crm_req", "enrich", "crm", "", False, "lookup"),
                          ("mf_crm_rep", "crm", "enrich", "", False, "address")])


def content_filter() -> Collaboration:
    b = ModelBuilder("content_filter")
    b.node("start", "StartEvent", message="true")
    b.node("reduce", "ScriptTask", "Keep total", keep="/order/id,/order/total")
    b.node("end", "EndEvent", message="true", channel="reduced")
    b.chain("start", "reduce", "end")
    return _collab(b.build(), "Content Filter")


def claim_check() -> Collaboration:
    b = ModelBuilder("claim_check")
    b.node("start", "StartEvent", message="true")
    b.node("check_in", "ScriptTask", "Store items", extract="/order/item")
    b.node("work", "ScriptTask", "Process header")
    b.node("check_out", "ScriptTask", "Restore items")
    b.node("end", "EndEvent", message="true", channel="restored")
    b.chain("start", "check_in", "work", "check_out", "end")
    b.store("ds_claims", "claims").assoc("check_in", "ds_claims").assoc("ds_claims", "check_out")
    return _collab(b.build(), "Claim Check")


def wire_tap() -> Collaboration:
    b = ModelBuilder("wire_tap")
    b.node("start", "StartEvent", message="true").node("tap", "ParallelGateway", "Wire tap")
    b.node("primary", "EndEvent", message="true", channel="primary")
    b.node("persist", "ScriptTask", "Persist copy", tag="tap").node("tap_end", "EndEvent")
    b.flow("start", "tap").flow("tap", "primary").flow("tap", "persist").flow("persist", "tap_end")
    b.store("ds_audit", "audit").assoc("persist", "ds_audit")
    return _collab(b.build(), "Wire Tap")


def message_store() -> Collaboration:
    b = ModelBuilder("message_store")
    b.node("start", "StartEvent", message="true").node("persist", "ScriptTask", "Persist", tag="in")
    b.node("end", "EndEvent", message="true", channel="stored")
    b.chain("start", "persist", "end")
    b.store("ds_messages", "messages").assoc("persist", "ds_messages")
    return _collab(b.build(), "Message Store")


def join_router() -> Collaboration:
    b = ModelBuilder("join_router")
    b.node("start_a", "StartEvent", message="true").node("start_b", "StartEvent", message="true")
    b.node("start_c", "StartEvent", message="true")
    b.node("join", "InclusiveGateway", "Join").node("end", "EndEvent", message="true", channel="joined")
    b.flow("start_a", "join").flow("start_b", "join").flow("start_c", "join").flow("join", "end")
    return _collab(b.build(), "Join Router")


def external_service() -> Collaboration:
    b = ModelBuilder("external_service")
    b.node("start", "StartEvent", message="true").node("call", "ServiceTask", "Call service")
    b.node("end", "EndEvent", message="true", channel="replies")
    b.chain("start", "call", "end")
    return _collab(b.build(), "External Service", partners=[("service", "Service")],
                   flows=[("mf_req", "call", "service", "", False, "request"),
                          ("mf_rep", "service", "call", "", False, "reply")])


def multicast() -> Collaboration:
    b = ModelBuilder("multicast")
    b.node("start", "StartEvent", message="true").node("fork", "ParallelGateway", "Multicast")
    b.node("to_x", "EndEvent", message="true", channel="branch_x").node("to_y", "EndEvent", message="true", channel="branch_y")
    b.flow("start", "fork").flow("fork", "to_x").flow("fork", "to_y")
    b.data("do_x", "Order", name="copy x").data("do_y", "Order", name="copy y")
    b.assoc("fork", "do_x").assoc("fork", "do_y")
    return _collab(b.build(), "Multicast")


def request_reply_sync() -> Collaboration:
    b = ModelBuilder("request_reply_sync")
    b.node("start", "StartEvent", message="true").node("call", "ServiceTask", "Request")
    b.node("end", "EndEvent", message="true", channel="replies")
    b.node("on_error", "ErrorBoundary", "Fault", attached_to="call")
    b.node("error_end", "EndEvent", message="true", channel="errors")
    b.chain("start", "call", "end").flow("on_error", "error_end")
    return _collab(b.build(), "Request-Reply (sync)", partners=[("service", "Service")],
                   flows=[("mf_req", "call", "service", "", False, "request"),
                          ("mf_rep", "service", "call", "", False, "reply")])


def request_reply_async() -> Collaboration:
    b = ModelBuilder("request_reply_async")
    b.node("start", "StartEvent", message="true")
    b.node("send", "SendTask", "Send request", correlation="id()")
    b.node("receive", "ReceiveTask", "Receive reply", correlation="id()")
    b.node("end", "EndEvent", message="true", channel="replies")
    b.chain("start", "send", "receive", "end")
    return _collab(b.build(), "Request-Reply (async)", partners=[("service", "Service")],
                   flows=[("mf_req", "send", "service", "", False, "request"),
                          ("mf_rep", "service", "receive", "", False, "reply")])


def synch_asynch_bridge() -> Collaboration:
    b = ModelBuilder("synch_asynch_bridge")
    b.node("start", "StartEvent", message="true")
    b.node("throw", "IntermediateMessageThrow", "Send", correlation="id()")
    b.node("catch", "IntermediateMessageCatch", "Await", correlation="id()")
    b.node("end", "EndEvent", message="true", channel="replies")
    b.chain("start", "throw", "catch", "end")
    return _collab(b.build(), "Synch-Asynch Bridge", partners=[("service", "Async Service")],
                   flows=[("mf_req", "throw", "service", "", False, "request"),
                          ("mf_rep", "service", "catch", "", False, "reply")])


def asynch_synch_bridge() -> Collaboration:
    b = ModelBuilder("asynch_synch_bridge")
    b.node("start", "StartEvent", message="true").node("call", "ServiceTask", "Call sync service")
    b.node("reply", "EndEvent", message="true")
    b.chain("start", "call", "reply")
    return _collab(b.build(), "Asynch-Synch Bridge", partners=[("requester", "Requester"), ("provider", "Provider")],
                   flows=[("mf_in", "requester", "start", "", True, "async request"),
                          ("mf_req", "call", "provider", "", False, "request"),
                          ("mf_rep", "provider", "call", "", False, "reply"),
                          ("mf_out", "reply", "requester", "", False, "async reply")])


FIXTURES: dict[str, tuple[Callable[[], Collaboration], PatternKind | None]] = {
    "business_monitoring": (business_monitoring, None),
    "content_based_router": (content_based_router, K.CONTENT_BASED_ROUTER),
    "message_filter": (message_filter, K.MESSAGE_FILTER),
    "recipient_list": (recipient_list, K.RECIPIENT_LIST),
    "splitter": (splitter, K.SPLITTER),
    "aggregator": (aggregator, K.AGGREGATOR),
    "resequencer": (resequencer, K.RESEQUENCER),
    "message_translator": (message_translator, K.MESSAGE_TRANSLATOR),
    "content_enricher": (content_enricher, K.CONTENT_ENRICHER),
    "content_filter": (content_filter, K.CONTENT_FILTER),
    "claim_check": (claim_check, K.CLAIM_CHECK),
    "wire_tap": (wire_tap, K.WIRE_TAP),
    "message_store": (message_store, K.MESSAGE_STORE),
    "join_router": (join_router, K.JOIN_ROUTER),
    "external_service": (external_service, K.EXTERNAL_SERVICE),
    "multicast": (multicast, K.MULTICAST),
    "request_reply_sync": (request_reply_sync, K.REQUEST_REPLY_SYNC),
    "request_reply_async": (request_reply_async, K.REQUEST_REPLY_ASYNC),
    "synch_asynch_bridge": (synch_asynch_bridge, K.SYNCH_ASYNCH_BRIDGE),
    "asynch_synch_bridge": (asynch_synch_bridge, K.ASYNCH_SYNCH_BRIDGE),
}

# overlaps the recognizer reports on purpose: the bridge wraps a plain service call,
# and the tap branch of a wire tap ends in a message store
OVERLAPS: dict[PatternKind, frozenset[PatternKind]] = {
    K.WIRE_TAP: frozenset({K.MESSAGE_STORE}),
    K.ASYNCH_SYNCH_BRIDGE: frozenset({K.EXTERNAL_SERVICE}),
}


def build(name: str) -> Collaboration:
    return FIXTURES[name][0]()


def path(name: str):
    return resources.files(__name__).joinpath(f"{name}.bpmn")


def load(name: str) -> Collaboration:
    """Parse the checked-in ``.bpmn`` file for ``name``."""
    collab, diag = bpmn.parse(path(name).read_bytes())
    if diag.errors:
        raise ValueError(f"fixture {name}: {diag.errors}")
    return collab


def scenario_path(name: str):
    return resources.files(__name__).joinpath(f"{name}.yaml")
