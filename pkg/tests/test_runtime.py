import json
from decimal import Decimal

import pytest

from eipflow import body as bt
from eipflow import fixtures
from eipflow.engine.endpoints import Delay, Echo, FaultBehavior
from eipflow.engine.errors import EngineError
from eipflow.engine.runtime import Engine, EngineConfig, Status
from eipflow.message import Message
from eipflow.model import ModelBuilder, single_process

IDENTITY_TO_T = json.dumps({"target": "T", "transforms": [{"op": "rename_root", "to": "t", "was": "order"}]})


def translator_chain():
    b = ModelBuilder("p").node("s", "StartEvent", message="true")
    b.node("tr", "ScriptTask", mapping=IDENTITY_TO_T).node("e", "EndEvent", message="true", channel="out")
    return b.chain("s", "tr", "e").build()


def fsn(e: Engine, amt="12.50", cur="EUR"):
    body = bt.from_plain("fsn", {"account": "AT61", "amt": amt, "cur": cur, "date": "16.10.2026"})
    return Message(e.ids(), body, "FSN", (("type", "FSN"),))


def test_translator_chain_trace(order):
    e = Engine(translator_chain())
    e.inject(order)
    trace = e.run()
    assert [(ev.event, ev.node) for ev in trace] == [
        ("instantiate", "s"), ("enter", "s"), ("enter", "tr"), ("pattern", "tr"), ("enter", "e"), ("emit", "e"),
        ("complete", None)]
    (out,) = e.deliveries("out")
    assert out.id == order.id and out.body_type == "T" and out.body.name == "t"
    (inst,) = e.instances.values()
    assert inst.status == Status.COMPLETED and inst.key == order.lineage


def test_business_monitoring_trace():
    e = Engine(fixtures.load("business_monitoring"))
    e.endpoints.register("Bank", Echo())
    m = fsn(e)
    e.inject(m)
    trace = e.run()
    assert trace.patterns() == ["MessageTranslator", "ClaimCheck", "ExternalService", "MessageTranslator"]
    (out,) = e.deliveries("ODC")
    assert out.body_type == "FSN-ISO"
    assert bt.to_plain(out.body) == {"IBAN": "AT61", "amount": "12.50", "cur": "978", "date": "2026-10-16"}
    assert len(e.stores.claim("claims")) == 0
    assert [ev.node for ev in trace.of("claim")] == ["check_in", "check_out"]


def test_fault_fails_the_instance():
    e = Engine(fixtures.load("external_service"))
    e.endpoints.register("Service", FaultBehavior("down"))
    e.inject(Message(e.ids(), bt.leaf("q", 1), "Q"))
    trace = e.run()
    (fail,) = trace.of("fail")
    assert fail.node == "call" and "down" in fail.detail["cause"]
    assert next(iter(e.instances.values())).status == Status.FAILED
    assert e.deliveries("replies") == []


@pytest.mark.parametrize("behavior, channel", [(Echo(), "replies"), (FaultBehavior("e500"), "errors"),
                                               (Delay(60.0), "errors")])
def test_error_boundary_routing(behavior, channel):
    e = Engine(fixtures.load("request_reply_sync"), config=EngineConfig(default_deadline=30))
    e.endpoints.register("Service", behavior)
    e.inject(Message(e.ids(), bt.leaf("q", 1), "Q"))
    e.run()
    assert len(e.deliveries(channel)) == 1
    assert next(iter(e.instances.values())).status == Status.COMPLETED


def test_unknown_endpoint_is_a_fault():
    e = Engine(fixtures.load("external_service"))
    e.inject(Message(e.ids(), bt.leaf("q", 1), "Q"))
    (fault,) = e.run().of("fault")
    assert fault.detail["code"] == "unknown-endpoint"


def test_type_mismatch_goes_to_invalid(order):
    e = Engine(fixtures.load("message_translator"))
    e.inject(order)
    trace = e.run()
    assert [ev.event for ev in trace] == ["invalid"]
    assert e.deliveries("invalid") == [order]


def test_eval_error_goes_to_invalid(ids):
    e = Engine(fixtures.load("content_based_router"))
    m = Message(ids(), bt.from_plain("order", {"total": "lots"}), "Order")
    e.inject(m)
    trace = e.run()
    assert trace.of("invalid")[0].node == "route" and e.deliveries("invalid")[0].id == m.id


@pytest.mark.parametrize("total, channel", [("150", "big"), ("50", "medium"), ("5", "small")])
def test_cbr_in_engine(ids, total, channel):
    e = Engine(fixtures.load("content_based_router"))
    e.inject(Message(ids(), bt.from_plain("order", {"id": 1, "total": Decimal(total)}), "Order"))
    e.run()
    assert [len(e.deliveries(c)) for c in ("big", "medium", "small")] == [int(c == channel) for c in ("big", "medium", "small")]


def test_filter_drops(ids):
    e = Engine(fixtures.load("message_filter"))
    for t in (10, 60):
        e.inject(Message(ids(), bt.from_plain("order", {"total": t}), "Order"))
    trace = e.run()
    assert len(trace.of("drop")) == 1 and len(e.deliveries("accepted")) == 1


def test_aggregator_correlates_into_one_instance(ids):
    e = Engine(fixtures.load("aggregator"))
    for i in range(3):
        e.inject(Message(ids(), bt.leaf("v", i), "V", correlation_id="K"), at=float(i))
    e.inject(Message(ids(), bt.leaf("v", 9), "V", correlation_id="K"), at=5.0)
    trace = e.run()
    assert [ev.event for ev in trace if ev.event in ("instantiate", "correlate", "discard")] == [
        "instantiate", "correlate", "correlate", "discard"]
    (agg,) = e.deliveries("aggregates")
    assert [c.value for c in agg.body.children] == [0, 1, 2] and agg.correlation_id == "K"
    assert trace.of("escalation") and e.audit


def test_resequencer_in_engine(ids):
    e = Engine(fixtures.load("resequencer"))
    for n in (3, 1, 2):
        e.inject(Message(ids(), bt.leaf("v", n), "V", correlation_id="S", sequence_number=n))
    e.run()
    assert [m.sequence_number for m in e.deliveries("ordered")] == [1, 2, 3]


def test_splitter_lineage(order):
    e = Engine(fixtures.load("splitter"))
    e.inject(order)
    e.run()
    parts = e.deliveries("items")
    assert len(parts) == 3 and {p.lineage for p in parts} == {order.lineage}
    assert len({p.id for p in parts} | {order.id}) == 4
    (inst,) = e.instances.values()
    assert len(inst.bindings["do_items"]) == 3


def test_wire_tap_and_multicast(order):
    e = Engine(fixtures.load("wire_tap"))
    e.inject(order)
    e.run()
    assert e.deliveries("primary")[0].id == order.id
    (rec,) = e.stores.message("audit").query()
    assert rec.message.id != order.id and rec.message.body == order.body and rec.tag == "tap"
    e = Engine(fixtures.load("multicast"))
    e.inject(order)
    e.run()
    xs, ys = e.deliveries("branch_x"), e.deliveries("branch_y")
    assert len(xs) == len(ys) == 1 and xs[0].id != ys[0].id


def test_async_request_reply(ids):
    e = Engine(fixtures.load("request_reply_async"))
    e.endpoints.register("Service", Delay(2.0))
    for i in range(3):
        e.inject(Message(ids(), bt.leaf("q", i), "Q"), at=float(i) * 0.5)
    trace = e.run()
    replies = e.deliveries("replies")
    assert sorted(r.body.value for r in replies) == [0, 1, 2]
    assert [ev.time for ev in trace.of("reply")] == [2.0, 2.5, 3.0]


def test_async_timeout_fails():
    e = Engine(fixtures.load("synch_asynch_bridge"), config=EngineConfig(default_deadline=5))
    e.endpoints.register("Async Service", Delay(9.0))
    e.inject(Message(e.ids(), bt.leaf("q", 1), "Q"))
    trace = e.run()
    assert trace.of("fail") and trace.of("fail")[0].time == 5.0


def test_step_advances_one_token(order):
    e = Engine(translator_chain())
    inst = e.instantiate_or_correlate(order)
    assert [ev.event for ev in e.step(inst.id)] == ["enter"]
    assert [ev.event for ev in e.step(inst.id)] == ["enter", "pattern"]
    assert e.step("nope") == []


def test_run_until_leaves_later_work(ids):
    e = Engine(translator_chain())
    e.inject(Message(ids(), bt.from_plain("order", {"id": 1}), "Order"), at=1.0)
    e.inject(Message(ids(), bt.from_plain("order", {"id": 2}), "Order"), at=5.0)
    e.run(until=2.0)
    assert len(e.deliveries("out")) == 1 and e.now == 2.0
    e.run()
    assert len(e.deliveries("out")) == 2


def test_unknown_process_or_entry(order):
    e = Engine(fixtures.load("content_filter"))
    e.inject(order, process="nope")
    with pytest.raises(EngineError):
        e.run()
    e = Engine(fixtures.load("content_filter"))
    e.inject(order, entry="reduce")
    with pytest.raises(EngineError):
        e.run()


def test_deterministic_trace_bytes():
    def run(seed):
        e = Engine(fixtures.load("business_monitoring"), config=EngineConfig(seed=seed))
        e.endpoints.register("Bank", Echo())
        for i in range(5):
            e.inject(fsn(e, amt=f"{i}.00"), at=i * 0.25)
        return e.run().to_jsonl()

    assert run(4) == run(4)
    assert run(4) != run(5)


def test_split_path_from_data_object(order):
    b = ModelBuilder("p").node("s", "StartEvent", message="true")
    b.node("t", "ScriptTask").node("e", "EndEvent", message="true", channel="items")
    b.chain("s", "t", "e").data("do_expr", "untyped", name="split: /order/item").assoc("do_expr", "t")
    e = Engine(b.build())
    e.inject(order)
    e.run()
    assert [p.sequence_number for p in e.deliveries("items")] == [1, 2, 3]
