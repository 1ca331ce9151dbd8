import random
from decimal import Decimal

import pytest

from eipflow import body as bt
from eipflow.channels import Broker, ChannelConfig
from eipflow.engine.errors import Crash, InvalidMessage, MissingHeader, RoutingError, SplitError, UnknownKey
from eipflow.engine.executors import (
    CLAIM_HEADER, Drop, Pass, RecipientMode, claim_check_retrieve, claim_check_store, exec_content_based_router,
    exec_content_enricher, exec_content_filter, exec_correlation_identifier, exec_join_router, exec_message_filter,
    exec_message_store, exec_multicast, exec_recipient_list, exec_splitter, exec_wire_tap, query_by_header,
    recipients_from,
)
from eipflow.engine.state import ClaimCheckStore, MessageStore, RecipientJournal
from eipflow.expr import EvalError
from eipflow.message import Message

ROUTES = [("f_big", "/order/total > 100"), ("f_mid", "/order/total > 10"), ("f_has", "exists(/order/item)")]


@pytest.mark.parametrize("total, want", [("150.00", "f_big"), ("50", "f_mid"), ("5", "f_has"), ("100", "f_mid")])
def test_cbr_first_match_wins(order, total, want):
    m = order.evolve(body=bt.set_value(order.body, "/order/total", Decimal(total)))
    assert exec_content_based_router(ROUTES, "f_default", m) == want


def test_cbr_default_and_errors(order):
    m = order.evolve(body=bt.from_plain("order", {"total": 1}))
    assert exec_content_based_router(ROUTES[:2], "f_default", m) == "f_default"
    with pytest.raises(RoutingError):
        exec_content_based_router(ROUTES[:2], None, m)
    with pytest.raises(EvalError):
        exec_content_based_router([("f", "/order/customer > 3")], None, order)


def test_filter_and_join(order):
    assert exec_message_filter("/order/total >= 150", order) == Pass(order)
    assert exec_message_filter("/order/total > 150", order) == Drop(order.id)
    assert exec_join_router(order) is order


def test_recipients_from(order):
    assert recipients_from(" a, b ,,c", order) == (["a", "b", "c"], order)
    m = order.with_header("to", "x,y")
    got, stripped = recipients_from("header:to", m)
    assert got == ["x", "y"] and stripped.header("to") is None
    with pytest.raises(MissingHeader):
        recipients_from("header:to", order)


@pytest.fixture
def rl_broker(ids):
    b = Broker(ids=ids)
    for name in "abc":
        b.add(name)
    return b


def test_recipient_list_stateless_with_fault(order, rl_broker, ids):
    out = exec_recipient_list(order, ["a", "b", "c"], "Stateless", rl_broker, ids=ids, fault=lambda r: r == "b")
    assert [o.status for o in out] == ["sent", "failed", "sent"]
    assert [rl_broker.channel(n).queued for n in "abc"] == [1, 0, 1]
    ids_sent = {o.message_id for o in out if o.message_id}
    assert order.id not in ids_sent and len(ids_sent) == 2


def test_recipient_list_single_transaction(order, rl_broker, ids):
    out = exec_recipient_list(order, ["a", "b", "c"], RecipientMode.SINGLE_TRANSACTION, rl_broker, ids=ids,
                              fault=lambda r: r == "c")
    assert {o.status for o in out} == {"rolled-back"}
    assert all(rl_broker.channel(n).queued == 0 for n in "abc")
    out = exec_recipient_list(order, ["a", "b", "c"], "SingleTransaction", rl_broker, ids=ids)
    assert [o.status for o in out] == ["sent"] * 3


def test_recipient_list_rejected_channel(order, ids):
    b = Broker(ids=ids)
    b.add("a")
    b.add("typed", ChannelConfig(datatype="Invoice"))
    out = exec_recipient_list(order, ["a", "typed"], "Stateless", b, ids=ids)
    assert [(o.status, o.detail) for o in out] == [("sent", ""), ("failed", "WrongType")]


def test_recipient_list_persistent_resumes(order, rl_broker, ids):
    j = RecipientJournal()
    with pytest.raises(Crash):
        exec_recipient_list(order, ["a", "b", "c"], "PersistentList", rl_broker, ids=ids, journal=j, crash_after=2)
    assert j.sent(order.id) == ["a", "b"]
    out = exec_recipient_list(order, ["a", "b", "c"], "PersistentList", rl_broker, ids=ids, journal=j)
    assert [o.status for o in out] == ["skipped", "skipped", "sent"]
    assert [rl_broker.channel(n).queued for n in "abc"] == [1, 1, 1]
    with pytest.raises(ValueError):
        exec_recipient_list(order, ["a"], "PersistentList", rl_broker, ids=ids)


def test_recipient_list_idempotent_resend_duplicates(order, rl_broker, ids):
    with pytest.raises(Crash):
        exec_recipient_list(order, ["a", "b"], "IdempotentResend", rl_broker, ids=ids, crash_after=1)
    exec_recipient_list(order, ["a", "b"], "IdempotentResend", rl_broker, ids=ids)
    assert [rl_broker.channel(n).queued for n in "ab"] == [2, 1]


def test_multicast_isolates_branch_failures(order, ids):
    got = {}

    def deliver(b, m):
        if b == "y":
            raise RuntimeError("branch down")
        got[b] = m

    out = exec_multicast(order, ["x", "y", "z"], deliver, ids)
    assert [o.status for o in out] == ["sent", "failed", "sent"]
    assert sorted(got) == ["x", "z"] and all(m.body == order.body and m.id != order.id for m in got.values())


def test_wire_tap_swallows_tap_failure(order, ids):
    primary, copy, ok = exec_wire_tap(order, lambda m: None, ids)
    assert primary is order and copy.id != order.id and copy.body == order.body and ok
    def boom(m):
        raise OSError("disk full")
    primary, _, ok = exec_wire_tap(order, boom, ids)
    assert primary is order and not ok


def test_iterative_split(order, ids):
    parts = exec_splitter(order, "/order/item", ids=ids)
    assert [p.sequence_number for p in parts] == [1, 2, 3]
    assert {p.correlation_id for p in parts} == {order.id}
    for p, sku in zip(parts, ["A1", "B2", "C3"]):
        assert [n.value for n in bt.select(p.body, "/order/item/sku")] == [sku]
        assert bt.first(p.body, "/order/customer").value == "acme"  # common part duplicated
    assert exec_splitter(order, "/order/nothing", ids=ids) == []


def test_static_split(order, ids):
    parts = exec_splitter(order, parts=[["/order/id", "/order/customer"], ["/order/total"]], ids=ids)
    assert [bt.to_plain(p.body) for p in parts] == [{"id": 7, "customer": "acme"}, {"total": "150.00"}]
    with pytest.raises(SplitError):
        exec_splitter(order, parts=[["/order/missing"]], ids=ids)
    with pytest.raises(SplitError):
        exec_splitter(order, ids=ids)


def test_content_filter(order):
    out = exec_content_filter(order, ["/order/id", "/order/item/sku"])
    assert bt.to_plain(out.body) == {"id": 7, "item": [{"sku": "A1"}, {"sku": "B2"}, {"sku": "C3"}]}
    assert out.id == order.id
    flat = exec_content_filter(order, ["/order/id"], flatten=True)
    assert bt.first(flat.body, "/order/id").value == 7


def test_content_enricher(order, ids):
    addr = bt.from_plain("address", {"city": "Vienna"})
    out = exec_content_enricher(order, "/order/shipping", lambda m: addr, ids)
    assert bt.first(out.body, "/order/shipping/city").value == "Vienna"
    assert out.correlation_id == order.id and out.id != order.id
    replaced = exec_content_enricher(order, "/order/customer", lambda m: bt.leaf("x", "ACME Inc"), ids)
    assert [n.value for n in bt.select(replaced.body, "/order/customer")] == ["ACME Inc"]
    unchanged = exec_content_enricher(order, "/order/shipping", lambda m: None, ids)
    assert unchanged.body == order.body


def test_correlation_identifier(order):
    assert exec_correlation_identifier(order).correlation_id == order.lineage
    assert exec_correlation_identifier(order, "/order/customer").correlation_id == "acme"


@pytest.mark.parametrize("extract, retain", [("/", False), ("/", True), ("/order/item[2]", False),
                                             ("/order/item[2]", True), ("/order/customer", False)])
def test_claim_check_roundtrip(order, extract, retain):
    store = ClaimCheckStore(seed=1)
    light = claim_check_store(store, order, extract, retain)
    key = light.header(CLAIM_HEADER)
    assert key in store.keys() and light.id == order.id
    if not retain:
        assert light.body != order.body
    back = claim_check_retrieve(store, light)
    assert back.body == order.body and back.header(CLAIM_HEADER) is None and back.id == order.id
    assert len(store) == 0


def test_claim_check_errors(order):
    store = ClaimCheckStore()
    with pytest.raises(InvalidMessage):
        claim_check_store(store, order, "/order/nothing")
    with pytest.raises(MissingHeader):
        claim_check_retrieve(store, order)
    forged = order.with_header(CLAIM_HEADER, "claims-forged")
    with pytest.raises(UnknownKey):
        claim_check_retrieve(store, forged)


def test_message_store_query_matches_scan(ids):
    rng = random.Random(5)
    store = MessageStore()
    persisted = []
    for i in range(1000):
        m = Message(ids(), bt.leaf("n", i), "N", (("region", rng.choice(["eu", "us", "apac"])),))
        out, rec = exec_message_store(store, m, rng.choice(["", "audit"]), float(i))
        assert out is m
        persisted.append(rec)
    for region in ("eu", "us", "apac"):
        want = [r for r in persisted if r.message.header("region") == region]
        assert store.query(query_by_header("region", region)) == want
