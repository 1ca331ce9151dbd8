import math
import random
from decimal import Decimal

import pytest
from hypothesis import given, settings, strategies as st

from eipflow import body as bt
from eipflow.engine.errors import CorrelationError, DuplicateRecord, MissingSequenceNumber, NotFound, UnknownKey
from eipflow.engine.executors import exec_splitter
from eipflow.engine.state import (
    AggregatorState, ClaimCheckStore, ClaimEntry, Collect, Condense, FirstBest, MessageStore, RecipientJournal,
    Resequencer, SelectBest, Stores, Timeout, TimeoutWithOverride, WaitForAll, parse_algorithm, parse_strategy,
)
from eipflow.expr import parse
from eipflow.message import IdGenerator, Message


def v(ids, n, key="K", seq=None, root="v"):
    return Message(ids(), bt.leaf(root, n), "V", correlation_id=key, sequence_number=seq)


@pytest.mark.parametrize("text, want", [
    ("wait_for_all(3)", WaitForAll(3)),
    ("timeout(10)", Timeout(10.0)),
    (" Timeout( 2.5 ) ", Timeout(2.5)),
])
def test_parse_strategy(text, want):
    assert parse_strategy(text) == want


def test_parse_strategy_with_predicates():
    s = parse_strategy("timeout_with_override(10, contains(/bid/tag, 'a,b'))")
    assert isinstance(s, TimeoutWithOverride) and s.d == 10.0
    assert isinstance(parse_strategy("first_best(/bid/score > 3)"), FirstBest)


@pytest.mark.parametrize("bad", ["", "wait_for_all", "never(1)", "timeout(x)"])
def test_parse_strategy_errors(bad):
    with pytest.raises(ValueError):
        parse_strategy(bad)


def test_parse_algorithm():
    assert parse_algorithm(None) == Collect()
    assert parse_algorithm("collect(items)") == Collect("items")
    assert parse_algorithm("condense(/order/item)") == Condense(path="/order/item")
    assert isinstance(parse_algorithm("select_best(/bid/score)"), SelectBest)
    with pytest.raises(ValueError):
        parse_algorithm("merge(/x)")


def test_wait_for_all_collects_in_arrival_order(ids):
    agg = AggregatorState(WaitForAll(3), ids=ids)
    assert agg.offer(v(ids, 1), 0) == [] and agg.offer(v(ids, 2), 1) == []
    (done,) = agg.offer(v(ids, 3), 2)
    assert done.reason == "all" and done.key == "K" and done.message.correlation_id == "K"
    assert [c.value for c in done.message.body.children] == [1, 2, 3]
    assert agg.open == {} and "K" in agg.closed


def test_keys_are_independent(ids):
    agg = AggregatorState(WaitForAll(2), ids=ids)
    agg.offer(v(ids, 1, "a"), 0)
    agg.offer(v(ids, 2, "b"), 0)
    (done,) = agg.offer(v(ids, 3, "a"), 1)
    assert done.key == "a" and set(agg.open) == {"b"}


def test_late_contribution_is_discarded_and_audited(ids):
    agg = AggregatorState(WaitForAll(1), ids=ids)
    agg.offer(v(ids, 1), 0)
    assert agg.offer(v(ids, 2), 1) == []
    assert agg.audit and "discarded" in agg.audit[0][2]
    with pytest.raises(ValueError):
        agg.open_key("K", 2)


def test_timeout_counts_from_first_contribution(ids):
    agg = AggregatorState(Timeout(10), ids=ids)
    agg.offer(v(ids, 1), 1.0)
    agg.offer(v(ids, 4), 4.0)
    assert agg.next_deadline() == (11.0, "K")
    assert agg.advance(10.999) == []
    (done,) = agg.advance(50)
    assert (done.time, done.reason) == (11.0, "timeout")
    assert agg.on_timeout("K", 60) == []


def test_first_best_and_select_best(ids):
    agg = AggregatorState(FirstBest(parse("/v > 5")), SelectBest(parse("/v")), ids=ids)
    assert agg.offer(v(ids, 3), 0) == []
    assert agg.offer(v(ids, 2), 0) == []
    (done,) = agg.offer(v(ids, 9), 0)
    assert done.reason == "predicate" and done.message.body.value == 9


def test_manual_completion_with_no_contributions(ids):
    agg = AggregatorState(Timeout(5), ids=ids)
    agg.open_key("K", 0)
    (done,) = agg.complete("K", 1)
    assert done.reason == "manual" and done.message.body == bt.Tree("aggregate")
    assert agg.complete("K", 2) == []


def test_correlation_expression(ids):
    agg = AggregatorState(WaitForAll(2), correlation="/order/customer", ids=ids)
    m = Message(ids(), bt.from_plain("order", {"customer": "acme"}), "Order")
    assert agg.key_of(m) == "acme"
    with pytest.raises(CorrelationError):
        agg.key_of(Message(ids(), bt.from_plain("order", {"id": 1}), "Order"))
    with pytest.raises(CorrelationError):
        AggregatorState(WaitForAll(2), ids=ids).key_of(Message(ids(), None, "V"))


def test_closed_horizon_purge(ids):
    agg = AggregatorState(WaitForAll(1), ids=ids, closed_horizon=5)
    agg.offer(v(ids, 1, "a"), 0)
    agg.offer(v(ids, 1, "b"), 3)
    assert agg.purge(5) == 0
    assert agg.purge(5.5) == 1 and list(agg.closed) == ["b"]
    # once purged, a key can aggregate again
    assert agg.offer(v(ids, 2, "a"), 6)[0].key == "a"


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 9), min_size=1, max_size=60), st.integers(1, 8))
def test_closed_cap_keeps_most_recent(keys, cap):
    ids = IdGenerator(0, "p")
    agg = AggregatorState(WaitForAll(1), ids=ids, closed_cap=cap)
    order = []
    for t, k in enumerate(keys):
        agg.offer(v(ids, 0, f"k{k}"), float(t))
        if f"k{k}" not in order:  # closed keys discard contributions, so only first sightings count
            order.append(f"k{k}")
        order = order[-cap:]
        assert list(agg.closed) == order


def test_condense_inverts_iterative_split(ids):
    body = bt.from_plain("order", {"id": 1, "item": [{"sku": "a"}, {"sku": "b"}, {"sku": "c"}], "note": "x"})
    original = Message(ids(), body, "Order")
    parts = exec_splitter(original, "/order/item", ids=ids)
    random.Random(0).shuffle(parts)
    agg = AggregatorState(WaitForAll(3), Condense(path="/order/item"), ids=ids)
    done = []
    for p in parts:
        done += agg.offer(p, 0)
    assert done[0].message.body == body


def test_condense_with_combine(ids):
    agg = AggregatorState(WaitForAll(2), Condense(combine=lambda ms: bt.leaf("sum", sum(m.body.value for m in ms))),
                          ids=ids)
    agg.offer(v(ids, Decimal("1.5"), seq=2), 0)
    (done,) = agg.offer(v(ids, Decimal("2.5"), seq=1), 0)
    assert done.message.body == bt.leaf("sum", Decimal("4.0"))


# -- resequencer ----------------------------------------------------------------------------


def test_streaming_two_one_three(ids):
    r = Resequencer()
    assert r.offer(v(ids, 0, seq=2)) == []
    assert [m.sequence_number for m in r.offer(v(ids, 0, seq=1))] == [1, 2]
    assert [m.sequence_number for m in r.offer(v(ids, 0, seq=3))] == [3]
    assert r.buffered() == 0


def test_wait_for_n_holds_until_complete(ids):
    r = Resequencer("wait_for_n", size=3)
    assert r.offer(v(ids, 0, seq=1)) == []
    assert r.offer(v(ids, 0, seq=3)) == []
    assert [m.sequence_number for m in r.offer(v(ids, 0, seq=2))] == [1, 2, 3]


def test_resequencer_duplicates_and_errors(ids):
    r = Resequencer()
    r.offer(v(ids, 0, seq=1))
    assert r.offer(v(ids, 0, seq=1)) == [] and len(r.audit) == 1
    r.offer(v(ids, 0, seq=3))
    assert r.offer(v(ids, 0, seq=3)) == [] and r.buffered("K") == 1
    with pytest.raises(MissingSequenceNumber):
        r.offer(v(ids, 0))
    with pytest.raises(ValueError):
        Resequencer("wait_for_n")
    with pytest.raises(ValueError):
        Resequencer("batch")


@settings(max_examples=100, deadline=None)
@given(st.permutations(list(range(1, 13))), st.permutations(list(range(1, 6))))
def test_interleaved_keys(p1, p2):
    ids = IdGenerator(0, "r")
    stream = [("a", n) for n in p1] + [("b", n) for n in p2]
    random.Random(len(p1) * 31 + p2[0]).shuffle(stream)
    r = Resequencer()
    out = {"a": [], "b": []}
    for k, n in stream:
        for m in r.offer(v(ids, 0, key=k, seq=n)):
            out[m.correlation_id].append(m.sequence_number)
    assert out == {"a": list(range(1, 13)), "b": list(range(1, 6))} and r.buffered() == 0


# -- stores ---------------------------------------------------------------------------------


def test_claim_store_keys_are_seeded_and_single_use():
    a, b = ClaimCheckStore("c", seed=3), ClaimCheckStore("c", seed=3)
    e = ClaimEntry(None, "/", 0, "T", False)
    ka = [a.put(e) for _ in range(5)]
    assert ka == [b.put(e) for _ in range(5)] and len(set(ka)) == 5
    assert a.take(ka[0]) == e and len(a) == 4
    with pytest.raises(UnknownKey):
        a.take(ka[0])
    assert a.accesses == 7


def test_message_store_crud(ids, order):
    s = MessageStore()
    rec = s.persist(order, "in", 1.0)
    assert rec.key == (order.id, "in")
    s.persist(order, "out", 2.0)
    with pytest.raises(DuplicateRecord):
        s.persist(order, "in", 3.0)
    upd = s.update(order.id, "in", order.with_header("seen", "1"))
    assert upd.stored_at == 1.0 and upd.message.header("seen") == "1"
    assert [r.tag for r in s.query(lambda r: r.message.header("seen") == "1")] == ["in"]
    s.delete(order.id, "out")
    with pytest.raises(NotFound):
        s.delete(order.id, "out")
    with pytest.raises(NotFound):
        s.update("nope", "", order)
    assert len(s) == 1


def test_stores_registry_shares_by_name():
    st_ = Stores(seed=1)
    assert st_.claim("x") is st_.claim("x") and st_.message("m") is st_.message("m")
    st_.message("m").query()
    assert st_.accesses == 1


def test_recipient_journal():
    j = RecipientJournal()
    assert not j.was_sent("m", "a")
    j.record("m", "a")
    assert j.was_sent("m", "a") and j.sent("m") == ["a"] and j.sent("x") == []
