"""Runtime profile conformance.

Each probe drives one executor over randomized messages and records what
actually happened: which messages went in on which channels, which came
out where, and how often pattern state was touched. ``check`` compares such
an observation with the profile row of the kind.

A probe unit is the smallest input set over which the cardinality is
defined: one message for most kinds, one correlation group for the
aggregator, one full permutation for the resequencer, one burst of inbound
channels for the join router.

Cardinality as measured here:

* ``one_to_one``: every outbound channel that received anything received
  exactly as many messages as went in. A filtered message counts as routed
  to the discard channel; a wire tap sends one message per channel.
* ``one_to_n``: any number of outputs.
* ``n_to_one``: exactly one output per completed unit.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Callable

from eipflow import body as bt
from eipflow.catalog import PROFILES, Cardinality, PatternKind, PatternProfile
from eipflow.channels import Broker
from eipflow.engine import executors as ex
from eipflow.engine.endpoints import Correlator, Delay, Echo, EndpointRegistry, FixedReply, Reply
from eipflow.engine.mapping import from_obj as mapping_from_obj
from eipflow.engine.state import (
    AggregatorState, ClaimCheckStore, Collect, MessageStore, Resequencer, WaitForAll,
)
from eipflow.message import IdGenerator, Message

K = PatternKind


@dataclass
class Observation:
    kind: PatternKind
    inputs: list[tuple[str, Message]] = field(default_factory=list)  # (channel, message)
    outputs: list[tuple[str, Message]] = field(default_factory=list)
    accesses: int = 0
    units: int = 1


@dataclass(frozen=True)
class ProbeViolation:
    kind: str
    aspect: str  # message-cardinality | channel-cardinality | ids | state
    detail: str


@dataclass
class ProbeReport:
    kind: PatternKind
    messages: int
    units: int
    violations: list[ProbeViolation]
    seconds: float

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "messages": self.messages, "units": self.units, "ok": self.ok,
                "violations": [v.__dict__ for v in self.violations]}


def _channels(pairs) -> dict[str, int]:
    out: dict[str, int] = {}
    for ch, _ in pairs:
        out[ch] = out.get(ch, 0) + 1
    return out


def check(obs: Observation, profile: PatternProfile | None = None) -> list[ProbeViolation]:
    prof = profile or PROFILES[obs.kind]
    kind = obs.kind.value
    bad: list[ProbeViolation] = []
    n_in = len(obs.inputs)
    ins, outs = _channels(obs.inputs), _channels(obs.outputs)

    mc = prof.message_cardinality
    if mc == Cardinality.ONE_TO_ONE and any(c != n_in for c in outs.values()):
        bad.append(ProbeViolation(kind, "message-cardinality", f"{n_in} in, per channel out {outs}"))
    elif mc == Cardinality.N_TO_ONE and len(obs.outputs) != obs.units:
        bad.append(ProbeViolation(kind, "message-cardinality", f"{len(obs.outputs)} outputs for {obs.units} groups"))
    elif mc == Cardinality.ONE_TO_ZERO_OR_ONE and len(obs.outputs) > n_in:
        bad.append(ProbeViolation(kind, "message-cardinality", f"{n_in} in, {len(obs.outputs)} out"))

    cc = prof.channel_cardinality
    ok = {
        Cardinality.ONE_TO_ONE: len(ins) == 1 and len(outs) == 1,
        Cardinality.ONE_TO_N: len(ins) == 1 and len(outs) >= 1,
        Cardinality.N_TO_ONE: len(ins) >= 1 and len(outs) == 1,
        Cardinality.ONE_TO_ZERO_OR_ONE: len(ins) == 1 and len(outs) <= 1,
    }[cc]
    if not ok:
        bad.append(ProbeViolation(kind, "channel-cardinality", f"in {sorted(ins)}, out {sorted(outs)} vs {cc.value}"))

    in_ids = {m.id for _, m in obs.inputs}
    out_ids = {m.id for _, m in obs.outputs}
    if prof.message_generating:
        if out_ids and out_ids <= in_ids:
            bad.append(ProbeViolation(kind, "ids", "message generating, but every output reuses an input id"))
    elif not out_ids <= in_ids:
        bad.append(ProbeViolation(kind, "ids", f"new ids {sorted(out_ids - in_ids)[:3]} from a non-generating pattern"))

    if prof.stateful and obs.accesses == 0:
        bad.append(ProbeViolation(kind, "state", "stateful pattern never touched its state"))
    if not prof.stateful and obs.accesses > 0:
        bad.append(ProbeViolation(kind, "state", f"stateless pattern touched state {obs.accesses} times"))
    return bad


# -- random inputs --------------------------------------------------------------------------------


def random_body(rng: random.Random, items: int | None = None) -> bt.Tree:
    n = rng.randint(1, 6) if items is None else items
    return bt.from_plain("order", {
        "id": rng.randint(1, 10_000),
        "customer": rng.choice(["acme", "globex", "initech", "umbrella"]),
        "total": Decimal(rng.randint(0, 50_000)) / 100,
        "item": [{"sku": f"S{rng.randint(100, 999)}", "qty": rng.randint(1, 9)} for _ in range(n)],
    })


def random_message(rng: random.Random, ids: IdGenerator, **kw) -> Message:
    headers = (("priority", rng.choice(["low", "high"])),)
    return Message(ids(), kw.pop("body", None) or random_body(rng), kw.pop("body_type", "Order"), headers, **kw)


def _fsn_message(rng: random.Random, ids: IdGenerator) -> Message:
    body = bt.from_plain("fsn", {
        "account": f"DE{rng.randint(10**19, 10**20 - 1)}",
        "amt": f"{rng.randint(0, 99999)}.{rng.randint(0, 99):02d}",
        "cur": rng.choice(["EUR", "USD", "GBP"]),
        "date": f"{rng.randint(1, 28):02d}.{rng.randint(1, 12):02d}.{rng.randint(2000, 2030)}",
    })
    return Message(ids(), body, "FSN")


_FSN_TO_CDM = mapping_from_obj({
    "target": "FSN:CDM",
    "transforms": [
        {"op": "rename_root", "to": "cdm", "was": "fsn"},
        {"op": "rename", "path": "/cdm/amt", "to": "amount"},
        {"op": "convert", "path": "/cdm/amount", "to": "decimal"},
        {"op": "map", "path": "/cdm/cur", "table": {"EUR": "978", "USD": "840", "GBP": "826"}},
    ],
})


# -- probes ---------------------------------------------------------------------------------------

Probe = Callable[[random.Random, IdGenerator], Observation]


def _one(kind, msg, outs, accesses=0, in_channel="in") -> Observation:
    return Observation(kind, [(in_channel, msg)], list(outs), accesses)


def _endpoints(ids: IdGenerator, rng: random.Random) -> EndpointRegistry:
    reg = EndpointRegistry(ids)
    reg.register("svc", Delay(rng.randint(0, 5), Echo()))
    return reg


def _reply_of(res) -> Message:
    assert isinstance(res, Reply), res
    return res.message


def probe_request_reply_sync(rng, ids):
    m = random_message(rng, ids)
    return _one(K.REQUEST_REPLY_SYNC, m, [("reply", _reply_of(_endpoints(ids, rng).call_sync("svc", m)))])


def _async(kind, rng, ids):
    m = random_message(rng, ids)
    corr = Correlator(_endpoints(ids, rng))
    at = corr.send_async("svc", m, m.id, 0.0)
    if at > 0:
        assert corr.await_reply(m.id, 30.0, 0.0) is None  # nothing before the reply lands
    reply = corr.await_reply(m.id, 30.0, at)
    return _one(kind, m, [("reply", reply)])


def probe_request_reply_async(rng, ids):
    return _async(K.REQUEST_REPLY_ASYNC, rng, ids)


def probe_synch_asynch_bridge(rng, ids):
    return _async(K.SYNCH_ASYNCH_BRIDGE, rng, ids)


def probe_asynch_synch_bridge(rng, ids):
    m = random_message(rng, ids)
    reply = _reply_of(_endpoints(ids, rng).call_sync("svc", m))
    return _one(K.ASYNCH_SYNCH_BRIDGE, m, [("requester", reply)], in_channel="requester-in")


def probe_correlation_identifier(rng, ids):
    m = random_message(rng, ids, correlation_id=rng.choice([None, "c1", "c2"]))
    return _one(K.CORRELATION_IDENTIFIER, m, [("out", ex.exec_correlation_identifier(m))])


def probe_content_based_router(rng, ids):
    m = random_message(rng, ids)
    conds = [(f"r{i}", f"/order/total > {rng.randint(0, 500)}") for i in range(rng.randint(1, 4))]
    chosen = ex.exec_content_based_router(conds, "default", m)
    return _one(K.CONTENT_BASED_ROUTER, m, [(chosen, m)])


def probe_message_filter(rng, ids):
    m = random_message(rng, ids)
    res = ex.exec_message_filter(f"/order/total >= {rng.randint(0, 500)}", m)
    return _one(K.MESSAGE_FILTER, m, [("pass", res.message)] if isinstance(res, ex.Pass) else [("discard", m)])


def probe_recipient_list(rng, ids):
    m = random_message(rng, ids)
    broker = Broker(ids=ids)
    names = rng.sample(["a", "b", "c", "d", "e"], rng.randint(1, 5))
    outcomes = ex.exec_recipient_list(m, names, ex.RecipientMode.STATELESS, broker, ids=ids)
    outs = [(o.recipient, broker.channel(o.recipient).peek_all()[0]) for o in outcomes if o.status == "sent"]
    return _one(K.RECIPIENT_LIST, m, outs)


def probe_splitter(rng, ids):
    m = random_message(rng, ids)
    return _one(K.SPLITTER, m, [("parts", p) for p in ex.exec_splitter(m, "/order/item", ids=ids)])


def probe_aggregator(rng, ids):
    n = rng.randint(1, 6)
    state = AggregatorState(WaitForAll(n), Collect(), ids=ids)
    key = ids()
    ins, outs = [], []
    for _ in range(n):
        m = random_message(rng, ids, correlation_id=key)
        ins.append(("in", m))
        outs.extend(("out", c.message) for c in state.offer(m, 0.0))
    return Observation(K.AGGREGATOR, ins, outs, state.accesses, units=1)


def probe_resequencer(rng, ids):
    n = rng.randint(1, 12)
    rs = Resequencer("streaming")
    order = list(range(1, n + 1))
    rng.shuffle(order)
    key = ids()
    ins, outs = [], []
    for s in order:
        m = random_message(rng, ids, correlation_id=key, sequence_number=s)
        ins.append(("in", m))
        outs.extend(("out", o) for o in rs.offer(m))
    return Observation(K.RESEQUENCER, ins, outs, rs.accesses)


def probe_message_translator(rng, ids):
    m = _fsn_message(rng, ids)
    return _one(K.MESSAGE_TRANSLATOR, m, [("out", ex.exec_translator(m, _FSN_TO_CDM))])


def probe_content_enricher(rng, ids):
    m = random_message(rng, ids)
    extra = bt.from_plain("address", {"city": rng.choice(["Berlin", "Paris"]), "zip": rng.randint(10000, 99999)})
    return _one(K.CONTENT_ENRICHER, m, [("out", ex.exec_content_enricher(m, "/order/address", lambda _: extra, ids))])


def probe_content_filter(rng, ids):
    m = random_message(rng, ids)
    keep = rng.sample(["/order/id", "/order/total", "/order/customer", "/order/item/sku"], rng.randint(1, 4))
    return _one(K.CONTENT_FILTER, m, [("out", ex.exec_content_filter(m, keep, rng.random() < 0.5))])


def probe_claim_check(rng, ids):
    m = random_message(rng, ids)
    store = ClaimCheckStore("claims", rng.randint(0, 99))
    extract = rng.choice(["/", "/order/item", "/order/customer"])
    stripped = ex.claim_check_store(store, m, extract, retain=rng.random() < 0.5)
    restored = ex.claim_check_retrieve(store, stripped)
    assert len(store) == 0
    return _one(K.CLAIM_CHECK, m, [("out", restored)], store.accesses)


def probe_wire_tap(rng, ids):
    m = random_message(rng, ids)
    taps = []
    primary, copy, _ = ex.exec_wire_tap(m, taps.append, ids)
    return _one(K.WIRE_TAP, m, [("primary", primary), ("tap", copy)])


def probe_message_store(rng, ids):
    m = random_message(rng, ids)
    store = MessageStore("messages")
    out, _ = ex.exec_message_store(store, m, rng.choice(["in", "audit"]))
    return _one(K.MESSAGE_STORE, m, [("out", out)], store.accesses)


def probe_join_router(rng, ids):
    chans = rng.sample(["a", "b", "c", "d"], rng.randint(1, 4))
    ins = [(c, random_message(rng, ids)) for c in chans]
    return Observation(K.JOIN_ROUTER, ins, [("out", ex.exec_join_router(m)) for _, m in ins])


def probe_external_service(rng, ids):
    m = random_message(rng, ids)
    reg = EndpointRegistry(ids)
    reg.register("svc", FixedReply(bt.from_plain("ack", {"ok": True}), "Ack"))
    return _one(K.EXTERNAL_SERVICE, m, [("reply", _reply_of(reg.call_sync("svc", m)))])


def probe_multicast(rng, ids):
    m = random_message(rng, ids)
    outs: list[tuple[str, Message]] = []
    branches = [f"b{i}" for i in range(rng.randint(1, 5))]
    ex.exec_multicast(m, branches, lambda b, c: outs.append((b, c)), ids)
    return _one(K.MULTICAST, m, outs)


PROBES: dict[PatternKind, Probe] = {
    K.REQUEST_REPLY_SYNC: probe_request_reply_sync,
    K.REQUEST_REPLY_ASYNC: probe_request_reply_async,
    K.SYNCH_ASYNCH_BRIDGE: probe_synch_asynch_bridge,
    K.ASYNCH_SYNCH_BRIDGE: probe_asynch_synch_bridge,
    K.CORRELATION_IDENTIFIER: probe_correlation_identifier,
    K.CONTENT_BASED_ROUTER: probe_content_based_router,
    K.MESSAGE_FILTER: probe_message_filter,
    K.RECIPIENT_LIST: probe_recipient_list,
    K.SPLITTER: probe_splitter,
    K.AGGREGATOR: probe_aggregator,
    K.RESEQUENCER: probe_resequencer,
    K.MESSAGE_TRANSLATOR: probe_message_translator,
    K.CONTENT_ENRICHER: probe_content_enricher,
    K.CONTENT_FILTER: probe_content_filter,
    K.CLAIM_CHECK: probe_claim_check,
    K.WIRE_TAP: probe_wire_tap,
    K.MESSAGE_STORE: probe_message_store,
    K.JOIN_ROUTER: probe_join_router,
    K.EXTERNAL_SERVICE: probe_external_service,
    K.MULTICAST: probe_multicast,
}


def run_probe(kind: PatternKind, messages: int = 1000, seed: int = 0) -> ProbeReport:
    """Drive ``kind`` until at least ``messages`` inputs were observed."""
    rng = random.Random(f"{seed}:{kind.value}")
    ids = IdGenerator(seed, prefix=f"probe-{kind.value}")
    t0 = time.perf_counter()
    seen = units = 0
    violations: list[ProbeViolation] = []
    while seen < messages:
        obs = PROBES[kind](rng, ids)
        seen += len(obs.inputs)
        units += obs.units
        violations.extend(check(obs))
    return ProbeReport(kind, seen, units, violations, time.perf_counter() - t0)


def run_all(messages: int = 1000, seed: int = 0, kinds=None) -> list[ProbeReport]:
    return [run_probe(k, messages, seed) for k in (kinds or list(PatternKind))]


def reports_json(reports: list[ProbeReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], sort_keys=True)
