import itertools
import json
import random
from dataclasses import replace

import pytest

from eipflow import fixtures
from eipflow.model import (
    Collaboration, DataAssociation, ItemDefinition, MessageFlow, ModelBuilder, Pool, SequenceFlow, single_process,
)
from eipflow.validate import validate_collaboration, validate_graph


def rules(violations):
    return sorted({v.rule for v in violations})


@pytest.fixture
def base():
    b = ModelBuilder("p")
    b.node("s", "StartEvent", message="true").node("t", "ScriptTask").node("e", "EndEvent")
    return b.chain("s", "t", "e")


@pytest.mark.parametrize("name", sorted(fixtures.FIXTURES))
def test_fixtures_are_well_formed(name):
    errors = [v for v in validate_collaboration(fixtures.load(name)) if v.severity == "error"]
    assert errors == []


def test_minimal_model_is_clean(base):
    assert validate_graph(base.build()) == []


@pytest.mark.parametrize("mutate, rule", [
    (lambda b: b.flow("e", "t"), "SF-DOMAIN"),
    (lambda b: b.flow("t", "s"), "SF-DOMAIN"),
    (lambda b: b.flow("t", "ghost"), "SF-REF"),
    (lambda b: b.node("t", "ServiceTask"), "ID-DUP"),
    (lambda b: b.flow("t", "e", "1 = ", flow_id="bad"), "EXPR-PARSE"),
    (lambda b: b.data("do", "Nope"), "DO-ITEM"),
    (lambda b: b.data("do", "untyped").data("do2", "untyped").assoc("do", "do2"), "DA-ENDPOINT"),
    (lambda b: b.assoc("t", "ghost"), "DA-ENDPOINT"),
    (lambda b: b.node("eb", "ErrorBoundary", attached_to="e"), "BOUNDARY"),
    (lambda b: b.item("Bad", {"no-slash": "string"}), "ITEM-PATH"),
])
def test_rule_fires(base, mutate, rule):
    mutate(base)
    assert rule in rules(validate_graph(base.build()))


def test_default_with_condition(base):
    base.flows.append(SequenceFlow("fd", "t", "e", "1 = 1", True))
    assert "SF-DEFAULT" in rules(validate_graph(base.build()))


def test_empty_and_entryless():
    assert rules(validate_graph(ModelBuilder("x").build())) == ["N-EMPTY", "SF-EMPTY"]
    b = ModelBuilder("x").node("a", "ScriptTask").node("e", "EndEvent").chain("a", "e")
    assert rules(validate_graph(b.build())) == ["ENTRY"]
    assert rules(validate_graph(b.build(), nested=True)) == ["ENTRY"]
    b.node("ts", "TimerStartEvent", duration="5").flow("ts", "a")
    assert validate_graph(b.build(), nested=True) == []


def test_receive_task_without_incoming_is_an_entry():
    b = ModelBuilder("x").node("r", "ReceiveTask").node("e", "EndEvent").chain("r", "e")
    assert validate_graph(b.build()) == []


@pytest.mark.parametrize("n_cond, n_default, n_plain", list(itertools.product(range(4), range(3), range(2))))
def test_xor_default_brute_force(n_cond, n_default, n_plain):
    b = ModelBuilder("x").node("s", "StartEvent", message="true").node("g", "ExclusiveGateway").flow("s", "g")
    k = 0
    for kind, count in (("c", n_cond), ("d", n_default), ("u", n_plain)):
        for _ in range(count):
            b.node(f"e{k}", "EndEvent")
            b.flow("g", f"e{k}", "1 = 1" if kind == "c" else None, default=kind == "d", flow_id=f"f{k}")
            k += 1
    expect = n_cond >= 2 and n_default != 1
    assert ("XOR-DEFAULT" in rules(validate_graph(b.build()))) == expect


def test_nested_violations_are_prefixed(base):
    inner = ModelBuilder("sub").node("x", "ScriptTask").node("y", "EndEvent").chain("x", "y").flow("y", "x").build()
    base.node("sp", "SubProcess").sub("sp", inner).flow("t", "sp")
    refs = [v.ref for v in validate_graph(base.build()) if v.rule == "SF-DOMAIN"]
    assert refs == ["sp/f_y_x"]


def test_validation_is_idempotent_and_order_independent():
    rng = random.Random(2)
    for name in fixtures.FIXTURES:
        model = fixtures.load(name).processes[0]
        broken = replace(model, flows=model.flows + (SequenceFlow("zz", "ghost", model.nodes[0].id),))
        first = validate_graph(broken)
        assert validate_graph(broken) == first
        nodes, flows = list(broken.nodes), list(broken.flows)
        rng.shuffle(nodes)
        rng.shuffle(flows)
        assert validate_graph(replace(broken, nodes=tuple(nodes), flows=tuple(flows))) == first


def test_collaboration_rules(base):
    model = base.build()
    pools = (Pool("p_pool", "P", model), Pool("bb", "Partner"))
    ok = Collaboration("c", pools, (MessageFlow("m1", "bb", "s"),))
    assert validate_collaboration(ok) == []
    cases = {
        "MF-POOLS": MessageFlow("m2", "s", "e"),
        "MF-REF": MessageFlow("m3", "nowhere", "s"),
        "MF-REF ": MessageFlow("m4", "bb_task", "s"),  # black boxes have no inner nodes
        "DO-ITEM": MessageFlow("m5", "bb", "s", item="Unknown"),
    }
    for rule, mf in cases.items():
        found = validate_collaboration(Collaboration("c", pools, (mf,)))
        assert rule.strip() in rules(found), rule
    with_items = Collaboration("c", pools, (MessageFlow("m6", "bb", "s", item="FSN"),), (ItemDefinition("FSN"),))
    assert validate_collaboration(with_items) == []


def test_violation_json(base):
    base.flow("e", "t")
    line = validate_graph(base.build())[0].to_json()
    assert json.loads(line) == {"rule": "SF-DOMAIN", "ref": "f_e_t", "text": "flow leaves end event 'e'", "severity": "error"}
