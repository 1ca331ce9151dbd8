import random

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

import gen
from eipflow import bpmn, fixtures
from eipflow.model import Collaboration, NodeKind, Pool

HEAD = ('<?xml version="1.0"?>\n<bpmn:definitions xmlns:bpmn="http://www.omg.org/spec/BPMN/20100524/MODEL" '
        'xmlns:eip="urn:eipflow:bpmn-ext:1" xmlns:bpmndi="http://www.omg.org/spec/BPMN/20100524/DI" id="d">\n')


def doc(body: str) -> str:
    return HEAD + body + "\n</bpmn:definitions>\n"


SIMPLE = doc("""\
  <bpmn:process id="p">
    <bpmn:startEvent id="s"><bpmn:messageEventDefinition/></bpmn:startEvent>
    <bpmn:exclusiveGateway id="g" default="f_d"/>
    <bpmn:endEvent id="e1"/>
    <bpmn:endEvent id="e2"/>
    <bpmn:sequenceFlow id="f0" sourceRef="s" targetRef="g"/>
    <bpmn:sequenceFlow id="f_c" sourceRef="g" targetRef="e1">
      <bpmn:conditionExpression>/order/total &gt; 100</bpmn:conditionExpression>
    </bpmn:sequenceFlow>
    <bpmn:sequenceFlow id="f_d" sourceRef="g" targetRef="e2"/>
  </bpmn:process>""")


def test_reads_a_plain_process():
    collab, diag = bpmn.parse(SIMPLE)
    assert not diag
    (proc,) = collab.processes
    assert proc.node("s").is_message_event
    assert [f.id for f in proc.flows] == ["f0", "f_c", "f_d"]
    f_c, f_d = proc.flows[1], proc.flows[2]
    assert f_c.condition.source == "/order/total > 100" and not f_c.is_default
    assert f_d.is_default and f_d.condition is None
    assert collab.pools[0].id == "p_pool"  # processes outside a collaboration get a pool


@pytest.mark.parametrize("name", sorted(fixtures.FIXTURES))
def test_fixture_fixpoint(name):
    raw = fixtures.path(name).read_bytes()
    collab, diag = bpmn.parse(raw)
    assert not diag
    assert bpmn.serialize(collab) == raw
    assert collab == fixtures.build(name)


@given(st.integers(0, 2**32))
@settings(max_examples=60, suppress_health_check=[HealthCheck.too_slow], deadline=None)
def test_generated_models_roundtrip(seed):
    model = gen.random_collaboration(random.Random(seed), "h")
    raw = bpmn.serialize(model)
    again, diag = bpmn.parse(raw)
    assert not diag.errors
    assert again == model
    assert bpmn.serialize(again) == raw


def test_lane_set_is_ignored_with_one_warning_per_element():
    text = doc("""\
  <bpmn:process id="p">
    <bpmn:laneSet id="ls">
      <bpmn:lane id="l1"><bpmn:flowNodeRef>s</bpmn:flowNodeRef></bpmn:lane>
      <bpmn:lane id="l2"><bpmn:flowNodeRef>e</bpmn:flowNodeRef><bpmn:flowNodeRef>x</bpmn:flowNodeRef></bpmn:lane>
    </bpmn:laneSet>
    <bpmn:startEvent id="s"/>
    <bpmn:endEvent id="e"/>
    <bpmn:sequenceFlow id="f" sourceRef="s" targetRef="e"/>
  </bpmn:process>""")
    collab, diag = bpmn.parse(text)
    assert diag.errors == []
    census = sorted(w.element for w in diag.warnings)
    assert census == ["flowNodeRef", "flowNodeRef", "flowNodeRef", "lane", "lane", "laneSet"]
    assert {w.line for w in diag.warnings} == {4, 5, 6}
    assert all(w.reason == "unsupported element ignored" for w in diag.warnings)
    assert [n.id for n in collab.processes[0].nodes] == ["e", "s"]


@pytest.mark.parametrize("text", [
    "<bpmn:definitions",
    HEAD + "<bpmn:process id='p'>",
    HEAD + "<bpmn:process id='p'></bpmn:task></bpmn:definitions>",
    "",
])
def test_malformed_xml(text):
    with pytest.raises(bpmn.XmlError):
        bpmn.parse(text)


def test_malformed_xml_reports_position():
    with pytest.raises(bpmn.XmlError, match="line 4"):
        bpmn.parse(HEAD + "  <bpmn:process id='p'>\n  </bpmn:oops>\n</bpmn:definitions>")


def test_wrong_root():
    with pytest.raises(bpmn.UnsupportedRoot):
        bpmn.parse('<?xml version="1.0"?><process xmlns="http://www.omg.org/spec/BPMN/20100524/MODEL"/>')


def test_black_box_pool():
    collab, diag = bpmn.parse(doc("""\
  <bpmn:collaboration id="c">
    <bpmn:participant id="bank" name="Bank"/>
  </bpmn:collaboration>"""))
    assert not diag
    assert collab.pools == (Pool("bank", "Bank"),)
    assert collab.pools[0].is_black_box
    raw = bpmn.serialize(Collaboration("c", (Pool("bank", "Bank"),)))
    assert b'<bpmn:participant id="bank" name="Bank" />' in raw
    assert b"<bpmn:process" not in raw


def test_dangling_references_are_errors():
    collab, diag = bpmn.parse(doc("""\
  <bpmn:collaboration id="c"><bpmn:participant id="x" processRef="nope"/></bpmn:collaboration>
  <bpmn:process id="p">
    <bpmn:exclusiveGateway id="g" default="missing"/>
    <bpmn:dataObjectReference id="r" dataObjectRef="ghost"/>
  </bpmn:process>"""))
    reasons = sorted(e.reason for e in diag.errors)
    assert len(reasons) == 3
    assert any("processRef" in r for r in reasons)
    assert any("default flow" in r for r in reasons)
    assert any("dataObjectRef" in r for r in reasons)


def test_events_data_and_extensions():
    collab, diag = bpmn.parse(doc("""\
  <bpmn:dataStore id="ds" name="claims"/>
  <bpmn:process id="p">
    <bpmn:dataObject id="do_def" itemSubjectRef="FSN" isCollection="true"/>
    <bpmn:dataObjectReference id="do" dataObjectRef="do_def" name="batch"/>
    <bpmn:dataStoreReference id="dsr" dataStoreRef="ds"/>
    <bpmn:startEvent id="s"><bpmn:timerEventDefinition><bpmn:timeDuration>5</bpmn:timeDuration></bpmn:timerEventDefinition></bpmn:startEvent>
    <bpmn:serviceTask id="t">
      <bpmn:extensionElements><eip:param name="mapping" value="m1"/></bpmn:extensionElements>
      <bpmn:dataInputAssociation><bpmn:sourceRef>do</bpmn:sourceRef></bpmn:dataInputAssociation>
      <bpmn:dataOutputAssociation><bpmn:targetRef>dsr</bpmn:targetRef></bpmn:dataOutputAssociation>
    </bpmn:serviceTask>
    <bpmn:boundaryEvent id="b" attachedToRef="t"><bpmn:errorEventDefinition errorRef="E1"/></bpmn:boundaryEvent>
    <bpmn:intermediateThrowEvent id="esc"><bpmn:escalationEventDefinition escalationRef="done"/></bpmn:intermediateThrowEvent>
    <bpmn:intermediateCatchEvent id="wait"/>
  </bpmn:process>
  <bpmndi:BPMNDiagram id="di"/>"""))
    proc = collab.processes[0]
    assert proc.node("s").kind == NodeKind.TIMER_START and proc.node("s").param("duration") == "5"
    assert proc.node("t").param("mapping") == "m1"
    assert proc.node("b").kind == NodeKind.ERROR_BOUNDARY and proc.node("b").param("attached_to") == "t"
    assert proc.node("esc").kind == NodeKind.ESCALATION_THROW and proc.node("esc").param("escalation") == "done"
    assert proc.node("wait").kind == NodeKind.MESSAGE_CATCH
    assert [w.element for w in diag.warnings] == ["intermediateCatchEvent"]
    (d,) = proc.data_objects
    assert (d.id, d.item, d.is_collection, d.name) == ("do", "FSN", True, "batch")
    assert proc.data_stores == (("dsr", "ds"),)
    assert proc.inputs_of("t") == ["do"] and proc.outputs_of("t") == ["dsr"]
    assert collab.data_store_names == (("ds", "claims"),)
    assert len(collab.extensions) == 1
    again, _ = bpmn.parse(bpmn.serialize(collab))
    assert again == collab


def test_write_and_parse_file(tmp_path):
    c = fixtures.build("splitter")
    bpmn.write_file(c, tmp_path / "s.bpmn")
    assert bpmn.parse_file(tmp_path / "s.bpmn")[0] == c
