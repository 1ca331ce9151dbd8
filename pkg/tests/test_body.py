from decimal import Decimal
from xml.etree import ElementTree as ET

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eipflow import body as bt

names = st.sampled_from(["a", "b", "item", "x"])
scalars = st.one_of(st.integers(-1000, 1000), st.text(max_size=8), st.booleans(),
                    st.decimals(allow_nan=False, allow_infinity=False, places=2, min_value=-1000, max_value=1000))
trees = st.recursive(
    st.builds(bt.leaf, names, scalars),
    lambda kids: st.builds(lambda n, cs: bt.node(n, *cs), names, st.lists(kids, min_size=1, max_size=4)),
    max_leaves=20,
)


@pytest.fixture
def doc():
    return bt.from_plain("order", {"id": 7, "item": [{"sku": "A"}, {"sku": "B"}, {"sku": "C"}], "note": "n"})


def test_select_is_one_based(doc):
    assert bt.first(doc, "/order/item[2]/sku").value == "B"
    assert [t.value for t in bt.select(doc, "/order/item/sku")] == ["A", "B", "C"]
    assert bt.select(doc, "/order/item[4]") == []


def test_exists_on_two_items():
    two = bt.from_plain("order", {"items": [1, 2]})
    assert bt.exists(two, "/order/items[2]")
    assert not bt.exists(two, "/order/items[3]")


def test_locate_yields_indexed_paths(doc):
    assert [str(p) for p in bt.locate(doc, "/order/item/sku")] == [
        "/order[1]/item[1]/sku[1]", "/order[1]/item[2]/sku[1]", "/order[1]/item[3]/sku[1]",
    ] or [str(p) for p in bt.locate(doc, "/order/item/sku")] == [
        "/order/item[1]/sku[1]", "/order/item[2]/sku[1]", "/order/item[3]/sku[1]",
    ]


@pytest.mark.parametrize("bad", ["", "order", "/order/[1]", "/order/item[0]", "/order//x"])
def test_bad_paths_raise(bad):
    with pytest.raises(bt.PathError):
        bt.parse_path(bad)


def test_remove_replace_insert(doc):
    assert len(bt.select(bt.remove(doc, "/order/item[2]"), "/order/item")) == 2
    swapped = bt.replace(doc, "/order/note", bt.leaf("note", "m"))
    assert bt.first(swapped, "/order/note").value == "m"
    grown = bt.insert(doc, "/order/ship/to", bt.leaf("city", "Berlin"))
    assert bt.first(grown, "/order/ship/to/city").value == "Berlin"
    assert doc == bt.from_plain("order", {"id": 7, "item": [{"sku": "A"}, {"sku": "B"}, {"sku": "C"}], "note": "n"})


def test_insert_under_leaf_fails(doc):
    with pytest.raises(bt.PathError):
        bt.insert(doc, "/order/note", bt.leaf("x", 1))


def test_set_value_creates_missing(doc):
    assert bt.first(bt.set_value(doc, "/order/total", Decimal("9.5")), "/order/total").value == Decimal("9.5")


def test_project_keeps_ancestors(doc):
    kept = bt.project(doc, ["/order/item[2]/sku", "/order/id"])
    assert bt.to_plain(kept) == {"id": 7, "item": {"sku": "B"}}
    flat = bt.project(doc, ["/order/item/sku"], flatten=True)
    assert [c.name for c in flat.children] == ["sku", "sku", "sku"]


def test_scalar_kinds():
    assert [bt.scalar_kind(v) for v in (True, 3, Decimal("1.5"), "s")] == ["boolean", "integer", "decimal", "string"]
    with pytest.raises(TypeError):
        bt.scalar_kind(1.5)


@given(trees)
@settings(max_examples=200)
def test_json_roundtrip(tree):
    assert bt.from_json(bt.to_json(tree)) == tree


# XML text carries no type, so only scalars whose inferred type is unambiguous survive
xml_scalars = st.one_of(st.integers(-1000, 1000), st.booleans(), st.from_regex(r"[A-Za-z][A-Za-z ]{0,6}[a-z]", fullmatch=True).filter(
    lambda s: s not in ("true", "false")), st.decimals(places=2, min_value=-1000, max_value=1000))
xml_trees = st.recursive(
    st.builds(bt.leaf, names, xml_scalars),
    lambda kids: st.builds(lambda n, cs: bt.node(n, *cs), names, st.lists(kids, min_size=1, max_size=4)),
    max_leaves=20,
)


def test_xml_text_is_inferred():
    el = ET.fromstring("<o><a>7</a><b>7.50</b><c>true</c><d>x</d><e/></o>")
    t = bt.from_element(el)
    assert [c.value for c in t.children] == [7, Decimal("7.50"), True, "x", None]
    assert bt.to_plain(t)["b"] == "7.50"  # decimals render as strings in plain form


@given(xml_trees)
@settings(max_examples=100)
def test_element_roundtrip(tree):
    el = bt.to_element(tree)
    assert bt.from_element(ET.fromstring(ET.tostring(el))) == tree


@given(trees)
def test_remove_every_child_then_root_only(tree):
    p = f"/{tree.name}"
    for c in {c.name for c in tree.children}:
        tree = bt.remove(tree, f"{p}/{c}")
    assert tree.children == ()
