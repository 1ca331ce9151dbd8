"""Seeded generators shared by the property and acceptance tests."""

from __future__ import annotations

import random
from decimal import Decimal

from eipflow import body as bt
from eipflow.model import (
    Collaboration, DataAssociation, DataObject, ItemDefinition, MessageFlow, Node, NodeKind, Pool,
    ProcessModel, SequenceFlow,
)

NAMES = ["a", "b", "c", "item", "line", "x"]
SCALARS = [lambda r: r.randint(-50, 500), lambda r: f"s{r.randint(0, 99)}", lambda r: r.random() < 0.5,
           lambda r: Decimal(r.randint(0, 9999)) / 100]


def random_tree(rng: random.Random, max_depth: int = 6, max_fanout: int = 8, name: str = "doc") -> bt.Tree:
    """Random tree with depth <= max_depth (root is depth 1) and fan-out <= max_fanout."""

    def grow(nm: str, depth: int) -> bt.Tree:
        if depth >= max_depth or rng.random() < 0.25 * depth / max_depth:
            return bt.leaf(nm, rng.choice(SCALARS)(rng))
        k = rng.randint(1, max_fanout)
        return bt.node(nm, *(grow(rng.choice(NAMES), depth + 1) for _ in range(k)))

    return grow(name, 1) if max_depth > 1 else bt.leaf(name, 1)


def name_paths(tree: bt.Tree) -> list[str]:
    """Every unindexed name path below the root, e.g. ``/doc/a/item``."""
    out = set()

    def walk(t: bt.Tree, prefix: str):
        for c in t.children:
            p = f"{prefix}/{c.name}"
            out.add(p)
            walk(c, p)

    walk(tree, f"/{tree.name}")
    return sorted(out)


# -- models ----------------------------------------------------------------------------

_CONDITIONS = ["/order/total > 100", "exists(/order/item[2])", "header('type') = 'FSN'",
               "not(/order/id < 5) and count(/order/item) >= 1", "/order/customer != 'acme' or seq() > 2"]
_LABELS = ["", "Route", "Check <amount> & \"currency\"", "Übersetzen", "send to 'bank'"]
_PARAM_KEYS = ["mapping", "keep", "channel", "tag", "mode", "recipients", "completion", "correlation", "placement"]
_PARAM_VALUES = ["identity", "/order/id,/order/total", "out", "audit", "Stateless", "a,b", "wait_for_all(3)",
                 "header('k')", "/order/x", "{\"target\": \"T\", \"transforms\": []}"]


def _config(rng: random.Random, kind: NodeKind, activities: list[str]) -> dict[str, str]:
    cfg: dict[str, str] = {}
    for _ in range(rng.randint(0, 2)):
        cfg[rng.choice(_PARAM_KEYS)] = rng.choice(_PARAM_VALUES)
    if kind in (NodeKind.START_EVENT, NodeKind.END_EVENT) and rng.random() < 0.5:
        cfg["message"] = "true"
    if kind in (NodeKind.TIMER, NodeKind.TIMER_START):
        cfg["duration"] = str(rng.randint(1, 30))
    if kind in (NodeKind.ESCALATION_THROW, NodeKind.ESCALATION_START) and rng.random() < 0.5:
        cfg["escalation"] = f"esc{rng.randint(1, 3)}"
    if kind == NodeKind.ERROR_BOUNDARY:
        cfg["attached_to"] = rng.choice(activities) if activities else "missing"
        if rng.random() < 0.5:
            cfg["error"] = "err1"
        if rng.random() < 0.3:
            cfg["cancel"] = "false"
    if kind == NodeKind.SCRIPT_TASK and rng.random() < 0.5:
        cfg["script"] = "total = total * 2"
    return cfg


def random_process(rng: random.Random, pid: str, items: tuple[ItemDefinition, ...], depth: int = 0,
                   name: str = "") -> ProcessModel:
    kinds = list(NodeKind)
    if depth >= 1:
        kinds.remove(NodeKind.SUB_PROCESS)
    n = rng.randint(1, 9)
    picked = [rng.choice(kinds) for _ in range(n)]
    ids = [f"{pid}_n{i}" for i in range(n)]
    activities = [i for i, k in zip(ids, picked) if k not in (NodeKind.ERROR_BOUNDARY,) and k.value.endswith(("Task", "SubProcess"))]
    nodes, subs = [], []
    for nid, kind in zip(ids, picked):
        label = rng.choice(_LABELS)
        nodes.append(Node(nid, kind, label, _config(rng, kind, activities)))
        if kind == NodeKind.SUB_PROCESS:
            subs.append((nid, random_process(rng, nid, items, depth + 1, label)))

    flows, has_default = [], set()
    for i in range(rng.randint(0, 2 * n)):
        s, t = rng.choice(ids), rng.choice(ids)
        cond = rng.choice(_CONDITIONS) if rng.random() < 0.4 else None
        default = s not in has_default and cond is None and rng.random() < 0.3
        if default:
            has_default.add(s)
        flows.append(SequenceFlow(f"{pid}_f{i}", s, t, cond, default))

    dos = [DataObject(f"{pid}_do{i}", rng.choice([it.name for it in items] + ["untyped"]), rng.random() < 0.3,
                      rng.choice(["", "FSN", "Recipients"])) for i in range(rng.randint(0, 3))]
    stores = [(f"{pid}_ds{i}", f"store{rng.randint(0, 2)}") for i in range(rng.randint(0, 2))]
    data = [d.id for d in dos] + [s for s, _ in stores]
    assocs = []
    for _ in range(rng.randint(0, 4)):
        if data:
            d, x = rng.choice(data), rng.choice(ids)
            assocs.append(DataAssociation(d, x) if rng.random() < 0.5 else DataAssociation(x, d))
    return ProcessModel(pid, tuple(nodes), tuple(flows), tuple(dos), tuple(assocs), tuple(stores), tuple(subs),
                        items, name)


def random_collaboration(rng: random.Random, tag: str = "m") -> Collaboration:
    items = tuple(sorted({ItemDefinition(f"T{i}", (("/r/v", rng.choice(["string", "integer", "decimal"])),))
                          for i in range(rng.randint(0, 3))}, key=lambda i: i.name))
    pools, refs = [], []
    for p in range(rng.randint(1, 3)):
        proc = random_process(rng, f"{tag}p{p}", items, name=rng.choice(["", f"Process {p}"]))
        pools.append(Pool(f"{tag}pool{p}", f"Pool {p}", proc))
        refs.extend([pools[-1].id] + [nd.id for nd in proc.nodes])
    for b in range(rng.randint(0, 2)):
        pools.append(Pool(f"{tag}bb{b}", f"Partner {b}"))
        refs.append(pools[-1].id)
    mflows = [MessageFlow(f"{tag}mf{i}", rng.choice(refs), rng.choice(refs), rng.choice(["", "T0", "Order"]),
                          rng.random() < 0.3, rng.choice(["", "request"]))
              for i in range(rng.randint(0, 4))]
    stores = tuple({s for pl in pools if pl.process for _, s in pl.process.data_stores})
    return Collaboration(f"{tag}collab", tuple(pools), tuple(mflows), items, tuple((s, s.upper()) for s in stores))


# -- routing cases -----------------------------------------------------------------------

_FIELDS = {"total": lambda r: Decimal(r.randint(0, 400)) / 2, "qty": lambda r: r.randint(0, 20),
           "region": lambda r: r.choice(["eu", "us", "apac"])}
_OPS = {"=": lambda a, b: a == b, "!=": lambda a, b: a != b, "<": lambda a, b: a < b, "<=": lambda a, b: a <= b,
        ">": lambda a, b: a > b, ">=": lambda a, b: a >= b}


def random_atom(rng: random.Random) -> tuple[str, str, object]:
    f = rng.choice(sorted(_FIELDS))
    op = rng.choice(["=", "!="]) if f == "region" else rng.choice(sorted(_OPS))
    return f, op, _FIELDS[f](rng)


def atom_text(atom) -> str:
    f, op, v = atom
    lit = f"'{v}'" if isinstance(v, str) else str(v)
    return f"/order/{f} {op} {lit}"


def random_condition(rng: random.Random) -> list[list[tuple]]:
    """Disjunction of conjunctions of atoms (DNF), evaluated independently by :func:`holds`."""
    return [[random_atom(rng) for _ in range(rng.randint(1, 2))] for _ in range(rng.randint(1, 2))]


def condition_text(dnf) -> str:
    return " or ".join("(" + " and ".join(atom_text(a) for a in conj) + ")" for conj in dnf)


def holds(dnf, record: dict) -> bool:
    return any(all(_OPS[op](record[f], v) for f, op, v in conj) for conj in dnf)


def random_record(rng: random.Random) -> dict:
    return {f: gen(rng) for f, gen in _FIELDS.items()}
