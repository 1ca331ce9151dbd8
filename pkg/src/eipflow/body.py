"""Message body trees.

A body is a single root :class:`Tree`. Leaves carry a scalar (``str``, ``int``,
``Decimal`` or ``bool``); interior nodes carry ordered, possibly repeated,
named children. Paths look like ``/order/item[2]/price`` with 1-based
repetition indices; a segment without an index selects every sibling of that
name.

XML and JSON only exist at the edges (:func:`from_plain`, :func:`to_json`,
:func:`from_element`). Everything in between works on trees.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Any, Iterable, Iterator, Union
from xml.etree import ElementTree as ET

Scalar = Union[str, int, Decimal, bool]

KINDS = ("string", "integer", "decimal", "boolean")


class PathError(ValueError):
    pass


def scalar_kind(value: Scalar) -> str:
    # bool before int: bool is an int subclass
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, Decimal):
        return "decimal"
    if isinstance(value, str):
        return "string"
    raise TypeError(f"not a scalar: {value!r}")


@dataclass(frozen=True)
class Tree:
    name: str
    value: Scalar | None = None
    children: tuple["Tree", ...] = ()

    def __post_init__(self):
        if self.value is not None and self.children:
            raise ValueError(f"node {self.name!r} has both a value and children")
        if self.value is not None:
            scalar_kind(self.value)

    @property
    def is_leaf(self) -> bool:
        return self.value is not None

    def child(self, name: str, index: int = 1) -> "Tree | None":
        seen = 0
        for c in self.children:
            if c.name == name:
                seen += 1
                if seen == index:
                    return c
        return None

    def walk(self) -> Iterator["Tree"]:
        yield self
        for c in self.children:
            yield from c.walk()

    def depth(self) -> int:
        if not self.children:
            return 1
        return 1 + max(c.depth() for c in self.children)


def leaf(name: str, value: Scalar) -> Tree:
    return Tree(name, value)


def node(name: str, *children: Tree) -> Tree:
    return Tree(name, None, tuple(children))


# -- paths -------------------------------------------------------------------

_SEGMENT = re.compile(r"^([A-Za-z_][\w.\-:]*)(?:\[(\d+)\])?$")


@dataclass(frozen=True)
class Path:
    segments: tuple[tuple[str, int | None], ...]

    def __str__(self) -> str:
        return "".join(f"/{n}" + (f"[{i}]" if i is not None else "") for n, i in self.segments)

    @property
    def parent(self) -> "Path":
        return Path(self.segments[:-1])

    @property
    def last(self) -> tuple[str, int | None]:
        return self.segments[-1]


def parse_path(text: str | Path) -> Path:
    if isinstance(text, Path):
        return text
    text = text.strip()
    if not text.startswith("/"):
        raise PathError(f"path must start with '/': {text!r}")
    if text == "/":
        return Path(())
    segs = []
    for part in text[1:].split("/"):
        m = _SEGMENT.match(part)
        if not m:
            raise PathError(f"bad path segment {part!r} in {text!r}")
        idx = int(m.group(2)) if m.group(2) else None
        if idx is not None and idx < 1:
            raise PathError(f"indices are 1-based: {text!r}")
        segs.append((m.group(1), idx))
    return Path(tuple(segs))


def _match(children: Iterable[Tree], name: str, index: int | None) -> list[Tree]:
    hits = [c for c in children if c.name == name]
    if index is None:
        return hits
    return hits[index - 1 : index]


def select(tree: Tree | None, path: str | Path) -> list[Tree]:
    """All nodes addressed by ``path``; unindexed segments fan out."""
    p = parse_path(path)
    if tree is None:
        return []
    if not p.segments:
        return [tree]
    name, idx = p.segments[0]
    if tree.name != name or (idx is not None and idx != 1):
        return []
    current = [tree]
    for name, idx in p.segments[1:]:
        nxt: list[Tree] = []
        for t in current:
            nxt.extend(_match(t.children, name, idx))
        current = nxt
    return current


def locate(tree: Tree | None, path: str | Path) -> list[Path]:
    """Fully indexed paths of every node :func:`select` would return, in document order."""
    p = parse_path(path)
    if tree is None:
        return []
    if not p.segments:
        return [Path(((tree.name, 1),))]
    name, idx = p.segments[0]
    if tree.name != name or (idx is not None and idx != 1):
        return []
    current = [(tree, ((tree.name, 1),))]
    for name, idx in p.segments[1:]:
        nxt = []
        for t, segs in current:
            seen = 0
            for c in t.children:
                if c.name == name:
                    seen += 1
                    if idx is None or idx == seen:
                        nxt.append((c, segs + ((name, seen),)))
        current = nxt
    return [Path(segs) for _, segs in current]


def first(tree: Tree | None, path: str | Path) -> Tree | None:
    hits = select(tree, path)
    return hits[0] if hits else None


def exists(tree: Tree | None, path: str | Path) -> bool:
    return bool(select(tree, path))


def _rebuild(tree: Tree, segs, fn) -> Tree:
    """Apply ``fn(children, name, idx) -> new children`` at the parent of the last segment."""
    if len(segs) == 1:
        name, idx = segs[0]
        return Tree(tree.name, tree.value, tuple(fn(list(tree.children), name, idx)))
    name, idx = segs[0]
    out = []
    seen = 0
    for c in tree.children:
        if c.name == name:
            seen += 1
            if idx is None or seen == idx:
                c = _rebuild(c, segs[1:], fn)
        out.append(c)
    return Tree(tree.name, tree.value, tuple(out))


def _inner_segments(tree: Tree, p: Path):
    if not p.segments:
        raise PathError("cannot edit the root through an empty path")
    name, idx = p.segments[0]
    if tree.name != name or (idx is not None and idx != 1):
        raise PathError(f"path {p} does not address tree rooted at {tree.name!r}")
    return p.segments[1:]


def remove(tree: Tree, path: str | Path) -> Tree:
    """Drop every node addressed by ``path``."""
    p = parse_path(path)
    segs = _inner_segments(tree, p)
    if not segs:
        return Tree(tree.name)

    def fn(children, name, idx):
        out, seen = [], 0
        for c in children:
            if c.name == name:
                seen += 1
                if idx is None or seen == idx:
                    continue
            out.append(c)
        return out

    return _rebuild(tree, segs, fn)


def replace(tree: Tree, path: str | Path, new: Tree) -> Tree:
    """Replace the first node at ``path`` with ``new``; the root when the path names it."""
    p = parse_path(path)
    if len(p.segments) == 1:
        return new
    hits = locate(tree, p)
    if not hits:
        raise PathError(f"nothing at {p}")
    segs = _inner_segments(tree, hits[0])

    def fn(children, name, idx):
        out, seen, done = [], 0, False
        for c in children:
            if c.name == name and not done:
                seen += 1
                if idx is None or seen == idx:
                    out.append(new)
                    done = True
                    continue
            out.append(c)
        return out

    return _rebuild(tree, segs, fn)


def insert(tree: Tree, parent_path: str | Path, new: Tree, position: int | None = None) -> Tree:
    """Insert ``new`` under the node at ``parent_path``, creating missing interior nodes."""
    p = parse_path(parent_path)
    if not p.segments:
        raise PathError("parent path must name the root")
    name, _ = p.segments[0]
    if tree.name != name:
        raise PathError(f"path {p} does not address tree rooted at {tree.name!r}")
    return _insert(tree, list(p.segments[1:]), new, position)


def _insert(t: Tree, segs, new: Tree, position):
    if t.is_leaf:
        raise PathError(f"cannot insert under leaf {t.name!r}")
    kids = list(t.children)
    if not segs:
        kids.insert(len(kids) if position is None else position, new)
        return Tree(t.name, None, tuple(kids))
    name, idx = segs[0]
    want = idx or 1
    seen = 0
    for i, c in enumerate(kids):
        if c.name == name:
            seen += 1
            if seen == want:
                kids[i] = _insert(c, segs[1:], new, position)
                return Tree(t.name, None, tuple(kids))
    if seen + 1 != want:
        raise PathError(f"cannot create {name}[{want}] with only {seen} siblings")
    kids.append(_insert(Tree(name), segs[1:], new, position))
    return Tree(t.name, None, tuple(kids))


def set_value(tree: Tree, path: str | Path, value: Scalar) -> Tree:
    p = parse_path(path)
    hit = first(tree, p)
    if hit is None:
        name, _ = p.last
        return insert(tree, p.parent, Tree(name, value))
    return replace(tree, p, Tree(hit.name, value))


def project(tree: Tree, keep: Iterable[str | Path], flatten: bool = False) -> Tree:
    """Keep only the nodes on ``keep`` paths (plus their ancestors).

    With ``flatten`` the kept nodes are lifted directly under the root.
    """
    paths = [parse_path(k) for k in keep]
    if any(len(p.segments) == 1 and p.segments[0][0] == tree.name for p in paths):
        return tree if not flatten else Tree(tree.name, tree.value, tree.children)
    if flatten:
        kept: list[Tree] = []
        ids = set()
        for p in paths:
            for hit in select(tree, p):
                if id(hit) not in ids:
                    ids.add(id(hit))
                    kept.append(hit)
        order = {id(n): i for i, n in enumerate(tree.walk())}
        kept.sort(key=lambda n: order[id(n)])
        return Tree(tree.name, None, tuple(kept))
    marks: set[int] = set()
    whole: set[int] = set()
    for p in paths:
        if not p.segments or p.segments[0][0] != tree.name:
            continue
        _mark(tree, list(p.segments[1:]), marks, whole)
    return _prune(tree, marks, whole)


def _mark(t: Tree, segs, marks, whole) -> bool:
    if not segs:
        whole.add(id(t))
        marks.add(id(t))
        return True
    name, idx = segs[0]
    hit = False
    for c in _match(t.children, name, idx):
        if _mark(c, segs[1:], marks, whole):
            hit = True
    if hit:
        marks.add(id(t))
    return hit


def _prune(t: Tree, marks, whole) -> Tree:
    if id(t) in whole:
        return t
    return Tree(t.name, None, tuple(_prune(c, marks, whole) for c in t.children if id(c) in marks))


# -- plain python / JSON / XML boundaries ------------------------------------------


def coerce_scalar(value: Any) -> Scalar:
    if isinstance(value, float):
        return Decimal(repr(value))
    if isinstance(value, (str, int, Decimal, bool)):
        return value
    raise TypeError(f"unsupported scalar {value!r}")


def from_plain(name: str, obj: Any) -> Tree:
    """Build a tree from nested dicts/lists; list values become repeated children."""
    if isinstance(obj, dict):
        kids: list[Tree] = []
        for k, v in obj.items():
            if isinstance(v, list):
                kids.extend(from_plain(k, item) for item in v)
            else:
                kids.append(from_plain(k, v))
        return Tree(name, None, tuple(kids))
    if obj is None:
        return Tree(name)
    return Tree(name, coerce_scalar(obj))


def to_plain(tree: Tree) -> Any:
    if tree.is_leaf:
        v = tree.value
        return str(v) if isinstance(v, Decimal) else v
    groups: dict[str, list[Any]] = {}
    for c in tree.children:
        groups.setdefault(c.name, []).append(to_plain(c))
    return {k: v[0] if len(v) == 1 else v for k, v in groups.items()} or None


def to_obj(tree: Tree | None) -> Any:
    """Lossless JSON-ready form (types tagged, order and repetition kept)."""
    if tree is None:
        return None
    if tree.is_leaf:
        kind = scalar_kind(tree.value)
        v = str(tree.value) if kind == "decimal" else tree.value
        return {"n": tree.name, "t": kind, "v": v}
    return {"n": tree.name, "c": [to_obj(c) for c in tree.children]}


def from_obj(obj: Any) -> Tree | None:
    if obj is None:
        return None
    if "t" in obj:
        kind, v = obj["t"], obj["v"]
        if kind == "decimal":
            v = Decimal(v)
        elif kind == "integer":
            v = int(v)
        elif kind == "boolean":
            v = bool(v)
        elif kind == "string":
            v = str(v)
        else:
            raise ValueError(f"unknown scalar kind {kind!r}")
        return Tree(obj["n"], v)
    return Tree(obj["n"], None, tuple(from_obj(c) for c in obj.get("c", ())))


def to_json(tree: Tree | None) -> str:
    return json.dumps(to_obj(tree), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def from_json(text: str) -> Tree | None:
    return from_obj(json.loads(text))


_INT = re.compile(r"^[+-]?\d+$")
_DEC = re.compile(r"^[+-]?(\d+\.\d*|\.\d+)$")


def parse_scalar(text: str) -> Scalar:
    """Type inference used for XML text content."""
    if text in ("true", "false"):
        return text == "true"
    if _INT.match(text):
        return int(text)
    if _DEC.match(text):
        try:
            return Decimal(text)
        except InvalidOperation:  # pragma: no cover - regex guards this
            return text
    return text


def from_element(el: ET.Element) -> Tree:
    tag = el.tag.split("}", 1)[-1]
    kids = list(el)
    if not kids:
        text = (el.text or "").strip()
        return Tree(tag, parse_scalar(text)) if text else Tree(tag)
    return Tree(tag, None, tuple(from_element(k) for k in kids))


def to_element(tree: Tree) -> ET.Element:
    el = ET.Element(tree.name)
    if tree.is_leaf:
        v = tree.value
        el.text = ("true" if v else "false") if isinstance(v, bool) else str(v)
    for c in tree.children:
        el.append(to_element(c))
    return el
