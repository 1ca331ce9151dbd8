"""Message translator mappings.

A :class:`Mapping` is a target body type plus an ordered list of transforms,
grouped by the level they act on:

* structure: :class:`Rename`, :class:`Project`, :class:`Drop`, :class:`RenameRoot`
* data: :class:`ValueMap`, :class:`SetValue`
* data type: :class:`Convert` (scalar kinds and date formats)
* representation: :class:`Encode` / :class:`Decode` (base64, zlib+base64)

Mappings have a JSON form so they can live in a BPMN ``mapping`` param::

    {"target": "FSN:CDM", "transforms": [
        {"op": "rename", "path": "/fsn/amt", "to": "amount"},
        {"op": "map", "path": "/fsn/cur", "table": {"EUR": "978"}}]}
"""

from __future__ import annotations

import base64
import json
import zlib
from dataclasses import dataclass, field
from datetime import datetime
from decimal import Decimal, InvalidOperation
from typing import Any, Mapping as TMapping, Union

from eipflow import body as bt
from eipflow.body import Tree
from eipflow.engine.errors import MappingError
from eipflow.message import Message


@dataclass(frozen=True)
class Rename:
    path: str
    to: str

    def apply(self, tree: Tree) -> Tree:
        hits = bt.locate(tree, self.path)
        if not hits:
            raise MappingError(self.path, "rename", reason="path not found")
        # rename back to front so earlier indices stay valid
        for p in reversed(hits):
            node = bt.select(tree, p)[0]
            tree = _replace_exact(tree, p, Tree(self.to, node.value, node.children))
        return tree

    def inverse(self):
        p = bt.parse_path(self.path)
        return Rename(str(bt.Path(p.segments[:-1] + ((self.to, p.last[1]),))), p.last[0])


@dataclass(frozen=True)
class RenameRoot:
    to: str
    was: str = ""

    def apply(self, tree: Tree) -> Tree:
        return Tree(self.to, tree.value, tree.children)

    def inverse(self):
        if not self.was:
            raise ValueError("root rename is only invertible with 'was'")
        return RenameRoot(self.was, self.to)


@dataclass(frozen=True)
class Project:
    keep: tuple[str, ...]
    flatten: bool = False

    def apply(self, tree: Tree) -> Tree:
        return bt.project(tree, self.keep, self.flatten)

    def inverse(self):
        raise ValueError("projection is not invertible")


@dataclass(frozen=True)
class Drop:
    path: str

    def apply(self, tree: Tree) -> Tree:
        return bt.remove(tree, self.path)

    def inverse(self):
        raise ValueError("drop is not invertible")


@dataclass(frozen=True)
class ValueMap:
    path: str
    table: tuple[tuple[str, Any], ...]
    strict: bool = True  # unmapped values raise; otherwise kept

    def __post_init__(self):
        if isinstance(self.table, TMapping):
            object.__setattr__(self, "table", tuple(self.table.items()))

    def apply(self, tree: Tree) -> Tree:
        table = {str(k): v for k, v in self.table}
        return _each_leaf(tree, self.path, "map", lambda v: _lookup(table, v, self))

    def inverse(self):
        rev = {}
        for k, v in self.table:
            if str(v) in rev:
                raise ValueError(f"value map at {self.path} is not injective")
            rev[str(v)] = k
        return ValueMap(self.path, tuple(rev.items()), self.strict)


def _lookup(table, v, t: ValueMap):
    key = _text(v)
    if key in table:
        return bt.coerce_scalar(table[key])
    if t.strict:
        raise MappingError(t.path, "map", v, "no table entry")
    return v


@dataclass(frozen=True)
class SetValue:
    path: str
    value: Any

    def apply(self, tree: Tree) -> Tree:
        return bt.set_value(tree, self.path, bt.coerce_scalar(self.value))

    def inverse(self):
        raise ValueError("set is not invertible")


@dataclass(frozen=True)
class Convert:
    path: str
    to: str  # string | integer | decimal | boolean | date
    date_from: str | None = None
    date_to: str | None = None

    def apply(self, tree: Tree) -> Tree:
        return _each_leaf(tree, self.path, "convert", self._one)

    def _one(self, v):
        try:
            if self.to == "date":
                return datetime.strptime(_text(v), self.date_from or "%Y-%m-%d").strftime(self.date_to or "%Y-%m-%d")
            if self.to == "string":
                return _text(v)
            if self.to == "integer":
                if isinstance(v, Decimal) and v != v.to_integral_value():
                    raise ValueError("fractional value")
                return int(v)
            if self.to == "decimal":
                return Decimal(_text(v))
            if self.to == "boolean":
                t = _text(v).lower()
                if t not in ("true", "false", "1", "0"):
                    raise ValueError("not a boolean")
                return t in ("true", "1")
        except (ValueError, InvalidOperation, TypeError) as exc:
            raise MappingError(self.path, f"convert:{self.to}", v, str(exc)) from None
        raise MappingError(self.path, "convert", v, f"unknown target kind {self.to!r}")

    def inverse(self):
        if self.to == "date":
            return Convert(self.path, "date", self.date_to, self.date_from)
        raise ValueError("scalar conversions lose the source kind")


_CODECS = ("base64", "zlib+base64")


@dataclass(frozen=True)
class Encode:
    path: str
    codec: str = "base64"

    def apply(self, tree: Tree) -> Tree:
        if self.codec not in _CODECS:
            raise MappingError(self.path, "encode", self.codec, "unknown codec")

        def enc(v):
            raw = _text(v).encode()
            if self.codec == "zlib+base64":
                raw = zlib.compress(raw, 9)
            return base64.b64encode(raw).decode("ascii")
        return _each_leaf(tree, self.path, "encode", enc)

    def inverse(self):
        return Decode(self.path, self.codec)


@dataclass(frozen=True)
class Decode:
    path: str
    codec: str = "base64"
    kind: str = "string"  # scalar kind of the decoded text

    def apply(self, tree: Tree) -> Tree:
        def dec(v):
            try:
                raw = base64.b64decode(_text(v), validate=True)
                if self.codec == "zlib+base64":
                    raw = zlib.decompress(raw)
                text = raw.decode()
            except (ValueError, zlib.error, UnicodeDecodeError) as exc:
                raise MappingError(self.path, f"decode:{self.codec}", v, str(exc)) from None
            return text if self.kind == "string" else bt.parse_scalar(text)
        return _each_leaf(tree, self.path, "decode", dec)

    def inverse(self):
        return Encode(self.path, self.codec)


Transform = Union[Rename, RenameRoot, Project, Drop, ValueMap, SetValue, Convert, Encode, Decode]


def _text(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _replace_exact(tree: Tree, full: bt.Path, new: Tree) -> Tree:
    if len(full.segments) == 1:
        return new
    return bt.replace(tree, full, new)


def _each_leaf(tree: Tree, path: str, op: str, fn) -> Tree:
    hits = bt.locate(tree, path)
    for p in hits:
        node = bt.select(tree, p)[0]
        if not node.is_leaf:
            raise MappingError(path, op, None, "not a leaf")
        tree = _replace_exact(tree, p, Tree(node.name, fn(node.value)))
    return tree


@dataclass(frozen=True)
class Mapping:
    target: str
    transforms: tuple[Transform, ...] = field(default_factory=tuple)

    def apply(self, tree: Tree | None) -> Tree | None:
        if tree is None:
            return None
        for t in self.transforms:
            try:
                tree = t.apply(tree)
            except bt.PathError as exc:
                raise MappingError(getattr(t, "path", "/"), type(t).__name__.lower(), None, str(exc)) from exc
        return tree

    def inverse(self, source_type: str) -> "Mapping":
        return Mapping(source_type, tuple(t.inverse() for t in reversed(self.transforms)))

    def to_json(self) -> str:
        return json.dumps(to_obj(self), sort_keys=True)


IDENTITY = Mapping("", ())

_OPS = {
    "rename": lambda d: Rename(d["path"], d["to"]),
    "rename_root": lambda d: RenameRoot(d["to"], d.get("was", "")),
    "project": lambda d: Project(tuple(d["keep"]), bool(d.get("flatten", False))),
    "drop": lambda d: Drop(d["path"]),
    "map": lambda d: ValueMap(d["path"], tuple(d["table"].items()), bool(d.get("strict", True))),
    "set": lambda d: SetValue(d["path"], d["value"]),
    "convert": lambda d: Convert(d["path"], d["to"], d.get("from_format"), d.get("to_format")),
    "encode": lambda d: Encode(d["path"], d.get("codec", "base64")),
    "decode": lambda d: Decode(d["path"], d.get("codec", "base64"), d.get("kind", "string")),
}


def from_obj(obj: TMapping) -> Mapping:
    ts = []
    for d in obj.get("transforms", ()):
        if d.get("op") not in _OPS:
            raise ValueError(f"unknown transform {d.get('op')!r}")
        ts.append(_OPS[d["op"]](d))
    return Mapping(obj.get("target", ""), tuple(ts))


def to_obj(m: Mapping) -> dict:
    out = []
    for t in m.transforms:
        if isinstance(t, Rename):
            out.append({"op": "rename", "path": t.path, "to": t.to})
        elif isinstance(t, RenameRoot):
            out.append({"op": "rename_root", "to": t.to, "was": t.was})
        elif isinstance(t, Project):
            out.append({"op": "project", "keep": list(t.keep), "flatten": t.flatten})
        elif isinstance(t, Drop):
            out.append({"op": "drop", "path": t.path})
        elif isinstance(t, ValueMap):
            out.append({"op": "map", "path": t.path, "table": dict(t.table), "strict": t.strict})
        elif isinstance(t, SetValue):
            out.append({"op": "set", "path": t.path, "value": t.value})
        elif isinstance(t, Convert):
            out.append({"op": "convert", "path": t.path, "to": t.to, "from_format": t.date_from, "to_format": t.date_to})
        elif isinstance(t, Encode):
            out.append({"op": "encode", "path": t.path, "codec": t.codec})
        elif isinstance(t, Decode):
            out.append({"op": "decode", "path": t.path, "codec": t.codec, "kind": t.kind})
    return {"target": m.target, "transforms": out}


def resolve(spec: str, registry: TMapping[str, Mapping] | None = None) -> Mapping:
    """A ``mapping`` param is either a registry name or inline JSON."""
    spec = spec.strip()
    if spec.startswith("{"):
        return from_obj(json.loads(spec))
    if registry and spec in registry:
        return registry[spec]
    if spec in ("identity", ""):
        return IDENTITY
    raise MappingError("/", "resolve", spec, "unknown mapping")


def translate(msg: Message, mapping: Mapping) -> Message:
    """Apply ``mapping``; the id is kept and body_type becomes the target type."""
    body = mapping.apply(msg.body)
    return msg.evolve(body=body, body_type=mapping.target or msg.body_type)
