"""Condition and value expressions over messages.

The language is deliberately small and total::

    /order/total > 100 and header('type') = 'FSN'
    not exists(/order/item[3])
    count(/order/item) >= 2 or seq() = 1

Comparisons: ``= == != ≠ < <= ≤ > >= ≥``. Boolean operators: ``and or not``.
Built-ins: ``exists(path)``, ``count(path)``, ``header(name)``, ``id()``,
``correlation_id()``, ``seq()``, ``body_type()``. Anything else is looked up
in a :class:`Functions` registry supplied by the embedder.

Evaluation either returns a scalar or raises :class:`EvalError`; it never
touches the message.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal
from functools import cached_property
from typing import Any, Callable, Mapping

from eipflow import body as bt
from eipflow.body import PathError, Scalar, scalar_kind
from eipflow.message import Message


class ExprSyntaxError(ValueError):
    pass


class EvalError(Exception):
    """Evaluation failed; ``kind`` is one of ``missing-path``, ``type-mismatch``,
    ``unknown-function`` or ``function-error``."""

    def __init__(self, kind: str, detail: str):
        super().__init__(f"{kind}: {detail}")
        self.kind = kind
        self.detail = detail


# -- AST ------------------------------------------------------------------------


@dataclass(frozen=True)
class Lit:
    value: Scalar


@dataclass(frozen=True)
class PathRef:
    path: bt.Path


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


@dataclass(frozen=True)
class Not:
    operand: Any


@dataclass(frozen=True)
class BoolOp:
    op: str
    left: Any
    right: Any


@dataclass(frozen=True)
class Compare:
    op: str
    left: Any
    right: Any


# -- tokenizer / parser ------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>-?\d+(?:\.\d+)?)
  | (?P<str>'(?:[^'\\]|\\.)*'|"(?:[^"\\]|\\.)*")
  | (?P<path>/[A-Za-z_][\w.\-:]*(?:\[\d+\])?(?:/[A-Za-z_][\w.\-:]*(?:\[\d+\])?)*)
  | (?P<op><=|>=|!=|==|≠|≤|≥|=|<|>)
  | (?P<punct>[(),])
  | (?P<name>[A-Za-z_][\w.]*)
    """,
    re.VERBOSE,
)

_OPS = {"==": "=", "≠": "!=", "≤": "<=", "≥": ">="}
_PATH_FUNCS = {"exists", "count"}


def _tokenize(text: str) -> list[tuple[str, str]]:
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r} at {pos} in {text!r}")
        pos = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        out.append((kind, m.group()))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, kind=None, value=None):
        k, v = self.peek()
        if k is None or (kind and k != kind) or (value is not None and v != value):
            raise ExprSyntaxError(f"expected {value or kind} at token {self.i} in {self.text!r}, got {v!r}")
        self.i += 1
        return v

    def parse(self):
        if not self.toks:
            raise ExprSyntaxError("empty expression")
        node = self.or_()
        if self.i != len(self.toks):
            raise ExprSyntaxError(f"trailing input {self.toks[self.i][1]!r} in {self.text!r}")
        return node

    def or_(self):
        left = self.and_()
        while self.peek() == ("name", "or"):
            self.i += 1
            left = BoolOp("or", left, self.and_())
        return left

    def and_(self):
        left = self.not_()
        while self.peek() == ("name", "and"):
            self.i += 1
            left = BoolOp("and", left, self.not_())
        return left

    def not_(self):
        if self.peek() == ("name", "not"):
            self.i += 1
            return Not(self.not_())
        return self.cmp()

    def cmp(self):
        left = self.value()
        k, v = self.peek()
        if k == "op":
            self.i += 1
            return Compare(_OPS.get(v, v), left, self.value())
        return left

    def value(self):
        k, v = self.peek()
        if k == "num":
            self.i += 1
            return Lit(Decimal(v) if "." in v else int(v))
        if k == "str":
            self.i += 1
            return Lit(re.sub(r"\\(.)", r"\1", v[1:-1]))
        if k == "path":
            self.i += 1
            return PathRef(bt.parse_path(v))
        if k == "punct" and v == "(":
            self.i += 1
            node = self.or_()
            self.take("punct", ")")
            return node
        if k == "name":
            if v in ("true", "false"):
                self.i += 1
                return Lit(v == "true")
            if v in ("and", "or", "not"):
                raise ExprSyntaxError(f"unexpected {v!r} in {self.text!r}")
            self.i += 1
            self.take("punct", "(")
            args = []
            if self.peek() != ("punct", ")"):
                args.append(self.or_())
                while self.peek() == ("punct", ","):
                    self.i += 1
                    args.append(self.or_())
            self.take("punct", ")")
            if v in _PATH_FUNCS and (len(args) != 1 or not isinstance(args[0], PathRef)):
                raise ExprSyntaxError(f"{v}() takes exactly one path argument")
            return Call(v, tuple(args))
        raise ExprSyntaxError(f"unexpected token {v!r} in {self.text!r}")


@dataclass(frozen=True)
class Expression:
    source: str = field(compare=True)

    @cached_property
    def ast(self):
        return _Parser(self.source).parse()

    @classmethod
    def parse(cls, text: str) -> "Expression":
        e = cls(text.strip())
        e.ast  # fail early
        return e

    def __str__(self) -> str:
        return self.source


def parse(text: str | Expression) -> Expression:
    """Parse (or re-check) an expression; raises ExprSyntaxError."""
    try:
        if isinstance(text, Expression):
            text.ast
            return text
        return Expression.parse(text)
    except PathError as exc:
        raise ExprSyntaxError(str(exc)) from exc


# -- evaluation ----------------------------------------------------------------------

HostFunction = Callable[..., Scalar]


class Functions:
    """Registry of named host functions: ``fn(msg, *args) -> scalar``."""

    def __init__(self, functions: Mapping[str, HostFunction] | None = None):
        self._fns: dict[str, HostFunction] = dict(functions or {})

    def register(self, name: str, fn: HostFunction | None = None):
        if fn is None:
            def deco(f):
                self._fns[name] = f
                return f
            return deco
        self._fns[name] = fn
        return fn

    def get(self, name: str) -> HostFunction | None:
        return self._fns.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._fns


_EMPTY = Functions()


def _numeric(v) -> bool:
    return isinstance(v, (int, Decimal)) and not isinstance(v, bool)


def _compare(op: str, a: Scalar, b: Scalar) -> bool:
    if _numeric(a) and _numeric(b):
        pass
    elif isinstance(a, str) and isinstance(b, str):
        pass
    elif isinstance(a, bool) and isinstance(b, bool):
        if op not in ("=", "!="):
            raise EvalError("type-mismatch", f"cannot order booleans with {op}")
    else:
        raise EvalError("type-mismatch", f"cannot compare {scalar_kind(a)} {op} {scalar_kind(b)}")
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def _bool(v, where: str) -> bool:
    if not isinstance(v, bool):
        raise EvalError("type-mismatch", f"{where} needs a boolean, got {v!r}")
    return v


def _eval(node, msg: Message, fns: Functions):
    if isinstance(node, Lit):
        return node.value
    if isinstance(node, PathRef):
        hit = bt.first(msg.body, node.path)
        if hit is None:
            raise EvalError("missing-path", str(node.path))
        if not hit.is_leaf:
            raise EvalError("type-mismatch", f"{node.path} is not a scalar")
        return hit.value
    if isinstance(node, Compare):
        return _compare(node.op, _eval(node.left, msg, fns), _eval(node.right, msg, fns))
    if isinstance(node, Not):
        return not _bool(_eval(node.operand, msg, fns), "not")
    if isinstance(node, BoolOp):
        left = _bool(_eval(node.left, msg, fns), node.op)
        if node.op == "and" and not left:
            return False
        if node.op == "or" and left:
            return True
        return _bool(_eval(node.right, msg, fns), node.op)
    if isinstance(node, Call):
        return _call(node, msg, fns)
    raise TypeError(node)  # pragma: no cover


def _call(node: Call, msg: Message, fns: Functions):
    name = node.name
    if name == "exists":
        return bt.exists(msg.body, node.args[0].path)
    if name == "count":
        return len(bt.select(msg.body, node.args[0].path))
    args = [_eval(a, msg, fns) for a in node.args]
    if name == "header":
        if len(args) != 1 or not isinstance(args[0], str):
            raise EvalError("type-mismatch", "header() takes one string")
        value = msg.header(args[0])
        if value is None:
            raise EvalError("missing-path", f"header {args[0]!r}")
        return value
    if name == "id" and not args:
        return msg.id
    if name == "correlation_id" and not args:
        if msg.correlation_id is None:
            raise EvalError("missing-path", "correlation_id")
        return msg.correlation_id
    if name == "seq" and not args:
        if msg.sequence_number is None:
            raise EvalError("missing-path", "sequence_number")
        return msg.sequence_number
    if name == "body_type" and not args:
        return msg.body_type
    fn = fns.get(name)
    if fn is None:
        raise EvalError("unknown-function", name)
    try:
        result = fn(msg, *args)
    except EvalError:
        raise
    except Exception as exc:
        raise EvalError("function-error", f"{name}: {exc}") from exc
    if isinstance(result, float):
        result = Decimal(repr(result))
    try:
        scalar_kind(result)
    except TypeError:
        raise EvalError("type-mismatch", f"{name} returned {result!r}") from None
    return result


def evaluate(expr: Expression | str, msg: Message, functions: Functions | None = None) -> Scalar:
    return _eval(parse(expr).ast, msg, functions or _EMPTY)


def evaluate_condition(expr: Expression | str, msg: Message, functions: Functions | None = None) -> bool:
    return _bool(evaluate(expr, msg, functions), "condition")
