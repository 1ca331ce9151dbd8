"""YAML scenarios: wire a model to simulated endpoints, inject messages, check outcomes.

See ``docs/scenario.md`` for the file format. Everything a scenario refers to
is resolved before the engine starts, so a bad reference raises
:class:`ScenarioError` without side effects.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from eipflow import bpmn
from eipflow import body as bt
from eipflow import fixtures
from eipflow.catalog import PatternKind, recognize_collaboration
from eipflow.channels import Broker, ChannelConfig, ConfigError, Redelivery
from eipflow.engine import Engine, EngineConfig, TraceLog
from eipflow.engine.endpoints import EndpointRegistry, behavior_from_obj
from eipflow.engine.mapping import from_obj as mapping_from_obj
from eipflow.message import Message
from eipflow.model import Collaboration

log = logging.getLogger(__name__)

SCENARIO_VERSION = 1


class ScenarioError(ValueError):
    """The scenario is malformed or refers to something that does not exist."""


@dataclass
class Injection:
    at: float
    target: str  # entry node id, or a pool with an initiating message flow
    body: Any = None
    body_type: str = "untyped"
    headers: dict[str, str] = field(default_factory=dict)
    correlation_id: str | None = None
    sequence_number: int | None = None


@dataclass
class Scenario:
    bpmn: str
    seed: int = 0
    clock: str = "logical"
    channels: dict[str, dict] = field(default_factory=dict)
    endpoints: dict[str, Any] = field(default_factory=dict)
    mappings: dict[str, dict] = field(default_factory=dict)
    inject: list[Injection] = field(default_factory=list)
    expect: dict[str, Any] = field(default_factory=dict)
    until: float | None = None
    base: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_obj(cls, obj: Any, base: Path | None = None) -> "Scenario":
        if not isinstance(obj, dict):
            raise ScenarioError("a scenario is a mapping")
        version = obj.get("version", SCENARIO_VERSION)
        if version != SCENARIO_VERSION:
            raise ScenarioError(f"unsupported scenario version {version!r}")
        unknown = set(obj) - {"version", "bpmn", "seed", "clock", "channels", "endpoints", "mappings",
                              "inject", "expect", "until"}
        if unknown:
            raise ScenarioError(f"unknown keys {sorted(unknown)}")
        if "bpmn" not in obj:
            raise ScenarioError("missing 'bpmn'")
        try:
            inject = [Injection(float(i.get("at", 0)), str(i["to"]), i.get("body"), str(i.get("body_type", "untyped")),
                                {str(k): str(v) for k, v in (i.get("headers") or {}).items()},
                                i.get("correlation_id"), i.get("sequence_number"))
                      for i in obj.get("inject") or []]
        except (KeyError, TypeError, AttributeError) as exc:
            raise ScenarioError(f"bad injection: {exc}") from exc
        return cls(str(obj["bpmn"]), int(obj.get("seed", 0)), str(obj.get("clock", "logical")),
                   dict(obj.get("channels") or {}), dict(obj.get("endpoints") or {}), dict(obj.get("mappings") or {}),
                   inject, dict(obj.get("expect") or {}), obj.get("until"), base or Path.cwd())


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        obj = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    return Scenario.from_obj(obj, path.parent)


@dataclass
class Verdict:
    passed: bool
    diffs: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "diffs": list(self.diffs)}


@dataclass
class ScenarioResult:
    trace: TraceLog
    verdict: Verdict
    engine: Engine


def load_model(ref: str, base: Path) -> Collaboration:
    """``fixture:<name>`` or a path relative to the scenario file."""
    if ref.startswith("fixture:"):
        name = ref[len("fixture:"):]
        if name not in fixtures.FIXTURES:
            raise ScenarioError(f"unknown fixture {name!r}")
        return fixtures.load(name)
    p = (base / ref) if not Path(ref).is_absolute() else Path(ref)
    if not p.exists():
        raise ScenarioError(f"model file {p} not found")
    collab, diag = bpmn.parse_file(p)
    if diag.errors:
        raise ScenarioError(f"{p}: {'; '.join(str(e) for e in diag.errors)}")
    return collab


def _channel_config(name: str, spec: dict) -> ChannelConfig:
    spec = dict(spec or {})
    red = spec.pop("redelivery", None)
    known = {"kind", "mep", "guaranteed_delivery", "max_message_size", "datatype", "ttl", "dead_letter", "invalid"}
    if set(spec) - known:
        raise ScenarioError(f"channel {name}: unknown keys {sorted(set(spec) - known)}")
    try:
        return ChannelConfig(
            kind=spec.pop("kind", "PointToPoint"), mep=spec.pop("mep", "InOnly"),
            guaranteed_delivery=bool(spec.pop("guaranteed_delivery", False)),
            max_message_size=spec.pop("max_message_size", None), datatype=spec.pop("datatype", None),
            ttl=spec.pop("ttl", None), dead_letter_target=spec.pop("dead_letter", None),
            invalid_target=spec.pop("invalid", None), redelivery=Redelivery(**red) if red else None,
        )
    except (TypeError, ValueError, ConfigError) as exc:
        raise ScenarioError(f"channel {name}: {exc}") from exc


def _resolve_target(collab: Collaboration, target: str) -> tuple[str, str]:
    """(process id, entry node id) for an injection target."""
    for proc in collab.processes:
        for n in proc.entries():
            if n.id == target:
                return proc.id, n.id
    for pool in collab.pools:
        if target in (pool.id, pool.name):
            for mf in collab.flows_from(pool.id):
                owner = collab.owner(mf.target)
                if owner is not None and owner.process is not None:
                    for n in owner.process.entries():
                        if n.id == mf.target:
                            return owner.process.id, n.id
    raise ScenarioError(f"injection target {target!r} is neither an entry node nor a sending pool")


def _needed_endpoints(collab: Collaboration) -> set[str]:
    names = set()
    for p in recognize_collaboration(collab):
        if p.kind in (PatternKind.EXTERNAL_SERVICE, PatternKind.REQUEST_REPLY_SYNC, PatternKind.REQUEST_REPLY_ASYNC,
                      PatternKind.SYNCH_ASYNCH_BRIDGE, PatternKind.CONTENT_ENRICHER):
            if p.param("endpoint"):
                names.add(p.param("endpoint"))
    return names


def _as_tree(body: Any) -> bt.Tree | None:
    if body is None:
        return None
    if isinstance(body, dict) and len(body) == 1:
        (root, inner), = body.items()
        return bt.from_plain(str(root), inner)
    raise ScenarioError(f"a body is a one-key mapping {{root: ...}}, got {body!r}")


def canonical_body(tree: bt.Tree | None) -> str:
    """Order-insensitive body form used to compare expectations."""
    if tree is None:
        return "null"
    return json.dumps({tree.name: bt.to_plain(tree)}, sort_keys=True, default=str)


def prepare(sc: Scenario, *, seed: int | None = None, clock: str | None = None) -> tuple[Engine, list]:
    """Build the engine and resolve injections; raises ScenarioError before anything runs."""
    collab = load_model(sc.bpmn, sc.base)
    clock = clock or sc.clock
    if clock not in ("logical", "wall"):
        raise ScenarioError(f"clock must be logical or wall, got {clock!r}")
    config = EngineConfig(seed=sc.seed if seed is None else seed, clock=clock)

    configs = {name: _channel_config(name, spec) for name, spec in sc.channels.items()}
    for name, cfg in configs.items():
        for ref in (cfg.dead_letter_target, cfg.invalid_target):
            if ref is not None and ref not in configs:
                raise ScenarioError(f"channel {name} refers to undeclared channel {ref!r}")

    missing = _needed_endpoints(collab) - set(sc.endpoints)
    if missing:
        raise ScenarioError(f"model calls endpoints without a script: {sorted(missing)}")
    try:
        behaviors = {name: behavior_from_obj(spec) for name, spec in sc.endpoints.items()}
        mappings = {name: mapping_from_obj(spec) for name, spec in sc.mappings.items()}
    except (ValueError, KeyError, TypeError) as exc:
        raise ScenarioError(str(exc)) from exc

    last = float("-inf")
    resolved = []
    for inj in sc.inject:
        if inj.at < last:
            raise ScenarioError(f"injection times must be non-decreasing ({inj.at} after {last})")
        last = inj.at
        proc, entry = _resolve_target(collab, inj.target)
        resolved.append((inj, proc, entry, _as_tree(inj.body)))

    engine = Engine(collab, config=config, mappings=mappings)
    broker: Broker = engine.broker
    for name, cfg in configs.items():
        broker.add(name, cfg)
    if engine.config.invalid_channel not in broker:
        broker.add(engine.config.invalid_channel)
    endpoints: EndpointRegistry = engine.endpoints
    for name, beh in behaviors.items():
        endpoints.register(name, beh)
    return engine, resolved


def run_scenario(sc: Scenario, *, seed: int | None = None, clock: str | None = None) -> ScenarioResult:
    engine, injections = prepare(sc, seed=seed, clock=clock)
    for inj, proc, entry, tree in injections:
        msg = Message(engine.ids(), tree, inj.body_type, tuple(inj.headers.items()), inj.correlation_id,
                      inj.sequence_number)
        engine.inject(msg, inj.at, proc, entry)
    trace = engine.run(sc.until)
    return ScenarioResult(trace, judge(sc.expect, engine, trace), engine)


def judge(expect: dict, engine: Engine, trace: TraceLog) -> Verdict:
    """Compare the finished run against ``expect``; single pass over the final state."""
    diffs: list[str] = []

    for channel, want in (expect.get("deliveries") or {}).items():
        got = engine.deliveries(channel)
        if isinstance(want, int):
            want = {"count": want}
        if isinstance(want, dict):
            if len(got) != int(want["count"]):
                diffs.append(f"deliveries[{channel}]: expected {want['count']} messages, got {len(got)}")
            continue
        if len(got) != len(want):
            diffs.append(f"deliveries[{channel}]: expected {len(want)} messages, got {len(got)}")
        for i, (w, g) in enumerate(zip(want, got)):
            if "body_type" in w and w["body_type"] != g.body_type:
                diffs.append(f"deliveries[{channel}][{i}].body_type: expected {w['body_type']!r}, got {g.body_type!r}")
            if "body" in w:
                a, b = canonical_body(_as_tree(w["body"])), canonical_body(g.body)
                if a != b:
                    diffs.append(f"deliveries[{channel}][{i}].body: expected {a}, got {b}")
            for hk, hv in (w.get("headers") or {}).items():
                if g.header(str(hk)) != str(hv):
                    diffs.append(f"deliveries[{channel}][{i}].headers.{hk}: expected {hv!r}, got {g.header(str(hk))!r}")

    stores = engine.stores
    for name, want in (expect.get("stores") or {}).items():
        if name in stores.claims:
            got = len(stores.claims[name])
        elif name in stores.messages:
            got = len(stores.messages[name])
        else:
            got = 0
        if got != int(want):
            diffs.append(f"stores[{name}]: expected {want} entries, got {got}")

    tr = expect.get("trace") or {}
    if "patterns" in tr:
        want, got = list(tr["patterns"]), trace.patterns()
        if not _is_subsequence(want, got):
            diffs.append(f"trace.patterns: {want} is not a subsequence of {got}")
    for event, n in (tr.get("events") or {}).items():
        got = len(trace.of(event))
        if got != int(n):
            diffs.append(f"trace.events[{event}]: expected {n}, got {got}")

    for status, n in (expect.get("instances") or {}).items():
        got = sum(1 for i in engine.instances.values() if i.status.value == status)
        if got != int(n):
            diffs.append(f"instances[{status}]: expected {n}, got {got}")
    return Verdict(not diffs, diffs)


def _is_subsequence(want: list, got: list) -> bool:
    it = iter(got)
    return all(any(w == g for g in it) for w in want)
