"""JSON-ready reports behind each CLI subcommand.

The CLI only parses arguments and prints these; calling them directly gives
identical results. Each report shape has a versioned JSON schema in
``eipflow/data/schemas``.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from eipflow import bpmn
from eipflow.catalog import PROFILES, PatternKind, check_semantics, recognize
from eipflow.engine.probes import run_all
from eipflow.model import Collaboration
from eipflow.scenario import load_scenario, run_scenario
from eipflow.validate import validate_collaboration

SCHEMAS = {
    "validate": "eipflow.validate/1",
    "recognize": "eipflow.recognize/1",
    "profile": "eipflow.profile/1",
    "run": "eipflow.run/1",
}


def schema(command: str) -> dict:
    text = resources.files("eipflow.data").joinpath("schemas", f"{command}.json").read_text(encoding="utf-8")
    return json.loads(text)


def _load(path: str | Path) -> tuple[Collaboration, bpmn.ParseDiagnostics]:
    return bpmn.parse_file(path)


def _diag(d: bpmn.Diagnostic) -> dict:
    return {"severity": d.severity, "line": d.line, "column": d.column, "element": d.element, "reason": d.reason}


def validate_report(path: str | Path) -> dict:
    collab, diag = _load(path)
    violations = validate_collaboration(collab)
    errors = diag.errors or [v for v in violations if v.severity == "error"]
    return {
        "schema": SCHEMAS["validate"],
        "file": str(path),
        "ok": not errors,
        "diagnostics": [_diag(d) for d in diag.errors + diag.warnings],
        "violations": [{"rule": v.rule, "ref": v.ref, "severity": v.severity, "text": v.text} for v in violations],
    }


def recognize_report(path: str | Path) -> list[dict]:
    collab, _ = _load(path)
    return [p.to_dict() for model in collab.processes for p in recognize(model, collab)]


def profile_report(path: str | Path, probe_messages: int = 0, seed: int = 0) -> dict:
    """Static conformance of every recognized instance; optional runtime probes per kind."""
    collab, _ = _load(path)
    patterns = []
    for model in collab.processes:
        for inst in recognize(model, collab):
            prof = PROFILES[inst.kind]
            findings = check_semantics(inst, model)
            patterns.append({
                "kind": inst.kind.value, "anchor": inst.anchor, "process": inst.process,
                "profile": {"message_cardinality": prof.message_cardinality.value,
                            "channel_cardinality": prof.channel_cardinality.value,
                            "message_generating": prof.message_generating, "stateful": prof.stateful,
                            "required_params": list(prof.required_params)},
                "findings": [dict(f.to_dict(), text=f.text) for f in findings],
            })
    runtime = []
    if probe_messages > 0:
        kinds = sorted({p["kind"] for p in patterns})
        runtime = [r.to_dict() for r in run_all(probe_messages, seed, [PatternKind(k) for k in kinds])]
    ok = not any(f["severity"] == "error" for p in patterns for f in p["findings"]) and all(r["ok"] for r in runtime)
    return {"schema": SCHEMAS["profile"], "file": str(path), "ok": ok, "patterns": patterns, "runtime": runtime}


def run_report(path: str | Path, *, seed: int | None = None, clock: str | None = None,
               trace: str | Path | None = None) -> dict:
    sc = load_scenario(path)
    result = run_scenario(sc, seed=seed, clock=clock)
    if trace is not None:
        result.trace.write(trace)
    engine = result.engine
    return {
        "schema": SCHEMAS["run"],
        "scenario": str(path),
        "seed": engine.config.seed,
        "clock": engine.config.clock,
        "passed": result.verdict.passed,
        "diffs": result.verdict.diffs,
        "events": len(result.trace),
        "deliveries": {name: len(engine.deliveries(name)) for name in sorted(engine.broker.channels)},
        "patterns": result.trace.patterns(),
    }
