"""``eipflow`` command line.

Exit codes: 0 clean/pass, 1 violations or failed expectations, 2 usage or
input errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from eipflow import reports
from eipflow.bpmn import UnsupportedRoot, XmlError
from eipflow.scenario import ScenarioError

log = logging.getLogger("eipflow")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")

    ap = argparse.ArgumentParser(prog="eipflow", description="Integration flows modelled in BPMN.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="parse and check a BPMN file")
    p.add_argument("file")
    p = sub.add_parser("recognize", parents=[common], help="list the integration patterns in a BPMN file")
    p.add_argument("file")
    p = sub.add_parser("profile", parents=[common], help="check recognized patterns against their profiles")
    p.add_argument("file")
    p.add_argument("--probe", type=int, default=0, metavar="N",
                   help="also probe each recognized kind at runtime with N random messages")
    p.add_argument("--seed", type=int, default=0)
    p = sub.add_parser("run", parents=[common], help="execute a scenario and check its expectations")
    p.add_argument("scenario")
    p.add_argument("--trace", metavar="PATH", help="write the engine trace as JSON lines")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--clock", choices=("logical", "wall"), default=None)
    return ap


def _text_validate(rep: dict) -> tuple[str, int]:
    lines = [f"{d['line']}:{d['column']}: {d['severity']}: <{d['element']}> {d['reason']}" for d in rep["diagnostics"]]
    lines += [f"{v['severity']}: {v['rule']} {v['ref']}: {v['text']}" for v in rep["violations"]]
    lines.append(f"{rep['file']}: {'ok' if rep['ok'] else 'invalid'}")
    return "\n".join(lines), EXIT_OK if rep["ok"] else EXIT_FAIL


def _text_recognize(rep: list[dict]) -> str:
    if not rep:
        return "no patterns recognized"
    lines = []
    for p in rep:
        params = ", ".join(f"{k}={v}" for k, v in p["params"].items())
        weak = " (weak)" if p["strength"] == "weak" else ""
        lines.append(f"{p['kind']:<22} {p['process']}/{p['anchor']}{weak}  {params}".rstrip())
    return "\n".join(lines)


def _text_profile(rep: dict) -> str:
    lines = []
    for p in rep["patterns"]:
        prof = p["profile"]
        head = (f"{p['kind']:<22} {p['anchor']:<16} msg {prof['message_cardinality']}, "
                f"channels {prof['channel_cardinality']}, "
                f"{'generating' if prof['message_generating'] else 'non-generating'}, "
                f"{'stateful' if prof['stateful'] else 'stateless'}")
        status = "ok" if not p["findings"] else "; ".join(f"{f['rule']}: {f['text']}" for f in p["findings"])
        lines.append(f"{head}: {status}")
    for r in rep["runtime"]:
        lines.append(f"runtime {r['kind']:<22} {r['messages']} messages: "
                     f"{'ok' if r['ok'] else str(len(r['violations'])) + ' violations'}")
    lines.append("conformant" if rep["ok"] else "not conformant")
    return "\n".join(lines)


def _text_run(rep: dict) -> str:
    lines = [f"{'PASS' if rep['passed'] else 'FAIL'} {rep['scenario']} (seed {rep['seed']}, {rep['events']} events)"]
    lines += [f"  {d}" for d in rep["diffs"]]
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    as_json = args.format == "json"
    try:
        if args.command == "validate":
            rep = reports.validate_report(args.file)
            text, code = _text_validate(rep)
        elif args.command == "recognize":
            rep = reports.recognize_report(args.file)
            text, code = _text_recognize(rep), EXIT_OK
        elif args.command == "profile":
            rep = reports.profile_report(args.file, args.probe, args.seed)
            text, code = _text_profile(rep), EXIT_OK if rep["ok"] else EXIT_FAIL
        else:
            rep = reports.run_report(args.scenario, seed=args.seed, clock=args.clock, trace=args.trace)
            text, code = _text_run(rep), EXIT_OK if rep["passed"] else EXIT_FAIL
    except (OSError, XmlError, UnsupportedRoot, ScenarioError) as exc:
        print(f"eipflow: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps(rep, indent=2, sort_keys=True) if as_json else text)
    return code


if __name__ == "__main__":
    sys.exit(main())
