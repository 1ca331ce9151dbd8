"""Probe every pattern kind at runtime and print a conformance table."""

import argparse
import sys
import time

from eipflow.catalog import PROFILES
from eipflow.engine.probes import reports_json, run_all


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-n", "--messages", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", action="store_true", help="print the reports as JSON instead")
    args = ap.parse_args()

    t0 = time.perf_counter()
    reports = run_all(args.messages, args.seed)
    if args.json:
        print(reports_json(reports))
    else:
        print(f"{'kind':<24}{'msg':<12}{'channels':<12}{'gen':<5}{'state':<7}{'in':>6}{'units':>7}  result")
        for r in reports:
            p = PROFILES[r.kind]
            verdict = "ok" if r.ok else f"{len(r.violations)} violations: {r.violations[0].detail}"
            print(f"{r.kind.value:<24}{p.message_cardinality.value:<12}{p.channel_cardinality.value:<12}"
                  f"{'y' if p.message_generating else 'n':<5}{'y' if p.stateful else 'n':<7}"
                  f"{r.messages:>6}{r.units:>7}  {verdict}")
        print(f"{sum(r.ok for r in reports)}/{len(reports)} kinds conform ({time.perf_counter() - t0:.1f}s)")
    return 0 if all(r.ok for r in reports) else 1


if __name__ == "__main__":
    sys.exit(main())
