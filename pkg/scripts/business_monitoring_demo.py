"""Run the business-monitoring flow once and print what happened.

One FSN payment notification enters from the corporate, is translated to the
canonical model, claim-checked while the bank confirms it, restored,
translated to FSN-ISO and delivered to ODC.
"""

import argparse
import json

from eipflow import body as bt
from eipflow import fixtures
from eipflow.scenario import load_scenario, run_scenario


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--trace", help="also write the trace as JSON lines")
    args = ap.parse_args()

    res = run_scenario(load_scenario(fixtures.scenario_path("business_monitoring")), seed=args.seed)
    for ev in res.trace:
        extra = " ".join(f"{k}={v}" for k, v in sorted(ev.detail.items()))
        print(f"{ev.time:6.2f}  {ev.event:<12} {ev.node or '-':<10} {ev.message or '-':<12} {extra}")
    print()
    print("patterns:", " -> ".join(res.trace.patterns()))
    for m in res.engine.deliveries("ODC"):
        print(f"ODC received {m.id} ({m.body_type}):", json.dumps({m.body.name: bt.to_plain(m.body)}))
    print("claims left:", len(res.engine.stores.claim("claims")))
    print("verdict:", "PASS" if res.verdict.passed else "FAIL " + "; ".join(res.verdict.diffs))
    if args.trace:
        res.trace.write(args.trace)
    return 0 if res.verdict.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
