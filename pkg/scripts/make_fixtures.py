"""Regenerate the bundled .bpmn fixtures from their builders."""

import argparse
from pathlib import Path

from eipflow import bpmn
from eipflow.fixtures import FIXTURES

OUT = Path(__file__).resolve().parents[1] / "src" / "eipflow" / "fixtures"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=OUT)
    args = ap.parse_args()
    for name, (builder, _) in FIXTURES.items():
        target = args.out / f"{name}.bpmn"
        target.write_bytes(bpmn.serialize(builder()))
        print(target)


if __name__ == "__main__":
    main()
