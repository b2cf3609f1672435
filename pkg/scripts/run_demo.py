#!/usr/bin/env python3
"""Run the bundled demo scenarios and collect their artifacts under out/.

Usage: python scripts/run_demo.py [--out OUT_DIR]
"""

import argparse
import json
from pathlib import Path

from conicscatter import harness as hh

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="out")
    parser.add_argument(
        "--skip-theorem", action="store_true", help="skip the long end-to-end check"
    )
    args = parser.parse_args()

    for path in sorted(SCENARIOS.glob("*.json")):
        if args.skip_theorem and "theorem" in path.name:
            print(f"skipping {path.name}")
            continue
        cfg = hh.load_config(path)
        sc = hh.validate_config(cfg, out_dir=args.out)
        print(f"running {path.name} ...", flush=True)
        res = hh.run_scenario(sc)
        line = res.get("agreement", res.get("status", "ok"))
        print(f"  -> {res['experiment']}: {line}")
    print(f"artifacts in {args.out}/")


if __name__ == "__main__":
    main()
