#!/usr/bin/env python3
"""Finite-dimensional matrix-field battery against the brute-force oracle.

Checks curvature closed forms, the subfield curvature decomposition, and
rank-k positivity verdicts on seeded random Hermitian forms.
"""

import argparse
import json

from toruslab.cli import bls_battery
from toruslab.config import config_from_dict


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--instances", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--step", type=float, default=1e-3)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    cfg = config_from_dict({"seed": args.seed,
                            "bls": {"instances": args.instances,
                                    "step": args.step}})
    battery = bls_battery(cfg)
    summary = {k: v for k, v in battery.items() if k != "instances_checked"}
    text = json.dumps(summary, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(battery, fh, indent=2, sort_keys=True)
        print(f"wrote full battery to {args.out}")
    print(text)
    ok = (not battery["disagreements"]
          and not battery["monotonicity_violations"]
          and battery["griffiths_not_nakano"] == {"one_positive": True,
                                                  "two_positive": False})
    print("verdict:", "pass" if ok else "FAIL")


if __name__ == "__main__":
    main()
