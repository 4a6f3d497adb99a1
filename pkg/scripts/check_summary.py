#!/usr/bin/env python3
"""Recompute run-summary verdicts from trajectory.csv and compare against
summary.json. Deliberately independent of the package: stdlib only.

Usage: check_summary.py <run_dir>   (exit 0 on agreement)
"""
import csv
import json
import sys
from pathlib import Path


def main(run_dir: str) -> int:
    run = Path(run_dir)
    with open(run / "trajectory.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        print("FAIL: empty trajectory.csv")
        return 1
    with open(run / "summary.json") as fh:
        summary = json.load(fh)["summary"]

    phi = [float(r["phi"]) for r in rows]
    s = [float(r["s"]) for r in rows]
    p = [float(r["p_k"]) for r in rows if r["p_k"] != ""]
    e = [float(r["E"]) for r in rows if r["E"] != ""]

    recomputed = {
        "final_phi_abs": abs(phi[-1]),
        "final_s_abs": abs(s[-1]),
        "momentum_drift": max(abs(v - p[0]) for v in p) if p else 0.0,
        "energy_band": (max(e) - min(e)) if e else 0.0,
    }

    ok = True
    for key, value in recomputed.items():
        stored = summary.get(key)
        agree = stored is not None and stored == value
        print(f"{'PASS' if agree else 'FAIL'}: {key} csv={value!r} summary={stored!r}")
        ok = ok and agree
    return 0 if ok else 1


if __name__ == "__main__":
    if len(sys.argv) != 2:
        print(__doc__)
        sys.exit(2)
    sys.exit(main(sys.argv[1]))
