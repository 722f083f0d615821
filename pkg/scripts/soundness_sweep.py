#!/usr/bin/env python3
"""Cross-check every bundled system's fixpoint against bounded exploration."""

import argparse
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from picount.analysis import AnalysisConfig, check_soundness

CORPUS = os.path.join(os.path.dirname(__file__), "..", "corpus")
SYSTEMS = ["memory.pi", "semaphore2.pi", "synccomm.pi", "objects.pi", "dlist.pi"]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--max-configs", type=int, default=5000)
    ap.add_argument("--partition", default="chan")
    args = ap.parse_args()
    failures = 0
    for name in SYSTEMS:
        t0 = time.time()
        oracle, result = check_soundness(
            AnalysisConfig(
                path=os.path.join(CORPUS, name),
                partition=args.partition,
                max_configs=args.max_configs,
            )
        )
        status = "ok" if not oracle.violations else f"{len(oracle.violations)} VIOLATIONS"
        print(
            f"{name:<15} {oracle.configs_visited:>6} configs "
            f"{oracle.states_visited:>6} states "
            f"{'truncated ' if oracle.truncated else 'exhaustive'} "
            f"{time.time() - t0:5.1f}s  {status}"
        )
        for v in oracle.violations[:5]:
            print(f"    {v}")
        failures += bool(oracle.violations)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
