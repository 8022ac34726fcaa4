#!/usr/bin/env python3
"""Run every invariant-check suite and write one JSON report per suite."""

import argparse
import json
import pathlib
import sys
import time

from lowspace.verify import SUITES, run_suite


def run(outdir, n, seed):
    outdir = pathlib.Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    all_ok = True
    for name in sorted(SUITES):
        t0 = time.time()
        report = run_suite(name, n=n, seed=seed)
        path = outdir / f"verify_{name}.json"
        path.write_text(json.dumps(report, indent=2))
        status = "ok" if report["passed"] else f"FAILED {report['failed']}"
        all_ok = all_ok and report["passed"]
        print(f"{name:12s} {len(report['checks']):3d} checks  {status}  "
              f"({time.time() - t0:.1f}s) -> {path}")
    return 0 if all_ok else 1


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--outdir", default="verify_reports")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args()
    sys.exit(run(a.outdir, a.n, a.seed))
