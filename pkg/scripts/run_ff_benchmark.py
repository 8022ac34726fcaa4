#!/usr/bin/env python3
"""Frustration-free end-to-end sweep: pinned chains n = 8..16.

For each size, runs the solver at delta = 1e-3, checks the overlap with the
dense ground state, and prints per-phase wall-clock times.  Mirrors the
first end-to-end acceptance run; useful for eyeballing scaling.
"""

import argparse
import json
import sys
import tempfile
import time

from lowspace.cli import main as cli_main


def run(sizes, delta, seed):
    rows = []
    for n in sizes:
        with tempfile.NamedTemporaryFile(suffix=".json", delete=False) as f:
            out = f.name
        t0 = time.perf_counter()
        code = cli_main(
            [
                "solve", "--model", "pinned", "--n", str(n), "--case", "ff",
                "--delta", str(delta), "--seed", str(seed), "--out", out,
            ]
        )
        elapsed = time.perf_counter() - t0
        if code != 0:
            print(f"n={n}: solver exited {code}", file=sys.stderr)
            return 1
        rep = json.load(open(out))
        overlap = rep.get("final_overlap")
        rows.append((n, elapsed, overlap, rep["wall_clock"]))
        print(
            f"n={n:3d}  {elapsed:7.1f}s  overlap={overlap if overlap is not None else 'n/a'}"
            f"  phases={{{', '.join(f'{k}: {v:.1f}s' for k, v in rep['wall_clock'].items())}}}"
        )
    bad = [n for n, _, o, _ in rows if o is not None and o < 1 - delta]
    print("all overlaps within tolerance" if not bad else f"FAILED sizes: {bad}")
    return 0 if not bad else 1


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sizes", default="8,9,10,11,12,13,14,15,16")
    p.add_argument("--delta", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=1)
    a = p.parse_args()
    sys.exit(run([int(x) for x in a.sizes.split(",")], a.delta, a.seed))
