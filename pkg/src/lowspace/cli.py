"""Command-line driver: ``solve``, ``verify``, and ``bench`` subcommands.

Reports are JSON (``"schema": 1``) embedding the fully resolved configuration
and seed; bench emits CSV.  Output files are written atomically (temporary
file in the destination directory, then rename).  Exit codes: 0 success,
1 configuration error, 2 resource error (with a partial report when one
exists).  The environment variable LOWSPACE_THREADS caps the BLAS worker
count for the whole run.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from .agsp import AgspConfig
from .hamiltonian import MODEL_NAMES, build_model, load_custom_terms, to_dense
from .oracle import DenseSubspace, columns_from_states, mutual_closeness
from .solver import SolveConfig, low_space
from .tensor import DimensionError, NumericError
from .verify import SUITES, run_suite

__all__ = ["main", "run_solve", "run_verify", "run_bench"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RESOURCE = 2


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2, default=float)
    if out:
        _atomic_write(out, text)
    else:
        print(text)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lowspace",
        description="Low-energy subspace solver for 1D local Hamiltonians",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", type=str, default=None, help="report file path")
    common.add_argument("--n", type=int, default=8)

    solve = sub.add_parser("solve", parents=[common], help="run the merge-tree solver")
    solve.add_argument("--model", type=str, required=True,
                       help=f"catalog name ({', '.join(MODEL_NAMES)})")
    solve.add_argument("--terms", type=str, default=None,
                       help="JSON file with custom terms (model=custom)")
    solve.add_argument("--case", type=str, choices=("ff", "dg", "ld"), default="ff")
    solve.add_argument("--delta", type=float, default=1e-3)
    solve.add_argument("--gamma", type=float, default=None, help="spectral gap hint")
    solve.add_argument("--r", type=int, default=None,
                       help="target space dimension (default: model hint or 1)")
    solve.add_argument("--eta", type=float, default=None, help="ld window top")
    solve.add_argument("--mu", type=float, default=None, help="ld window depth")
    solve.add_argument("--s-cap", type=int, default=None)
    solve.add_argument("--k-inner", type=int, default=2)
    solve.add_argument("--xi", type=float, default=0.0)
    solve.add_argument("--max-bond", type=int, default=64)
    solve.add_argument("--agsp-ell", type=int, default=1)
    solve.add_argument("--agsp-k", type=int, default=None)
    solve.add_argument("--agsp-max-bond", type=int, default=24)
    solve.add_argument("--paper-constants", action="store_true")
    solve.add_argument("--dense-limit", type=int, default=2**14)
    solve.add_argument("--g", type=float, default=None, help="tfi transverse field")

    verify = sub.add_parser("verify", parents=[common], help="run an invariant-check suite")
    verify.add_argument("--suite", type=str, required=True,
                        help=f"one of: {', '.join(sorted(SUITES))}")

    bench = sub.add_parser("bench", parents=[common], help="time solves across sizes")
    bench.add_argument("--model", type=str, default="pinned")
    bench.add_argument("--case", type=str, choices=("ff", "dg", "ld"), default="ff")
    bench.add_argument("--delta", type=float, default=1e-3)
    bench.add_argument("--sizes", type=str, default="8,16,32",
                       help="comma-separated chain lengths")
    bench.add_argument("--max-bond", type=int, default=64)
    return parser


def _resolved_config(cfg: SolveConfig, model: str, n: int) -> dict:
    out = dataclasses.asdict(cfg)
    out["model"] = model
    out["n"] = n
    return out


def _build_hamiltonian(args):
    params = {}
    if args.gamma is not None:
        params["gamma"] = args.gamma
    if getattr(args, "g", None) is not None:
        params["g"] = args.g
    if args.model == "custom":
        if not args.terms:
            raise NumericError("custom model needs --terms <file>")
        with open(args.terms) as f:
            spec = json.load(f)
        return load_custom_terms(spec, gap_hint=args.gamma)
    return build_model(args.model, args.n, params)


def _oracle_comparison(h, states, energies, dense_limit: int) -> dict:
    """Overlap and closeness of the returned span against the dense
    low-energy space, when the chain is small enough to diagonalize."""
    dim = h.d**h.n
    if dim > dense_limit or dim * dim > 2**26:
        return {"oracle": "unavailable"}
    w, v = np.linalg.eigh(to_dense(h))
    r = len(states)
    target = DenseSubspace.from_vectors([v[:, i] for i in range(r)])
    cols = columns_from_states(states)
    got = DenseSubspace.from_vectors([cols[:, i] for i in range(cols.shape[1])])
    proj = target.projector()
    overlaps = [float(np.linalg.norm(proj @ cols[:, i])) for i in range(cols.shape[1])]
    return {
        "oracle_eps0": float(w[0]),
        "oracle_energies": [float(x) for x in w[:r]],
        "final_overlap": min(overlaps),
        "state_overlaps": overlaps,
        "mutual_closeness": float(mutual_closeness(target, got)),
    }


def run_solve(args) -> int:
    try:
        h = _build_hamiltonian(args)
        r = args.r if args.r is not None else (h.degeneracy_hint or 1)
        ld_window = None
        if args.case == "ld":
            if args.eta is None or args.mu is None:
                raise NumericError("ld case needs --eta and --mu")
            ld_window = (args.eta, args.mu)
        cfg = SolveConfig(
            case=args.case,
            delta=args.delta,
            r=r,
            s_cap=args.s_cap,
            k_inner=args.k_inner,
            xi=args.xi,
            max_bond=args.max_bond,
            agsp_cfg=AgspConfig(
                ell=args.agsp_ell, k=args.agsp_k, max_bond=args.agsp_max_bond
            ),
            seed=args.seed,
            dense_limit=args.dense_limit,
            gamma=args.gamma,
            ld_window=ld_window,
            paper_constants=args.paper_constants,
        )
    except (NumericError, DimensionError, OSError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    report = {
        "schema": 1,
        "command": "solve",
        "config": _resolved_config(cfg, args.model, args.n),
        "seed": args.seed,
    }
    try:
        states, energies, run = low_space(h, cfg)
    except MemoryError as exc:
        report["error"] = f"resource exhausted: {exc}"
        _emit(report, args.out)
        return EXIT_RESOURCE
    except (NumericError, DimensionError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        report["error"] = str(exc)
        _emit(report, args.out)
        return EXIT_CONFIG

    report.update(
        {
            "energies": [float(e) for e in energies],
            "levels": [
                {"level": lv.level, "blocks": lv.blocks} for lv in run.levels
            ],
            "entropies": run.entropies,
            "schmidt_ranks": run.schmidt_ranks,
            "wall_clock": run.wall_clock,
            "notes": run.notes,
        }
    )
    report.update(_oracle_comparison(h, states, energies, args.dense_limit))
    _emit(report, args.out)
    if args.out:
        summary = ", ".join(f"{e:.6g}" for e in report["energies"])
        print(f"solve ok: energies [{summary}] -> {args.out}")
    return EXIT_OK


def run_verify(args) -> int:
    if args.suite not in SUITES:
        print(
            f"unknown suite {args.suite!r}; known: {', '.join(sorted(SUITES))}",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    report = run_suite(args.suite, n=args.n, seed=args.seed)
    report["command"] = "verify"
    _emit(report, args.out)
    failed = report["failed"]
    status = "ok" if not failed else f"FAILED: {', '.join(failed)}"
    print(f"verify {args.suite}: {len(report['checks'])} checks, {status}")
    return EXIT_OK if not failed else EXIT_CONFIG


def run_bench(args) -> int:
    try:
        sizes = [int(x) for x in args.sizes.split(",") if x.strip()]
        if not sizes:
            raise ValueError("empty size list")
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rows = ["n,phase,wall_clock_s,peak_bond"]
    totals = []
    for n in sizes:
        h = build_model(args.model, n)
        cfg = SolveConfig(
            case=args.case, delta=args.delta, seed=args.seed, max_bond=args.max_bond
        )
        t0 = time.perf_counter()
        states, _, run = low_space(h, cfg)
        total = time.perf_counter() - t0
        peak = max(
            [b["max_bond"] for lv in run.levels for b in lv.blocks]
            + [max(s.bond_dims) for s in states]
        )
        for phase, wall in run.wall_clock.items():
            rows.append(f"{n},{phase},{wall:.4f},{peak}")
        rows.append(f"{n},total,{total:.4f},{peak}")
        totals.append((n, total))
    if len(totals) >= 2:
        logs = np.log([t for _, t in totals])
        logn = np.log([n for n, _ in totals])
        slope = float(np.polyfit(logn, logs, 1)[0])
        rows.append(f"#growth-rate,log-log-slope,{slope:.4f},")
    text = "\n".join(rows) + "\n"
    if args.out:
        _atomic_write(args.out, text)
        print(f"bench ok -> {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    threads = os.environ.get("LOWSPACE_THREADS")
    limiter = None
    if threads:
        try:
            from threadpoolctl import threadpool_limits

            limiter = threadpool_limits(limits=int(threads))
        except (ImportError, ValueError):
            pass
    try:
        if args.command == "solve":
            return run_solve(args)
        if args.command == "verify":
            return run_verify(args)
        return run_bench(args)
    finally:
        if limiter is not None:
            limiter.unregister()


if __name__ == "__main__":
    sys.exit(main())
