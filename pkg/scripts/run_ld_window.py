#!/usr/bin/env python3
"""Low-degeneracy window run: find vectors below a declared energy window.

Given (eta, mu), the returned vectors are guaranteed Rayleigh quotients at
most eps0 + eta - mu + delta; this script runs the transverse-field chain at
n=8 and checks the guarantee against the dense spectrum.
"""

import argparse
import sys

import numpy as np

from lowspace.agsp import AgspConfig
from lowspace.hamiltonian import build_model, to_dense
from lowspace.solver import SolveConfig, low_space


def run(n, eta, mu, delta, r, seed):
    h = build_model("tfi", n, {"g": 1.5})
    w = np.linalg.eigvalsh(to_dense(h))
    gamma = float(w[1] - w[0])
    cfg = SolveConfig(
        case="ld", delta=delta, r=r, seed=seed, gamma=gamma, max_bond=48,
        ld_window=(eta, mu), agsp_cfg=AgspConfig(ell=1, max_bond=24),
    )
    states, energies, _ = low_space(h, cfg)
    hd = to_dense(h)
    bound = float(w[0]) + eta - mu + delta
    ok = True
    for i, s in enumerate(states):
        vec = s.to_dense()
        rq = float(np.real(np.vdot(vec, hd @ vec)))
        good = rq <= bound + 1e-9
        ok = ok and good
        print(f"state {i}: Rayleigh {rq:.5f} <= {bound:.5f}  {'OK' if good else 'FAILED'}")
    print(f"dense spectrum head: {np.round(w[:r + 3], 5)}")
    return 0 if ok else 1


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--eta", type=float, default=1.2)
    p.add_argument("--mu", type=float, default=0.6)
    p.add_argument("--delta", type=float, default=1e-2)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--seed", type=int, default=5)
    a = p.parse_args()
    sys.exit(run(a.n, a.eta, a.mu, a.delta, a.r, a.seed))
