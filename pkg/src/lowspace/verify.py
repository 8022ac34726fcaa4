"""Invariant verification suites runnable from the command line.

Each suite builds seeded instances, measures a quantity against the dense
oracle, and compares it with the bound the library promises for that
quantity.  A check is a dict with ``name`` / ``instance`` / ``measured`` /
``bound`` / ``passed``; a suite report passes iff every check does.  The
``verify`` CLI subcommand serializes these reports as JSON.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import expm

from .agsp import AgspConfig, ChebyParams, chebyshev_eval, generate
from .hamiltonian import (
    LocalHamiltonian,
    Region,
    build_model,
    restrict,
    to_dense,
    to_mpo,
    to_projectors,
)
from .mps import MPS, orthonormal_span, trim_collective
from .oracle import (
    DenseSubspace,
    columns_from_states,
    exact_agsp,
    spectral_subspace,
    viability,
)
from .solver import SolveConfig, final_refine, low_space
from .tensor import haar_isometry, spawn_rng
from .truncation import (
    SoftTruncParams,
    cluster_expansion_mpo,
    dl_operator,
    ff_truncate,
    soft_series_eval,
    soft_truncate_mpo,
)
from .viable import ViableSet, error_reduce, random_subspace, tensor_sets

__all__ = ["SUITES", "run_suite"]


def _check(name: str, instance: str, measured: float, bound: float) -> dict:
    return {
        "name": name,
        "instance": instance,
        "measured": float(measured),
        "bound": float(bound),
        "passed": bool(measured <= bound),
    }


def _report(suite: str, n: int, seed: int, checks: list[dict]) -> dict:
    failed = [c["name"] for c in checks if not c["passed"]]
    return {
        "schema": 1,
        "suite": suite,
        "n": n,
        "seed": seed,
        "checks": checks,
        "failed": failed,
        "passed": not failed,
    }


# ---------------------------------------------------------------------------
# dense helpers shared by several suites


def _dense_viable(region: Region, cols: np.ndarray, d: int) -> ViableSet:
    dims = [d] * region.length
    basis = [MPS.from_dense(cols[:, i], dims) for i in range(cols.shape[1])]
    return ViableSet(region=region, basis=basis)


def _as_subspace(v: ViableSet) -> DenseSubspace:
    cols = columns_from_states(v.basis)
    return DenseSubspace.from_vectors([cols[:, i] for i in range(v.dim)])


def _measure_viability(h: LocalHamiltonian, v: ViableSet, t: DenseSubspace) -> float:
    left = h.d ** (v.region.start - 1)
    right = h.d ** (h.n - v.region.end)
    return viability(_as_subspace(v), t, left_dim=left, right_dim=right)


def _region_support(t: DenseSubspace, left: int, block: int, right: int) -> np.ndarray:
    """Orthonormal columns spanning the target's reduced support on a block."""
    stacked = []
    for i in range(t.dim):
        v = t.basis[:, i].reshape(left, block, right)
        stacked.append(v.transpose(1, 0, 2).reshape(block, left * right))
    m = np.concatenate(stacked, axis=1)
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    keep = s > 1e-12 * max(float(s[0]) if s.size else 0.0, 1e-300)
    return u[:, keep]


def _tilted_viable(
    h: LocalHamiltonian, region: Region, t: DenseSubspace, angle: float, seed: int
) -> ViableSet:
    """Target block support rotated by ``angle`` toward random orthogonal
    directions: viability error ~ sin^2(angle), strictly below 1."""
    left = h.d ** (region.start - 1)
    right = h.d ** (h.n - region.end)
    block = h.d**region.length
    support = _region_support(t, left, block, right)
    r = support.shape[1]
    comp_dim = block - r
    if comp_dim == 0:
        return _dense_viable(region, support, h.d)
    rng = spawn_rng(seed, 0x7E1)
    u_full, _, _ = np.linalg.svd(support, full_matrices=True)
    comp = u_full[:, r:]
    mix = rng.standard_normal((comp_dim, comp_dim)) + 1j * rng.standard_normal(
        (comp_dim, comp_dim)
    )
    qmix, _ = np.linalg.qr(mix)
    comp = comp @ qmix
    tilt = min(r, comp_dim)
    cols = support.copy()
    cols[:, :tilt] = math.cos(angle) * support[:, :tilt] + math.sin(angle) * comp[:, :tilt]
    return _dense_viable(region, cols, h.d)


def _ground_space(h: LocalHamiltonian) -> tuple[float, DenseSubspace]:
    w = np.linalg.eigvalsh(to_dense(h))
    eps0 = float(w[0])
    return eps0, spectral_subspace(h, eps0 - 1e-9, eps0 + 1e-9)


# ---------------------------------------------------------------------------
# suites


def suite_viable(n: int = 8, seed: int = 0) -> dict:
    """Tensoring subadditivity, sampling retention, error reduction, and the
    preimage-witness norm, each measured with the dense oracle."""
    checks = []
    for i in range(4):
        rng = spawn_rng(seed, 0xA1, i)
        nn = max(6, min(n, 8))
        cut = int(rng.integers(2, nn - 1))
        h = build_model("heisenberg" if i % 2 else "tfi", nn, {"g": 1.2})
        eps0, t = _ground_space(h)
        v1 = _tilted_viable(h, Region(1, cut), t, float(rng.uniform(0.1, 0.6)), seed + 2 * i)
        v2 = _tilted_viable(h, Region(cut + 1, nn), t, float(rng.uniform(0.1, 0.6)), seed + 2 * i + 1)
        d1 = _measure_viability(h, v1, t)
        d2 = _measure_viability(h, v2, t)
        d12 = _measure_viability(h, tensor_sets(v1, v2), t)
        checks.append(
            _check("tensor-subadditivity", f"{h.n}-site #{i}", d12, min(d1 + d2, 1.0) + 1e-6)
        )
        # preimage witness: the restriction of the extended projector to the
        # target is invertible with norm at most 1/(1-delta)
        left = 1
        right = h.d ** (h.n - cut)
        p_ext = np.kron(np.kron(np.eye(left), _as_subspace(v1).projector()), np.eye(right))
        m = t.basis.conj().T @ p_ext @ t.basis
        wmin = float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])
        witness_norm = 1.0 / math.sqrt(max(wmin, 1e-300))
        checks.append(
            _check("witness-norm", f"{h.n}-site #{i}", witness_norm, 1.0 / (1.0 - d1) + 1e-6)
        )

    # mean sampling retention: s of q keeps s/q of a unit target on average
    q, s = 16, 4
    w = _dense_viable(Region(1, 4), np.eye(q), 2)
    rng = spawn_rng(seed, 0xA2)
    t_vec = rng.standard_normal(q) + 1j * rng.standard_normal(q)
    t_vec /= np.linalg.norm(t_vec)
    retentions = []
    for k in range(200):
        sub = random_subspace(w, s, seed=seed * 1000 + k)
        cols = columns_from_states(sub.basis)
        retentions.append(float(np.linalg.norm(cols.conj().T @ t_vec) ** 2))
    retentions = np.asarray(retentions)
    stderr = retentions.std() / math.sqrt(len(retentions))
    checks.append(
        _check(
            "sampling-mean-retention",
            f"s={s} q={q} x200",
            abs(float(retentions.mean()) - s / q),
            3 * stderr + 1e-3,
        )
    )

    # spectral error reduction on a pinned chain with an exact amplifier
    for i in range(3):
        rng = spawn_rng(seed, 0xA3, i)
        nn = max(6, min(n, 8))
        h = build_model("pinned", nn)
        t = spectral_subspace(h, -1e-9, 0.5)
        m_region = Region(2, nn - 1)
        v = _tilted_viable(h, m_region, t, float(rng.uniform(0.2, 0.8)), seed + 100 + i)
        bundle = generate(h, m_region, 0.0, "ff", cfg=AgspConfig(ell=1, k=6, max_bond=64))
        d0 = _measure_viability(h, v, t)
        out, _ = error_reduce(v, bundle, xi=0.0, max_bond=96)
        d1 = _measure_viability(h, out, t)
        checks.append(
            _check(
                "error-reduction-spectral",
                f"pinned {nn}-site #{i}",
                d1,
                bundle.Delta_measured / (1 - d0) ** 2 + 1e-6,
            )
        )
        checks.append(
            _check(
                "error-reduction-dimension",
                f"pinned {nn}-site #{i}",
                out.dim,
                bundle.D_measured**2 * v.dim,
            )
        )
    return _report("viable", n, seed, checks)


def suite_agsp(n: int = 8, seed: int = 0) -> dict:
    """Spectral amplifier contract: the dense operator is the polynomial of
    the Hamiltonian, fixes the low window, and shrinks the high window."""
    checks = []
    models = [("pinned", {}), ("tfi", {"g": 1.5}), ("heisenberg", {}), ("tfi", {"g": 0.8}), ("pinned", {})]
    for i, (name, params) in enumerate(models):
        rng = spawn_rng(seed, 0xB1, i)
        nn = min(n, 8)
        h = build_model(name, nn, params)
        dense = to_dense(h)
        w, v = np.linalg.eigh(dense)
        spread = float(w[-1] - w[0])
        k = int(rng.integers(4, 9))
        eta0 = float(w[0]) + 0.02 * spread
        eta1 = float(w[0]) + float(rng.uniform(0.2, 0.5)) * spread
        p = ChebyParams(k=k, eta0=eta0, eta1=eta1, norm_bound=float(w[-1]))
        kd = exact_agsp(dense, p)
        label = f"{name} n={nn} k={k}"
        diag = v.conj().T @ kd @ v
        expected = np.diag(chebyshev_eval(p, w))
        checks.append(
            _check("eigenvalue-map", label, float(np.abs(diag - expected).max()), 1e-8)
        )
        low = w <= eta0
        if low.any():
            vals = chebyshev_eval(p, w[low])
            checks.append(_check("low-window-floor", label, float(1.0 - vals.min()), 1e-8))
        high = w >= eta1
        if high.any():
            vals = np.abs(chebyshev_eval(p, w[high]))
            checks.append(
                _check("high-window-shrinkage", label, float(vals.max()),
                       math.sqrt(p.delta_bound) + 1e-8)
            )

    # shrinkage is monotone in the polynomial degree
    h = build_model("tfi", min(n, 8), {"g": 1.5})
    w = np.linalg.eigvalsh(to_dense(h))
    spread = float(w[-1] - w[0])
    last = None
    worst = 0.0
    for k in range(2, 9):
        p = ChebyParams(k=k, eta0=float(w[0]) + 0.02 * spread,
                        eta1=float(w[0]) + 0.3 * spread, norm_bound=float(w[-1]))
        delta = float(np.abs(chebyshev_eval(p, w[w >= p.eta1])).max())
        if last is not None:
            worst = max(worst, delta - last)
        last = delta
    checks.append(_check("shrinkage-monotone-in-degree", "tfi k=2..8", worst, 1e-12))

    # the MPO recurrence reproduces the dense polynomial when uncompressed
    h = build_model("pinned", min(n, 8))
    bundle = generate(h, Region(2, h.n - 1), 0.0, "ff",
                      cfg=AgspConfig(ell=1, k=5, max_bond=4096, cutoff=1e-14))
    kd = exact_agsp(bundle.truncated_mpo.to_dense(), bundle.params)
    err = float(np.linalg.norm(bundle.k_mpo.to_dense() - kd, 2))
    checks.append(_check("mpo-matches-dense", f"pinned n={h.n} k=5", err, 1e-8))
    return _report("agsp", n, seed, checks)


def suite_cluster(n: int = 6, seed: int = 0) -> dict:
    """Truncated exponential series: operator-norm error bound, bond cap, and
    exactness once the order exceeds the chain length."""
    checks = []
    nn = min(n, 7)
    for name in ("pinned", "tfi"):
        h = build_model(name, nn)
        dense = to_dense(h)
        for beta in (0.1, 0.25):
            exact = expm(-beta * dense)
            for r in (3, 4, 5):
                m = cluster_expansion_mpo(h, beta, r)
                err = float(np.linalg.norm(m.to_dense() - exact, 2))
                bound = math.exp(nn**2 * (math.exp(beta) - 1) ** r) - 1
                label = f"{name} n={nn} beta={beta} r={r}"
                checks.append(_check("operator-norm-bound", label, err, bound))
                checks.append(_check("bond-cap", label, m.max_bond, r**2 * h.d**r))
        m = cluster_expansion_mpo(h, 0.2, nn + 2)
        err = float(np.linalg.norm(m.to_dense() - expm(-0.2 * dense), 2))
        checks.append(_check("high-order-exact", f"{name} n={nn} r={nn + 2}", err, 1e-9))
    return _report("cluster", n, seed, checks)


def suite_trim(n: int = 8, seed: int = 0) -> dict:
    """Collective trimming: Schmidt-rank cap, discarded-weight accounting,
    and the advertised span-loss penalty."""
    checks = []

    def random_span(nn, s, key):
        rng = spawn_rng(seed, 0xD1, key)
        cols = haar_isometry(2**nn, s, rng)
        return orthonormal_span([MPS.from_dense(cols[:, i], [2] * nn) for i in range(s)])

    for i, xi in enumerate((0.05, 0.2, 0.35)):
        s = 3
        nn = min(n, 8)
        basis = random_span(nn, s, i)
        out, rep = trim_collective(basis, xi=xi)
        cap = int(np.floor(s / xi**2))
        worst_bond = max(max(v.bond_dims) for v in out)
        label = f"n={nn} s={s} xi={xi}"
        checks.append(_check("schmidt-rank-cap", label, worst_bond, cap))
        joint_err = sum(
            np.linalg.norm(v.to_dense() - u.to_dense()) ** 2 for v, u in zip(basis, out)
        )
        checks.append(
            _check("discarded-weight-accounting", label,
                   abs(joint_err - rep.discarded_weight_total), 1e-8)
        )
        checks.append(
            _check("penalty-formula", label,
                   abs(rep.viability_penalty_bound - math.sqrt(rep.cut_count * s) * xi),
                   1e-12)
        )
    basis = random_span(min(n, 8), 3, 99)
    out, rep = trim_collective(basis, xi=0.0)
    p1 = sum(np.outer(v.to_dense(), v.to_dense().conj()) for v in basis)
    p2 = sum(np.outer(v.to_dense(), v.to_dense().conj()) for v in out)
    checks.append(
        _check("zero-threshold-preserves-span", f"n={min(n, 8)}",
               float(np.abs(p1 - p2).max()), 1e-9)
    )
    return _report("trim", n, seed, checks)


def _rotated_pin_model(n: int, angle: float) -> LocalHamiltonian:
    """Commuting projector chain pinning every site to cos|0> + sin|1>."""
    w = np.array([math.cos(angle), math.sin(angle)], dtype=np.complex128)
    ww = np.kron(w, w)
    term = np.eye(4, dtype=np.complex128) - np.outer(ww, ww.conj())
    return LocalHamiltonian(n=n, d=2, terms=[term.copy() for _ in range(n - 1)],
                           gap_hint=1.0, degeneracy_hint=1)


def suite_dl(n: int = 8, seed: int = 0) -> dict:
    """Two-layer detectability operator: for every eigenvector with energy E,
    1 - 4E <= |DL psi|^2 <= 1/(E/4 + 1)."""
    checks = []
    models = [
        ("pinned", to_projectors(build_model("pinned", min(n, 8)))),
        ("aklt", to_projectors(build_model("aklt", min(n, 6)))),
        ("rotated-pin", _rotated_pin_model(min(n, 8), 0.35)),
    ]
    for label, h in models:
        dl = dl_operator(h).to_dense()
        w, v = np.linalg.eigh(to_dense(h))
        worst_upper = -np.inf
        worst_lower = -np.inf
        for k in range(len(w)):
            nrm2 = float(np.linalg.norm(dl @ v[:, k]) ** 2)
            worst_upper = max(worst_upper, nrm2 - 1.0 / (w[k] / 4 + 1))
            worst_lower = max(worst_lower, (1 - 4 * w[k]) - nrm2)
        checks.append(_check("dl-upper", f"{label} n={h.n}", worst_upper, 1e-9))
        checks.append(_check("dl-converse", f"{label} n={h.n}", worst_lower, 1e-9))
    return _report("dl", n, seed, checks)


def suite_truncation(n: int = 8, seed: int = 0) -> dict:
    """Soft-truncation scalar and operator bounds plus the frustration-free
    truncation audits (kernel, gap floor, bond cap)."""
    checks = []
    t, tp = 12.0, 4
    xs = np.linspace(0.0, 30.0 * t, 10_001)
    hvals = np.array([soft_series_eval(x, t, tp) for x in xs])
    lin_violation = float(np.max(np.abs(hvals - xs) - (t / tp) * (xs / t) ** tp))
    checks.append(_check("soft-scalar-linearity", f"t={t} t'={tp}", lin_violation, 1e-12))
    harmonic = sum(1.0 / j for j in range(1, tp + 1))
    checks.append(
        _check("soft-scalar-cap", f"t={t} t'={tp}",
               float(np.max(np.abs(hvals)) - t * harmonic), 1e-12)
    )

    nn = min(n, 7)
    for name in ("pinned", "tfi"):
        h = build_model(name, nn)
        p = SoftTruncParams(t=12, t_prime=4, region=Region(2, nn - 1), mpo_error_target=1e-7)
        built = soft_truncate_mpo(h, p).to_dense()
        built = (built + built.conj().T) / 2
        top = float(np.linalg.eigvalsh(built - to_dense(h))[-1])
        checks.append(_check("soft-operator-upper", f"{name} n={nn}", top, 1e-7))

    for name, nn2 in (("pinned", min(n, 8)), ("aklt", min(n, 6))):
        h = to_projectors(build_model(name, nn2))
        o = ff_truncate(h, Region(2, nn2 - 1))
        built = o.to_dense()
        built = (built + built.conj().T) / 2
        wh = np.linalg.eigvalsh(to_dense(h))
        wt = np.linalg.eigvalsh(built)
        label = f"{name} n={nn2}"
        checks.append(
            _check("ff-kernel-dimension", label,
                   abs(int(np.sum(wh < 1e-9)) - int(np.sum(wt < 1e-9))), 0)
        )
        kdim = int(np.sum(wt < 1e-9))
        gap = float(wt[kdim]) if kdim < len(wt) else np.inf
        gamma = h.gap_hint or 1.0
        checks.append(_check("ff-gap-floor", label, gamma / 8 - gap, 0.0))
        checks.append(_check("ff-bond-cap", label, o.max_bond, h.d**2 + 2))
    return _report("truncation", n, seed, checks)


def suite_solver(n: int = 8, seed: int = 0) -> dict:
    """End-to-end driver contracts: variational soundness, determinism,
    refinement monotonicity, and energy-estimate propagation."""
    checks = []
    nn = min(n, 8)

    h = build_model("pinned", nn)
    cfg = SolveConfig(case="ff", delta=1e-3, seed=seed)
    states, energies, _ = low_space(h, cfg)
    eps0 = float(np.linalg.eigvalsh(to_dense(h))[0])
    checks.append(
        _check("variational-soundness", f"pinned n={nn}", eps0 - float(energies[0]), 1e-8)
    )
    target = np.zeros(2**nn)
    target[0] = 1.0
    overlap = abs(np.vdot(target, states[0].to_dense()))
    checks.append(_check("ff-ground-overlap", f"pinned n={nn}", 1 - overlap, cfg.delta))

    _, e2, _ = low_space(h, cfg)
    checks.append(
        _check("determinism", f"pinned n={nn}",
               float(np.max(np.abs(np.asarray(energies) - np.asarray(e2)))), 0.0)
    )

    # power-iteration refinement: the lowest Ritz value never increases
    w, v = np.linalg.eigh(to_dense(h))
    mix = math.cos(0.4) * v[:, 0] + math.sin(0.4) * v[:, 5]
    trace: list = []
    final_refine(
        [MPS.from_dense(mix, [2] * nn)], h,
        SolveConfig(case="ff", delta=1e-1, gamma=1.0, seed=seed, paper_constants=True),
        trace=trace,
    )
    worst_rise = float(np.max(np.diff(trace))) if len(trace) > 1 else 0.0
    checks.append(_check("refine-ritz-monotone", f"pinned n={nn}", worst_rise, 1e-9))

    # gapped-degenerate run: accuracy and per-level estimate propagation
    hg = build_model("tfi", nn, {"g": 1.5})
    wg = np.linalg.eigvalsh(to_dense(hg))
    gam = float(wg[1] - wg[0])
    cfg_dg = SolveConfig(case="dg", delta=1e-2, r=1, seed=seed + 3, gamma=gam,
                         max_bond=48, agsp_cfg=AgspConfig(ell=1, max_bond=24))
    _, eg, rep = low_space(hg, cfg_dg)
    checks.append(
        _check("dg-ground-energy", f"tfi n={nn}", abs(float(eg[0]) - float(wg[0])),
               cfg_dg.delta * gam)
    )
    checks.append(
        _check("variational-soundness", f"tfi n={nn}", float(wg[0]) - float(eg[0]), 1e-8)
    )
    worst = 0.0
    for level in rep.levels:
        for block in level.blocks:
            lo, hi = block["region"]
            eps_m = float(np.linalg.eigvalsh(to_dense(restrict(hg, Region(lo, hi))))[0])
            worst = max(worst, abs(block["eps_estimate"] - eps_m))
    checks.append(_check("energy-estimate-propagation", f"tfi n={nn}", worst, 10.0))
    return _report("solver", n, seed, checks)


SUITES = {
    "viable": suite_viable,
    "agsp": suite_agsp,
    "cluster": suite_cluster,
    "trim": suite_trim,
    "dl": suite_dl,
    "truncation": suite_truncation,
    "solver": suite_solver,
}


def run_suite(name: str, n: int = 8, seed: int = 0) -> dict:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; known: {sorted(SUITES)}")
    return SUITES[name](n=n, seed=seed)
