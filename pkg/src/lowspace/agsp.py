"""Spectral approximate ground-space projections (AGSPs).

An AGSP is a polynomial image K = P_k(H~) of a norm-truncated Hamiltonian:
it shares H~'s eigenvectors, fixes (or amplifies) eigenvalues at or below a
threshold eta0 and shrinks those at or above eta1 below sqrt(Delta).  P_k is a
rescaled Chebyshev polynomial; K is built as a full-chain MPO by the
three-term recurrence and then sliced at the two boundary cuts of a target
region into a family of middle operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .hamiltonian import LocalHamiltonian, Region, restrict, to_projectors
from .mps import MPO, add_mpo, compress_mpo, mpo_matvec, multiply_mpo
from .tensor import DimensionError, NumericError
from .truncation import (
    SoftTruncParams,
    ff_truncate_regions,
    region_term_indices,
    soft_truncate_regions,
)

__all__ = [
    "ChebyParams",
    "AgspConfig",
    "AgspBundle",
    "rescaled_chebyshev",
    "chebyshev_eval",
    "build_agsp_mpo",
    "split_agsp",
    "generate",
]

_MONOMIAL_DEGREE_CAP = 30
_DEFAULT_DELTA_TARGET = 1e-3  # shrinkage aimed for by the automatic degree choice


@dataclass(frozen=True)
class ChebyParams:
    """Degree and window of the rescaled Chebyshev polynomial P_k.

    P_k(x) = T_k(y(x)) / T_k(y(eta0)) with the affine map
    y(x) = 2(x - eta1)/(norm_bound - eta1) - 1, so that [eta1, norm_bound]
    lands on [-1, 1] and P_k(eta0) = 1 exactly.
    """

    k: int
    eta0: float
    eta1: float
    norm_bound: float

    def __post_init__(self):
        if self.k < 0:
            raise DimensionError("polynomial degree must be >= 0")
        if not self.eta0 < self.eta1:
            raise NumericError(f"need eta0 < eta1, got {self.eta0} >= {self.eta1}")
        if self.eta1 > self.norm_bound:
            raise NumericError("eta1 must not exceed the norm bound")

    @property
    def delta_bound(self) -> float:
        """4 e^{-4k sqrt((eta1-eta0)/(norm_bound-eta0))}: shrinkage guarantee
        for eigenvalues in [eta1, norm_bound]."""
        if self.k == 0:
            return 4.0
        gap = self.eta1 - self.eta0
        width = self.norm_bound - self.eta0
        return 4.0 * math.exp(-4.0 * self.k * math.sqrt(gap / width))

    def affine_map(self) -> tuple[float, float]:
        """(a, b) with y(x) = a*x + b mapping [eta1, norm_bound] to [-1, 1]."""
        span = self.norm_bound - self.eta1
        if span <= 0:
            # degenerate window (eta1 == norm_bound); any k >= 1 is rejected
            # upstream by eta1 <= norm_bound plus the k == 0 short-circuits
            return 1.0, -self.eta1 - 1.0
        a = 2.0 / span
        return a, -2.0 * self.eta1 / span - 1.0


def _cheb_scalar(k: int, y):
    """T_k(y) by the three-term recurrence; y may be a scalar or ndarray."""
    y = np.asarray(y, dtype=float)
    if k == 0:
        return np.ones_like(y)
    prev = np.ones_like(y)
    cur = y.copy()
    for _ in range(k - 1):
        prev, cur = cur, 2.0 * y * cur - prev
    return cur


def chebyshev_eval(p: ChebyParams, x):
    """P_k(x) evaluated through the Chebyshev recurrence (stable for any k)."""
    a, b = p.affine_map()
    x = np.asarray(x, dtype=float)
    norm = _cheb_scalar(p.k, a * p.eta0 + b)
    return _cheb_scalar(p.k, a * x + b) / norm


def rescaled_chebyshev(p: ChebyParams) -> np.ndarray:
    """Monomial coefficients (ascending powers of x) of P_k; degree <= 30.

    Above degree 30 the expanded coefficients overflow doubles through
    catastrophic growth; use :func:`chebyshev_eval` instead.
    """
    if p.k > _MONOMIAL_DEGREE_CAP:
        raise NumericError(
            f"monomial expansion limited to degree {_MONOMIAL_DEGREE_CAP}; "
            "evaluate via chebyshev_eval instead"
        )
    a_f, b_f = p.affine_map()
    # compose in exact rationals: the float affine map is a dyadic rational,
    # so only the final conversion to doubles rounds
    a, b = Fraction(a_f), Fraction(b_f)
    # T_m(a x + b) by the recurrence on rational coefficient lists
    prev = [Fraction(1)]
    cur = [b, a]
    if p.k == 0:
        cur = prev
    for _ in range(p.k - 1):
        shifted = [Fraction(0)] + [2 * a * c for c in cur]
        for i, c in enumerate(cur):
            shifted[i] += 2 * b * c
        for i, c in enumerate(prev):
            shifted[i] -= c
        prev, cur = cur, shifted
    y0 = a * Fraction(p.eta0) + b
    np_, nc = Fraction(1), y0
    if p.k == 0:
        nc = np_
    for _ in range(p.k - 1):
        np_, nc = nc, 2 * y0 * nc - np_
    return np.array([float(c / nc) for c in cur])


def build_agsp_mpo(
    h_trunc: MPO, p: ChebyParams, max_bond: int, cutoff: float = 1e-12
) -> tuple[MPO, float]:
    """K = P_k(H~) via the MPO Chebyshev recurrence T_{m+1} = 2X T_m - T_{m-1}.

    X is the affine image of H~ mapping [eta1, norm_bound] to [-1, 1]; each
    step compresses to max_bond and the accumulated Frobenius-norm truncation
    estimate is returned alongside K.  Dense ground truth at small n closes
    the gap between this estimate and the true operator-norm error.
    """
    n = h_trunc.n
    d = h_trunc.tensors[0].shape[1]
    ident = MPO.identity(n, d)
    if p.k == 0:
        return ident, 0.0
    a, b = p.affine_map()
    x_mpo, err0 = compress_mpo(add_mpo(h_trunc.scale(a), ident, coeff_b=b), max_bond, cutoff)
    norm = float(_cheb_scalar(p.k, a * p.eta0 + b))
    total_err = err0
    t_prev, t_cur = ident, x_mpo
    for _ in range(p.k - 1):
        prod, e1 = multiply_mpo(x_mpo, t_cur, max_bond=max_bond, cutoff=cutoff)
        nxt = add_mpo(prod.scale(2.0), t_prev, coeff_b=-1.0)
        nxt, e2 = compress_mpo(nxt, max_bond=max_bond, cutoff=cutoff)
        total_err += 2.0 * e1 + e2
        t_prev, t_cur = t_cur, nxt
    return t_cur.scale(1.0 / norm), total_err / abs(norm)


def split_agsp(k_mpo: MPO, i1: int, i2: int) -> list[tuple[int, int, MPO]]:
    """Slice an MPO's virtual bonds at cuts (i1, i1+1) and (i2, i2+1).

    Cuts are 1-based site indices; i1 = 0 (resp. i2 = n) degenerates to a
    single cut with the middle segment starting at site 1 (resp. ending at
    site n).  Returns (alpha, beta, A) triples where A is the middle-segment
    MPO with left virtual index pinned to alpha and right to beta; summing
    L_alpha (x) A_(alpha,beta) (x) R_beta over all pairs reproduces the input.
    """
    n = k_mpo.n
    if not 0 <= i1 < i2 <= n:
        raise DimensionError(f"cuts ({i1}, {i2}) out of range for {n} sites")
    left_dim = 1 if i1 == 0 else k_mpo.tensors[i1].shape[0]
    right_dim = 1 if i2 == n else k_mpo.tensors[i2 - 1].shape[3]
    out = []
    for alpha in range(left_dim):
        for beta in range(right_dim):
            # interior tensors are shared across slices (read-only downstream);
            # only the boundary tensors are sliced copies
            mids = list(k_mpo.tensors[i1:i2])
            mids[0] = mids[0][alpha : alpha + 1]
            mids[-1] = mids[-1][..., beta : beta + 1]
            out.append((alpha, beta, MPO(mids)))
    return out


@dataclass
class AgspConfig:
    """Practical knobs for Generate; defaults target desk-scale chains."""

    ell: int = 2  # inset width around each cut (sites left untruncated)
    k: int | None = None  # polynomial degree; default ell^2 * k_scale
    k_scale: int = 1
    t: float | None = None  # soft-truncation scale; default max(12, 4*ell)
    t_prime: int = 4
    max_bond: int = 48
    cutoff: float = 1e-10
    dense_limit: int = 2**14  # largest Hilbert dimension diagonalized densely

    @property
    def degree(self) -> int:
        return self.k if self.k is not None else self.ell**2 * self.k_scale

    @property
    def soft_t(self) -> float:
        return self.t if self.t is not None else max(12.0, 4.0 * self.ell)


@dataclass
class AgspBundle:
    """Everything the solver needs from one Generate call."""

    middle_ops: list  # (alpha, beta, MPO) triples acting on region M
    truncated_mpo_M: MPO  # H~ restricted to M, for energy estimation
    params: ChebyParams
    case: str  # "ff" | "dg" | "ld"
    middle_tensors: list | None = None  # unsliced middle segment (open cut bonds)
    trunc_params: list = field(default_factory=list)  # SoftTruncParams per region (empty for FF)
    D_measured: int = 1  # max virtual bond of K at the two cuts
    Delta_measured: float | None = None  # dense max |P_k(lambda)|, lambda >= eta1
    compression_error: float = 0.0
    clamped: bool = False  # insets shrunk because a region was too small
    k_mpo: MPO | None = None  # full-chain K (kept for verification)
    truncated_mpo: MPO | None = None  # full-chain H~
    threshold_audit: bool | None = None  # informational: D^12 * Delta < 1e-5

    def __post_init__(self):
        if len(self.middle_ops) > max(self.D_measured, 1) ** 2:
            raise DimensionError("more middle operators than D_measured^2")
        if self.Delta_measured is not None and not 0 <= self.Delta_measured:
            raise NumericError("Delta_measured must be nonnegative")


def _inset_regions(n: int, i1: int, i2: int, ell: int) -> tuple[list[Region], bool]:
    """Truncation regions inset by ell sites from the cuts (i1, i2).

    Candidate site blocks are [1, i1-ell], [i1+ell, i2-ell] and [i2+ell, n];
    blocks too small to hold a term are dropped and flagged as clamped.
    """
    candidates = []
    if i1 > 0:
        candidates.append((1, i1 - ell))
    candidates.append((max(1, i1 + ell if i1 > 0 else 1), min(n, i2 - ell if i2 < n else n)))
    if i2 < n:
        candidates.append((i2 + ell, n))
    regions = []
    clamped = False
    for lo, hi in candidates:
        if hi - lo + 1 >= 2 and 1 <= lo <= hi <= n:
            regions.append(Region(lo, hi))
        else:
            clamped = True
    return regions, clamped


_FULL_SPECTRUM_LIMIT = 2**10  # full dense diagonalization below this dimension


def _measured_norm_and_spectrum(mpo: MPO, dense_limit: int):
    """Measured (norm upper bound, full spectrum or None, lambda_min or None).

    Small operators are diagonalized densely (full spectrum available for
    window measurements); up to ``dense_limit`` only the two extreme
    eigenvalues are found by Lanczos iteration on the MPO's matrix-vector
    action; larger operators are not measured at all.
    """
    dim = int(np.prod([t.shape[1] for t in mpo.tensors]))
    if dim > dense_limit:
        return None, None, None
    if dim <= _FULL_SPECTRUM_LIMIT:
        dense = mpo.to_dense()
        w = np.linalg.eigvalsh((dense + dense.conj().T) / 2)
        return float(max(abs(w[0]), abs(w[-1]))), w, float(w[0])
    from scipy.sparse.linalg import LinearOperator, eigsh

    dagger = MPO([np.conj(t).transpose(0, 2, 1, 3) for t in mpo.tensors])

    def matvec(v):
        # symmetrized action: compression can leave H~ slightly non-Hermitian
        return 0.5 * (mpo_matvec(mpo, v) + mpo_matvec(dagger, v))

    from scipy.sparse.linalg import ArpackNoConvergence

    op = LinearOperator((dim, dim), matvec=matvec, dtype=np.complex128)

    def extreme(which):
        try:
            return float(eigsh(op, k=1, which=which, tol=1e-6, maxiter=400)[0][0])
        except ArpackNoConvergence as exc:
            if len(exc.eigenvalues):
                return float(exc.eigenvalues[0])
            return None

    lo = extreme("SA")
    hi = extreme("LA")
    if lo is None or hi is None:
        return None, None, lo
    # Lanczos tolerance slack: widen the norm estimate a touch
    norm = max(abs(lo), abs(hi)) * (1 + 1e-5) + 1e-6
    return norm, None, lo


def _harmonic(t_prime: int) -> float:
    return sum(1.0 / j for j in range(1, t_prime + 1))


def generate(
    h: LocalHamiltonian,
    m: Region,
    eps_m_estimate: float,
    case: str,
    ld_window: tuple[float, float] | None = None,
    cfg: AgspConfig | None = None,
    gamma: float | None = None,
) -> AgspBundle:
    """Build the AGSP bundle for region M of the chain.

    Truncates the three blocks inset by ell sites from M's boundary cuts
    (keeping a 2*ell-term buffer around each cut exact), then applies the
    Chebyshev construction with a case-specific spectral window:

    - "ff": terms are projectorized and even/odd-truncated; eta0 = 0 and
      eta1 = the measured (or hinted) gap of the truncated operator.
    - "dg": soft truncation with scale t and order t'; eta0/eta1 split the
      gap window [eps0 + gamma/10, eps0 + 9*gamma/10].
    - "ld": soft truncation; the window is the level-shifted slice
      [eps0 + eta1_level - mu/(2 log2 n), eps0 + eta1_level] from ld_window.
    """
    cfg = cfg or AgspConfig()
    if case not in ("ff", "dg", "ld"):
        raise NumericError(f"unknown case {case!r}; expected ff | dg | ld")
    if abs(eps_m_estimate) > h.norm_bound + 10:
        raise NumericError("energy estimate out of tolerance for this chain")
    if m.end > h.n:
        raise DimensionError(f"region [{m.start}, {m.end}] exceeds {h.n} sites")
    n, d = h.n, h.d
    i1 = m.start - 1  # cut left of M (0 if M starts the chain)
    i2 = m.end  # cut right of M (n if M ends the chain)
    regions, clamped = _inset_regions(n, i1, i2, cfg.ell)
    if gamma is None:
        gamma = h.gap_hint if h.gap_hint is not None else 1.0

    trunc_params: list[SoftTruncParams] = []
    if case == "ff":
        hp = to_projectors(h)
        h_trunc = ff_truncate_regions(hp, regions, max_bond=cfg.max_bond)
        # ||H~|| <= 2 per truncated region + 1 per untruncated buffer term
        covered: set[int] = set()
        for j in regions:
            covered.update(region_term_indices(h, j))
        analytic_norm = 2.0 * len(regions) + (len(h.terms) - len(covered))
    else:
        t = cfg.soft_t
        for j in regions:
            # only the middle region carries a trusted energy estimate; the
            # side regions use 0, a safe underestimate for nonnegative terms
            inside_m = j.start >= m.start and j.end <= m.end
            est = max(0.0, eps_m_estimate) if inside_m else 0.0
            trunc_params.append(
                SoftTruncParams(t=t, t_prime=cfg.t_prime, region=j, energy_estimate=est)
            )
        h_trunc = soft_truncate_regions(h, trunc_params, max_bond=cfg.max_bond)
        covered = set()
        for j in regions:
            covered.update(region_term_indices(h, j))
        analytic_norm = sum(
            p.energy_estimate + p.t * _harmonic(p.t_prime) for p in trunc_params
        ) + (len(h.terms) - len(covered))

    measured_norm, spectrum, lam_min = _measured_norm_and_spectrum(
        h_trunc, cfg.dense_limit
    )
    norm_bound = (
        min(measured_norm * (1 + 1e-9) + 1e-9, analytic_norm)
        if measured_norm is not None
        else analytic_norm
    )

    if lam_min is not None:
        eps0 = lam_min
    else:
        eps0 = max(0.0, eps_m_estimate)
    if case == "ff":
        if spectrum is not None:
            above = spectrum[spectrum > 1e-8]
            gap_trunc = float(above[0]) if above.size else gamma / 8.0
        else:
            gap_trunc = gamma / 8.0
        eta0, eta1 = 0.0, gap_trunc
    elif case == "dg":
        eta0 = eps0 + gamma / 10.0
        eta1 = eps0 + 9.0 * gamma / 10.0
    else:
        if ld_window is None:
            raise NumericError("ld case needs ld_window = (eta1_level, mu)")
        eta1_level, mu = ld_window
        eta1 = eps0 + eta1_level
        eta0 = eta1 - mu / (2.0 * math.log2(max(n, 2)))
        if not eta0 < eta1:
            raise NumericError("ld window is empty: mu must be positive")
    norm_bound = max(norm_bound, eta1 + 1e-12)
    if cfg.k is not None or case == "ff":
        k = cfg.degree
    else:
        # pick the degree that pushes the guaranteed shrinkage bound
        # 4 e^{-4k sqrt(gap/width)} below the default target
        gap = eta1 - eta0
        width = norm_bound - eta0
        k = max(
            1,
            math.ceil(
                math.sqrt(width / max(gap, 1e-12))
                * math.log(4.0 / _DEFAULT_DELTA_TARGET)
                / 4.0
            ),
        )
    p = ChebyParams(k=k, eta0=eta0, eta1=eta1, norm_bound=norm_bound)

    k_mpo, comp_err = build_agsp_mpo(h_trunc, p, max_bond=cfg.max_bond, cutoff=cfg.cutoff)
    middle = split_agsp(k_mpo, i1, i2)
    bonds = k_mpo.bond_dims
    d_meas = 1
    if 0 < i1:
        d_meas = max(d_meas, bonds[i1 - 1])
    if i2 < n:
        d_meas = max(d_meas, bonds[i2 - 1])

    if spectrum is not None:
        high = spectrum[spectrum >= eta1 - 1e-12]
        delta_meas = float(np.max(np.abs(chebyshev_eval(p, high)))) if high.size else 0.0
    elif measured_norm is not None:
        # extremes only: |P_k| on [eta1, norm_bound] is maximized at eta1
        # (|T_k| <= 1 on the window), a valid supremum for the contract
        delta_meas = float(abs(chebyshev_eval(p, eta1)))
    else:
        delta_meas = None
    delta_for_audit = delta_meas if delta_meas is not None else math.sqrt(p.delta_bound)
    audit = (float(d_meas) ** 12) * delta_for_audit < 1e-5

    # H~ restricted to M, for downstream energy estimation on the block
    h_m = restrict(h, m)
    local_regions = [
        Region(j.start - m.start + 1, j.end - m.start + 1)
        for j in regions
        if j.start >= m.start and j.end <= m.end
    ]
    if case == "ff":
        h_trunc_m = ff_truncate_regions(to_projectors(h_m), local_regions, max_bond=cfg.max_bond)
    else:
        local_params = [
            SoftTruncParams(
                t=cfg.soft_t,
                t_prime=cfg.t_prime,
                region=j,
                energy_estimate=max(0.0, eps_m_estimate),
            )
            for j in local_regions
        ]
        h_trunc_m = soft_truncate_regions(h_m, local_params, max_bond=cfg.max_bond)

    return AgspBundle(
        middle_ops=middle,
        truncated_mpo_M=h_trunc_m,
        params=p,
        case=case,
        middle_tensors=list(k_mpo.tensors[i1:i2]),
        trunc_params=trunc_params,
        D_measured=d_meas,
        Delta_measured=delta_meas,
        compression_error=comp_err,
        clamped=clamped,
        k_mpo=k_mpo,
        truncated_mpo=h_trunc,
        threshold_audit=audit,
    )
