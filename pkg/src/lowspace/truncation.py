"""Norm-truncation schemes for chain Hamiltonians.

Three families live here:

* soft truncation: H is damped through the scalar series
  h(x) = t(f + f^2/2 + ... + f^{t'}/t') with f(x) = 1 - exp(-x/t), realized
  as an MPO by a truncated cluster expansion of exp(-beta*H);
* the frustration-free even/odd truncation 1 - prod(1-h_i) per layer, and the
  associated two-layer detectability operator;
* a dense-only hard truncation that caps H_J's spectrum at its ground energy
  plus a threshold (used as ground truth, never in the production path).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.linalg import expm

from .hamiltonian import LocalHamiltonian, Region, restrict, to_dense, to_mpo
from .mps import MPO, add_mpo, compress_mpo, multiply_mpo
from .tensor import DimensionError, NumericError

__all__ = [
    "SoftTruncParams",
    "ClusterTable",
    "soft_series_eval",
    "soft_series_coefficients",
    "cluster_expansion_mpo",
    "soft_truncate_mpo",
    "soft_truncate_regions",
    "ff_truncate",
    "ff_truncate_regions",
    "dl_operator",
    "hard_truncate_dense",
    "region_term_indices",
]

# interval exponentials get expensive quickly; cap the expansion order by
# local dimension (table entries are dense on d^(r-1) sites)
DEFAULT_ORDER_CAP = {2: 6, 3: 4}


@dataclass
class SoftTruncParams:
    t: float
    t_prime: int
    region: Region
    energy_estimate: float = 0.0
    cluster_order: int = 6
    mpo_error_target: float = 1e-8

    def __post_init__(self):
        if self.t <= 0 or self.t_prime < 1:
            raise NumericError("need t > 0 and t_prime >= 1")
        if self.t_prime >= (math.log(2) / 2) * self.t:
            raise NumericError(
                f"series divergence risk: t_prime={self.t_prime} must be"
                f" < (ln2/2)*t = {(math.log(2) / 2) * self.t:.4f}"
            )


def soft_series_eval(x: float, t: float, t_prime: int) -> float:
    """h(x) = t * sum_{j=1}^{t'} f^j/j, f = 1 - exp(-x/t).

    For x >= 0 this satisfies |h(x) - x| <= (t/t')(x/t)^{t'} and saturates at
    t * (1 + 1/2 + ... + 1/t') as x -> infinity.
    """
    f = 1.0 - math.exp(-x / t)
    return t * sum(f**j / j for j in range(1, t_prime + 1))


def soft_series_coefficients(t: float, t_prime: int) -> list[float]:
    """c_m with h(x) = sum_{m=0}^{t'} c_m exp(-m*x/t).

    Expanding f^j = (1-u)^j binomially (u = exp(-x/t)) gives
    c_m = t * (-1)^m * sum_{j=max(m,1)}^{t'} C(j, m)/j; computed in exact
    rationals to dodge the 2^{t'} cancellation.
    """
    coeffs = []
    for m in range(t_prime + 1):
        acc = Fraction(0)
        for j in range(max(m, 1), t_prime + 1):
            acc += Fraction(math.comb(j, m), j)
        coeffs.append(float(Fraction((-1) ** m) * acc) * t)
    return coeffs


def region_term_indices(h: LocalHamiltonian, j: Region) -> list[int]:
    """0-based indices of terms fully inside the 1-based region ``j``."""
    if j.end > h.n:
        raise DimensionError(f"region [{j.start}, {j.end}] exceeds {h.n} sites")
    return list(range(j.start - 1, j.end - 1))


# ---------------------------------------------------------------------------
# Cluster expansion
# ---------------------------------------------------------------------------


@dataclass
class ClusterTable:
    """Dense interval operators rho_I keyed by (first site, length in sites).

    rho_I collects every word of Hamiltonian terms whose term supports chain
    together (overlap in at least one site) to cover exactly the interval I.
    Only 2 <= |I| <= r-1 appear; single sites carry implicit identities.
    """

    entries: dict
    order: int
    d: int

    def mpo_tensors(self, start: int, length: int) -> list[np.ndarray]:
        return self.entries[(start, length)]


def _interval_collections(length: int, min_seg: int = 2):
    """All sets of pairwise site-disjoint segments (offset, seg_len) inside an
    interval of ``length`` sites; touching segments allowed (they stay
    separate components because no single 2-site term bridges them)."""
    results = []

    def rec(pos, acc):
        if pos > length - min_seg:
            results.append(list(acc))
            return
        rec(pos + 1, acc)  # site `pos` stays uncovered
        for seg_len in range(min_seg, length - pos + 1):
            acc.append((pos, seg_len))
            rec(pos + seg_len, acc)
            acc.pop()

    rec(0, [])
    return results


def _embed_dense(op: np.ndarray, offset: int, width: int, total: int, d: int) -> np.ndarray:
    return np.kron(
        np.kron(np.eye(d**offset), op), np.eye(d ** (total - offset - width))
    )


def _interval_dense(terms: list[np.ndarray], d: int, start: int, length: int) -> np.ndarray:
    """Dense sum of the terms fully inside sites [start, start+length)."""
    out = np.zeros((d**length, d**length), dtype=np.complex128)
    for i in range(start, start + length - 1):
        out += _embed_dense(terms[i], i - start, 2, length, d)
    return out


def build_cluster_table(terms: list[np.ndarray], n: int, d: int, beta: float, r: int) -> ClusterTable:
    """Dense rho_I for all intervals of length 2..r-1, bottom-up.

    Terms here may carry negative spectra (they are shift-adjusted), so this
    works on the raw term list rather than a validated Hamiltonian value.
    """
    dense: dict[tuple[int, int], np.ndarray] = {}
    for length in range(2, min(r - 1, n) + 1):
        for start in range(0, n - length + 1):
            rho = expm(-beta * _interval_dense(terms, d, start, length))
            for coll in _interval_collections(length):
                if coll == [(0, length)]:
                    continue
                acc = np.eye(d**length, dtype=np.complex128)
                for off, seg in coll:
                    acc = acc @ _embed_dense(dense[(start + off, seg)], off, seg, length, d)
                rho = rho - acc
            dense[(start, length)] = rho
    table = {}
    for (start, length), rho in dense.items():
        o = MPO.from_dense(rho, [d] * length, cutoff=1e-14)
        table[(start, length)] = o.tensors
    return ClusterTable(entries=table, order=r, d=d)


def _apportion_shift(terms: list[np.ndarray], shift: float):
    """Distribute a scalar shift across terms, clamped so each shifted term
    keeps norm <= 1 (term spectra live in [0,1], so per-term shift in [0,1]).
    Returns (shifted terms, leftover shift absorbed exactly as a scalar)."""
    m = len(terms)
    if m == 0:
        return [], shift
    per = min(max(shift / m, 0.0), 1.0)
    shifted = [t - per * np.eye(t.shape[0]) for t in terms]
    return shifted, shift - per * m


def cluster_expansion_mpo(
    h: LocalHamiltonian, beta: float, r: int, sign_shift: float = 0.0
) -> MPO:
    """MPO for the order-r cluster expansion M_r of exp(-beta*(H - sign_shift)).

    Words of terms whose connected supports all span fewer than r sites are
    kept; the signaling construction threads, across every bond, either a
    FREE state (identity background) or (segment, position, virtual index)
    triples, giving bond dimension <= r^2 d^r.  The shift is spread over the
    terms (clamped to keep norms <= 1) and any remainder multiplies the
    result as an exact scalar exp(beta * leftover).
    """
    if math.exp(beta) - 1 >= 1:
        raise NumericError(f"cluster expansion needs exp(beta)-1 < 1, got beta={beta}")
    if r < 2:
        raise NumericError("order r must be >= 2")
    n, d = h.n, h.d
    shifted_terms, leftover = _apportion_shift(list(h.terms), sign_shift)
    scalar = math.exp(beta * leftover)
    if beta == 0.0 or r == 2 or n == 1:
        return MPO.identity(n, d).scale(scalar)
    table = build_cluster_table(shifted_terms, n, d, beta, r)

    # enumerate bond states at each cut: FREE plus (start, length, alpha) for
    # every table segment crossing the cut
    max_len = min(r - 1, n)
    cut_states = []  # per cut a list of ("free",) | (start, length, k, alpha)
    for cut in range(n - 1):  # cut between sites `cut` and `cut+1`
        states = [("free",)]
        for length in range(2, max_len + 1):
            for start in range(max(0, cut - length + 2), cut + 1):
                if start + length > n:
                    continue
                k = cut - start + 1  # sites start..cut inside, 1 <= k <= length-1
                if not 1 <= k <= length - 1:
                    continue
                bond = table.mpo_tensors(start, length)[k - 1].shape[-1]
                for alpha in range(bond):
                    states.append((start, length, k, alpha))
        cut_states.append(states)

    tensors = []
    for a in range(n):
        dim_in = 1 if a == 0 else len(cut_states[a - 1])
        dim_out = 1 if a == n - 1 else len(cut_states[a])
        states_in = [("free",)] if a == 0 else cut_states[a - 1]
        states_out = [("free",)] if a == n - 1 else cut_states[a]
        idx_out = {st: i for i, st in enumerate(states_out)}
        w = np.zeros((dim_in, d, d, dim_out), dtype=np.complex128)
        for i_in, st in enumerate(states_in):
            if st == ("free",):
                # stay free
                if ("free",) in idx_out:
                    w[i_in, :, :, idx_out[("free",)]] += np.eye(d)
                # or open a segment starting at this site
                for length in range(2, max_len + 1):
                    if a + length > n:
                        continue
                    first = table.mpo_tensors(a, length)[0]  # (1, d, d, b)
                    for alpha in range(first.shape[-1]):
                        key = (a, length, 1, alpha)
                        if key in idx_out:
                            w[i_in, :, :, idx_out[key]] += first[0, :, :, alpha]
            else:
                start, length, k, alpha = st
                seg = table.mpo_tensors(start, length)
                cur = seg[k]  # tensor of site a = start + k (0-based pos k)
                if k == length - 1:
                    # last site of the segment: exit to free
                    tgt = idx_out.get(("free",))
                    if tgt is not None:
                        w[i_in, :, :, tgt] += cur[alpha, :, :, 0]
                else:
                    for alpha2 in range(cur.shape[-1]):
                        key = (start, length, k + 1, alpha2)
                        if key in idx_out:
                            w[i_in, :, :, idx_out[key]] += cur[alpha, :, :, alpha2]
        tensors.append(w)
    return MPO(tensors).scale(scalar)


def _choose_cluster_order(n_region: int, beta: float, per_term_target: float, cap: int) -> int:
    """Smallest r with e^{n^2 (e^beta-1)^r} - 1 <= target, capped."""
    base = math.exp(beta) - 1
    for r in range(3, cap + 1):
        if base <= 0:
            return 3
        bound = math.expm1(n_region**2 * base**r)
        if bound <= per_term_target:
            return r
    return cap


def _embed_mpo(inner: MPO, start0: int, n: int, d: int) -> MPO:
    """Place an MPO for a sub-chain (0-based first site start0) on the full
    chain, identities elsewhere."""
    eye = np.eye(d, dtype=np.complex128).reshape(1, d, d, 1)
    tensors = [eye.copy() for _ in range(start0)]
    tensors += [t.copy() for t in inner.tensors]
    tensors += [eye.copy() for _ in range(n - start0 - inner.n)]
    return MPO(tensors)


def soft_truncate_regions(
    h: LocalHamiltonian,
    params: list,
    max_bond: int = 10**9,
    order_cap: int | None = None,
) -> MPO:
    """MPO for sum_J [eps'_J + h_{t',t}(H_J - eps'_J)] + (terms outside all J).

    ``params`` is a list of SoftTruncParams with pairwise disjoint regions.
    Per region, the series is re-expanded as sum_m c_m exp(-m/t (H_J - eps'));
    each exponential becomes a cluster-expansion MPO whose order is chosen so
    the per-term error fits inside mpo_error_target.
    """
    n, d = h.n, h.d
    inside_all: set[int] = set()
    acc: MPO | None = None
    for p in params:
        inside = region_term_indices(h, p.region)
        if not inside:
            continue
        if inside_all.intersection(inside):
            raise DimensionError("truncation regions overlap")
        inside_all.update(inside)
        cap = order_cap or min(p.cluster_order, DEFAULT_ORDER_CAP.get(d, 4))
        sub_terms = [h.terms[i] for i in inside]
        sub_n = p.region.length
        coeffs = soft_series_coefficients(p.t, p.t_prime)
        coeff_weight = sum(abs(c) for c in coeffs[1:])
        per_term_target = p.mpo_error_target / max(coeff_weight, 1e-300)
        for m_idx in range(1, p.t_prime + 1):
            beta = m_idx / p.t
            r = _choose_cluster_order(sub_n, beta, per_term_target, cap)
            sub = cluster_expansion_mpo(
                _as_hamiltonian_view(sub_terms, sub_n, d),
                beta,
                r,
                sign_shift=p.energy_estimate,
            )
            piece = _embed_mpo(sub, p.region.start - 1, n, d).scale(coeffs[m_idx])
            acc = piece if acc is None else add_mpo(acc, piece)
        # constant piece: (eps' + c_0) * identity
        acc = add_mpo(acc, MPO.identity(n, d), coeff_b=p.energy_estimate + coeffs[0])
    if acc is None:
        return to_mpo(h)
    # untruncated terms outside every region
    outside = [i for i in range(len(h.terms)) if i not in inside_all]
    if outside:
        rest = [
            h.terms[i] if i in outside else np.zeros_like(h.terms[i])
            for i in range(len(h.terms))
        ]
        acc = add_mpo(acc, to_mpo(_as_hamiltonian_view(rest, n, d)))
    out, _ = compress_mpo(acc, max_bond=max_bond, cutoff=1e-12)
    return out


def soft_truncate_mpo(
    h: LocalHamiltonian,
    p: SoftTruncParams,
    max_bond: int = 10**9,
    order_cap: int | None = None,
) -> MPO:
    """Single-region soft truncation; see :func:`soft_truncate_regions`."""
    return soft_truncate_regions(h, [p], max_bond=max_bond, order_cap=order_cap)


class _as_hamiltonian_view:
    """Duck-typed read-only Hamiltonian (skips [0,1] validation: shifted or
    zeroed term lists are legitimate inputs for MPO assembly)."""

    def __init__(self, terms, n, d):
        self.terms = list(terms)
        self.n = n
        self.d = d
        self.gap_hint = None
        self.energy_window = None
        self.degeneracy_hint = None


def _check_projector_terms(h: LocalHamiltonian, tol: float = 1e-9):
    for i, t in enumerate(h.terms):
        if np.linalg.norm(t @ t - t) > tol:
            raise NumericError(f"term {i} is not a projector (needed here)")


def _layer_indices(indices: list[int], parity: int) -> list[int]:
    if not indices:
        return []
    base = indices[0]
    return [i for i in indices if (i - base) % 2 == parity]


def _layer_product_mpo(h, picked: list[int]) -> MPO:
    """MPO of prod_{i in picked} (1 - h_i): the picked terms act on pairwise
    disjoint site pairs, so the product is an exact tensor product."""
    n, d = h.n, h.d
    eye_site = np.eye(d, dtype=np.complex128).reshape(1, d, d, 1)
    tensors: list[np.ndarray | None] = [None] * n
    for i in picked:
        op = np.eye(d * d, dtype=np.complex128) - h.terms[i]
        pair = MPO.from_dense(op, [d, d], cutoff=1e-14)
        tensors[i] = pair.tensors[0]
        tensors[i + 1] = pair.tensors[1]
    for j in range(n):
        if tensors[j] is None:
            tensors[j] = eye_site.copy()
    return MPO(tensors)


def ff_truncate_regions(h: LocalHamiltonian, regions: list, max_bond: int = 10**9) -> MPO:
    """Even/odd truncation of a frustration-free projector Hamiltonian over
    several pairwise disjoint regions.

    Inside each region the sum of terms is replaced by
    (1 - prod_even(1-h_i)) + (1 - prod_odd(1-h_i)); terms outside stay as-is.
    Ground space is preserved and the result has Schmidt rank <= d^2+2.
    """
    _check_projector_terms(h)
    n, d = h.n, h.d
    ident = MPO.identity(n, d)
    inside_all: set[int] = set()
    acc: MPO | None = None
    for j in regions:
        inside = region_term_indices(h, j)
        if not inside:
            continue
        if inside_all.intersection(inside):
            raise DimensionError("truncation regions overlap")
        inside_all.update(inside)
        even = _layer_indices(inside, 0)
        odd = _layer_indices(inside, 1)
        piece = add_mpo(ident, _layer_product_mpo(h, even), coeff_b=-1.0)
        if odd:
            piece = add_mpo(piece, add_mpo(ident, _layer_product_mpo(h, odd), coeff_b=-1.0))
        acc = piece if acc is None else add_mpo(acc, piece)
    if acc is None:
        return to_mpo(h)
    outside = [i for i in range(len(h.terms)) if i not in inside_all]
    if outside:
        rest = [
            h.terms[i] if i in outside else np.zeros_like(h.terms[i])
            for i in range(len(h.terms))
        ]
        acc = add_mpo(acc, to_mpo(_as_hamiltonian_view(rest, n, d)))
    out, _ = compress_mpo(acc, max_bond=max_bond, cutoff=1e-12)
    return out


def ff_truncate(h: LocalHamiltonian, j: Region, max_bond: int = 10**9) -> MPO:
    """Single-region even/odd truncation; see :func:`ff_truncate_regions`."""
    return ff_truncate_regions(h, [j], max_bond=max_bond)


def dl_operator(h: LocalHamiltonian, max_bond: int = 10**9) -> MPO:
    """Two-layer detectability operator prod_even(1-h_i) * prod_odd(1-h_i)."""
    _check_projector_terms(h)
    all_terms = list(range(len(h.terms)))
    even = _layer_indices(all_terms, 0)
    odd = _layer_indices(all_terms, 1)
    e_layer = _layer_product_mpo(h, even)
    o_layer = _layer_product_mpo(h, odd)
    out, _ = multiply_mpo(e_layer, o_layer, max_bond=max_bond, cutoff=1e-13)
    return out


def hard_truncate_dense(
    h: LocalHamiltonian, j: Region, t: float, entry_limit: int = 2**26
) -> np.ndarray:
    """Dense H_J*P_below + (t+eps_J)*P_above + (terms outside J).

    Spectrum of the region Hamiltonian is capped at its ground energy plus t;
    eigenvalues of the capped part are min(lambda, eps_J + t).  Dense-oracle
    only; never used by the production solver.
    """
    n, d = h.n, h.d
    dim = d**n
    if dim * dim > entry_limit:
        raise NumericError("hard truncation is dense-only; size over limit")
    inside = region_term_indices(h, j)
    hj = np.zeros((dim, dim), dtype=np.complex128)
    for i in inside:
        hj += _embed_dense(h.terms[i], i, 2, n, d)
    rest = to_dense(h, entry_limit=entry_limit) - hj
    w, v = np.linalg.eigh(hj)
    eps_j = w[0]
    capped = np.minimum(w, eps_j + t)
    return (v * capped) @ v.conj().T + rest
