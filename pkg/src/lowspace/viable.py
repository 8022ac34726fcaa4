"""Viable sets: small subspaces on a block that retain a target subspace.

A set S on block A is delta-viable for a target T (living on the whole
chain) when P_T P_Sext P_T >= (1-delta) P_T, where S_ext extends S by the
full Hilbert space outside A.  This module implements the calculus the
solver composes: tensoring adjacent sets, random down-sampling, AGSP error
reduction, and collective trimming.  Viability itself is only ever measured
by the dense oracle in tests; production code tracks predicted bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .agsp import AgspBundle
from .hamiltonian import Region
from .mps import (
    MPS,
    TrimReport,
    add_mps,
    apply_mpo,
    combine_span,
    compress,
    gram_matrix,
    mpo_matvec,
    orthonormal_span,
    trim_collective,
)
from .tensor import (
    DimensionError,
    NumericError,
    contract,
    haar_isometry,
    haar_orthogonal,
    spawn_rng,
)

__all__ = [
    "ViableSet",
    "tensor_sets",
    "random_subspace",
    "sample_product",
    "error_reduce",
]

_GRAM_TOL = 1e-8


@dataclass
class ViableSet:
    region: Region
    basis: list  # orthonormal MPS on the region's sites
    provenance: list = field(default_factory=list)
    check: bool = True  # set False when orthonormality holds by construction

    def __post_init__(self):
        if not self.basis:
            raise DimensionError("viable set needs at least one vector")
        for v in self.basis:
            if v.n != self.region.length:
                raise DimensionError(
                    f"vector on {v.n} sites does not match region length "
                    f"{self.region.length}"
                )
        if self.check:
            g = gram_matrix(self.basis)
            if np.abs(g - np.eye(len(self.basis))).max() > _GRAM_TOL:
                raise NumericError("viable-set basis is not orthonormal")

    @property
    def dim(self) -> int:
        return len(self.basis)


def tensor_sets(v1: ViableSet, v2: ViableSet) -> ViableSet:
    """All pairwise tensor products of two sets on adjacent blocks.

    Orthonormality is inherited; a set viable with error d1 tensored with one
    viable with error d2 is viable with error at most d1 + d2.
    """
    if v1.region.end + 1 != v2.region.start:
        raise DimensionError(
            f"regions [{v1.region.start},{v1.region.end}] and "
            f"[{v2.region.start},{v2.region.end}] are not adjacent"
        )
    basis = []
    for a in v1.basis:
        for b in v2.basis:
            basis.append(MPS([t.copy() for t in a.tensors] + [t.copy() for t in b.tensors]))
    return ViableSet(
        region=Region(v1.region.start, v2.region.end),
        basis=basis,
        provenance=v1.provenance + v2.provenance + [f"tensor {v1.dim}x{v2.dim}"],
        check=False,  # products of orthonormal bases are orthonormal
    )


def random_subspace(
    w: ViableSet,
    s: int,
    seed: int,
    real_orthogonal: bool = False,
    max_bond: int = 10**9,
) -> ViableSet:
    """Haar-random s-dimensional subspace of span(w), deterministic in seed.

    A Haar transformation acts on the coefficient space of w's basis and the
    first s images are kept; on average a unit target component of the span
    retains s/|w| of its weight.
    """
    q = w.dim
    if not 1 <= s <= q:
        raise DimensionError(f"need 1 <= s <= {q}, got {s}")
    rng = spawn_rng(seed, 0x5AB5)
    u = haar_orthogonal(q, q, rng) if real_orthogonal else haar_isometry(q, q, rng)
    basis = combine_span(w.basis, u[:, :s], max_bond=max_bond, cutoff=1e-14)
    return ViableSet(
        region=w.region,
        basis=basis,
        provenance=w.provenance + [f"sample {s}/{q} seed={seed}"],
        check=False,  # unitary recombination of an orthonormal basis
    )


def sample_product(
    v1: ViableSet,
    v2: ViableSet,
    s: int,
    seed: int,
    real_orthogonal: bool = False,
    max_bond: int = 10**9,
) -> ViableSet:
    """Random s-dimensional subspace of span(v1 tensor v2), built lazily.

    Draws the same Haar transformation as ``random_subspace(tensor_sets(v1,
    v2), s, seed)`` and spans the same subspace, but never materializes the
    |v1|*|v2| product basis: each sampled coefficient column is factored
    across the block cut by an SVD, giving a sum of at most min(|v1|, |v2|)
    product vectors.
    """
    q1, q2 = v1.dim, v2.dim
    q = q1 * q2
    if v1.region.end + 1 != v2.region.start:
        raise DimensionError(
            f"regions [{v1.region.start},{v1.region.end}] and "
            f"[{v2.region.start},{v2.region.end}] are not adjacent"
        )
    if not 1 <= s <= q:
        raise DimensionError(f"need 1 <= s <= {q}, got {s}")
    rng = spawn_rng(seed, 0x5AB5)
    u = haar_orthogonal(q, q, rng) if real_orthogonal else haar_isometry(q, q, rng)
    cols_a, cols_b, ranks = [], [], []
    for i in range(s):
        m = u[:, i].reshape(q1, q2)
        a_fac, sv, bh = np.linalg.svd(m, full_matrices=False)
        rank = max(1, int(np.sum(sv > 1e-14)))
        ranks.append(rank)
        cols_a.append(a_fac[:, :rank] * sv[:rank][None, :])
        cols_b.append(bh[:rank].T)
    lefts = combine_span(
        v1.basis, np.concatenate(cols_a, axis=1), max_bond=max_bond, cutoff=1e-14
    )
    rights = combine_span(
        v2.basis, np.concatenate(cols_b, axis=1), max_bond=max_bond, cutoff=1e-14
    )
    basis, pos = [], 0
    for rank in ranks:
        acc = None
        for a in range(rank):
            term = MPS(
                [t.copy() for t in lefts[pos + a].tensors]
                + [t.copy() for t in rights[pos + a].tensors]
            )
            acc = term if acc is None else add_mps(acc, term)
        acc, _ = compress(acc, max_bond=max_bond, cutoff=1e-14)
        basis.append(acc)
        pos += rank
    return ViableSet(
        region=Region(v1.region.start, v2.region.end),
        basis=basis,
        provenance=v1.provenance
        + v2.provenance
        + [f"tensor {q1}x{q2}", f"sample {s}/{q} seed={seed}"],
        check=False,  # unitary recombination of an orthonormal product basis
    )


_DENSE_FRAME_DIM = 2**10  # largest block dim for the frame-operator path
_DENSE_SPAN_DIM = 2**14  # largest block Hilbert dimension spanned densely
_DENSE_SPAN_WORK = 2**24  # cap on (block dim) x (candidate count) matrix entries


def _boundary_image(mids: list, b: MPS) -> np.ndarray:
    """Contract the unsliced middle segment against an MPS on the block.

    Returns the dense tensor X with X[alpha, :, beta] = A_(alpha,beta) |b>,
    the images under every boundary-bond slice at once.
    """
    res = None
    for t, bt in zip(mids, b.tensors):
        m = contract(t, bt, [(2, 1)])  # (l, out, r, sl, sr)
        l, o_, r_, sl, sr = m.shape
        site = m.transpose(0, 3, 1, 2, 4).reshape(l * sl, o_, r_ * sr)
        if res is None:
            res = site
        else:
            joined = contract(res, site, [(2, 0)])  # (L, o_acc, o, R)
            ll, oa, ob, rr = joined.shape
            res = joined.reshape(ll, oa * ob, rr)
    return res


def _dense_image_span(v, bundle, dims, block_dim, max_bond, s_target):
    """Top directions of the AGSP image frame, computed densely.

    Spans the same subspace as orthonormal_span over all operator-image
    candidates.  For small blocks the frame operator sum_i,a,b |A_ab v_i><...|
    is accumulated directly from the unsliced middle segment, so the cost
    never scales with the slice count; otherwise the dense image columns are
    stacked and SVD'd.
    """
    n_cand = len(bundle.middle_ops) * v.dim
    use_frame = block_dim <= _DENSE_FRAME_DIM and bundle.middle_tensors is not None
    if use_frame:
        f = np.zeros((block_dim, block_dim), dtype=np.complex128)
        for b in v.basis:
            x = _boundary_image(bundle.middle_tensors, b)
            f += np.einsum("aib,ajb->ij", x, x.conj())
        w, u = np.linalg.eigh((f + f.conj().T) / 2)
        order = np.argsort(w)[::-1]
        # frame eigenvalues are the squared singular values of the stacked
        # candidate matrix; apply the same rank rule as orthonormal_span
        keep = int(np.sum(w >= 1e-10 * n_cand))
        cols = u[:, order]
    else:
        vmat = np.stack([b.to_dense() for b in v.basis], axis=1)
        mats = []
        for _a, _b, op in bundle.middle_ops:
            mats.append(
                np.stack(
                    [mpo_matvec(op, vmat[:, j]) for j in range(vmat.shape[1])],
                    axis=1,
                )
            )
        mat = np.concatenate(mats, axis=1)
        mat = mat[:, np.linalg.norm(mat, axis=0) > 1e-12]
        if mat.shape[1] == 0:
            raise NumericError("every AGSP image vanished; nothing to span")
        cols, sv, _ = np.linalg.svd(mat, full_matrices=False)
        keep = int(np.sum(sv**2 >= 1e-10 * mat.shape[1]))
    if s_target is not None:
        keep = min(keep, s_target)
    if keep == 0:
        raise NumericError("AGSP images span only the zero vector at tolerance")
    span = []
    for i in range(keep):
        m = MPS.from_dense(cols[:, i], list(dims))
        m, _ = compress(m, max_bond=max_bond, cutoff=1e-14)
        span.append(m)
    return span


def error_reduce(
    v: ViableSet,
    bundle: AgspBundle,
    xi: float,
    max_bond: int,
    s_target: int | None = None,
    b_hint: float = 1.0,
) -> tuple[ViableSet, TrimReport]:
    """Amplify a viable set with an AGSP's middle operators.

    Every sliced middle operator is applied to every basis vector; the images
    are orthonormalized (optionally keeping only the s_target largest Gram
    directions), collectively trimmed at xi, and re-orthonormalized.  A set
    with viability error d maps to one with error about Delta/(1-d)^2 plus
    the trim penalty, at dimension <= D^2 |v|.
    """
    if bundle.truncated_mpo_M.n != v.region.length:
        raise DimensionError(
            f"bundle built for a {bundle.truncated_mpo_M.n}-site block, "
            f"set lives on {v.region.length} sites"
        )
    dims = v.basis[0].phys_dims
    block_dim = int(np.prod(dims))
    n_cand = len(bundle.middle_ops) * v.dim
    frame_ok = block_dim <= _DENSE_FRAME_DIM and bundle.middle_tensors is not None
    stack_ok = block_dim <= _DENSE_SPAN_DIM and block_dim * n_cand <= _DENSE_SPAN_WORK
    if frame_ok or stack_ok:
        span = _dense_image_span(v, bundle, dims, block_dim, max_bond, s_target)
    else:
        candidates = []
        for _alpha, _beta, op in bundle.middle_ops:
            for b in v.basis:
                img, _ = apply_mpo(op, b, max_bond=max_bond, cutoff=1e-14)
                if img.norm() > 1e-12:
                    candidates.append(img)
        if not candidates:
            raise NumericError("every AGSP image vanished; nothing to span")
        span = orthonormal_span(candidates, max_bond=max_bond, max_keep=s_target)
    if xi > 0:
        # bond capping can leave the dense-path span slightly non-orthonormal;
        # restore orthonormality before the collective trim relies on it
        span = orthonormal_span(span, max_bond=max_bond)
        trimmed, report = trim_collective(span, xi, b_hint=b_hint)
        alive = [t for t in trimmed if t.norm() > 1e-12]
        if not alive:
            raise NumericError("trim removed the entire span; xi too aggressive")
        basis = orthonormal_span(alive, max_bond=max_bond)
    else:
        report = TrimReport(
            max_bond_after=max(b.max_bond for b in span),
            viability_penalty_bound=0.0,
            discarded_weight_total=0.0,
            cut_count=0,
        )
        basis = span
    out = ViableSet(
        region=v.region,
        basis=basis,
        provenance=v.provenance
        + [
            f"error_reduce D={bundle.D_measured} xi={xi} "
            f"dim {v.dim}->{len(basis)} penalty<={report.viability_penalty_bound:.3e}"
        ],
        check=False,  # output of an orthonormalizing sweep
    )
    return out, report
