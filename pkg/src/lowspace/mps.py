"""Matrix product state / operator algebra.

Site tensors follow the (left-bond, physical, right-bond) convention for
states and (left-bond, phys-out, phys-in, right-bond) for operators; boundary
bonds have extent 1.  All sweeps are built on the kernels in
:mod:`lowspace.tensor`.

The span-level operations at the bottom of the module (``joint_purification``,
``orthonormal_span``, ``trim_collective``) treat a list of states as a single
purified vector sum_i |u_i> |i> with an auxiliary site appended on the right;
that one extra site is what lets Gram-matrix orthonormalization and collective
Schmidt-coefficient trimming run as ordinary MPS sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import (
    DimensionError,
    NumericError,
    contract,
    svd_truncate,
)

__all__ = [
    "MPS",
    "MPO",
    "TrimReport",
    "canonicalize",
    "compress",
    "schmidt_spectra",
    "apply_mpo",
    "mpo_matvec",
    "combine_span",
    "joint_purification",
    "split_joint",
    "orthonormal_span",
    "trim_collective",
]


def _qr_pos(m: np.ndarray):
    q, r = np.linalg.qr(m)
    return q, r


def _rq_pos(m: np.ndarray):
    # m = r @ q with q having orthonormal rows
    q, r = np.linalg.qr(m.conj().T)
    return r.conj().T, q.conj().T


class MPS:
    """Matrix product state; tensors are (left, phys, right) complex arrays."""

    def __init__(self, tensors, canonical_center=None):
        self.tensors = [np.asarray(t, dtype=np.complex128) for t in tensors]
        self.canonical_center = canonical_center
        self._check_shapes()

    def _check_shapes(self):
        if not self.tensors:
            raise DimensionError("empty MPS")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[-1] != 1:
            raise DimensionError("boundary bonds must have extent 1")
        for i in range(len(self.tensors) - 1):
            if self.tensors[i].shape[-1] != self.tensors[i + 1].shape[0]:
                raise DimensionError(f"bond mismatch between sites {i} and {i + 1}")
        for t in self.tensors:
            if t.ndim != 3:
                raise DimensionError("MPS site tensors must be rank 3")

    @property
    def n(self) -> int:
        return len(self.tensors)

    @property
    def phys_dims(self):
        return [t.shape[1] for t in self.tensors]

    @property
    def bond_dims(self):
        """Extents of the n-1 internal bonds."""
        return [t.shape[-1] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max([1] + self.bond_dims)

    def copy(self) -> "MPS":
        return MPS([t.copy() for t in self.tensors], self.canonical_center)

    @classmethod
    def product_state(cls, vectors) -> "MPS":
        return cls([np.asarray(v, dtype=np.complex128).reshape(1, -1, 1) for v in vectors])

    @classmethod
    def basis_state(cls, n: int, d: int, indices) -> "MPS":
        vecs = []
        for i in indices:
            v = np.zeros(d)
            v[i] = 1.0
            vecs.append(v)
        assert len(vecs) == n
        return cls.product_state(vecs)

    @classmethod
    def from_dense(cls, vec, dims, max_bond: int = 10**9, cutoff: float = 0.0) -> "MPS":
        """Exact (or truncated) MPS of a dense state vector via sequential SVD."""
        vec = np.asarray(vec, dtype=np.complex128).reshape(-1)
        if vec.size != int(np.prod(dims)):
            raise DimensionError("vector length does not match site dimensions")
        tensors = []
        rest = vec.reshape(1, -1)
        left = 1
        for d in dims[:-1]:
            m = rest.reshape(left * d, -1)
            res = svd_truncate(m, max_rank=max_bond, cutoff=cutoff)
            k = res.rank
            tensors.append(res.left_isometry.reshape(left, d, k))
            rest = res.singular_values[:, None] * res.right_isometry
            left = k
        tensors.append(rest.reshape(left, dims[-1], 1))
        return cls(tensors)

    def to_dense(self) -> np.ndarray:
        out = self.tensors[0][0]  # (d0, r)
        for t in self.tensors[1:]:
            out = contract(out, t, [(out.ndim - 1, 0)])
        return out[..., 0].reshape(-1)

    def norm(self) -> float:
        return float(np.sqrt(max(overlap(self, self).real, 0.0)))

    def scale(self, alpha) -> "MPS":
        ts = [t.copy() for t in self.tensors]
        ts[0] = ts[0] * alpha
        return MPS(ts, self.canonical_center)

    def __add__(self, other: "MPS") -> "MPS":
        return add_mps(self, other)

    def to_json_dict(self) -> dict:
        return {
            "kind": "mps",
            "sites": [_array_to_json(t) for t in self.tensors],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "MPS":
        return cls([_array_from_json(s) for s in obj["sites"]])


class MPO:
    """Matrix product operator; tensors are (left, out, in, right)."""

    def __init__(self, tensors):
        self.tensors = [np.asarray(t, dtype=np.complex128) for t in tensors]
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[-1] != 1:
            raise DimensionError("boundary bonds must have extent 1")
        for i in range(len(self.tensors) - 1):
            if self.tensors[i].shape[-1] != self.tensors[i + 1].shape[0]:
                raise DimensionError(f"bond mismatch between sites {i} and {i + 1}")
        for t in self.tensors:
            if t.ndim != 4:
                raise DimensionError("MPO site tensors must be rank 4")

    @property
    def n(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self):
        return [t.shape[-1] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max([1] + self.bond_dims)

    @classmethod
    def identity(cls, n: int, d: int) -> "MPO":
        eye = np.eye(d, dtype=np.complex128).reshape(1, d, d, 1)
        return cls([eye.copy() for _ in range(n)])

    @classmethod
    def zero(cls, n: int, d: int) -> "MPO":
        z = np.zeros((1, d, d, 1), dtype=np.complex128)
        return cls([z.copy() for _ in range(n)])

    @classmethod
    def from_dense(cls, op, dims, max_bond: int = 10**9, cutoff: float = 0.0) -> "MPO":
        dims = list(dims)
        total = int(np.prod(dims))
        op = np.asarray(op, dtype=np.complex128).reshape(total, total)
        # group (out_i, in_i) per site: reshape to interleaved site indices
        t = op.reshape(dims + dims)
        n = len(dims)
        perm = []
        for i in range(n):
            perm.extend([i, n + i])
        t = t.transpose(perm).reshape([d * d for d in dims])
        tensors = []
        rest = t.reshape(1, -1)
        left = 1
        for d in dims[:-1]:
            m = rest.reshape(left * d * d, -1)
            res = svd_truncate(m, max_rank=max_bond, cutoff=cutoff)
            k = res.rank
            tensors.append(res.left_isometry.reshape(left, d, d, k))
            rest = res.singular_values[:, None] * res.right_isometry
            left = k
        tensors.append(rest.reshape(left, dims[-1], dims[-1], 1))
        return cls(tensors)

    def to_dense(self) -> np.ndarray:
        out = self.tensors[0][0]  # (o0, i0, r)
        for t in self.tensors[1:]:
            out = contract(out, t, [(out.ndim - 1, 0)])
        out = out[..., 0]
        n = self.n
        # axes are o0,i0,o1,i1,... -> (o0..on, i0..in)
        perm = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
        out = out.transpose(perm)
        dims_out = int(np.prod(out.shape[:n]))
        return out.reshape(dims_out, dims_out)

    def scale(self, alpha) -> "MPO":
        ts = [t.copy() for t in self.tensors]
        ts[0] = ts[0] * alpha
        return MPO(ts)

    def adjoint(self) -> "MPO":
        return MPO([t.conj().transpose(0, 2, 1, 3) for t in self.tensors])

    def __add__(self, other: "MPO") -> "MPO":
        return add_mpo(self, other)

    def to_json_dict(self) -> dict:
        return {
            "kind": "mpo",
            "sites": [_array_to_json(t) for t in self.tensors],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "MPO":
        return cls([_array_from_json(s) for s in obj["sites"]])


def _array_to_json(a: np.ndarray) -> dict:
    return {
        "shape": list(a.shape),
        "re": a.real.reshape(-1).tolist(),
        "im": a.imag.reshape(-1).tolist(),
    }


def _array_from_json(obj: dict) -> np.ndarray:
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj["im"], dtype=float)
    return (re + 1j * im).reshape(obj["shape"])


def add_mps(a: MPS, b: MPS, coeff_a=1.0, coeff_b=1.0) -> MPS:
    """Direct-sum representation of coeff_a*a + coeff_b*b."""
    if a.n != b.n or a.phys_dims != b.phys_dims:
        raise DimensionError("MPS addition requires matching site structure")
    n = a.n
    if n == 1:
        return MPS([coeff_a * a.tensors[0] + coeff_b * b.tensors[0]])
    tensors = []
    for i in range(n):
        ta, tb = a.tensors[i], b.tensors[i]
        if i == 0:
            ta = ta * coeff_a
            tb = tb * coeff_b
            t = np.concatenate([ta, tb], axis=2)
        elif i == n - 1:
            t = np.concatenate([ta, tb], axis=0)
        else:
            la, d, ra = ta.shape
            lb, _, rb = tb.shape
            t = np.zeros((la + lb, d, ra + rb), dtype=np.complex128)
            t[:la, :, :ra] = ta
            t[la:, :, ra:] = tb
        tensors.append(t)
    return MPS(tensors)


def add_mpo(a: MPO, b: MPO, coeff_a=1.0, coeff_b=1.0) -> MPO:
    if a.n != b.n:
        raise DimensionError("MPO addition requires matching length")
    n = a.n
    if n == 1:
        return MPO([coeff_a * a.tensors[0] + coeff_b * b.tensors[0]])
    tensors = []
    for i in range(n):
        ta, tb = a.tensors[i], b.tensors[i]
        if i == 0:
            t = np.concatenate([ta * coeff_a, tb * coeff_b], axis=3)
        elif i == n - 1:
            t = np.concatenate([ta, tb], axis=0)
        else:
            la, o, p, ra = ta.shape
            lb, _, _, rb = tb.shape
            t = np.zeros((la + lb, o, p, ra + rb), dtype=np.complex128)
            t[:la, :, :, :ra] = ta
            t[la:, :, :, ra:] = tb
        tensors.append(t)
    return MPO(tensors)


def overlap(a: MPS, b: MPS) -> complex:
    """<a|b> (conjugation on a)."""
    if a.n != b.n or a.phys_dims != b.phys_dims:
        raise DimensionError("overlap requires matching site structure")
    env = np.ones((1, 1), dtype=np.complex128)  # (bond_a, bond_b)
    for ta, tb in zip(a.tensors, b.tensors):
        env = contract(env, ta.conj(), [(0, 0)])  # (bb, d, ra)
        env = contract(env, tb, [(0, 0), (1, 1)])  # (ra, rb)
    return complex(env[0, 0])


def expectation(o: MPO, m: MPS) -> complex:
    """<m|O|m> by direct transfer contraction (no intermediate truncation)."""
    return sandwich(m, o, m)


def sandwich(bra: MPS, o: MPO, ket: MPS) -> complex:
    if not (bra.n == o.n == ket.n):
        raise DimensionError("sandwich requires matching lengths")
    env = np.ones((1, 1, 1), dtype=np.complex128)  # (bra, op, ket)
    for tb, to, tk in zip(bra.tensors, o.tensors, ket.tensors):
        env = contract(env, tb.conj(), [(0, 0)])       # (op, ket, d_out, rb)
        env = contract(env, to, [(0, 0), (2, 1)])      # (ket, rb, d_in, ro)
        env = contract(env, tk, [(0, 0), (2, 1)])      # (rb, ro, rk)
    return complex(env[0, 0, 0])


def canonicalize(m: MPS, center: int) -> MPS:
    """Return an equivalent MPS with orthogonality center at ``center``."""
    if not 0 <= center < m.n:
        raise DimensionError(f"center {center} out of range for {m.n} sites")
    ts = [t.copy() for t in m.tensors]
    for i in range(center):
        l, d, r = ts[i].shape
        q, rmat = _qr_pos(ts[i].reshape(l * d, r))
        k = q.shape[1]
        ts[i] = q.reshape(l, d, k)
        ts[i + 1] = contract(rmat, ts[i + 1], [(1, 0)])
    for i in range(m.n - 1, center, -1):
        l, d, r = ts[i].shape
        rmat, q = _rq_pos(ts[i].reshape(l, d * r))
        k = q.shape[0]
        ts[i] = q.reshape(k, d, r)
        ts[i - 1] = contract(ts[i - 1], rmat, [(2, 0)])
    return MPS(ts, canonical_center=center)


def compress(m: MPS, max_bond: int, cutoff: float = 0.0) -> tuple[MPS, float]:
    """Sweep compression; returned bound dominates the true l2 distance."""
    if max_bond < 1:
        raise DimensionError("max_bond must be >= 1")
    mm = canonicalize(m, m.n - 1)
    ts = mm.tensors
    total = 0.0
    for i in range(m.n - 1, 0, -1):
        l, d, r = ts[i].shape
        res = svd_truncate(ts[i].reshape(l, d * r), max_rank=max_bond, cutoff=cutoff)
        k = res.rank
        total += res.discarded_weight
        ts[i] = res.right_isometry.reshape(k, d, r)
        carry = res.left_isometry * res.singular_values[None, :]
        ts[i - 1] = contract(ts[i - 1], carry, [(2, 0)])
    return MPS(ts, canonical_center=0), float(np.sqrt(total))


def schmidt_spectra(m: MPS) -> list:
    """Singular values across each of the n-1 internal cuts (no truncation)."""
    mm = canonicalize(m, m.n - 1)
    ts = mm.tensors
    spectra: list = [None] * (m.n - 1)
    for i in range(m.n - 1, 0, -1):
        l, d, r = ts[i].shape
        res = svd_truncate(ts[i].reshape(l, d * r), max_rank=10**9, cutoff=0.0)
        spectra[i - 1] = res.singular_values.copy()
        ts[i] = res.right_isometry.reshape(res.rank, d, r)
        carry = res.left_isometry * res.singular_values[None, :]
        ts[i - 1] = contract(ts[i - 1], carry, [(2, 0)])
    return spectra


def apply_mpo(
    o: MPO,
    m: MPS,
    max_bond: int = 10**9,
    cutoff: float = 0.0,
    dense_bond_limit: int = 384,
) -> tuple[MPS, float]:
    """Apply ``o`` to ``m`` and compress the result.

    When every intermediate bond (state bond x operator bond) stays below
    ``dense_bond_limit`` the product is formed exactly site by site and the
    reported error bound is the rigorous compression bound.  Above the limit a
    zip-up sweep with on-the-fly truncation is used and the bound additionally
    includes the (heuristic) zip-up discards.
    """
    if o.n != m.n:
        raise DimensionError("operator and state lengths differ")
    for to, tm in zip(o.tensors, m.tensors):
        if to.shape[2] != tm.shape[1]:
            raise DimensionError("operator input dimension does not match state")
    worst = max(
        to.shape[-1] * tm.shape[-1] for to, tm in zip(o.tensors, m.tensors)
    )
    if worst <= dense_bond_limit:
        ts = []
        for to, tm in zip(o.tensors, m.tensors):
            # (lo, out, in, ro) x (lm, in, rm) -> (lo*lm, out, ro*rm)
            t = contract(to, tm, [(2, 1)])  # (lo, out, ro, lm, rm)
            t = t.transpose(0, 3, 1, 2, 4)
            lo, lm, dd, ro, rm = t.shape
            ts.append(t.reshape(lo * lm, dd, ro * rm))
        return compress(MPS(ts), max_bond=max_bond, cutoff=cutoff)
    return _apply_mpo_zipup(o, m, max_bond=max_bond, cutoff=cutoff)


def _apply_mpo_zipup(o: MPO, m: MPS, max_bond: int, cutoff: float) -> tuple[MPS, float]:
    n = m.n
    zip_cut = max(cutoff * 1e-2, 1e-13)
    carry = np.ones((1, 1, 1), dtype=np.complex128)  # (new, op, state)
    ts = []
    zip_discard = 0.0
    for i in range(n):
        x = contract(carry, o.tensors[i], [(1, 0)])      # (new, sm, out, in, ro)
        x = contract(x, m.tensors[i], [(1, 0), (3, 1)])  # (new, out, ro, rm)
        a, dd, ro, rm = x.shape
        if i == n - 1:
            ts.append(x.reshape(a, dd, ro * rm))
            carry = None
        else:
            res = svd_truncate(x.reshape(a * dd, ro * rm), max_rank=max_bond, cutoff=zip_cut)
            zip_discard += res.discarded_weight
            k = res.rank
            ts.append(res.left_isometry.reshape(a, dd, k))
            carry = (res.singular_values[:, None] * res.right_isometry).reshape(k, ro, rm)
    out, err = compress(MPS(ts), max_bond=max_bond, cutoff=cutoff)
    return out, err + float(np.sqrt(zip_discard))


def mpo_matvec(o: MPO, v: np.ndarray) -> np.ndarray:
    """Apply an MPO to a dense state vector without densifying the operator.

    Site by site the input leg is contracted and the produced output leg is
    rotated to the back, so the cost stays linear in the Hilbert dimension
    times the operator bond squared.
    """
    dims = [t.shape[2] for t in o.tensors]
    if v.size != int(np.prod(dims)):
        raise DimensionError("vector length does not match operator input dims")
    x = np.asarray(v, dtype=np.complex128).reshape(1, -1)
    for t in o.tensors:
        bl, _, i_, _ = t.shape
        x = x.reshape(bl, i_, -1)
        y = contract(t, x, [(0, 0), (2, 1)])  # (out, br, rest)
        x = y.transpose(1, 2, 0)
    return x.reshape(-1)


def compress_mpo(o: MPO, max_bond: int, cutoff: float = 0.0) -> tuple[MPO, float]:
    """Sweep compression of an MPO in the Frobenius (vectorized) norm."""
    as_state = MPS([t.reshape(t.shape[0], t.shape[1] * t.shape[2], t.shape[3]) for t in o.tensors])
    comp, err = compress(as_state, max_bond=max_bond, cutoff=cutoff)
    ts = []
    for t, orig in zip(comp.tensors, o.tensors):
        l, _, r = t.shape
        ts.append(t.reshape(l, orig.shape[1], orig.shape[2], r))
    return MPO(ts), err


def multiply_mpo(
    a: MPO,
    b: MPO,
    max_bond: int = 10**9,
    cutoff: float = 0.0,
    dense_bond_limit: int = 256,
) -> tuple[MPO, float]:
    """Operator product a @ b compressed in the Frobenius (vectorized) norm.

    While every product bond stays below ``dense_bond_limit`` the product is
    formed exactly and then swept; above the limit a zip-up sweep truncates on
    the fly (heuristic error accounting, like :func:`apply_mpo`).
    """
    if a.n != b.n:
        raise DimensionError("MPO lengths differ")
    worst = max(ta.shape[-1] * tb.shape[-1] for ta, tb in zip(a.tensors, b.tensors))
    if worst > dense_bond_limit and max_bond < worst:
        return _multiply_mpo_zipup(a, b, max_bond=max_bond, cutoff=cutoff)
    ts = []
    for ta, tb in zip(a.tensors, b.tensors):
        # (la, out, mid, ra) x (lb, mid, in, rb)
        t = contract(ta, tb, [(2, 1)])  # (la, out, ra, lb, in, rb)
        t = t.transpose(0, 3, 1, 4, 2, 5)
        la, lb, o_, i_, ra, rb = t.shape
        ts.append(t.reshape(la * lb, o_, i_, ra * rb))
    prod = MPO(ts)
    if max_bond >= prod.max_bond and cutoff == 0.0:
        return prod, 0.0
    return compress_mpo(prod, max_bond=max_bond, cutoff=cutoff)


def _multiply_mpo_zipup(a: MPO, b: MPO, max_bond: int, cutoff: float) -> tuple[MPO, float]:
    zip_cut = max(cutoff * 1e-2, 1e-13)
    carry = np.ones((1, 1, 1), dtype=np.complex128)  # (new, bond_a, bond_b)
    ts = []
    zip_discard = 0.0
    for idx, (ta, tb) in enumerate(zip(a.tensors, b.tensors)):
        x = contract(carry, ta, [(1, 0)])  # (new, bond_b, out, mid, ra)
        x = contract(x, tb, [(1, 0), (3, 1)])  # (new, out, ra, in, rb)
        new, o_, ra, i_, rb = x.shape
        x = x.transpose(0, 1, 3, 2, 4).reshape(new * o_ * i_, ra * rb)
        if idx == a.n - 1:
            ts.append(x.reshape(new, o_, i_, 1))
            break
        res = svd_truncate(x, max_rank=max_bond, cutoff=zip_cut)
        zip_discard += res.discarded_weight
        ts.append(res.left_isometry.reshape(new, o_, i_, res.rank))
        carry = (res.singular_values[:, None] * res.right_isometry).reshape(
            res.rank, ra, rb
        )
    out, sweep_err = compress_mpo(MPO(ts), max_bond=max_bond, cutoff=cutoff)
    return out, sweep_err + float(np.sqrt(zip_discard))


# ---------------------------------------------------------------------------
# Span-level operations via joint purification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrimReport:
    """Audit record of a collective trim sweep."""

    max_bond_after: int
    viability_penalty_bound: float
    discarded_weight_total: float
    cut_count: int

    def __post_init__(self):
        assert self.max_bond_after >= 0
        assert self.viability_penalty_bound >= 0
        assert self.discarded_weight_total >= -1e-15


def joint_purification(vs: list[MPS]) -> MPS:
    """Return sum_i |v_i>|i> as an MPS with one auxiliary site appended.

    The auxiliary site has physical dimension len(vs); slicing its physical
    leg recovers the individual vectors (see :func:`split_joint`).
    """
    if not vs:
        raise DimensionError("empty vector list")
    s = len(vs)
    n = vs[0].n
    dims = vs[0].phys_dims
    for v in vs:
        if v.n != n or v.phys_dims != dims:
            raise DimensionError("vectors must share site structure")
    tensors = []
    for i in range(n):
        parts = [v.tensors[i] for v in vs]
        if n == 1:
            t = np.concatenate(parts, axis=2)
        elif i == 0:
            t = np.concatenate(parts, axis=2)
        elif i == n - 1:
            ls = [p.shape[0] for p in parts]
            rs = [p.shape[2] for p in parts]
            t = np.zeros((sum(ls), dims[i], sum(rs)), dtype=np.complex128)
            lo = ro = 0
            for p in parts:
                t[lo : lo + p.shape[0], :, ro : ro + p.shape[2]] = p
                lo += p.shape[0]
                ro += p.shape[2]
        else:
            ls = [p.shape[0] for p in parts]
            rs = [p.shape[2] for p in parts]
            t = np.zeros((sum(ls), dims[i], sum(rs)), dtype=np.complex128)
            lo = ro = 0
            for p in parts:
                t[lo : lo + p.shape[0], :, ro : ro + p.shape[2]] = p
                lo += p.shape[0]
                ro += p.shape[2]
        tensors.append(t)
    # auxiliary site: left bond enumerates the blocks (each right boundary
    # bond is 1 so the last chain bond has extent s)
    aux = np.zeros((tensors[-1].shape[2], s, 1), dtype=np.complex128)
    ro = 0
    for idx, v in enumerate(vs):
        w = v.tensors[-1].shape[2]
        aux[ro : ro + w, idx, 0] = 1.0
        ro += w
    tensors.append(aux)
    return MPS(tensors)


def split_joint(psi: MPS) -> list[MPS]:
    """Inverse of :func:`joint_purification` up to gauge: slice the aux leg."""
    chain = [t.copy() for t in psi.tensors[:-1]]
    aux = psi.tensors[-1]  # (l, s, 1)
    s = aux.shape[1]
    out = []
    last = chain[-1]
    for i in range(s):
        col = aux[:, i, 0]
        ti = contract(last, col, [(2, 0)])[:, :, None]
        out.append(MPS(chain[:-1] + [ti]))
    return out


def gram_matrix(vs: list[MPS]) -> np.ndarray:
    g = np.empty((len(vs), len(vs)), dtype=np.complex128)
    for i, a in enumerate(vs):
        for j, b in enumerate(vs):
            if j < i:
                g[i, j] = np.conj(g[j, i])
            else:
                g[i, j] = overlap(a, b)
    return g


def orthonormal_span(
    vs: list[MPS],
    gram_tol: float | None = None,
    max_bond: int = 10**9,
    max_keep: int | None = None,
) -> list[MPS]:
    """Orthonormal MPS basis of span(vs), up to Gram eigenvalues < gram_tol.

    Left-canonicalizing the joint purification turns the auxiliary-cut matrix
    C into a square root of the Gram matrix (C^dag C = Gram), so its singular
    values squared are exactly the Gram eigenvalues; kept singular directions
    are reset to unit weight.  With ``max_keep`` set, only the largest
    ``max_keep`` directions survive.
    """
    if not vs:
        raise DimensionError("empty vector list")
    if gram_tol is None:
        gram_tol = 1e-10 * len(vs)
    psi = joint_purification(vs)
    if psi.max_bond > max_bond:
        psi, _ = compress(psi, max_bond=max_bond)
    psi = canonicalize(psi, psi.n - 1)
    aux = psi.tensors[-1]  # (l, s, 1)
    c = aux[:, :, 0]
    u, sv, _ = np.linalg.svd(c, full_matrices=False)
    keep = int(np.sum(sv**2 >= gram_tol))
    if max_keep is not None:
        keep = min(keep, max_keep)
    if keep == 0:
        raise NumericError("input list spans only the zero vector at this tolerance")
    chain = [t.copy() for t in psi.tensors[:-1]]
    out = []
    for k in range(keep):
        tk = contract(chain[-1], u[:, k], [(2, 0)])[:, :, None]
        out.append(MPS(chain[:-1] + [tk], canonical_center=len(chain) - 1))
    return out


def combine_span(
    vs: list[MPS],
    coeffs: np.ndarray,
    max_bond: int = 10**9,
    cutoff: float = 1e-14,
) -> list[MPS]:
    """Linear combinations sum_j coeffs[j, i] * vs[j], one MPS per column.

    The joint purification is canonicalized once and shared by every output,
    which beats repeated pairwise additions when many combinations of the
    same vectors are needed.
    """
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    if coeffs.ndim != 2 or coeffs.shape[0] != len(vs):
        raise DimensionError("coefficient matrix must be (len(vs), outputs)")
    psi = canonicalize(joint_purification(vs), len(vs[0].tensors))
    chain = psi.tensors[:-1]
    aux = psi.tensors[-1][:, :, 0]  # (bond, len(vs))
    outs = []
    for i in range(coeffs.shape[1]):
        vec = aux @ coeffs[:, i]
        tk = contract(chain[-1], vec, [(2, 0)])[:, :, None]
        ts = [t.copy() for t in chain[:-1]] + [tk]
        # all sites left of the end are left-canonical: truncate right-to-left
        total = 0.0
        for j in range(len(ts) - 1, 0, -1):
            l, d, r = ts[j].shape
            res = svd_truncate(ts[j].reshape(l, d * r), max_rank=max_bond, cutoff=cutoff)
            total += res.discarded_weight
            ts[j] = res.right_isometry.reshape(res.rank, d, r)
            carry = res.left_isometry * res.singular_values[None, :]
            ts[j - 1] = contract(ts[j - 1], carry, [(2, 0)])
        outs.append(MPS(ts, canonical_center=0))
    return outs


def trim_collective(
    basis: list[MPS],
    xi: float,
    b_hint: float = 1.0,
    gram_dev_tol: float = 1e-6,
) -> tuple[list[MPS], TrimReport]:
    """Collectively trim an orthonormal basis: zero joint Schmidt coefficients < xi.

    The purified sum of the basis is put in canonical form and swept right to
    left; at every internal cut of the chain the singular values below ``xi``
    are dropped with no re-normalization, and finally the auxiliary bond is
    cut to recover one (possibly shortened) vector per input.  Every output
    then has Schmidt rank at most s/xi^2 at each cut, at an overlap cost
    bounded by sqrt(cuts * b_hint * s) * xi for targets of Schmidt rank
    <= b_hint.
    """
    if xi < 0:
        raise NumericError("xi must be non-negative")
    s = len(basis)
    g = gram_matrix(basis)
    if np.linalg.norm(g - np.eye(s)) > gram_dev_tol:
        raise NumericError("trim_collective requires an orthonormal basis")
    psi = joint_purification(basis)
    n_chain = psi.n - 1
    psi = canonicalize(psi, psi.n - 1)
    ts = psi.tensors
    discarded = 0.0
    # move through the aux site without thresholding (its coefficients are the
    # Gram singular values, all 1 here), then threshold each chain cut
    for j in range(psi.n - 1, 0, -1):
        l, d, r = ts[j].shape
        res = svd_truncate(
            ts[j].reshape(l, d * r),
            max_rank=10**9,
            cutoff=xi if j <= n_chain - 1 else 0.0,
        )
        discarded += res.discarded_weight
        if res.rank == 0:
            # every coefficient at this cut fell below xi: the state is zero
            ts[j] = np.zeros((1, d, r), dtype=np.complex128)
            carry = np.zeros((l, 1), dtype=np.complex128)
        else:
            ts[j] = res.right_isometry.reshape(res.rank, d, r)
            carry = res.left_isometry * res.singular_values[None, :]
        ts[j - 1] = contract(ts[j - 1], carry, [(2, 0)])
    trimmed_joint = MPS(ts)
    outs = split_joint(trimmed_joint)
    report = TrimReport(
        max_bond_after=max([1] + [t.shape[-1] for t in ts[:-2]]),
        viability_penalty_bound=float(np.sqrt(max(n_chain - 1, 0) * b_hint * s) * xi),
        discarded_weight_total=float(discarded),
        cut_count=max(n_chain - 1, 0),
    )
    return outs, report
