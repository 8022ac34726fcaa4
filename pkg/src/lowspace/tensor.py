"""Dense complex tensor kernels.

All heavy numerics in the package go through the handful of routines in this
module: pairwise tensor contraction, truncated SVD, Hermitian
eigendecomposition and Haar-random isometries.  Everything is complex128 and
pure; arrays returned here are never mutated afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DimensionError",
    "NumericError",
    "SvdResult",
    "contract",
    "svd_truncate",
    "eigh_hermitian",
    "haar_isometry",
    "spawn_rng",
]


class DimensionError(ValueError):
    """Raised when tensor extents do not line up."""


class NumericError(ValueError):
    """Raised on non-finite input or a violated numerical contract."""


def _as_tensor(a) -> np.ndarray:
    return np.asarray(a, dtype=np.complex128)


def contract(a, b, paired_axes) -> np.ndarray:
    """Contract tensors ``a`` and ``b`` over the given ``(axis_a, axis_b)`` pairs.

    Output axes are the unpaired axes of ``a`` followed by those of ``b``, in
    their original order.  An empty pairing list is the outer product.
    """
    a = _as_tensor(a)
    b = _as_tensor(b)
    if paired_axes:
        ax_a, ax_b = zip(*paired_axes)
    else:
        ax_a, ax_b = (), ()
    for i, j in zip(ax_a, ax_b):
        if a.shape[i] != b.shape[j]:
            raise DimensionError(
                f"axis {i} of a (extent {a.shape[i]}) does not match "
                f"axis {j} of b (extent {b.shape[j]})"
            )
    return np.tensordot(a, b, axes=(ax_a, ax_b))


@dataclass(frozen=True)
class SvdResult:
    """Truncated SVD ``m ~ U @ diag(s) @ Vh``.

    ``discarded_weight`` is the sum of squares of the dropped singular values,
    i.e. the squared Frobenius reconstruction error.
    """

    left_isometry: np.ndarray
    singular_values: np.ndarray
    right_isometry: np.ndarray
    discarded_weight: float

    @property
    def rank(self) -> int:
        return len(self.singular_values)


def svd_truncate(m, max_rank: int, cutoff: float = 0.0) -> SvdResult:
    """SVD of a matrix keeping at most ``max_rank`` values, all of them >= ``cutoff``.

    The rank cap is applied first, then the cutoff; ties at the cutoff keep the
    lower (earlier) index after the descending sort.
    """
    m = _as_tensor(m)
    if m.ndim != 2:
        raise DimensionError(f"svd_truncate expects a matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise NumericError("svd_truncate: non-finite entries")
    if max_rank < 1:
        raise DimensionError("max_rank must be >= 1")
    try:
        u, s, vh = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        u, s, vh = _svd_via_eigh(m)
    keep = min(max_rank, len(s))
    # cutoff applied after the rank cap; strictly-smaller values are dropped
    while keep > 1 and s[keep - 1] < cutoff:
        keep -= 1
    if keep >= 1 and s[0] < cutoff:
        keep = 0
    discarded = float(np.sum(s[keep:] ** 2))
    return SvdResult(
        left_isometry=np.ascontiguousarray(u[:, :keep]),
        singular_values=s[:keep].copy(),
        right_isometry=np.ascontiguousarray(vh[:keep, :]),
        discarded_weight=discarded,
    )


def _svd_via_eigh(m: np.ndarray):
    # Fallback for rare LAPACK gesdd convergence failures.
    w, v = np.linalg.eigh(m.conj().T @ m)
    w = np.clip(w[::-1], 0.0, None)
    v = v[:, ::-1]
    s = np.sqrt(w)
    u = np.zeros((m.shape[0], len(s)), dtype=np.complex128)
    nz = s > 1e-300
    u[:, nz] = (m @ v[:, nz]) / s[nz]
    return u, s, v.conj().T


def eigh_hermitian(a, hermiticity_tol: float = 1e-8):
    """Eigendecomposition of a Hermitian matrix; eigenvalues ascending.

    Raises ``NumericError`` when ``a`` deviates from Hermiticity by more than
    ``hermiticity_tol`` relative to its norm.
    """
    a = _as_tensor(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"eigh_hermitian expects a square matrix, got {a.shape}")
    scale = max(np.linalg.norm(a), 1e-300)
    dev = np.linalg.norm(a - a.conj().T)
    if dev > hermiticity_tol * scale:
        raise NumericError(f"matrix is not Hermitian: |a - a^dag| = {dev:.3e}")
    vals, vecs = np.linalg.eigh(a)
    return vals, vecs


def haar_isometry(rows: int, cols: int, rng) -> np.ndarray:
    """Haar-distributed ``rows x cols`` isometry (unitary when square).

    QR of a complex Gaussian matrix, with the phase of the R diagonal fixed so
    the distribution is exactly Haar.  ``rng`` is a ``numpy.random.Generator``
    or an integer seed.
    """
    if cols > rows:
        raise DimensionError(f"cols ({cols}) must not exceed rows ({rows})")
    rng = spawn_rng(rng) if isinstance(rng, int) else rng
    g = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(g)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))
    return q


def haar_orthogonal(rows: int, cols: int, rng) -> np.ndarray:
    """Real-orthogonal analogue of :func:`haar_isometry` (complex dtype)."""
    if cols > rows:
        raise DimensionError(f"cols ({cols}) must not exceed rows ({rows})")
    rng = spawn_rng(rng) if isinstance(rng, int) else rng
    g = rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diagonal(r))
    return q.astype(np.complex128)


def spawn_rng(seed: int, *key: int) -> np.random.Generator:
    """Deterministic per-component generator.

    All randomness in the package flows from one master seed; components at
    (level, block, ...) coordinates get independent streams via the
    ``SeedSequence`` spawn-key mechanism.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))
