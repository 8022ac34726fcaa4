"""Dense exact-diagonalization ground truth for small chains.

Everything here is a referee: exact spectra, spectral subspaces, viability
and closeness measurements, and the exact polynomial image of a dense
operator.  The production solver never calls into this module; tests do, and
skip (never silently pass) when a chain exceeds the dense size limits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agsp import ChebyParams, chebyshev_eval
from .hamiltonian import LocalHamiltonian, to_dense
from .tensor import DimensionError, NumericError

__all__ = [
    "DenseLimits",
    "OracleUnavailable",
    "DenseSubspace",
    "exact_spectrum",
    "spectral_subspace",
    "viability",
    "mutual_closeness",
    "exact_agsp",
    "columns_from_states",
]

_ORTHO_TOL = 1e-10


class OracleUnavailable(RuntimeError):
    """The request exceeds the dense size budget; treat as a skip, not a pass."""


@dataclass(frozen=True)
class DenseLimits:
    """Size caps for dense work: amplitudes per state vector and total
    entries per dense operator."""

    states: int = 2**14
    operator_entries: int = 2**26


DEFAULT_LIMITS = DenseLimits()


@dataclass
class DenseSubspace:
    """Orthonormal column basis of a subspace of C^ambient."""

    basis: np.ndarray

    def __post_init__(self):
        self.basis = np.asarray(self.basis, dtype=np.complex128)
        if self.basis.ndim != 2:
            raise DimensionError("basis must be a 2-d column matrix")
        g = self.basis.conj().T @ self.basis
        if self.dim and np.abs(g - np.eye(self.dim)).max() > _ORTHO_TOL:
            raise NumericError("basis columns are not orthonormal")

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def from_vectors(cls, cols, tol: float = 1e-12) -> "DenseSubspace":
        """Orthonormalize a (possibly dependent) list of column vectors."""
        m = np.column_stack([np.asarray(c, dtype=np.complex128).reshape(-1) for c in cols])
        u, s, _ = np.linalg.svd(m, full_matrices=False)
        keep = s > tol * max(float(s[0]) if s.size else 0.0, 1e-300)
        return cls(u[:, keep])

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T


def columns_from_states(states) -> np.ndarray:
    """Stack MPS (or dense vector) values into a column matrix."""
    cols = []
    for v in states:
        vec = v.to_dense() if hasattr(v, "to_dense") else np.asarray(v)
        cols.append(np.asarray(vec, dtype=np.complex128).reshape(-1))
    return np.column_stack(cols)


def _check_limits(h: LocalHamiltonian, limits: DenseLimits):
    dim = h.d**h.n
    if dim > limits.states or dim * dim > limits.operator_entries:
        raise OracleUnavailable(
            f"dense oracle unavailable: dimension {dim} exceeds limits {limits}"
        )
    return dim


def exact_spectrum(
    h: LocalHamiltonian, limits: DenseLimits = DEFAULT_LIMITS
) -> tuple[np.ndarray, np.ndarray]:
    """Full dense spectrum (ascending) and eigenvector columns of sum_i h_i."""
    _check_limits(h, limits)
    dense = to_dense(h, entry_limit=limits.operator_entries)
    return np.linalg.eigh(dense)


def spectral_subspace(
    h: LocalHamiltonian, lo: float, hi: float, limits: DenseLimits = DEFAULT_LIMITS
) -> DenseSubspace:
    """Span of eigenvectors with eigenvalue in [lo, hi]; may be empty.

    Endpoints carry a 1e-12 slack so that eigenvalues sitting on a window
    boundary up to rounding (e.g. a ground energy of -1e-16) are included.
    """
    w, v = exact_spectrum(h, limits)
    keep = (w >= lo - 1e-12) & (w <= hi + 1e-12)
    return DenseSubspace(v[:, keep])


def viability(
    s: DenseSubspace,
    t: DenseSubspace,
    left_dim: int = 1,
    right_dim: int = 1,
) -> float:
    """delta such that P_T P_Sext P_T >= (1-delta) P_T.

    ``s`` lives on a contiguous block; its extension to the chain is
    S (x) everything else, i.e. P_Sext = 1_left (x) P_S (x) 1_right.
    delta = 1 - lambda_min of the |T|x|T| restriction of P_Sext to T.
    """
    p_ext = np.kron(
        np.kron(np.eye(left_dim), s.projector()), np.eye(right_dim)
    )
    if p_ext.shape[0] != t.ambient_dim:
        raise DimensionError(
            f"extended block dimension {p_ext.shape[0]} != ambient {t.ambient_dim}"
        )
    if t.dim == 0:
        return 0.0
    restricted = t.basis.conj().T @ p_ext @ t.basis
    w = np.linalg.eigvalsh((restricted + restricted.conj().T) / 2)
    return float(min(max(1.0 - w[0], 0.0), 1.0))


def _one_sided(t1: DenseSubspace, t2: DenseSubspace) -> float:
    """max over unit t in T1 of ||(1 - P_T2) t||^2."""
    if t1.dim == 0:
        return 0.0
    m = t2.basis.conj().T @ t1.basis  # (|T2|, |T1|)
    overlap = m.conj().T @ m
    w = np.linalg.eigvalsh((overlap + overlap.conj().T) / 2)
    return float(min(max(1.0 - w[0], 0.0), 1.0))


def mutual_closeness(t1: DenseSubspace, t2: DenseSubspace) -> float:
    """Symmetric subspace distance: the larger of the two one-sided
    worst-case leakages out of the other subspace."""
    if t1.ambient_dim != t2.ambient_dim:
        raise DimensionError("subspaces live in different ambient spaces")
    return max(_one_sided(t1, t2), _one_sided(t2, t1))


def exact_agsp(h_dense: np.ndarray, p: ChebyParams) -> np.ndarray:
    """P_k(H) through the eigendecomposition: no recurrence or MPO error."""
    h_dense = np.asarray(h_dense, dtype=np.complex128)
    w, v = np.linalg.eigh((h_dense + h_dense.conj().T) / 2)
    return (v * chebyshev_eval(p, w)) @ v.conj().T
