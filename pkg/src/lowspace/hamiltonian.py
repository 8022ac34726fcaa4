"""1D 2-local Hamiltonians H = sum_i h_i with per-term spectra in [0, 1].

Terms are stored as dense d^2 x d^2 Hermitian matrices; term i acts on sites
(i, i+1) of an open chain (0-based internally; regions use 1-based inclusive
indices at the interface).  The catalog covers a pinned commuting chain, the
spin-1 AKLT chain, transverse-field Ising, the Heisenberg antiferromagnet and
custom terms loaded from JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .mps import MPO
from .tensor import DimensionError, NumericError, eigh_hermitian

__all__ = [
    "LocalHamiltonian",
    "Region",
    "build_model",
    "to_projectors",
    "restrict",
    "to_mpo",
    "to_dense",
    "load_custom_terms",
    "MODEL_NAMES",
]

MODEL_NAMES = ("pinned", "aklt", "tfi", "heisenberg", "custom")

_SPEC_TOL = 1e-9


@dataclass
class LocalHamiltonian:
    n: int
    d: int
    terms: list = field(default_factory=list)
    gap_hint: float | None = None
    energy_window: tuple | None = None  # (eta, mu)
    degeneracy_hint: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise DimensionError("need at least one site")
        if self.d < 2:
            raise DimensionError("local dimension must be >= 2")
        if len(self.terms) != self.n - 1:
            raise DimensionError(
                f"expected {self.n - 1} terms for {self.n} sites, got {len(self.terms)}"
            )
        self.terms = [np.asarray(t, dtype=np.complex128) for t in self.terms]
        dd = self.d * self.d
        for i, t in enumerate(self.terms):
            if t.shape != (dd, dd):
                raise DimensionError(f"term {i} has shape {t.shape}, expected ({dd}, {dd})")
            if np.linalg.norm(t - t.conj().T) > _SPEC_TOL * max(1.0, np.linalg.norm(t)):
                raise NumericError(f"term {i} is not Hermitian")
            w = np.linalg.eigvalsh(t)
            if w[0] < -_SPEC_TOL or w[-1] > 1 + _SPEC_TOL:
                raise NumericError(
                    f"term {i} spectrum [{w[0]:.3e}, {w[-1]:.3e}] outside [0, 1]"
                )

    @property
    def norm_bound(self) -> float:
        """||H|| <= number of terms, each of norm at most 1."""
        return float(max(len(self.terms), 1))


@dataclass(frozen=True)
class Region:
    """Contiguous block of sites, 1-based inclusive."""

    start: int
    end: int

    def __post_init__(self):
        if not 1 <= self.start <= self.end:
            raise DimensionError(f"bad region [{self.start}, {self.end}]")

    @property
    def length(self) -> int:
        return self.end - self.start + 1


def normalize_term(h) -> np.ndarray:
    """Shift and scale a Hermitian term so its spectrum lies in [0, 1].

    h <- (h - lmin) / max(1, lmax - lmin); eigenvectors are preserved.
    """
    h = np.asarray(h, dtype=np.complex128)
    w = np.linalg.eigvalsh((h + h.conj().T) / 2)
    lo, hi = float(w[0]), float(w[-1])
    scale = max(1.0, hi - lo)
    return (h - lo * np.eye(h.shape[0])) / scale


def _pauli():
    x = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
    z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
    return x, y, z


def _spin1():
    s = 1 / np.sqrt(2)
    sx = s * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=np.complex128)
    sy = s * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=np.complex128)
    sz = np.diag([1.0, 0.0, -1.0]).astype(np.complex128)
    return sx, sy, sz


def _kron(a, b):
    return np.kron(a, b)


def build_model(name: str, n: int, params: dict | None = None) -> LocalHamiltonian:
    params = dict(params or {})
    if n < 2:
        raise DimensionError("catalog models need n >= 2")
    if name == "pinned":
        # h_i = 1 - |00><00|: commuting projectors pinning every site to |0>
        h = np.eye(4, dtype=np.complex128)
        h[0, 0] = 0.0
        return LocalHamiltonian(
            n=n, d=2, terms=[h.copy() for _ in range(n - 1)],
            gap_hint=params.get("gamma", 1.0), degeneracy_hint=1,
        )
    if name == "aklt":
        sx, sy, sz = _spin1()
        ss = _kron(sx, sx) + _kron(sy, sy) + _kron(sz, sz)
        # projector onto the combined spin-2 sector of two spin-1 sites
        h = ss / 2 + (ss @ ss) / 6 + np.eye(9, dtype=np.complex128) / 3
        return LocalHamiltonian(
            n=n, d=3, terms=[h.copy() for _ in range(n - 1)],
            gap_hint=params.get("gamma"), degeneracy_hint=4,
        )
    if name == "tfi":
        g = float(params.get("g", 1.0))
        x, _, z = _pauli()
        eye = np.eye(2, dtype=np.complex128)
        terms = []
        for i in range(n - 1):
            a = 1.0 if i == 0 else 0.5
            b = 1.0 if i == n - 2 else 0.5
            raw = -_kron(z, z) - g * (a * _kron(x, eye) + b * _kron(eye, x))
            terms.append(normalize_term(raw))
        return LocalHamiltonian(n=n, d=2, terms=terms, gap_hint=params.get("gamma"))
    if name == "heisenberg":
        x, y, z = _pauli()
        raw = _kron(x, x) + _kron(y, y) + _kron(z, z)
        term = normalize_term(raw)
        return LocalHamiltonian(
            n=n, d=2, terms=[term.copy() for _ in range(n - 1)],
            gap_hint=params.get("gamma"),
        )
    if name == "custom":
        if "terms" in params:
            spec = params
        else:
            path = params.get("path")
            if path is None:
                raise NumericError("custom model needs 'path' or inline 'terms'")
            with open(path) as f:
                spec = json.load(f)
        return load_custom_terms(spec, gap_hint=params.get("gamma"))
    raise NumericError(f"unknown model {name!r}; catalog: {MODEL_NAMES}")


def load_custom_terms(spec: dict, gap_hint: float | None = None) -> LocalHamiltonian:
    """Build a Hamiltonian from {"n":…, "d":…, "terms":[…]} with row-major
    [re, im] entry pairs per term; Hermiticity and [0,1] spectra are enforced."""
    n = int(spec["n"])
    d = int(spec["d"])
    terms = []
    for raw in spec["terms"]:
        flat = np.asarray(raw, dtype=float)
        if flat.ndim != 2 or flat.shape[1] != 2 or flat.shape[0] != d**4:
            raise DimensionError(
                f"custom term must be {d * d}x{d * d} row-major [re, im] pairs"
            )
        terms.append((flat[:, 0] + 1j * flat[:, 1]).reshape(d * d, d * d))
    return LocalHamiltonian(n=n, d=d, terms=terms, gap_hint=gap_hint)


def to_projectors(h: LocalHamiltonian, tol: float = 1e-10) -> LocalHamiltonian:
    """Replace every term by the projector onto its range (kernel preserved)."""
    terms = []
    for i, t in enumerate(h.terms):
        w, v = eigh_hermitian(t)
        if w[0] < -_SPEC_TOL:
            raise NumericError(f"term {i} is not positive semidefinite")
        keep = w > tol
        p = v[:, keep] @ v[:, keep].conj().T
        terms.append(p)
    return LocalHamiltonian(
        n=h.n, d=h.d, terms=terms, gap_hint=h.gap_hint,
        energy_window=h.energy_window, degeneracy_hint=h.degeneracy_hint,
    )


def restrict(h: LocalHamiltonian, j: Region) -> LocalHamiltonian:
    """Sub-chain Hamiltonian on the sites of ``j`` (terms fully inside)."""
    if j.end > h.n:
        raise DimensionError(f"region [{j.start}, {j.end}] exceeds {h.n} sites")
    terms = [h.terms[i] for i in range(j.start - 1, j.end - 1)]
    return LocalHamiltonian(n=j.length, d=h.d, terms=terms, gap_hint=h.gap_hint)


def _term_schmidt(t: np.ndarray, d: int, cutoff: float = 1e-13):
    """Operator Schmidt decomposition t = sum_k A_k (x) B_k."""
    m = t.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
    u, s, vh = np.linalg.svd(m)
    keep = s > cutoff * max(s[0], 1e-300)
    ops_a, ops_b = [], []
    for k in np.nonzero(keep)[0]:
        root = np.sqrt(s[k])
        ops_a.append(root * u[:, k].reshape(d, d))
        ops_b.append(root * vh[k, :].reshape(d, d))
    return ops_a, ops_b


def to_mpo(h: LocalHamiltonian) -> MPO:
    """Finite-state-machine MPO of sum_i h_i; bond <= d^2 + 2 at every cut."""
    n, d = h.n, h.d
    eye = np.eye(d, dtype=np.complex128)
    if n == 1:
        return MPO([np.zeros((1, d, d, 1), dtype=np.complex128)])
    schmidt = [_term_schmidt(t, d) for t in h.terms]
    ranks = [len(a) for a, _ in schmidt]
    tensors = []
    # state layout on interior bonds: 0 = no term open yet, 1 = some term
    # already finished, 2+k = term crossing this cut, Schmidt component k
    for i in range(n):
        dim_in = 1 if i == 0 else 2 + ranks[i - 1]
        dim_out = 1 if i == n - 1 else 2 + ranks[i]
        w = np.zeros((dim_in, d, d, dim_out), dtype=np.complex128)
        if i < n - 1:
            w[0, :, :, 0] = eye  # nothing started yet
            for k, a in enumerate(schmidt[i][0]):
                w[0, :, :, 2 + k] = a  # open term i
        if i > 0:
            done_out = 0 if i == n - 1 else 1
            w[1, :, :, done_out] = eye  # carry a finished term
            for k, b in enumerate(schmidt[i - 1][1]):
                w[2 + k, :, :, done_out] = b  # close term i-1
        tensors.append(w)
    return MPO(tensors)


def to_dense(h: LocalHamiltonian, entry_limit: int = 2**26) -> np.ndarray:
    """Dense matrix of sum_i h_i; guarded by a total-entry limit."""
    dim = h.d**h.n
    if dim * dim > entry_limit:
        raise NumericError(f"dense form would need {dim}^2 entries (> {entry_limit})")
    out = np.zeros((dim, dim), dtype=np.complex128)
    for i, t in enumerate(h.terms):
        left = h.d**i
        right = h.d ** (h.n - i - 2)
        out += np.kron(np.kron(np.eye(left), t), np.eye(right))
    return out
