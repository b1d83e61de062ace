"""Graphs, shift operators and unitary GFT matrices.

Graphs are undirected with a symmetric, nonnegative, zero-diagonal
adjacency stored as ``scipy.sparse.csr_matrix``.  The GFT of a symmetric
shift operator ``Z = V diag(lam) V^T`` is ``F = V^T``; the random and
synthetic generators return complex unitaries used by the benchmarks and
as closed-form oracles.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field
from typing import Literal, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import DomainError, NumericalError, ParameterError, PhaseMarginWarning, SizeError

Normalization = Literal["combinatorial-laplacian", "symmetric-normalized-laplacian", "adjacency"]
NORMALIZATIONS = ("combinatorial-laplacian", "symmetric-normalized-laplacian", "adjacency")

UNITARY_TOL = 1e-10
MARGIN_WARN = 0.05 * np.pi


@dataclass(frozen=True)
class Graph:
    n: int
    adjacency: sp.csr_matrix
    kind: str = "custom"

    @property
    def num_edges(self) -> int:
        return int(sp.triu(self.adjacency, k=1).nnz)

    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel()

    @classmethod
    def from_dense(cls, a, kind="custom") -> "Graph":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ParameterError(f"adjacency must be square, got shape {a.shape}")
        if not np.array_equal(a, a.T):
            raise ParameterError("adjacency must be symmetric")
        if np.any(np.diag(a) != 0) or np.any(a < 0):
            raise ParameterError("adjacency needs a zero diagonal and nonnegative weights")
        return cls(a.shape[0], sp.csr_matrix(a), kind)


@dataclass(frozen=True)
class ShiftOperator:
    matrix: np.ndarray
    normalization: str

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class GftMatrix:
    """A unitary GFT matrix.

    ``f`` is real (orthogonal) for graph-derived transforms and complex
    otherwise.  ``known_spectrum`` is ``(V, theta)`` with
    ``f = V diag(exp(1j*theta)) V^H`` when the spectrum was prescribed.
    """

    f: np.ndarray
    provenance: str
    known_spectrum: Optional[Tuple[np.ndarray, np.ndarray]] = None
    _fingerprint: list = field(default_factory=list, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.f.shape[0]

    @property
    def fingerprint(self) -> str:
        if not self._fingerprint:
            self._fingerprint.append(fingerprint(self.f))
        return self._fingerprint[0]

    def unitarity_residual(self) -> float:
        return unitarity_residual(self.f)


def fingerprint(a: np.ndarray) -> str:
    h = hashlib.blake2b(digest_size=16)
    h.update(f"{a.shape}{a.dtype.str}".encode())
    h.update(np.ascontiguousarray(a).data)
    return h.hexdigest()


def unitarity_residual(f: np.ndarray) -> float:
    """``||F F^H - I||_F / sqrt(N)``."""
    n = f.shape[0]
    g = f @ f.conj().T
    g[np.diag_indices(n)] -= 1.0
    return float(np.linalg.norm(g) / np.sqrt(n))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------- builders


def build_grid_graph(rows: int, cols: int) -> Graph:
    """4-neighbour lattice; node ``(r, c)`` has index ``r*cols + c``."""
    rows, cols = int(rows), int(cols)
    if rows < 1 or cols < 1:
        raise ParameterError(f"grid needs rows, cols >= 1, got {rows}x{cols}")
    if rows > np.iinfo(np.intp).max // cols:
        raise SizeError(f"grid {rows}x{cols} overflows the platform index range")
    n = rows * cols
    idx = np.arange(n).reshape(rows, cols)
    src = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    dst = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    return Graph(n, _symmetric_csr(n, src, dst), "grid")


def build_knn_graph(points, k: int) -> Graph:
    """Union-symmetrized k-nearest-neighbour graph with binary weights.

    Distance ties resolve to the smaller node index; a point never selects
    itself, but exact duplicates sit at distance zero and rank first.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ParameterError("points must be an (N, d) array")
    n = pts.shape[0]
    k = int(k)
    if k < 1 or k >= n:
        raise ParameterError(f"k must satisfy 1 <= k < N (k={k}, N={n})")
    if not np.all(np.isfinite(pts)):
        raise ParameterError("points must be finite")

    chunk = max(1, min(n, 2**22 // max(1, n * pts.shape[1])))
    nbrs = np.empty((n, k), dtype=np.intp)
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        diff = pts[start:stop, None, :] - pts[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        nbrs[start:stop] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    src = np.repeat(np.arange(n), k)
    return Graph(n, _symmetric_csr(n, src, nbrs.ravel()), "knn")


def _symmetric_csr(n, src, dst) -> sp.csr_matrix:
    rows = np.concatenate([src, dst])
    cols = np.concatenate([dst, src])
    a = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    # duplicates were summed; weights are binary
    a.data[:] = 1.0
    a.eliminate_zeros()
    a.sort_indices()
    return a


def shift_operator(g: Graph, norm: Normalization = "combinatorial-laplacian") -> ShiftOperator:
    a = g.adjacency.toarray()
    if norm == "adjacency":
        z = a
    elif norm == "combinatorial-laplacian":
        z = np.diag(a.sum(axis=1)) - a
    elif norm == "symmetric-normalized-laplacian":
        deg = a.sum(axis=1)
        inv_sqrt = np.zeros_like(deg)
        nz = deg > 0
        inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
        # isolated nodes: D^{-1/2} entry is 0, so the operator vanishes there
        z = np.diag(nz.astype(float)) - inv_sqrt[:, None] * a * inv_sqrt[None, :]
    else:
        raise ParameterError(f"unknown normalization {norm!r}; expected one of {NORMALIZATIONS}")
    return ShiftOperator(_frozen(np.ascontiguousarray(z)), norm)


# ------------------------------------------------------------------- GFTs


def _pivot(v: np.ndarray) -> int:
    mag = np.abs(v)
    return int(np.flatnonzero(mag >= mag.max() * (1 - 1e-9))[0])


def _fix_eigenvectors(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Deterministic eigenvector basis: MGS inside degenerate clusters,
    sign pivot on the first largest-magnitude entry, clusters ordered by
    pivot index."""
    n = w.size
    v = v.copy()
    scale = max(1.0, float(np.abs(w).max())) if n else 1.0
    tol = 1e-9 * scale
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and w[stop] - w[stop - 1] <= tol:
            stop += 1
        if stop - start > 1:
            block = v[:, start:stop]
            for j in range(block.shape[1]):
                for i in range(j):
                    block[:, j] -= (block[:, i] @ block[:, j]) * block[:, i]
                block[:, j] /= np.linalg.norm(block[:, j])
            pivots = np.array([_pivot(block[:, j]) for j in range(block.shape[1])])
            v[:, start:stop] = block[:, np.argsort(pivots, kind="stable")]
        start = stop
    for j in range(n):
        p = _pivot(v[:, j])
        if v[p, j] < 0:
            v[:, j] = -v[:, j]
    return v


def gft_from_shift(z: ShiftOperator) -> GftMatrix:
    m = z.matrix
    if not np.allclose(m, m.T, rtol=0, atol=1e-12 * max(1.0, np.abs(m).max())):
        raise ParameterError("shift operator must be symmetric")
    w, v = scipy.linalg.eigh(m, driver="evd")
    v = _fix_eigenvectors(w, v)
    f = np.ascontiguousarray(v.T)
    res = unitarity_residual(f)
    if res > UNITARY_TOL:
        raise NumericalError(f"GFT matrix is not orthogonal: residual {res:.3e}")
    return GftMatrix(_frozen(f), "graph")


def haar_matrix(n: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q *= d / np.abs(d)
    return q


def random_unitary(n: int, seed: int = 0) -> GftMatrix:
    """Haar-distributed unitary (phase-corrected QR of a complex Gaussian)."""
    n = int(n)
    if n < 1:
        raise ParameterError("n must be >= 1")
    q = haar_matrix(n, np.random.default_rng(seed))
    return GftMatrix(_frozen(q), "haar")


def synthetic_unitary(phases, seed: int = 0) -> GftMatrix:
    """``F = V diag(exp(1j*phases)) V^H`` with Haar ``V``; spectrum stored."""
    theta = np.asarray(phases, dtype=float).ravel()
    if theta.size == 0:
        raise ParameterError("need at least one phase")
    if np.any(~np.isfinite(theta)) or np.any(np.abs(theta) >= np.pi):
        raise DomainError("all phases must satisfy |theta| < pi")
    v = haar_matrix(theta.size, np.random.default_rng(seed))
    f = (v * np.exp(1j * theta)) @ v.conj().T
    res = unitarity_residual(f)
    if res > UNITARY_TOL:
        raise NumericalError(f"synthetic unitary residual {res:.3e}")
    return GftMatrix(_frozen(f), "synthetic", (_frozen(v), _frozen(theta.copy())))


def phase_margin(f: GftMatrix, warn: bool = True) -> float:
    """Smallest distance from an eigenphase of ``f`` to +-pi."""
    if f.known_spectrum is not None:
        theta = f.known_spectrum[1]
    else:
        from .transform import eigendecompose_unitary

        theta = eigendecompose_unitary(f).theta
    margin = float(np.min(np.pi - np.abs(theta)))
    margin = max(margin, 0.0)
    if warn and margin < MARGIN_WARN:
        warnings.warn(
            f"phase margin {margin / np.pi:.4f}*pi is below 0.05*pi; "
            "the truncated series converges slowly near +-pi",
            PhaseMarginWarning,
            stacklevel=2,
        )
    return margin
