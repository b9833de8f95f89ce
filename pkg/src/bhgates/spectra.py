"""Sparse symmetric spectral linear algebra.

Smallest eigenpairs, nullspaces, spectral gaps and subspace comparison for
real symmetric matrices. Small problems go to a dense LAPACK solver. Larger
ones use ARPACK's implicitly restarted Lanczos from a seeded start vector,
on the low end by default or in shift-invert mode when a shift is given,
followed by a Rayleigh-Ritz polish.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DEFAULT_TOL = 1e-9
DEGENERACY_TOL = 1e-7
DENSE_MAX = 4096
DEFAULT_SEED = 20240521


def default_seed() -> int:
    env = os.environ.get("BHF_SEED")
    return int(env) if env else DEFAULT_SEED


class ConvergenceError(RuntimeError):
    """Eigensolver gave up; ``best_residual`` is the worst residual reached."""

    def __init__(self, message: str, best_residual: float):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


class NotPSDError(ValueError):
    pass


class SparseSymMatrix:
    """Real symmetric matrix held as a full CSR matrix.

    Only the lower triangle is written on export, so the on-disk form stores
    each symmetric pair once.
    """

    def __init__(self, matrix, check: bool = True):
        m = sp.csr_matrix(matrix)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"matrix is not square: {m.shape}")
        if np.iscomplexobj(m.data):
            raise TypeError("SparseSymMatrix holds real matrices only")
        m.sum_duplicates()
        m.eliminate_zeros()
        if check and m.nnz and abs(m - m.T).max() > 0:
            raise ValueError("matrix is not symmetric")
        self.csr = m

    @classmethod
    def from_entries(cls, dim: int, rows, cols, vals) -> "SparseSymMatrix":
        """Build from upper-triangle coordinates (row <= col)."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        if np.any(rows > cols):
            raise ValueError("entries must satisfy row <= col")
        off = rows != cols
        r = np.concatenate([rows, cols[off]])
        c = np.concatenate([cols, rows[off]])
        v = np.concatenate([vals, vals[off]])
        return cls(sp.csr_matrix((v, (r, c)), shape=(dim, dim)), check=False)

    @property
    def dim(self) -> int:
        return self.csr.shape[0]

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    def upper_entries(self):
        coo = sp.triu(self.csr).tocoo()
        return coo.row, coo.col, coo.data

    def is_zero_one(self) -> bool:
        return bool(np.all(self.csr.data == 1.0))

    def dense(self) -> np.ndarray:
        return self.csr.toarray()

    def __matmul__(self, other):
        return self.csr @ other

    def __add__(self, other: "SparseSymMatrix") -> "SparseSymMatrix":
        return SparseSymMatrix(self.csr + other.csr, check=False)

    def shifted(self, c: float) -> "SparseSymMatrix":
        """Return M - c*1."""
        return SparseSymMatrix(self.csr - c * sp.identity(self.dim, format="csr"), check=False)

    def norm_bound(self) -> float:
        """Max absolute row sum, which bounds the spectral norm from above."""
        return float(abs(self.csr).sum(axis=1).max()) if self.nnz else 0.0


def as_csr(m) -> sp.csr_matrix:
    if isinstance(m, SparseSymMatrix):
        return m.csr
    if sp.issparse(m):
        return sp.csr_matrix(m)
    return sp.csr_matrix(np.asarray(m))


def write_matrix_market(path, m: SparseSymMatrix, pattern: bool | None = None) -> None:
    if pattern is None:
        pattern = m.is_zero_one()
    field_ = "pattern" if pattern else "real"
    scipy.io.mmwrite(str(path), sp.tril(m.csr).tocoo(), field=field_, symmetry="symmetric")


def read_matrix_market(path) -> SparseSymMatrix:
    m = scipy.io.mmread(str(path))
    m = sp.csr_matrix(m, dtype=float)
    return SparseSymMatrix(m)


@dataclass
class Spectrum:
    eigenvalues: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray

    def __len__(self) -> int:
        return len(self.eigenvalues)


@dataclass
class SubspaceBasis:
    vectors: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        v = np.asarray(self.vectors)
        if v.ndim == 1:
            v = v[:, None]
        self.vectors = v

    @property
    def dim(self) -> int:
        return self.vectors.shape[1] if self.vectors.size else 0

    @property
    def ambient(self) -> int:
        return self.vectors.shape[0]

    @classmethod
    def empty(cls, ambient: int) -> "SubspaceBasis":
        return cls(np.zeros((ambient, 0)))

    @classmethod
    def orthonormalize(cls, vectors, tol: float = 1e-8) -> "SubspaceBasis":
        """Orthonormal basis for the column span, dropping dependent columns."""
        v = np.asarray(vectors)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[1] == 0:
            return cls(v)
        u, s, _ = np.linalg.svd(v, full_matrices=False)
        keep = s > tol * max(1.0, s[0])
        return cls(u[:, keep])

    def gram_error(self) -> float:
        if self.dim == 0:
            return 0.0
        g = self.vectors.conj().T @ self.vectors
        return float(np.abs(g - np.eye(self.dim)).max())

    def projector(self) -> np.ndarray:
        return self.vectors @ self.vectors.conj().T


def _residuals(m, vals, vecs) -> np.ndarray:
    if vecs.shape[1] == 0:
        return np.zeros(0)
    r = m @ vecs - vecs * vals
    return np.linalg.norm(r, axis=0)


def _dense_eigs(m: sp.csr_matrix, k: int):
    a = m.toarray()
    vals, vecs = scipy.linalg.eigh(a, subset_by_index=[0, k - 1], driver="evr")
    return vals, vecs


def _sparse_eigs(m: sp.csr_matrix, k: int, seed: int, sigma: float | None):
    n = m.shape[0]
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    ncv = min(n - 1, max(2 * k + 1, 40))
    if sigma is None:
        # Plain Lanczos on the low end. Cheap, but exact multiplicities are
        # only trustworthy in shift-invert mode.
        vals, vecs = spla.eigsh(m, k=k, which="SA", v0=v0, ncv=ncv, tol=0,
                                maxiter=100000)
    else:
        vals, vecs = spla.eigsh(m, k=k, sigma=sigma, which="LM", v0=v0, ncv=ncv,
                                tol=0, maxiter=100000)
    # Rayleigh-Ritz on the returned block tightens both values and vectors.
    q, _ = np.linalg.qr(vecs)
    h = q.T @ (m @ q)
    h = 0.5 * (h + h.T)
    w, y = np.linalg.eigh(h)
    return w, q @ y


def smallest_eigs(m, k: int, tol: float = DEFAULT_TOL, seed: int | None = None,
                  dense_max: int = DENSE_MAX, sigma: float | None = None) -> Spectrum:
    """The k smallest eigenpairs of a real symmetric matrix, ascending."""
    csr = as_csr(m)
    n = csr.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k={k} out of range for dimension {n}")
    seed = default_seed() if seed is None else seed
    if n <= dense_max or k >= n - 1:
        vals, vecs = _dense_eigs(csr, k)
    else:
        try:
            vals, vecs = _sparse_eigs(csr, k, seed, sigma)
        except spla.ArpackNoConvergence as exc:
            res = _residuals(csr, exc.eigenvalues, exc.eigenvectors)
            raise ConvergenceError("Lanczos did not converge",
                                   float(res.max()) if res.size else np.inf) from exc
    order = np.argsort(vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    res = _residuals(csr, vals, vecs)
    if res.size and res.max() > tol:
        raise ConvergenceError(f"residual above tolerance {tol:g}", float(res.max()))
    return Spectrum(vals, vecs, res)


def _eigs_until_above(csr, threshold: float, tol: float, seed, dense_max,
                      sigma=None, start: int = 8):
    """Grow k until an eigenvalue strictly above ``threshold`` appears."""
    n = csr.shape[0]
    k = min(start, n)
    while True:
        spec = smallest_eigs(csr, k, tol=tol, seed=seed, dense_max=dense_max, sigma=sigma)
        if spec.eigenvalues[-1] > threshold or k == n:
            return spec
        k = min(n, 2 * k)


def nullspace(m, tol: float = DEFAULT_TOL, seed: int | None = None,
              dense_max: int = DENSE_MAX, sigma: float | None = -1e-3) -> SubspaceBasis:
    """Orthonormal basis of the eigenspace with eigenvalue in [-tol, tol].

    Sparse inputs use shift-invert about ``sigma`` so that multiplicities
    are resolved; pass ``sigma=None`` to fall back to plain Lanczos.
    """
    csr = as_csr(m)
    spec = _eigs_until_above(csr, tol, max(tol, DEFAULT_TOL), seed, dense_max, sigma)
    if spec.eigenvalues[0] < -tol:
        raise NotPSDError(f"matrix has eigenvalue {spec.eigenvalues[0]:.3e} < -{tol:g}")
    keep = np.abs(spec.eigenvalues) <= tol
    return SubspaceBasis(spec.vectors[:, keep])


def gamma_min(m, tol: float = DEFAULT_TOL, seed: int | None = None,
              dense_max: int = DENSE_MAX, sigma: float | None = None) -> float:
    """Smallest eigenvalue strictly above ``tol`` of a PSD matrix."""
    csr = as_csr(m)
    if csr.nnz == 0:
        raise ValueError("no nonzero eigenvalue")
    spec = _eigs_until_above(csr, tol, max(tol, DEFAULT_TOL), seed, dense_max, sigma)
    if spec.eigenvalues[0] < -tol:
        raise NotPSDError(f"matrix has eigenvalue {spec.eigenvalues[0]:.3e} < -{tol:g}")
    above = spec.eigenvalues[spec.eigenvalues > tol]
    if above.size == 0:
        raise ValueError("no nonzero eigenvalue")
    return float(above[0])


def dense_gamma(a: np.ndarray, tol: float = DEFAULT_TOL) -> float:
    """Smallest eigenvalue above ``tol`` of a dense Hermitian PSD matrix."""
    w = np.linalg.eigvalsh(a)
    if w[0] < -tol:
        raise NotPSDError(f"matrix has eigenvalue {w[0]:.3e} < -{tol:g}")
    above = w[w > tol]
    if above.size == 0:
        raise ValueError("no nonzero eigenvalue")
    return float(above[0])


def dense_nullspace(a: np.ndarray, tol: float = DEFAULT_TOL) -> SubspaceBasis:
    w, v = np.linalg.eigh(a)
    if w.size and w[0] < -tol:
        raise NotPSDError(f"matrix has eigenvalue {w[0]:.3e} < -{tol:g}")
    return SubspaceBasis(v[:, np.abs(w) <= tol])


def degeneracy(values, threshold: float = DEGENERACY_TOL) -> int:
    """Multiplicity of the lowest value within ``threshold``."""
    values = np.sort(np.asarray(values))
    return int(np.sum(values - values[0] <= threshold))


def npl_bound(c: float, d: float, norm_b: float) -> float:
    """Lower bound cd/(c+d+|H_B|) on the gap of H_A + H_B.

    Here d is the gap of H_A, c the gap of H_B restricted to the nullspace of
    H_A, and norm_b the operator norm of H_B.
    """
    if c <= 0 or d <= 0:
        raise ValueError("c and d must be positive")
    if norm_b < 0:
        raise ValueError("norm_b must be nonnegative")
    return c * d / (c + d + norm_b)


def subspace_distance(a: SubspaceBasis, b: SubspaceBasis) -> float:
    """Operator norm of P_A - P_B."""
    if a.dim and b.dim and a.ambient != b.ambient:
        raise ValueError(f"ambient dimension mismatch: {a.ambient} vs {b.ambient}")
    if a.dim == 0 and b.dim == 0:
        return 0.0
    if a.dim != b.dim:
        return 1.0
    # sine of the largest principal angle, taken from the residual to avoid
    # the cancellation in sqrt(1 - cos^2)
    resid = a.vectors - b.vectors @ (b.vectors.conj().T @ a.vectors)
    return float(min(1.0, np.linalg.norm(resid, 2)))


def restrict(op, basis: np.ndarray) -> np.ndarray:
    """Dense matrix of ``op`` on the span of orthonormal columns ``basis``."""
    r = basis.conj().T @ (op @ basis)
    return 0.5 * (r + r.conj().T)
