"""Bosonic Fock sectors and the Bose-Hubbard operator on a graph.

H(G, N) = sum_{i != j} A_ij a_i^dag a_j + sum_k A_kk n_k + sum_k n_k (n_k - 1) - N mu(G)
restricted to the N-particle sector, plus the hard-core (XY) restriction and
a frustration-free solver that never builds the full sector.
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass
from math import comb, factorial

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import gategraph, spectra
from .spectra import SparseSymMatrix, SubspaceBasis

if os.environ.get("BHGATES_PURE") == "1":
    from . import _fock_py as _kernel
    BACKEND = "python"
else:
    try:
        from . import _fock_ext as _kernel
        BACKEND = "cython"
    except ImportError:
        from . import _fock_py as _kernel
        BACKEND = "python"

from . import _fock_py

MATERIALIZE_MAX = 10 ** 6
INDEX_MAX = 2 ** 62


class SectorTooLarge(OverflowError):
    pass


XY_DENSE_LIMIT = 5000


class FockIndexer:
    """Colex ranking of N-particle occupations on K sites.

    A state is stored as its sorted particle positions i_1 <= ... <= i_N.
    With c_k = i_k + k - 1 the rank is sum_k binom(c_k, k).
    """

    def __init__(self, K: int, N: int):
        if K < 1 or N < 0:
            raise ValueError("need K >= 1 and N >= 0")
        self.K, self.N = K, N
        size = comb(N + K - 1, N)
        if size >= INDEX_MAX:
            raise SectorTooLarge(f"sector dimension {size} exceeds 64-bit indexing")
        self.size = size
        top = K + N
        self.binom = np.zeros((top + 1, N + 2), dtype=np.int64)
        for c in range(top + 1):
            for k in range(N + 2):
                self.binom[c, k] = comb(c, k)
        self._positions = None

    def __len__(self) -> int:
        return self.size

    def rank_positions(self, pos) -> int:
        pos = sorted(int(p) for p in pos)
        if len(pos) != self.N or (pos and (pos[0] < 0 or pos[-1] >= self.K)):
            raise ValueError(f"invalid positions {pos}")
        return sum(comb(p + k, k + 1) for k, p in enumerate(pos))

    def unrank_positions(self, r: int) -> tuple[int, ...]:
        if not 0 <= r < self.size:
            raise IndexError(r)
        out = []
        for k in range(self.N, 0, -1):
            c = k - 1
            while comb(c + 1, k) <= r:
                c += 1
            r -= comb(c, k)
            out.append(c - (k - 1))
        return tuple(reversed(out))

    def rank(self, occ) -> int:
        occ = list(occ)
        if len(occ) != self.K or sum(occ) != self.N or min(occ) < 0:
            raise ValueError("occupation vector has wrong length or particle count")
        pos = [i for i, l in enumerate(occ) for _ in range(l)]
        return self.rank_positions(pos)

    def unrank(self, r: int) -> tuple[int, ...]:
        occ = [0] * self.K
        for p in self.unrank_positions(r):
            occ[p] += 1
        return tuple(occ)

    def positions(self) -> np.ndarray:
        """All states as a (size, N) array of sorted positions, in rank order."""
        if self._positions is None:
            if self.size * max(self.N, 1) > 4 * 10 ** 8:
                raise SectorTooLarge(f"refusing to enumerate {self.size} states")
            if self.N == 0:
                self._positions = np.zeros((1, 0), dtype=np.int64)
            else:
                m = self.K + self.N - 1
                flat = np.fromiter(
                    itertools.chain.from_iterable(itertools.combinations(range(m), self.N)),
                    dtype=np.int64, count=self.size * self.N)
                c = flat.reshape(self.size, self.N)
                ranks = np.zeros(self.size, dtype=np.int64)
                for k in range(self.N):
                    ranks += self.binom[c[:, k], k + 1]
                pos = np.empty_like(c)
                pos[ranks] = c - np.arange(self.N)
                self._positions = pos
        return self._positions

    def occupations(self) -> np.ndarray:
        pos = self.positions()
        occ = np.zeros((self.size, self.K), dtype=np.int64)
        for k in range(self.N):
            np.add.at(occ, (np.arange(self.size), pos[:, k]), 1)
        return occ

    def rank_array(self, pos: np.ndarray) -> np.ndarray:
        return _fock_py.colex_rank(np.sort(pos, axis=1), self.binom)

    def manifest_lines(self):
        for r in range(self.size):
            yield json.dumps({"index": r, "occupation": list(self.unrank(r))})


def fock_basis(K: int, N: int) -> FockIndexer:
    return FockIndexer(K, N)


def _adjacency(g) -> sp.csr_matrix:
    if isinstance(g, gategraph.GateGraph):
        return g.adjacency.csr
    return spectra.as_csr(g)


def _offdiag_csr(a: sp.csr_matrix):
    off = sp.csr_matrix(a - sp.diags(a.diagonal()))
    off.eliminate_zeros()
    off.sort_indices()
    return off.indptr.astype(np.int64), off.indices.astype(np.int64)


def graph_mu(g) -> float:
    if isinstance(g, gategraph.GateGraph):
        return gategraph.mu(g)
    a = _adjacency(g)
    return float(spectra.smallest_eigs(a, 1).eigenvalues[0])


def diagonal_terms(pos: np.ndarray, loops: np.ndarray) -> np.ndarray:
    """Self-loop energy plus on-site interaction sum_k l_k (l_k - 1) per state."""
    d = np.zeros(pos.shape[0])
    if pos.shape[1] == 0:
        return d
    d += loops[pos].sum(axis=1)
    n = pos.shape[1]
    for k in range(n):
        # each pair of equal positions contributes 2 to l(l-1)
        for m in range(k + 1, n):
            d += 2.0 * (pos[:, k] == pos[:, m])
    return d


def hopping_matrix(a: sp.csr_matrix, idx: FockIndexer, kernel=None) -> sp.csr_matrix:
    kernel = _kernel if kernel is None else kernel
    indptr, indices = _offdiag_csr(a)
    pos = np.ascontiguousarray(idx.positions())
    rows, cols, vals = kernel.hop_entries(pos, indptr, indices, idx.binom)
    return sp.csr_matrix((vals, (rows, cols)), shape=(idx.size, idx.size))


class StreamingBH(spla.LinearOperator):
    """Matrix-free H(G, N) that regenerates rows in chunks on every product."""

    def __init__(self, a: sp.csr_matrix, idx: FockIndexer, shift: float, chunk: int = 200000):
        super().__init__(dtype=float, shape=(idx.size, idx.size))
        self.idx, self.shift, self.chunk = idx, shift, chunk
        self.indptr, self.indices = _offdiag_csr(a)
        self.loops = a.diagonal().astype(float)

    def _chunks(self):
        pos = self.idx.positions()
        for s in range(0, self.idx.size, self.chunk):
            yield s, np.ascontiguousarray(pos[s:s + self.chunk])

    def _matvec(self, x):
        x = np.asarray(x).reshape(-1)
        y = np.zeros(self.idx.size, dtype=np.result_type(x, float))
        for s, p in self._chunks():
            y[s:s + len(p)] += (diagonal_terms(p, self.loops) - self.shift) * x[s:s + len(p)]
            rows, cols, vals = _kernel.hop_entries(p, self.indptr, self.indices,
                                                   self.idx.binom, s)
            np.add.at(y, rows, vals * x[cols])
        return y

    def _rmatvec(self, x):
        return self._matvec(x)


@dataclass
class BoseHubbardOperator:
    matrix: object
    N: int
    shift: float
    indexer: FockIndexer

    @property
    def dim(self) -> int:
        return self.indexer.size

    @property
    def materialized(self) -> bool:
        return isinstance(self.matrix, SparseSymMatrix)

    def __matmul__(self, x):
        if self.materialized:
            return self.matrix.csr @ x
        return self.matrix @ x


def build_bh(g, N: int, mu: float | None = None, shift: bool = True,
             materialize: bool | None = None) -> BoseHubbardOperator:
    """H(G, N) on the N-particle sector, shifted by N mu(G) unless ``shift`` is False."""
    if N < 1:
        raise ValueError("N must be at least 1")
    a = _adjacency(g)
    K = a.shape[0]
    idx = FockIndexer(K, N)
    if mu is None:
        mu = graph_mu(g) if shift else 0.0
    c = N * mu if shift else 0.0
    if materialize is None:
        materialize = idx.size <= MATERIALIZE_MAX
    if not materialize:
        return BoseHubbardOperator(StreamingBH(a, idx, c), N, c, idx)
    hop = hopping_matrix(a, idx)
    diag = diagonal_terms(idx.positions(), a.diagonal().astype(float)) - c
    m = sp.csr_matrix(hop + sp.diags(diag))
    return BoseHubbardOperator(SparseSymMatrix(m, check=False), N, c, idx)


def ground_energy_n(g, N: int, k: int = 1, seed: int | None = None) -> np.ndarray | float:
    op = build_bh(g, N)
    if not op.materialized:
        raise SectorTooLarge("sector too large for a materialized eigensolve")
    spec = spectra.smallest_eigs(op.matrix, k, seed=seed)
    return float(spec.eigenvalues[0]) if k == 1 else spec.eigenvalues


# --- frustration-free states -------------------------------------------------

def _sym_basis(m: int, N: int) -> tuple[np.ndarray, list[tuple[int, ...]]]:
    """Orthonormal basis of Sym^N(C^m) as columns of an (m^N, binom) matrix."""
    multisets = list(itertools.combinations_with_replacement(range(m), N))
    out = np.zeros((m ** N, len(multisets)))
    for col, ms in enumerate(multisets):
        perms = set(itertools.permutations(ms))
        w = 1.0 / np.sqrt(len(perms))
        for p in perms:
            out[np.ravel_multi_index(p, (m,) * N), col] = w
    return out, multisets


@dataclass
class FFSpace:
    """Frustration-free N-particle states in compact form.

    Each state is sum C[i1..iN] v_i1 (x) ... (x) v_iN with v the orthonormal
    columns of ``single`` (the single-particle e1 space) and C a unit
    symmetric tensor; ``coeffs`` stores one flattened C per column.
    """

    single: np.ndarray
    coeffs: np.ndarray
    N: int

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    def tensor(self, col: int) -> np.ndarray:
        m = self.single.shape[1]
        return self.coeffs[:, col].reshape((m,) * self.N)

    def first_quantized(self, col: int) -> np.ndarray:
        """Full symmetric tensor over the vertices (only sensible for small K^N)."""
        t = self.tensor(col)
        for _ in range(self.N):
            t = np.tensordot(t, self.single, axes=([0], [1]))
        return t

    def amplitudes(self, col: int, pos: np.ndarray) -> np.ndarray:
        """First-quantized amplitudes T[i1..iN] at the given position rows."""
        t = self.tensor(col).reshape(self.single.shape[1], -1)
        vals = self.single[pos[:, 0]] @ t
        m = self.single.shape[1]
        for k in range(1, self.N):
            vals = vals.reshape(len(pos), m, -1)
            vals = np.einsum("sa,sab->sb", self.single[pos[:, k]], vals)
        return vals.reshape(len(pos))

    def to_fock(self, idx: FockIndexer | None = None) -> SubspaceBasis:
        K = self.single.shape[0]
        idx = FockIndexer(K, self.N) if idx is None else idx
        pos = idx.positions()
        # prod_k l_k! as the product of each particle's rank within its run
        fact = np.ones(idx.size)
        for k in range(self.N):
            fact *= (pos[:, :k + 1] == pos[:, [k]]).sum(axis=1)
        weight = np.sqrt(factorial(self.N) / fact)
        cols = [weight * self.amplitudes(c, pos) for c in range(self.dim)]
        if not cols:
            return SubspaceBasis.empty(idx.size)
        return SubspaceBasis(np.stack(cols, axis=1))


def element_ground_overlaps(g: gategraph.GateGraph, single: np.ndarray) -> list[np.ndarray]:
    """For every element q, the 4 x m matrix <psi^q_{z,a}|v_i>."""
    out = []
    R = g.R
    locals_ = np.stack([gategraph.psi_local(z, a) for z in (0, 1) for a in (0, 1)])
    for q in range(R):
        block = single[q * 128:(q + 1) * 128]
        out.append(locals_.conj() @ block)
    return out


def ff_states(g: gategraph.GateGraph, N: int, tol: float = 1e-8,
              single: np.ndarray | None = None) -> FFSpace:
    """Null(H(G, N)) for an e1-gate graph, without building the N-particle sector.

    Solves for symmetric coefficient tensors over the e1 eigenspace Z that
    vanish against psi^q (x) psi^q for every element q.
    """
    if single is None:
        if not gategraph.is_e1_gate_graph(g, tol=1e-8):
            raise ValueError("graph is not an e1-gate graph")
        single = gategraph.ground_space(g).vectors
    single = np.real_if_close(single)
    m = single.shape[1]
    if N == 1:
        return FFSpace(single, np.eye(m), 1)
    if m == 0:
        return FFSpace(single, np.zeros((0, 0)), N)
    sym, _ = _sym_basis(m, N)
    overlaps = element_ground_overlaps(g, single)
    blocks = []
    t = sym.reshape(m, m, -1)
    for w in overlaps:
        c = np.tensordot(w, t, axes=([1], [0]))          # x, b, k
        c = np.tensordot(w, c, axes=([1], [1]))          # y, x, k
        blocks.append(c.reshape(-1, sym.shape[1]))
    cons = np.concatenate(blocks, axis=0)
    if cons.shape[0] > cons.shape[1]:
        # same right singular structure, much smaller SVD
        cons = np.linalg.qr(cons, mode="r")
    _, s, vh = np.linalg.svd(cons, full_matrices=True)
    s_full = np.zeros(vh.shape[0])
    s_full[:len(s)] = s
    null = vh[s_full <= tol].conj().T
    coeffs = sym @ null
    return FFSpace(single, coeffs, N)


# --- disconnected graphs ----------------------------------------------------

def sector_spectrum(g, n: int, mu: float) -> np.ndarray:
    if n == 0:
        return np.zeros(1)
    op = build_bh(g, n, mu=mu)
    return np.linalg.eigvalsh(op.matrix.dense())


def component_spectrum(parts, N: int, mu: float | None = None) -> np.ndarray:
    """Eigenvalues of H(G, N) for G the disjoint union of ``parts``.

    ``parts`` is a list of (graph, allowed particle counts). The spectrum is
    every sum of one eigenvalue per component over all splits of N.
    """
    if mu is None:
        mus = [graph_mu(g) for g, _ in parts]
        mu = mus[0]
        if any(abs(x - mu) > 1e-9 for x in mus):
            raise ValueError("components do not share mu")
    cache = {}

    def spec(p, n):
        if (p, n) not in cache:
            cache[(p, n)] = sector_spectrum(parts[p][0], n, mu)
        return cache[(p, n)]

    out = []

    def rec(p, left, acc):
        if p == len(parts):
            if left == 0:
                out.append(acc)
            return
        for n in parts[p][1]:
            if n <= left:
                rec(p + 1, left - n, (acc[:, None] + spec(p, n)[None, :]).ravel())

    rec(0, N, np.zeros(1))
    if not out:
        return np.zeros(0)
    return np.sort(np.concatenate(out))


def disjoint_union(mats) -> sp.csr_matrix:
    return sp.csr_matrix(sp.block_diag([spectra.as_csr(m) for m in mats]))


# --- hard-core bosons and the XY model ---------------------------------------

@dataclass
class HardcoreOperator:
    matrix: np.ndarray
    bitstrings: np.ndarray
    theta: float


def weight_bitstrings(K: int, N: int) -> np.ndarray:
    if K > 62:
        raise SectorTooLarge(f"{K} vertices do not fit a 64-bit bitstring")
    if comb(K, N) > XY_DENSE_LIMIT:
        raise SectorTooLarge(f"hard-core sector of dimension {comb(K, N)} is too large")
    return np.array([sum(1 << i for i in c) for c in itertools.combinations(range(K), N)],
                    dtype=np.int64)


def xy_operator(a, N: int) -> tuple[np.ndarray, np.ndarray]:
    """O_G on weight-N bitstrings, built from flip-flop terms on each edge."""
    a = spectra.as_csr(a)
    K = a.shape[0]
    bits = weight_bitstrings(K, N)
    where = {int(b): k for k, b in enumerate(bits)}
    o = np.zeros((len(bits), len(bits)))
    coo = sp.triu(a).tocoo()
    for i, j, v in zip(coo.row, coo.col, coo.data):
        for k, b in enumerate(bits):
            bi, bj = (b >> i) & 1, (b >> j) & 1
            if i == j:
                o[k, k] += v * bi
            elif bi != bj:
                o[where[int(b ^ (1 << i) ^ (1 << j))], k] += v
    return o, bits


def hardcore_from_bh(a, N: int) -> tuple[np.ndarray, np.ndarray]:
    """H_G^N (unshifted) restricted to occupations in {0,1}, indexed by bitstring."""
    a = spectra.as_csr(a)
    K = a.shape[0]
    op = build_bh(a, N, shift=False)
    bits = weight_bitstrings(K, N)
    idx = op.indexer
    ranks = [idx.rank([(int(b) >> i) & 1 for i in range(K)]) for b in bits]
    dense = op.matrix.csr[ranks][:, ranks].toarray()
    return dense, bits


def hardcore_restriction(a, N: int) -> HardcoreOperator:
    a = spectra.as_csr(a)
    K = a.shape[0]
    if N > K:
        raise ValueError(f"N={N} exceeds the vertex count {K}: the instance is trivial")
    o, bits = xy_operator(a, N)
    theta = float(np.linalg.eigvalsh(o)[0]) if len(bits) else float("nan")
    return HardcoreOperator(o, bits, theta)


@dataclass
class XYInstance:
    adjacency: sp.csr_matrix
    N: int
    c: float
    precision: float
    mu: float


def xy_instance(a, N: int, eps: float) -> XYInstance:
    """Map a Bose-Hubbard instance (G, N, eps) to the XY threshold problem."""
    a = spectra.as_csr(a)
    K = a.shape[0]
    T = 1.0 / eps
    if abs(T - round(T)) > 1e-9 or round(T) < 4 * K:
        raise ValueError("eps must be 1/T with integer T >= 4K")
    m = graph_mu(a)
    return XYInstance(a, N, N * m + eps / 4, eps / 4, m)


def xy_decide(inst: XYInstance, theta: float) -> str:
    """Yes if theta <= c, no if theta >= c + precision, otherwise outside the promise."""
    if theta <= inst.c:
        return "yes"
    if theta >= inst.c + inst.precision:
        return "no"
    return "promise violated"


def ffbh_decide(lam: float, eps: float, tol: float = 1e-10) -> str:
    """Frustration-free Bose-Hubbard decision on lam = lambda_N^1(G)."""
    if lam <= eps ** 3 + tol:
        return "yes"
    if lam >= eps + eps ** 3 - tol:
        return "no"
    return "promise violated"


@dataclass
class XYComparison:
    K: int
    N: int
    mu: float
    lam: float
    theta: float
    hardcore_error: float
    lower_ok: bool
    zero_ok: bool
    upper_ok: bool

    @property
    def excess(self) -> float:
        return self.theta - self.N * self.mu

    def decisions(self, eps: float) -> tuple[str, str]:
        inst = XYInstance(None, self.N, self.N * self.mu + eps / 4, eps / 4, self.mu)
        return ffbh_decide(self.lam, eps), xy_decide(inst, self.theta)

    @property
    def consistent(self) -> bool:
        return self.lower_ok and self.zero_ok and self.upper_ok


def xy_compare(a, N: int, tol: float = 1e-10) -> XYComparison:
    """Compare theta_N(G) with the lowest eigenvalue of H(G, N) - N mu(G).

    Three relations are checked: theta - N mu >= lam always, equality when
    lam = 0, and theta - N mu <= lam * 2(K^2 + 1)/(2 - lam) when 0 < lam < 2,
    the last from projecting onto the hard-core nullspace of the interaction.
    """
    a = spectra.as_csr(a).astype(float)
    K = a.shape[0]
    m = graph_mu(a)
    hc = hardcore_restriction(a, N)
    from_bh, _ = hardcore_from_bh(a, N)
    err = float(np.abs(from_bh - hc.matrix).max())
    lam = float(np.linalg.eigvalsh(build_bh(a, N, mu=m).matrix.dense())[0])
    ex = hc.theta - N * m
    lower = ex >= lam - tol
    zero = abs(lam) > tol or abs(ex) <= 1e-8
    if tol < lam < 2:
        upper = ex <= lam * 2 * (K * K + 1) / (2 - lam) + tol
    else:
        upper = True
    return XYComparison(K, N, m, lam, hc.theta, err, lower, zero, upper)
