import itertools
from functools import reduce
from math import comb

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from bhgates import _fock_py, manybody
from bhgates.manybody import FockIndexer


def boson_oracle(a: np.ndarray, N: int):
    """H = sum_ij A_ij b_i^dag b_j + sum n(n-1) on the truncated product space, N-sector."""
    K = a.shape[0]
    d = N + 1
    b = np.diag(np.sqrt(np.arange(1, d)), 1)
    eye = np.eye(d)

    def site(op, k):
        return reduce(np.kron, [op if m == k else eye for m in range(K)])

    ops = [site(b, k) for k in range(K)]
    h = sum(a[i, j] * ops[i].T @ ops[j] for i in range(K) for j in range(K))
    num = [o.T @ o for o in ops]
    h = h + sum(n @ (n - np.eye(len(n))) for n in num)
    occs = list(itertools.product(range(d), repeat=K))
    keep = [k for k, o in enumerate(occs) if sum(o) == N]
    return h[np.ix_(keep, keep)], [occs[k] for k in keep]


def random_adjacency(rng, K, loops=True):
    a = np.triu((rng.random((K, K)) < 0.6).astype(float), 1)
    a = a + a.T
    if loops:
        a += np.diag((rng.random(K) < 0.4).astype(float))
    return a


@pytest.mark.parametrize("K,N", [(1, 3), (3, 2), (4, 3), (5, 2)])
def test_bh_matches_second_quantization(rng, K, N):
    a = random_adjacency(rng, K)
    ref, occs = boson_oracle(a, N)
    op = manybody.build_bh(a, N, shift=False)
    idx = op.indexer
    perm = [idx.rank(o) for o in occs]
    ours = op.matrix.dense()[np.ix_(perm, perm)]
    assert np.abs(ours - ref).max() < 1e-12


def test_sector_dimension():
    for K in range(1, 7):
        for N in range(0, 5):
            assert FockIndexer(K, N).size == comb(N + K - 1, N)


@settings(max_examples=50, deadline=None)
@given(K=st.integers(1, 7), N=st.integers(1, 5), data=st.data())
def test_rank_unrank_bijection(K, N, data):
    idx = FockIndexer(K, N)
    r = data.draw(st.integers(0, idx.size - 1))
    assert idx.rank(idx.unrank(r)) == r
    assert idx.rank_positions(idx.unrank_positions(r)) == r


def test_positions_in_rank_order():
    idx = FockIndexer(5, 3)
    pos = idx.positions()
    assert [idx.rank_positions(p) for p in pos] == list(range(idx.size))


def test_rank_rejects_bad_occupations():
    idx = FockIndexer(3, 2)
    with pytest.raises(ValueError):
        idx.rank([1, 1, 1])
    with pytest.raises(IndexError):
        idx.unrank(idx.size)


@pytest.mark.skipif(manybody.BACKEND != "cython", reason="compiled kernel not built")
def test_kernels_agree(rng):
    from bhgates import _fock_ext
    a = sp.csr_matrix(random_adjacency(rng, 7))
    idx = FockIndexer(7, 4)
    m1 = manybody.hopping_matrix(a, idx, _fock_py)
    m2 = manybody.hopping_matrix(a, idx, _fock_ext)
    assert abs(m1 - m2).max() < 1e-14


def test_streaming_matches_materialized(rng):
    a = random_adjacency(rng, 5)
    m = manybody.build_bh(a, 3)
    s = manybody.build_bh(a, 3, materialize=False)
    x = rng.standard_normal(m.dim)
    assert np.abs(m @ x - s @ x).max() < 1e-12


def test_shift_makes_psd(rng):
    a = random_adjacency(rng, 5)
    w = np.linalg.eigvalsh(manybody.build_bh(a, 2).matrix.dense())
    assert w[0] >= -1e-12


def test_component_spectrum_two_edges():
    edge = np.array([[0.0, 1.0], [1.0, 0.0]])
    parts = [(edge, range(3)), (edge, range(3))]
    w = manybody.component_spectrum(parts, 2)
    union = manybody.disjoint_union([edge, edge])
    direct = np.linalg.eigvalsh(manybody.build_bh(union, 2).matrix.dense())
    assert np.allclose(w, direct, atol=1e-12)
    assert w[0] == pytest.approx(0, abs=1e-12)


def test_hardcore_equals_xy(rng):
    for _ in range(5):
        a = random_adjacency(rng, 6)
        for N in (1, 2, 3):
            hc, bits = manybody.hardcore_from_bh(a, N)
            xy, bits2 = manybody.xy_operator(a, N)
            assert np.array_equal(bits, bits2)
            assert np.abs(hc - xy).max() < 1e-12


def test_xy_instance_parameters():
    a = np.ones((3, 3)) - np.eye(3)
    inst = manybody.xy_instance(a, 2, 1 / 12)
    assert inst.mu == pytest.approx(-1)
    assert inst.c == pytest.approx(-2 + 1 / 48)
    with pytest.raises(ValueError):
        manybody.xy_instance(a, 2, 1 / 5)


def test_xy_compare_yes_case():
    # two disjoint edges hold two particles at zero energy
    a = manybody.disjoint_union([np.array([[0, 1], [1, 0]])] * 2).toarray()
    cmp = manybody.xy_compare(a, 2)
    assert cmp.lam == pytest.approx(0, abs=1e-12)
    assert cmp.excess == pytest.approx(0, abs=1e-12)
    assert cmp.decisions(1 / 16) == ("yes", "yes")


def test_ff_states_of_single_element():
    from bhgates import gategraph as gg
    g = gg.assemble(gg.single_element())
    assert manybody.ff_states(g, 1).dim == 4
    assert manybody.ff_states(g, 2).dim == 0
