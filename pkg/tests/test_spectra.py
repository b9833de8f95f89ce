import numpy as np
import pytest
import scipy.sparse as sp

from bhgates import spectra
from bhgates.spectra import SparseSymMatrix, SubspaceBasis


def path_graph(n):
    return sp.diags([np.ones(n - 1), np.ones(n - 1)], [-1, 1]).tocsr()


def test_dense_and_sparse_paths_agree():
    a = path_graph(300)
    exact = 2 * np.cos(np.pi * np.arange(300, 295, -1) / 301)
    dense = spectra.smallest_eigs(a, 5).eigenvalues
    sparse = spectra.smallest_eigs(a, 5, dense_max=0).eigenvalues
    assert np.allclose(dense, exact, atol=1e-10)
    assert np.allclose(sparse, exact, atol=1e-10)


def test_residuals_reported():
    spec = spectra.smallest_eigs(path_graph(50), 3, dense_max=0)
    assert spec.residuals.max() < 1e-9
    assert len(spec) == 3


def test_nullspace_and_gamma_of_laplacian():
    lap = sp.csr_matrix(2 * np.eye(6) - np.eye(6, k=1) - np.eye(6, k=-1))
    lap[0, 0] = lap[5, 5] = 1
    null = spectra.nullspace(lap)
    assert null.dim == 1
    assert np.allclose(np.abs(null.vectors[:, 0]), 1 / np.sqrt(6))
    assert spectra.gamma_min(lap) == pytest.approx(2 - 2 * np.cos(np.pi / 6), abs=1e-12)


def test_gamma_rejects_indefinite():
    with pytest.raises(spectra.NotPSDError):
        spectra.dense_gamma(np.diag([-1.0, 1.0]))


def test_npl_bound_values_and_errors():
    assert spectra.npl_bound(1, 1, 1) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        spectra.npl_bound(0, 1, 1)
    with pytest.raises(ValueError):
        spectra.npl_bound(1, 1, -1)


def test_subspace_distance():
    e = np.eye(4)
    a = SubspaceBasis(e[:, :2])
    assert spectra.subspace_distance(a, SubspaceBasis(e[:, [1, 0]])) == pytest.approx(0)
    assert spectra.subspace_distance(a, SubspaceBasis(e[:, 2:])) == pytest.approx(1)
    assert spectra.subspace_distance(a, SubspaceBasis(e[:, :1])) == 1.0


def test_symmetry_enforced():
    with pytest.raises(ValueError):
        SparseSymMatrix(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_matrix_market_roundtrip(tmp_path):
    m = SparseSymMatrix(path_graph(7))
    spectra.write_matrix_market(tmp_path / "p.mtx", m)
    back = spectra.read_matrix_market(tmp_path / "p.mtx")
    assert abs(back.csr - m.csr).max() == 0


def test_seed_env(monkeypatch):
    monkeypatch.setenv("BHF_SEED", "77")
    assert spectra.default_seed() == 77
