import numpy as np
import pytest

from bhgates import gadgets
from bhgates import gategraph as gg


@pytest.mark.parametrize("kind,elements", [("w", 6), ("cnot12", 32), ("bnd", 32)])
def test_gadget_sizes(kind, elements):
    g = gadgets.build_gadget(kind)
    assert g.R == elements
    assert g.adjacency.is_zero_one()


def test_outer_block_null_vector():
    w = np.linalg.eigvalsh(gadgets.OUTER_BLOCK)
    assert w[0] == pytest.approx(0, abs=1e-15)
    assert np.linalg.norm(gadgets.OUTER_NULL) == pytest.approx(1)


@pytest.mark.parametrize("kind", ["cnot12", "cnoth"])
def test_outer_block_matrix(kind):
    g = gadgets.build_gadget(kind)
    m, expected = gadgets.outer_block_matrix(g, gadgets.TWO_QUBIT[kind])
    assert np.abs(m - expected).max() < 1e-10


def test_graph_unitary_matches_gate():
    for kind in ("cnot12", "cnot21", "cnoth", "cnotht"):
        u = gadgets.graph_unitary(kind)
        assert np.allclose(u.conj().T @ u, np.eye(4))


@pytest.mark.parametrize("kind", ["bnd", "cnotht"])
def test_verify_gadget(kind):
    rep = gadgets.verify_gadget(kind)
    assert rep.passed, rep.render()


def test_unknown_kind():
    with pytest.raises((KeyError, ValueError)):
        gadgets.build_diagram("toffoli")


def test_move_together_mu():
    assert gg.mu(gadgets.build_gadget("w")) == pytest.approx(gg.E1, abs=1e-10)
