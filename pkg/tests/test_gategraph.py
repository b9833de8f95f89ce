import numpy as np
import pytest

from bhgates import gategraph as gg


def test_e1_value():
    assert gg.E1 == pytest.approx(-1 - 3 * np.sqrt(2))


def test_g0_is_symmetric_zero_one():
    a = gg.build_g0()
    assert a.dim == 128
    assert a.is_zero_one()


def test_psi_states_are_e1_eigenvectors():
    a = gg.build_g0().csr
    for z in (0, 1):
        for a_ in (0, 1):
            v = gg.psi_local(z, a_)
            assert np.linalg.norm(v) == pytest.approx(1)
            assert np.abs(a @ v - gg.E1 * v).max() < 1e-12


def test_vertex_index_layout():
    assert gg.vertex_index(0, 0, 1, 0) == 0
    assert gg.vertex_index(1, 0, 1, 0) == 128
    assert list(gg.node_vertices(0, 1, 2)) == list(range(72, 80))


def test_diagram_rejects_bad_nodes():
    d = gg.GateDiagram({1: "1", 2: "H"})
    with pytest.raises(gg.DiagramError):
        d.add_edge((1, 0, 2), (2, 0, 1))          # t=2 is not an output of an identity
    d.add_edge((1, 0, 5), (2, 0, 1))
    with pytest.raises(gg.DiagramError):
        d.add_loop((1, 0, 5))                       # already used
    with pytest.raises(gg.DiagramError):
        gg.GateDiagram({1: "X"})


def test_diagram_json_roundtrip(tmp_path):
    d = gg.GateDiagram({1: "H", 2: "HT"})
    d.add_edge((1, 1, 2), (2, 0, 3))
    d.add_loop((2, 1, 4))
    d.save(tmp_path / "d.json")
    back = gg.GateDiagram.load(tmp_path / "d.json")
    assert back.to_json() == d.to_json()


def test_single_element_is_e1_graph():
    g = gg.assemble(gg.single_element("HT"))
    assert gg.is_e1_gate_graph(g)
    assert gg.ground_space(g).dim == 4


def test_edge_between_inputs_lifts_mu():
    # joining two input nodes with the same z costs energy for some ground states
    d = gg.GateDiagram({1: "1", 2: "1"})
    d.add_edge((1, 0, 1), (2, 0, 1))
    g = gg.assemble(d)
    assert gg.ground_space(g).dim < 8
