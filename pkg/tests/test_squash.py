import itertools

import numpy as np
import pytest

from bhgates import gategraph as gg
from bhgates import squash


def element_count(R, E):
    # chain of R+2 (odd R) or R+1 (even R) per element, four hanging e's per d,
    # shared in pairs across each constraint
    d_per = R if R % 2 else R - 1
    return R * (2 + d_per) + 4 * R * d_per - 4 * E


@pytest.mark.parametrize("R", [2, 3, 4, 5, 6])
def test_element_count_exhaustive(R, rng):
    pairs = list(itertools.combinations(range(1, R + 1), 2))
    labels = ("1", "H", "HT")
    for trial in range(6):
        occ = [p for p in pairs if rng.random() < 0.5]
        g = gg.GateDiagram({q: labels[int(rng.integers(3))] for q in range(1, R + 1)})
        res = squash.build_g_square(g, occ)
        n = res.layout.element_count()
        assert n == element_count(R, len(occ))
        assert n == res.layout.expected_count()
        assert n <= 7 * R * R


def test_example_shape():
    g, occ = squash.example_instance()
    res = squash.build_g_square(g, occ)
    assert res.layout.element_count() == 47
    assert res.layout.block_norm() ** 2 == pytest.approx(1 / 11)


def test_bad_occupancy_edge():
    g, _ = squash.example_instance()
    with pytest.raises(squash.SquashError):
        squash.build_g_square(g, [(1, 1)])
    with pytest.raises(squash.SquashError):
        squash.build_g_square(g, [(1, 9)])


def test_phi_states_on_triangle():
    g, occ = squash.example_instance()
    res = squash.build_g_square(g, occ)
    tri = gg.assemble(res.triangle).adjacency.csr
    phi, _ = squash.phi_matrix(res.layout)
    assert np.abs(tri @ phi - gg.E1 * phi).max() < 1e-10


def test_verify_example():
    g, occ = squash.example_instance()
    rep = squash.verify_squash(g, occ, samples=10)
    assert rep.passed, rep.render()


def test_frustration_free_variant():
    g, occ = squash.frustration_free_instance()
    rep = squash.verify_squash(g, occ, samples=5)
    assert rep.passed, rep.render()
    assert rep.info["lambda_2(G,Gocc)"] == pytest.approx(0, abs=1e-10)
