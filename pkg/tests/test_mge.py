import numpy as np
import pytest

from bhgates import gategraph as gg
from bhgates import mge
from bhgates.mge import MgeCircuit, MgeError


def test_text_roundtrip():
    c = MgeCircuit(3, 1, [("HCNOT", 1, 2), ("HT", 3), ("HTDG", 2)], output=2)
    back = MgeCircuit.from_text(c.to_text())
    assert back.gates == c.gates and back.output == 2


@pytest.mark.parametrize("gates", [[("X", 1)], [("H", 3)], [("HCNOT", 1, 1)]])
def test_rejects_bad_gates(gates):
    with pytest.raises(MgeError):
        MgeCircuit(2, 1, gates)


def test_index_roundtrip():
    inst = mge.make_instance(mge.rejecting_instance())
    for r in range(0, inst.dim, 7):
        assert inst.index(*inst.unindex(r)) == r
    with pytest.raises(IndexError):
        inst.unindex(inst.dim)


def test_row_oracle_matches_matrix():
    c = MgeCircuit(2, 1, [("HCNOT", 1, 2), ("HT", 2)], output=2)
    inst = mge.make_instance(c)
    A = mge.build_ax_parts(inst).total
    for r in range(inst.dim):
        assert mge.row_oracle(inst, r) == sorted(A.indices[A.indptr[r]:A.indptr[r + 1]])


def test_serve_rows():
    inst = mge.make_instance(mge.h_instance())
    out = mge.serve_rows(inst, ["ROW 0", "", "row 3"])
    assert out[0].startswith("0: ") and out[1].startswith("3: ")
    with pytest.raises(MgeError):
        mge.serve_rows(inst, ["COL 1"])


def test_yes_instance():
    d = mge.decide_mge(mge.make_instance(mge.h_instance()))
    assert d.answer == "yes"
    assert d.energy == pytest.approx(gg.E1, abs=1e-10)


def test_witness_energy():
    inst = mge.make_instance(mge.h_instance())
    minus = np.array([1.0, -1.0]) / np.sqrt(2)
    plus = np.array([1.0, 1.0]) / np.sqrt(2)
    # H maps |-> to |1>, which is accepted
    assert mge.witness_energy(inst, minus) == pytest.approx(gg.E1, abs=1e-12)
    assert mge.witness_energy(inst, plus) > gg.E1 + 0.1


def test_no_instance():
    d = mge.decide_mge(mge.make_instance(mge.rejecting_instance()))
    assert d.answer == "no"


def test_verify_reports():
    assert mge.verify_mge(mge.h_instance(), expect="yes").passed
    assert mge.verify_mge(mge.rejecting_instance(), expect="no").passed
