import numpy as np
import pytest

from bhgates import circuits
from bhgates.circuits import Circuit, CircuitError, Gate, RawCircuit


def test_text_roundtrip():
    c = Circuit(3, 2, [("cnot12", 3), ("cnot21", 2), ("cnotht", 3), ("cnoth", 2)])
    back = Circuit.from_text(c.to_text())
    assert back.gates == c.gates and back.n_in == 2
    assert Circuit.from_json(c.to_json()).gates == c.gates


@pytest.mark.parametrize("gates,msg", [
    ([("cnot12", 2), ("cnot12", 2)], "share"),
    ([("cnot12", 5)], "outside"),
    ([("cnot12", 2)], "never"),
])
def test_validation(gates, msg):
    with pytest.raises(CircuitError, match=msg):
        Circuit(3, 1, gates)


def test_bad_gate_line():
    with pytest.raises(CircuitError):
        Circuit.from_text("qubits 3 input 1\nCNOT 2 3\n")


def test_cnot_acceptance():
    c = Circuit(2, 2, [("cnot12", 2)])
    e = np.eye(4)
    assert circuits.acceptance_probability(c, e[0b01]) == pytest.approx(1)
    assert circuits.acceptance_probability(c, e[0b11]) == pytest.approx(0)
    assert circuits.max_acceptance(c) == pytest.approx(1)


def test_acceptance_operator_matches_simulation(rng):
    c = Circuit(3, 2, [("cnoth", 2), ("cnotht", 3), ("cnot21", 2)])
    q = circuits.acceptance_operator(c)
    for _ in range(5):
        w = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        w /= np.linalg.norm(w)
        assert np.vdot(w, q @ w).real == pytest.approx(circuits.acceptance_probability(c, w))


def test_normalize_preserves_unitary():
    raw = RawCircuit(4, [("H", 3), ("CNOT", 2, 4), ("HT", 1), ("CNOT", 4, 1)])
    c = circuits.normalize(raw)
    assert np.allclose(circuits.circuit_unitary(c), raw.unitary(), atol=1e-12)


def test_gate_text():
    assert Gate("cnot21", 3).text() == "CNOT 3 1"
