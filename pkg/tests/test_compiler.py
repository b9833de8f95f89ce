import numpy as np
import pytest

from bhgates import compiler
from bhgates.circuits import Circuit


@pytest.fixture(scope="module")
def step():
    return compiler.step_by_step_circuit()


@pytest.fixture(scope="module")
def step_ops(step):
    return compiler.formula_operators(step)


def test_layout(step):
    lay = compiler.grid_layout(step)
    assert lay.R == 32 * (step.M + 2 * step.n - 2)
    assert len(lay.gates()) == 4 * step.M
    assert len(set(lay.elements.values())) == len(lay.elements)


def test_f_move(step):
    # qubit 3 is touched by gates 1 and 3
    assert compiler.f_move(step, 3, 2, 0) == (3, 1, 1)
    assert compiler.f_move(step, 3, 2, 1) == (3, 3, 0)
    assert compiler.f_move(step, 3, 1, 0) == (3, 0, 1)
    assert compiler.f_move(step, 3, 4, 1) == (3, 5, 0)
    with pytest.raises(ValueError):
        compiler.f_move(step, 1, 2, 0)


def test_legal_configurations(step):
    cfgs = compiler.legal_configs(step)
    assert len(cfgs) == step.M * 3 * 2 ** (step.n - 2)
    occ = compiler.occ_graph(step)
    for cfg in cfgs:
        assert all(occ.allows(br) for br in compiler.config_elements(step, cfg))


def test_operators_hermitian(step_ops):
    for name, m in step_ops.items():
        assert abs(m - m.getH()).max() < 1e-14, name


def test_small_circuit_formula_vs_numeric():
    c = Circuit(2, 2, [("cnot12", 2)])
    cc = compiler.build_gx(c)
    num = compiler.numeric_operators(cc)
    diffs = compiler.compare_operators(compiler.formula_operators(c), num.ops)
    assert max(diffs.values()) < 1e-10


def test_history_state_in_nullspace(step, step_ops):
    b = step_ops.basis
    h = step_ops.H1 + step_ops.H2
    for z in (0, 5):
        v = compiler.history_state(step, b, z, 0)
        assert np.linalg.norm(v) == pytest.approx(1)
        assert np.linalg.norm(h @ v) < 1e-12


def test_completeness_formula(step, step_ops, rng):
    w = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    w /= np.linalg.norm(w)
    assert compiler.completeness_energy(step_ops, w) == pytest.approx(
        compiler.completeness_formula(step, w), abs=1e-12)


def test_path_laplacian():
    lap = compiler.path_laplacian(5)
    assert np.allclose(lap.sum(axis=1), 0)
    assert np.linalg.eigvalsh(lap)[1] == pytest.approx(2 * (1 - np.cos(np.pi / 5)))


def test_operator_file_roundtrip(tmp_path, step_ops):
    compiler.save_operators(tmp_path / "ops.bin", step_ops)
    back = compiler.load_operators(tmp_path / "ops.bin")
    for name, m in step_ops.items():
        assert np.array_equal(back[name], m.toarray())


def test_no_input_qubits_rejected():
    with pytest.raises(compiler.CompileError):
        compiler.build_gx(Circuit(2, 0, [("cnot12", 2)]))
