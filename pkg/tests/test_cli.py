import json

import networkx as nx
import pytest
import scipy.io
import scipy.sparse as sp

from bhgates import cli, squash


def run(capsys, *argv):
    code = cli.main(list(argv))
    return code, capsys.readouterr().out


def test_g0_spectrum(capsys):
    code, out = run(capsys, "g0", "spectrum")
    assert code == 0
    assert "-5.24264068" in out


def test_json_before_subcommand(capsys):
    code, out = run(capsys, "--format", "json", "gadget", "verify", "bnd")
    assert code == 0
    assert json.loads(out)["passed"] is True


def test_unknown_subcommand(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["bogus"])
    assert exc.value.code == 2


def test_missing_file_is_usage_error(capsys, tmp_path):
    assert cli.main(["graph", "spectrum", str(tmp_path / "nope.json")]) == 2


def test_graph_spectrum_tsv(capsys, tmp_path):
    g, _ = squash.example_instance()
    g.save(tmp_path / "g.json")
    code, _ = run(capsys, "graph", "spectrum", str(tmp_path / "g.json"), "--tsv",
                  str(tmp_path / "s.tsv"), "-k", "3")
    assert code == 0
    lines = (tmp_path / "s.tsv").read_text().splitlines()
    assert lines[0].startswith("#") and len(lines) == 4


def test_compile_outputs(capsys, tmp_path):
    circ = tmp_path / "c.txt"
    circ.write_text("qubits 2 input 2\nCNOT 1 2\n")
    code, _ = run(capsys, "compile", str(circ), "--out", str(tmp_path / "out"))
    assert code == 0
    names = {p.name for p in (tmp_path / "out").iterdir()}
    assert names == {"graph.json", "graph.mtx", "occupancy.txt", "layout.json", "operators.bin"}
    a = scipy.io.mmread(str(tmp_path / "out" / "graph.mtx"))
    assert a.shape == (128 * 32 * 3, 128 * 32 * 3)
    assert abs(a - a.T).max() == 0 and a.nnz > 0


def test_squash_verify(capsys, tmp_path):
    g, occ = squash.example_instance()
    g.save(tmp_path / "g.json")
    (tmp_path / "occ.txt").write_text("1 2\n")
    code, out = run(capsys, "squash", str(tmp_path / "g.json"), str(tmp_path / "occ.txt"),
                    "--verify")
    assert code == 0
    assert "elements = 47" in out


def test_mge_decide_and_rows(capsys, tmp_path, monkeypatch):
    circ = tmp_path / "h.txt"
    circ.write_text("qubits 1 input 1 output 1\nH 1\n")
    code, out = run(capsys, "mge", "decide", str(circ), "--expect", "yes")
    assert code == 0
    code, out = run(capsys, "mge", "decide", str(circ), "--expect", "no")
    assert code == 1
    import io
    monkeypatch.setattr("sys.stdin", io.StringIO("ROW 0\n"))
    code, out = run(capsys, "mge", "rows", str(circ))
    assert out.strip().startswith("0:")


def test_xy_reduce(capsys, tmp_path):
    path = tmp_path / "c5.mtx"
    scipy.io.mmwrite(str(path), sp.coo_matrix(nx.to_numpy_array(nx.cycle_graph(5))),
                     symmetry="symmetric")
    code, out = run(capsys, "--format", "json", "xy", "reduce", str(path), "-N", "2")
    assert code == 0
    info = json.loads(out)["info"]
    assert info["K"] == 5 and info["theta_N"] >= 2 * info["mu"]


def test_xy_reduce_too_large(capsys, tmp_path):
    path = tmp_path / "p70.mtx"
    scipy.io.mmwrite(str(path), sp.coo_matrix(nx.to_numpy_array(nx.path_graph(70))),
                     symmetry="symmetric")
    assert cli.main(["xy", "reduce", str(path), "-N", "1"]) == 2
    assert "64-bit" in capsys.readouterr().err


def test_verify_all_subset(capsys):
    code, out = run(capsys, "verify-all", "--only", "1,2", "--jobs", "1")
    assert code == 0
    assert "2/2 criteria passed" in out
