"""Gate diagrams, the 128-vertex block g0 and gate-graph assembly.

Every diagram element is a copy of g0 acting on C^2 (qubit) x C^8 (clock)
x C^8 (ancilla). Vertex (q, z, t, j) of element position q has linear
index ((q*2 + z)*8 + (t-1))*8 + j with t in 1..8 and j in 0..7.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from . import spectra
from .spectra import SparseSymMatrix

E1 = -1.0 - 3.0 * np.sqrt(2.0)
OMEGA = np.exp(1j * np.pi / 4)
LABELS = ("1", "H", "HT")

H_GATE = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
T_GATE = np.diag([1, OMEGA])
HT_GATE = H_GATE @ T_GATE

# Clock circuit of g0: U_1..U_8 with U_8...U_1 = 1.
G0_CIRCUIT = (H_GATE, H_GATE, HT_GATE, HT_GATE.conj().T,
              HT_GATE, HT_GATE.conj().T, H_GATE, H_GATE)

INPUT_TIMES = (1, 3)
OUTPUT_TIMES = {"1": (5, 7), "H": (2, 8), "HT": (4, 6)}
LABEL_GATE = {"1": np.eye(2, dtype=complex), "H": H_GATE, "HT": HT_GATE}

VERTS_PER_ELEMENT = 128
# Gate-graph adjacencies factor cheaply, so shift-invert beats dense solves early.
GATE_DENSE_MAX = 1024


def vertex_index(q: int, z: int, t: int, j: int) -> int:
    return ((q * 2 + z) * 8 + (t - 1)) * 8 + j


def node_vertices(q: int, z: int, t: int) -> np.ndarray:
    base = vertex_index(q, z, t, 0)
    return np.arange(base, base + 8)


def shift_matrix() -> np.ndarray:
    s = np.zeros((8, 8))
    for j in range(8):
        s[(j + 1) % 8, j] = 1.0
    return s


def omega_power(x: complex, tol: float = 1e-9) -> int:
    """The k in 0..7 with x = omega**k; raises if x is not an 8th root of unity."""
    k = int(round(np.angle(x) / (np.pi / 4))) % 8
    if abs(x - OMEGA ** k) > tol:
        raise ValueError(f"{x} is not a power of omega")
    return k


def substitute(u: np.ndarray) -> np.ndarray:
    """B(U): replace each entry omega^k of -sqrt(2) U by S^k, giving a 16x16 0-1 matrix."""
    m = -np.sqrt(2.0) * np.asarray(u)
    s = shift_matrix()
    rows, cols = m.shape
    out = np.zeros((rows * 8, cols * 8))
    for a in range(rows):
        for b in range(cols):
            if abs(m[a, b]) < 1e-12:
                continue
            k = omega_power(m[a, b])
            out[a * 8:(a + 1) * 8, b * 8:(b + 1) * 8] = np.linalg.matrix_power(s, k)
    return out


def penalty_block() -> np.ndarray:
    s = shift_matrix()
    return (np.linalg.matrix_power(s, 3) + np.linalg.matrix_power(s, 4)
            + np.linalg.matrix_power(s, 5))


@lru_cache(maxsize=None)
def _g0_dense() -> np.ndarray:
    # Ordering of the tensor factors is qubit (x) clock (x) ancilla.
    a = np.zeros((128, 128))
    for t in range(1, 9):
        b = substitute(G0_CIRCUIT[t - 1])
        tn = t % 8 + 1
        for z in range(2):
            for x in range(2):
                blk = b[x * 8:(x + 1) * 8, z * 8:(z + 1) * 8]
                r0 = vertex_index(0, x, tn, 0)
                c0 = vertex_index(0, z, t, 0)
                a[r0:r0 + 8, c0:c0 + 8] += blk
                a[c0:c0 + 8, r0:r0 + 8] += blk.T
    pen = penalty_block()
    for z in range(2):
        for t in range(1, 9):
            r0 = vertex_index(0, z, t, 0)
            a[r0:r0 + 8, r0:r0 + 8] += pen
    return a


def build_g0() -> SparseSymMatrix:
    return SparseSymMatrix(_g0_dense().copy())


def build_g1() -> SparseSymMatrix:
    a = _g0_dense().copy()
    for v in node_vertices(0, 1, 1):
        a[v, v] += 1.0
    return SparseSymMatrix(a)


def ancilla_state(a: int) -> np.ndarray:
    """|omega> for a=0 and its conjugate for a=1."""
    v = OMEGA ** (-np.arange(8)) / np.sqrt(8)
    return v if a == 0 else v.conj()


@lru_cache(maxsize=None)
def history_amplitudes(z: int) -> np.ndarray:
    """2x8 array c[x, t-1] = <x|U_{t-1}...U_1|z>, the clock history of |z>."""
    c = np.zeros((2, 8), dtype=complex)
    v = np.zeros(2, dtype=complex)
    v[z] = 1
    for t in range(8):
        c[:, t] = v
        v = G0_CIRCUIT[t] @ v
    return c


def node_amplitudes(z: int, a: int) -> np.ndarray:
    """Amplitude of psi_{z,a} on node (x, t), with the ancilla factored out.

    Returns a 2x8 array r with psi_{z,a} = sum r[x,t-1] |x,t> (x) ancilla_state(a).
    """
    r = history_amplitudes(z) / np.sqrt(8)
    return r if a == 0 else r.conj()


def psi_local(z: int, a: int) -> np.ndarray:
    return np.kron(node_amplitudes(z, a).reshape(16), ancilla_state(a))


def psi_state(q: int, z: int, a: int, R: int) -> np.ndarray:
    if not 0 <= q < R:
        raise IndexError(f"element position {q} out of range for R={R}")
    v = np.zeros(VERTS_PER_ELEMENT * R, dtype=complex)
    v[q * 128:(q + 1) * 128] = psi_local(z, a)
    return v


Node = tuple[int, int, int]


def is_input_node(t: int) -> bool:
    return t in INPUT_TIMES


def allowed_times(label: str) -> tuple[int, ...]:
    return INPUT_TIMES + OUTPUT_TIMES[label]


class DiagramError(ValueError):
    pass


@dataclass
class GateDiagram:
    """Elements keyed by integer id, node-level edges and self-loops.

    Nodes are (id, z, t) triples. Element positions in the assembled graph
    follow ascending id order.
    """

    labels: dict[int, str] = field(default_factory=dict)
    edges: list[tuple[Node, Node]] = field(default_factory=list)
    loops: list[Node] = field(default_factory=list)

    def __post_init__(self):
        self._used: dict[Node, str] = {}
        edges, loops = list(self.edges), list(self.loops)
        self.edges, self.loops = [], []
        for lab in self.labels.values():
            if lab not in LABELS:
                raise DiagramError(f"unknown label {lab!r}")
        for a, b in edges:
            self.add_edge(a, b)
        for n in loops:
            self.add_loop(n)

    @property
    def R(self) -> int:
        return len(self.labels)

    def add_element(self, q: int, label: str) -> None:
        if q in self.labels:
            raise DiagramError(f"duplicate element id {q}")
        if label not in LABELS:
            raise DiagramError(f"unknown label {label!r}")
        self.labels[q] = label

    def _claim(self, node: Node, what: str) -> Node:
        node = tuple(int(x) for x in node)
        q, z, t = node
        if q not in self.labels:
            raise DiagramError(f"node {node} refers to unknown element {q}")
        if z not in (0, 1):
            raise DiagramError(f"node {node} has z outside {{0,1}}")
        if t not in allowed_times(self.labels[q]):
            raise DiagramError(f"node {node} is not an input or output node of "
                               f"a {self.labels[q]} element")
        if node in self._used:
            raise DiagramError(f"node {node} already carries a {self._used[node]}")
        self._used[node] = what
        return node

    def add_edge(self, a: Node, b: Node) -> None:
        if tuple(a) == tuple(b):
            raise DiagramError(f"edge from node {tuple(a)} to itself")
        self.edges.append((self._claim(a, "edge"), self._claim(b, "edge")))

    def add_loop(self, n: Node) -> None:
        self.loops.append(self._claim(n, "self-loop"))

    def is_free(self, node: Node) -> bool:
        return tuple(node) not in self._used

    def remove_edge(self, a: Node, b: Node) -> None:
        a, b = tuple(a), tuple(b)
        for k, e in enumerate(self.edges):
            if e == (a, b) or e == (b, a):
                del self.edges[k]
                del self._used[a], self._used[b]
                return
        raise KeyError((a, b))

    def remove_loop(self, n: Node) -> None:
        n = tuple(n)
        self.loops.remove(n)
        del self._used[n]

    def copy(self) -> "GateDiagram":
        return GateDiagram(dict(self.labels), list(self.edges), list(self.loops))

    def ids(self) -> list[int]:
        return sorted(self.labels)

    def positions(self) -> dict[int, int]:
        return {q: k for k, q in enumerate(self.ids())}

    def merge(self, other: "GateDiagram", offset: int) -> dict[int, int]:
        """Add a relabelled copy of ``other`` (ids shifted by offset); return the id map."""
        idmap = {q: q + offset for q in other.labels}
        for q, lab in other.labels.items():
            self.add_element(idmap[q], lab)
        for a, b in other.edges:
            self.add_edge((idmap[a[0]], a[1], a[2]), (idmap[b[0]], b[1], b[2]))
        for n in other.loops:
            self.add_loop((idmap[n[0]], n[1], n[2]))
        return idmap

    def to_json(self) -> dict:
        return {
            "elements": [{"id": q, "label": self.labels[q]} for q in self.ids()],
            "edges": [[list(a), list(b)] for a, b in self.edges],
            "loops": [list(n) for n in self.loops],
        }

    @classmethod
    def from_json(cls, data: dict) -> "GateDiagram":
        try:
            labels = {int(e["id"]): str(e["label"]) for e in data["elements"]}
            edges = [(tuple(a), tuple(b)) for a, b in data.get("edges", [])]
            loops = [tuple(n) for n in data.get("loops", [])]
        except (KeyError, TypeError, ValueError) as exc:
            raise DiagramError(f"malformed diagram JSON: {exc}") from exc
        if len(labels) != len(data["elements"]):
            raise DiagramError("duplicate element ids")
        return cls(labels, edges, loops)

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def load(cls, path) -> "GateDiagram":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)


def _g0_coo():
    coo = sp.coo_matrix(_g0_dense())
    return coo.row, coo.col


def _node_index(pos: dict[int, int], node: Node) -> int:
    q, z, t = node
    return vertex_index(pos[q], z, t, 0)


def loop_matrix(d: GateDiagram, loops: Iterable[Node] | None = None) -> sp.csr_matrix:
    pos = d.positions()
    idx = [_node_index(pos, n) + j for n in (d.loops if loops is None else loops)
           for j in range(8)]
    dim = 128 * d.R
    return sp.csr_matrix((np.ones(len(idx)), (idx, idx)), shape=(dim, dim))


def edge_matrix(d: GateDiagram, edges: Iterable[tuple[Node, Node]] | None = None) -> sp.csr_matrix:
    pos = d.positions()
    rows, cols = [], []
    for a, b in (d.edges if edges is None else edges):
        ia, ib = _node_index(pos, a), _node_index(pos, b)
        for j in range(8):
            for u in (ia + j, ib + j):
                for v in (ia + j, ib + j):
                    rows.append(u)
                    cols.append(v)
    dim = 128 * d.R
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(dim, dim))


def block_g0(R: int) -> sp.csr_matrix:
    r0, c0 = _g0_coo()
    offs = np.repeat(np.arange(R) * 128, len(r0))
    rows = np.tile(r0, R) + offs
    cols = np.tile(c0, R) + offs
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(128 * R, 128 * R))


@dataclass
class GateGraph:
    diagram: GateDiagram
    adjacency: SparseSymMatrix

    @property
    def R(self) -> int:
        return self.diagram.R

    @property
    def dim(self) -> int:
        return self.adjacency.dim

    def position(self, q: int) -> int:
        return self.diagram.positions()[q]

    def psi(self, q: int, z: int, a: int) -> np.ndarray:
        return psi_state(self.position(q), z, a, self.R)

    def h_loops(self) -> sp.csr_matrix:
        return loop_matrix(self.diagram)

    def h_edges(self) -> sp.csr_matrix:
        return edge_matrix(self.diagram)


def assemble(d: GateDiagram) -> GateGraph:
    """A(G) = 1 (x) A(g0) + h_S + h_E as a symmetric 0-1 matrix."""
    a = block_g0(d.R) + loop_matrix(d) + edge_matrix(d)
    a = sp.csr_matrix(a)
    if a.nnz and a.data.max() > 1:
        raise DiagramError("assembly produced an entry above 1")
    return GateGraph(d, SparseSymMatrix(a, check=False))


def single_element(label: str = "1") -> GateDiagram:
    return GateDiagram({1: label})


def mu(g, k: int = 1, seed: int | None = None) -> float:
    m = g.adjacency if isinstance(g, GateGraph) else g
    csr = spectra.as_csr(m)
    # mu >= e1 for every gate graph, so a shift just below e1 is a safe pole.
    sigma = E1 - 0.05 if isinstance(g, GateGraph) else None
    if csr.shape[0] <= GATE_DENSE_MAX:
        return float(spectra.smallest_eigs(csr, k, seed=seed).eigenvalues[0])
    return float(spectra.smallest_eigs(csr, k, seed=seed, sigma=sigma, dense_max=0).eigenvalues[0])


def ground_space(g: GateGraph, tol: float = 1e-7, seed: int | None = None) -> spectra.SubspaceBasis:
    """Eigenspace of A(G) at e1 (empty if mu(G) > e1)."""
    shifted = g.adjacency.shifted(E1)
    csr = shifted.csr
    if csr.shape[0] <= GATE_DENSE_MAX:
        return spectra.dense_nullspace(csr.toarray(), tol=tol)
    k = 8
    while True:
        spec = spectra.smallest_eigs(csr, min(k, csr.shape[0]), seed=seed, sigma=-0.05,
                                     dense_max=0)
        if spec.eigenvalues[-1] > tol or k >= csr.shape[0]:
            break
        k *= 2
    if spec.eigenvalues[0] < -tol:
        raise spectra.NotPSDError("A(G) has an eigenvalue below e1")
    return spectra.SubspaceBasis(spec.vectors[:, np.abs(spec.eigenvalues) <= tol])


def is_e1_gate_graph(g: GateGraph, tol: float = 1e-9) -> bool:
    return abs(mu(g) - E1) <= tol
