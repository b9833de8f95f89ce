"""Move-together, two-qubit and boundary gadgets with their closed-form ground states."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import gategraph as gg
from . import manybody, spectra
from .report import VerificationReport

S3, S6, S8 = np.sqrt(3.0), np.sqrt(6.0), np.sqrt(8.0)
C38 = np.sqrt(3.0 / 8.0)

KINDS = ("w", "cnot12", "cnot21", "cnoth", "cnotht", "bnd")
TWO_QUBIT = {"cnot12": "1", "cnot21": "1", "cnoth": "H", "cnotht": "HT"}

# Move-together gadget: six H elements joined by eight edges.
MT_EDGES = (
    ((2, 1, 3), (4, 1, 1)), ((3, 1, 1), (2, 0, 3)),
    ((4, 0, 1), (1, 1, 3)), ((3, 0, 1), (1, 0, 3)),
    ((2, 1, 2), (6, 1, 1)), ((2, 0, 2), (5, 1, 1)),
    ((1, 1, 2), (5, 0, 1)), ((1, 0, 2), (6, 0, 1)),
)
MT_PORTS = {"alpha": (1, 0, 1), "beta": (1, 1, 1), "gamma": (2, 1, 1), "delta": (2, 0, 1)}

# chi_L as (element, z, coefficient) terms of psi^element_{z,a}
CHI = {
    1: ((1, 0, 1 / S3), (3, 0, -1 / S3), (5, 0, -1 / S6), (6, 0, -1 / S6)),
    2: ((1, 1, 1 / S3), (4, 0, -1 / S3), (5, 0, 1 / S6), (6, 0, -1 / S6)),
    3: ((2, 1, 1 / S3), (4, 1, -1 / S3), (5, 1, -1 / S6), (6, 1, 1 / S6)),
    4: ((2, 0, 1 / S3), (3, 1, -1 / S3), (5, 1, -1 / S6), (6, 1, -1 / S6)),
}
CHI_PORT = {1: "alpha", 2: "beta", 3: "gamma", 4: "delta"}

# Two-qubit gadget: element 1 carries the single-qubit label, 2..8 are identity
# elements, and a move-together copy W_xy sits at ids offset+1..offset+6.
W_OFFSET = {(0, 0): 8, (0, 1): 14, (1, 0): 20, (1, 1): 26}
TQ_INPUTS = {"alpha": (1, 0, 1), "beta": (1, 1, 1), "gamma": (3, 0, 1), "delta": (3, 1, 1)}
TQ_OUTPUTS = {"epsilon": (2, 0, 5), "zeta": (2, 1, 5), "eta": (4, 0, 5), "theta": (4, 1, 5)}
BOUNDARY_LOOPS = tuple((q, z, t) for q, t in ((1, 1), (2, 5), (3, 1)) for z in (0, 1))

CNOT12 = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
CNOT21 = np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)

OUTER_BLOCK = np.array([
    [3 / 8, 1 / 8, 1 / (8 * S3), 1 / (8 * S3)],
    [1 / 8, 1 / 8, 0, 0],
    [1 / (8 * S3), 0, 1 / 24, 0],
    [1 / (8 * S3), 0, 0, 1 / 24],
])
OUTER_NULL = np.array([1, -1, -S3, -S3]) / S8


def gate_matrix(kind: str) -> np.ndarray:
    """The two-qubit unitary of a gadget kind, qubit 1 as the high-order index."""
    if kind == "cnot21":
        return CNOT21.copy()
    lab = TWO_QUBIT[kind]
    return CNOT12 @ np.kron(gg.LABEL_GATE[lab], np.eye(2))


def gate_action(kind: str, a: int) -> np.ndarray:
    u = gate_matrix(kind)
    return u if a == 0 else u.conj()


def graph_unitary(kind: str) -> np.ndarray:
    """The unitary the gadget applies in its own (region 1/2, region 3/4) qubit order.

    CNOT21 reuses the identity-label graph with the two qubits exchanged.
    """
    u = gate_matrix(kind)
    return SWAP @ u @ SWAP if kind == "cnot21" else u


def move_together_diagram() -> gg.GateDiagram:
    return gg.GateDiagram({q: "H" for q in range(1, 7)}, list(MT_EDGES))


def _outputs(label: str) -> tuple[int, int]:
    return gg.OUTPUT_TIMES[label] if label != "H" else (2, 8)


def two_qubit_diagram(utilde: str) -> gg.GateDiagram:
    d = gg.GateDiagram({1: utilde, **{q: "1" for q in range(2, 9)}})
    mt = move_together_diagram()
    for off in W_OFFSET.values():
        d.merge(mt, off)

    def port(xy, name):
        q, z, t = MT_PORTS[name]
        return (W_OFFSET[xy] + q, z, t)

    o1, o2 = _outputs(utilde)
    edges = [
        (port((0, 0), "beta"), (2, 0, 1)), (port((0, 1), "beta"), (2, 0, 3)),
        (port((1, 0), "beta"), (2, 1, 1)), (port((1, 1), "beta"), (2, 1, 3)),
        (port((0, 0), "delta"), (4, 0, 1)), (port((1, 1), "delta"), (4, 0, 3)),
        (port((0, 1), "delta"), (4, 1, 1)), (port((1, 0), "delta"), (4, 1, 3)),
        ((1, 0, o1), port((0, 0), "alpha")), ((1, 0, o2), port((0, 1), "alpha")),
        ((1, 1, o1), port((1, 0), "alpha")), ((1, 1, o2), port((1, 1), "alpha")),
        ((3, 0, 5), port((0, 0), "gamma")), ((3, 0, 7), port((1, 0), "gamma")),
        ((3, 1, 5), port((0, 1), "gamma")), ((3, 1, 7), port((1, 1), "gamma")),
        ((3, 0, 3), (7, 0, 3)), ((3, 1, 3), (7, 1, 3)),
        ((4, 0, 7), (8, 0, 7)), ((4, 1, 7), (8, 1, 7)),
        ((5, 0, 3), (1, 0, 3)), ((5, 1, 7), (2, 1, 7)),
        ((6, 0, 7), (2, 0, 7)), ((6, 1, 3), (1, 1, 3)),
    ]
    for a, b in edges:
        d.add_edge(a, b)
    return d


def outer_edges(d: gg.GateDiagram) -> list:
    """Edges of a two-qubit diagram other than the move-together internals."""
    inner = {frozenset(((off + a[0],) + a[1:], (off + b[0],) + b[1:]))
             for off in W_OFFSET.values() for a, b in MT_EDGES}
    return [e for e in d.edges if frozenset(e) not in inner]


def boundary_diagram() -> gg.GateDiagram:
    d = two_qubit_diagram("1")
    for n in BOUNDARY_LOOPS:
        d.add_loop(n)
    return d


def build_diagram(kind: str) -> gg.GateDiagram:
    if kind == "w":
        return move_together_diagram()
    if kind == "bnd":
        return boundary_diagram()
    if kind in TWO_QUBIT:
        return two_qubit_diagram(TWO_QUBIT[kind])
    raise ValueError(f"unknown gadget kind {kind!r}; expected one of {KINDS}")


def build_gadget(kind: str) -> gg.GateGraph:
    return gg.assemble(build_diagram(kind))


# --- closed-form states -------------------------------------------------------

Terms = list  # [(element id, z, coefficient)]


def chi_terms(L: int, offset: int = 0) -> Terms:
    return [(offset + q, z, c) for q, z, c in CHI[L]]


def rho_terms(i: int, z: int, a: int, utilde: str = "1") -> Terms:
    """Terms of the region-i ground state of a two-qubit gadget."""
    out = [(i, z, 1 / S8)]
    if i == 1:
        out.append((5 + z, z, -1 / S8))
        u = gg.LABEL_GATE[utilde]
        u = u if a == 0 else u.conj()
        for x in (0, 1):
            for y in (0, 1):
                out += [(q, zz, -C38 * u[y, z] * c) for q, zz, c in chi_terms(1, W_OFFSET[(y, x)])]
    elif i == 2:
        out.append((6 - z, z, -1 / S8))
        for x in (0, 1):
            out += [(q, zz, -C38 * c) for q, zz, c in chi_terms(2, W_OFFSET[(z, x)])]
    elif i == 3:
        out.append((7, z, -1 / S8))
        for x in (0, 1):
            out += [(q, zz, -C38 * c) for q, zz, c in chi_terms(3, W_OFFSET[(x, z)])]
    elif i == 4:
        out.append((8, z, -1 / S8))
        for x in (0, 1):
            out += [(q, zz, -C38 * c) for q, zz, c in chi_terms(4, W_OFFSET[(x, z ^ x)])]
    else:
        raise ValueError(f"region {i} not in 1..4")
    return out


def terms_vector(g: gg.GateGraph, terms: Terms, a: int) -> np.ndarray:
    v = np.zeros(g.dim, dtype=complex)
    for q, z, c in terms:
        v += c * g.psi(q, z, a)
    return v


@dataclass
class TwoParticleStates:
    """Symmetric two-particle states sum_ij C_ij b_i (x) b_j over single-particle columns b."""

    basis: np.ndarray
    coeffs: list[np.ndarray]
    labels: list[tuple]

    def in_basis(self, v: np.ndarray) -> np.ndarray:
        """Flattened coefficient vectors over an orthonormal single-particle basis v."""
        w = v.conj().T @ self.basis
        return np.stack([(w @ c @ w.T).reshape(-1) for c in self.coeffs], axis=1)


def symmetrize(c: np.ndarray) -> np.ndarray:
    s = c + c.T
    return s / np.linalg.norm(s)


@dataclass
class GadgetStates:
    single: dict[tuple, np.ndarray]
    two: TwoParticleStates | None = None

    def matrix(self) -> np.ndarray:
        return np.stack(list(self.single.values()), axis=1)


def _chi_states(g, offset=0):
    return {("chi", L, a): terms_vector(g, chi_terms(L, offset), a)
            for L in (1, 2, 3, 4) for a in (0, 1)}


def gadget_states(kind: str, g: gg.GateGraph | None = None) -> GadgetStates:
    g = build_gadget(kind) if g is None else g
    if kind == "w":
        single = _chi_states(g)
        keys = list(single)
        b = np.stack([single[k] for k in keys], axis=1)
        pos = {k: n for n, k in enumerate(keys)}
        coeffs, labels = [], []
        for a in (0, 1):
            for bb in (0, 1):
                c = np.zeros((len(keys), len(keys)), dtype=complex)
                c[pos[("chi", 1, a)], pos[("chi", 3, bb)]] = 1 / np.sqrt(2)
                c[pos[("chi", 2, a)], pos[("chi", 4, bb)]] = 1 / np.sqrt(2)
                coeffs.append(symmetrize(c))
                labels.append(("Phi", a, bb))
        return GadgetStates(single, TwoParticleStates(b, coeffs, labels))
    if kind == "bnd":
        return GadgetStates({("rho", 4, z, a): terms_vector(g, rho_terms(4, z, a), a)
                             for z in (0, 1) for a in (0, 1)})
    utilde = TWO_QUBIT[kind]
    single = {("rho", i, z, a): terms_vector(g, rho_terms(i, z, a, utilde), a)
              for i in (1, 2, 3, 4) for z in (0, 1) for a in (0, 1)}
    keys = list(single)
    b = np.stack([single[k] for k in keys], axis=1)
    pos = {k: n for n, k in enumerate(keys)}
    u = graph_unitary(kind)
    coeffs, labels = [], []
    for z1 in (0, 1):
        for a in (0, 1):
            ua = u if a == 0 else u.conj()
            for z2 in (0, 1):
                for bb in (0, 1):
                    c = np.zeros((len(keys), len(keys)), dtype=complex)
                    c[pos[("rho", 1, z1, a)], pos[("rho", 3, z2, bb)]] = 1 / np.sqrt(2)
                    for x1 in (0, 1):
                        for x2 in (0, 1):
                            c[pos[("rho", 2, x1, a)], pos[("rho", 4, x2, bb)]] += (
                                ua[2 * x1 + x2, 2 * z1 + z2] / np.sqrt(2))
                    coeffs.append(symmetrize(c))
                    labels.append(("T", z1, a, z2, bb))
    return GadgetStates(single, TwoParticleStates(b, coeffs, labels))


def outer_block_basis(g: gg.GateGraph, utilde: str) -> tuple[np.ndarray, list]:
    """The 64 states in which the outer edges of a two-qubit gadget are block diagonal."""
    cols, labels = [], []
    for z in (0, 1):
        for a in (0, 1):
            u = gg.LABEL_GATE[utilde]
            u = u if a == 0 else u.conj()

            def chi(L, xy):
                return terms_vector(g, chi_terms(L, W_OFFSET[xy]), a)

            blocks = {
                1: [g.psi(1, z, a), g.psi(5 + z, z, a),
                    sum(u[x, z] * chi(1, (x, 0)) for x in (0, 1)),
                    sum(u[x, z] * chi(1, (x, 1)) for x in (0, 1))],
                2: [g.psi(2, z, a), g.psi(6 - z, z, a), chi(2, (z, 0)), chi(2, (z, 1))],
                3: [g.psi(3, z, a), g.psi(7, z, a), chi(3, (0, z)), chi(3, (1, z))],
                4: [g.psi(4, z, a), g.psi(8, z, a), chi(4, (0, z)), chi(4, (1, z ^ 1))],
            }
            for i in (1, 2, 3, 4):
                cols += blocks[i]
                labels.append((i, z, a))
    return np.stack(cols, axis=1), labels


def outer_block_matrix(g: gg.GateGraph, utilde: str) -> tuple[np.ndarray, np.ndarray]:
    """Outer edges of a gadget in that basis, and kron(1_16, OUTER_BLOCK) to compare with."""
    basis, _ = outer_block_basis(g, utilde)
    h = gg.edge_matrix(g.diagram, outer_edges(g.diagram))
    m = basis.conj().T @ (h @ basis)
    expected = np.kron(np.eye(16), OUTER_BLOCK)
    return m, expected


# --- verification ---------------------------------------------------------------

def _node_weight(v: np.ndarray, g: gg.GateGraph, node) -> float:
    q, z, t = node
    idx = gg.node_vertices(g.position(q), z, t)
    return float(np.sum(np.abs(v[idx]) ** 2))


def verify_gadget(kind: str, tol: float = 1e-9, full_check: bool = False,
                  report: VerificationReport | None = None) -> VerificationReport:
    """Check ground-space dimension, closed-form states and frustration-free dimensions."""
    rep = report or VerificationReport(f"gadget {kind}")
    g = build_gadget(kind)
    a = g.adjacency.csr
    expected_dim = {"w": 8, "bnd": 4}.get(kind, 16)
    rep.close("mu - e1", 0.0, gg.mu(g) - gg.E1, tol, "PAPER")
    z_space = gg.ground_space(g)
    rep.equal("ground-space dimension", expected_dim, z_space.dim)
    st = gadget_states(kind, g)
    states = st.matrix()
    res = np.linalg.norm(a @ states - gg.E1 * states, axis=0).max()
    rep.at_most("closed-form residual max ||(A-e1)v||", tol, float(res), "PAPER")
    gram = np.abs(states.conj().T @ states - np.eye(states.shape[1])).max()
    rep.at_most("closed-form orthonormality", 1e-10, float(gram), "TRIVIAL")
    dist = spectra.subspace_distance(spectra.SubspaceBasis.orthonormalize(states), z_space)
    rep.at_most("closed forms span the ground space", 1e-8, dist, "PAPER")

    ff2 = manybody.ff_states(g, 2, single=z_space.vectors)
    ff3 = manybody.ff_states(g, 3, single=z_space.vectors)
    exp2 = {"w": 4, "bnd": 0}.get(kind, 16)
    rep.equal("ffStates N=2 dimension", exp2, ff2.dim)
    rep.equal("ffStates N=3 dimension", 0, ff3.dim)
    if st.two is not None and ff2.dim:
        closed = spectra.SubspaceBasis.orthonormalize(st.two.in_basis(z_space.vectors))
        numeric = spectra.SubspaceBasis(ff2.coeffs.astype(complex))
        rep.at_most("two-particle closed forms vs ffStates", 1e-8,
                    spectra.subspace_distance(closed, numeric), "PAPER")

    if kind in TWO_QUBIT:
        m, expected = outer_block_matrix(g, TWO_QUBIT[kind])
        rep.at_most("outer edges vs kron(1_16, OUTER_BLOCK)", 1e-10,
                    float(np.abs(m - expected).max()), "PAPER")
        null_res = np.linalg.norm(OUTER_BLOCK @ OUTER_NULL)
        rep.at_most("block null vector residual", 1e-12, float(null_res), "PAPER")
    if kind == "w":
        _check_move_together(rep, g, st)
    if kind == "bnd":
        _check_boundary_kill(rep)
    if full_check and kind == "w":
        rep.extend(full_sector_check(g, ff2), "full sector: ")
    rep.info["vertices"] = g.dim
    rep.info["elements"] = g.R
    return rep


def _check_move_together(rep, g, st):
    worst = 0.0
    ports = {L: MT_PORTS[CHI_PORT[L]] for L in CHI}
    for L in CHI:
        for a in (0, 1):
            v = st.single[("chi", L, a)]
            for M, node in ports.items():
                w = _node_weight(v, g, node)
                if M == L:
                    worst = max(worst, abs(w - 1 / 24))
                else:
                    worst = max(worst, w)
    rep.at_most("chi port localization", 1e-12, worst, "PAPER",
                "weight 1/24 on its own port, zero on the other three")
    keys = list(st.single)
    pos = {k: n for n, k in enumerate(keys)}
    worst = 0.0
    for c in st.two.coeffs:
        for L1 in (1, 3):
            for L2 in (2, 4):
                for a in (0, 1):
                    for b in (0, 1):
                        worst = max(worst, abs(c[pos[("chi", L1, a)], pos[("chi", L2, b)]]))
    rep.at_most("mixed input/output overlap of two-particle states", 1e-12, worst, "PAPER")


def _check_boundary_kill(rep):
    g = build_gadget("cnot12")
    h = gg.loop_matrix(g.diagram, BOUNDARY_LOOPS)
    keys, cols = [], []
    for i in (1, 2, 3, 4):
        for z in (0, 1):
            for a in (0, 1):
                keys.append((i, z, a))
                cols.append(terms_vector(g, rho_terms(i, z, a), a))
    b = np.stack(cols, axis=1)
    m = b.conj().T @ (h @ b)
    expected = np.diag([1 / 64 if k[0] in (1, 2, 3) else 0.0 for k in keys])
    rep.at_most("boundary self-loop matrix elements", 1e-12,
                float(np.abs(m - expected).max()), "PAPER")


def full_sector_check(g: gg.GateGraph, ff: manybody.FFSpace, tol: float = 1e-8,
                      seed: int | None = None) -> VerificationReport:
    """Compare a compact frustration-free space with the nullspace of the full H(G, 2)."""
    from .fullsector import two_particle_nullspace
    rep = VerificationReport("full two-particle sector")
    op = manybody.build_bh(g, 2, mu=gg.E1)
    null, lam = two_particle_nullspace(g, op, k=ff.dim + 4, seed=seed)
    rep.info["sector dimension"] = op.dim
    rep.info["lowest eigenvalues"] = lam.tolist()
    rep.equal("nullspace dimension", ff.dim, null.dim)
    compact = ff.to_fock(op.indexer)
    rep.at_most("compact vs full nullspace distance", tol,
                spectra.subspace_distance(compact, null), "PAPER")
    return rep
