"""Compile a mediated circuit into a gate graph, an occupancy graph and the
restricted operators that govern its low-energy n-particle states.

The grid has rows 1..n (one per qubit) and columns 0..M+1. Gate j occupies
column j with its two-qubit gadget split between row 1 and row s(j); rows
2..n carry boundary gadgets in columns 0 and M+1. Diagram elements that can
hold a particle are labelled (i, j, d) with d=0 for the input side and d=1
for the output side.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import gadgets, spectra
from . import gategraph as gg
from .circuits import Circuit, CircuitError, apply_two_qubit
from .report import VerificationReport

SQ2 = np.sqrt(2.0)
GADGET_SIZE = 32

# gadget element id for (row role, side): role 0 is row 1, role 1 is row s(j)
ROLES = {(0, 0): 1, (0, 1): 2, (1, 0): 3, (1, 1): 4}
ROLES_SWAPPED = {(1, 0): 1, (1, 1): 2, (0, 0): 3, (0, 1): 4}
BOUNDARY_ELEMENT = 4
IN_LOOP = (8, 1, 5)
OUT_LOOP = (8, 0, 5)


class CompileError(ValueError):
    pass


# --- layout -------------------------------------------------------------------

@dataclass
class Component:
    kind: str          # gadget kind, or "bnd"
    offset: int        # element ids are offset+1 .. offset+32
    column: int
    row: int | None    # boundary row, None for gate gadgets


@dataclass
class GridLayout:
    n: int
    M: int
    components: list[Component]
    elements: dict[tuple, int]          # (i, j, d) -> element id
    component_of: dict[tuple, int]      # (i, j, d) -> component index
    local: dict[tuple, int]             # (i, j, d) -> element id inside its gadget

    @property
    def R(self) -> int:
        return GADGET_SIZE * len(self.components)

    @cached_property
    def labels(self) -> list[tuple]:
        """All (i, j, d) labels in lexicographic order."""
        return sorted(self.elements)

    def gates(self) -> list[tuple]:
        return [L for L in self.labels if 1 <= L[1] <= self.M]

    def node(self, L: tuple, z: int, t: int) -> gg.Node:
        return (self.elements[L], z, t)

    def to_json(self) -> dict:
        return {"n": self.n, "M": self.M, "R": self.R,
                "components": [c.__dict__ for c in self.components],
                "elements": [{"label": list(L), "id": self.elements[L]} for L in self.labels]}


def grid_layout(c: Circuit) -> GridLayout:
    comps: list[Component] = []
    elements, comp_of, local = {}, {}, {}

    def add(kind, column, row=None):
        comps.append(Component(kind, GADGET_SIZE * len(comps), column, row))
        return len(comps) - 1

    for i in range(2, c.n + 1):
        k = add("bnd", 0, i)
        L = (i, 0, 1)
        elements[L], comp_of[L], local[L] = comps[k].offset + BOUNDARY_ELEMENT, k, BOUNDARY_ELEMENT
    for j in range(1, c.M + 1):
        g = c.gates[j - 1]
        k = add(g.kind, j)
        roles = ROLES_SWAPPED if g.kind == "cnot21" else ROLES
        for (role, d), q in roles.items():
            L = (1 if role == 0 else g.s, j, d)
            elements[L], comp_of[L], local[L] = comps[k].offset + q, k, q
    for i in range(2, c.n + 1):
        k = add("bnd", c.M + 1, i)
        L = (i, c.M + 1, 0)
        elements[L], comp_of[L], local[L] = comps[k].offset + BOUNDARY_ELEMENT, k, BOUNDARY_ELEMENT
    return GridLayout(c.n, c.M, comps, elements, comp_of, local)


def f_move(c: Circuit, i: int, j: int, bit: int) -> tuple:
    """Nearest element in row i strictly left (bit 0) or right (bit 1) of column j."""
    if not 2 <= i <= c.n:
        raise ValueError(f"row {i} outside 2..{c.n}")
    if not 1 <= j <= c.M:
        raise ValueError(f"column {j} outside 1..{c.M}")
    if bit == 0:
        ks = [k for k in range(1, j) if c.s(k) == i]
        return (i, ks[-1], 1) if ks else (i, 0, 1)
    if bit == 1:
        ks = [k for k in range(j + 1, c.M + 1) if c.s(k) == i]
        return (i, ks[0], 0) if ks else (i, c.M + 1, 0)
    raise ValueError(f"bit must be 0 or 1, got {bit}")


# --- gate graph stages ----------------------------------------------------------

STAGES = ("G1", "G2", "G3", "G4", "GX")


@dataclass
class CompiledCircuit:
    circuit: Circuit
    layout: GridLayout
    diagrams: dict[str, gg.GateDiagram]
    row_edges: list[tuple]       # rows 2..n, as node pairs
    top_edges: list[tuple]       # row 1
    in_loops: dict[int, gg.Node]
    out_loop: gg.Node
    _graphs: dict = field(default_factory=dict, repr=False)

    def graph(self, stage: str = "GX") -> gg.GateGraph:
        if stage not in self._graphs:
            self._graphs[stage] = gg.assemble(self.diagrams[stage])
        return self._graphs[stage]

    @property
    def R(self) -> int:
        return self.layout.R


def _row_pairs(c: Circuit, i: int) -> list[tuple]:
    """Consecutive (output element, input element) pairs along row i."""
    if i == 1:
        seq = [(1, j, d) for j in range(1, c.M + 1) for d in (0, 1)]
        return [(seq[k], seq[k + 1]) for k in range(1, len(seq) - 1, 2)]
    seq = [(i, 0, 1)]
    for j in range(1, c.M + 1):
        if c.s(j) == i:
            seq += [(i, j, 0), (i, j, 1)]
    seq.append((i, c.M + 1, 0))
    return [(seq[k], seq[k + 1]) for k in range(0, len(seq), 2)]


def _row_edges(c: Circuit, lay: GridLayout, i: int) -> list[tuple]:
    edges = []
    for a, b in _row_pairs(c, i):
        # boundary element 4 only exposes its output nodes
        tb = 5 if b[1] == c.M + 1 else 1
        for z in (0, 1):
            edges.append((lay.node(a, z, 5), lay.node(b, z, tb)))
    return edges


def build_gx(c: Circuit) -> CompiledCircuit:
    """Assemble the five diagram stages G1 -> G2 -> G3 -> G4 -> GX."""
    if not isinstance(c, Circuit):
        raise CompileError("expected a mediated Circuit")
    if c.n_in < 1:
        raise CompileError("qubit 1 must be an input qubit (n_in >= 1)")
    lay = grid_layout(c)
    d = gg.GateDiagram()
    for comp in lay.components:
        d.merge(gadgets.build_diagram(comp.kind), comp.offset)
    stages = {"G1": d.copy()}
    row_edges = [e for i in range(2, c.n + 1) for e in _row_edges(c, lay, i)]
    for a, b in row_edges:
        d.add_edge(a, b)
    stages["G2"] = d.copy()
    top_edges = _row_edges(c, lay, 1)
    for a, b in top_edges:
        d.add_edge(a, b)
    stages["G3"] = d.copy()
    in_loops = {}
    for i in range(c.n_in + 1, c.n + 1):
        comp = lay.components[lay.component_of[(i, 0, 1)]]
        in_loops[i] = (comp.offset + IN_LOOP[0],) + IN_LOOP[1:]
        d.add_loop(in_loops[i])
    stages["G4"] = d.copy()
    comp = lay.components[lay.component_of[(2, c.M + 1, 0)]]
    out_loop = (comp.offset + OUT_LOOP[0],) + OUT_LOOP[1:]
    d.add_loop(out_loop)
    stages["GX"] = d
    return CompiledCircuit(c, lay, stages, row_edges, top_edges, in_loops, out_loop)


# --- occupancy constraints --------------------------------------------------------

@dataclass
class OccupancyGraph:
    R: int
    edges: set[frozenset]         # pairs of (i, j, d) labels
    layout: GridLayout

    def adjacent(self, a: tuple, b: tuple) -> bool:
        return frozenset((a, b)) in self.edges

    def element_edges(self) -> list[tuple[int, int]]:
        out = []
        for e in self.edges:
            a, b = sorted(self.layout.elements[L] for L in e)
            out.append((a, b))
        return sorted(out)

    def allows(self, labels) -> bool:
        labels = list(labels)
        if len(set(labels)) != len(labels):
            return False
        return not any(self.adjacent(a, b) for a, b in itertools.combinations(labels, 2))

    def to_edge_list(self) -> str:
        return "".join(f"{a} {b}\n" for a, b in self.element_edges())


def occ_graph(c: Circuit, layout: GridLayout | None = None) -> OccupancyGraph:
    lay = grid_layout(c) if layout is None else layout
    labels = lay.labels
    rows = {i: [L for L in labels if L[0] == i] for i in range(1, c.n + 1)}
    edges: set[frozenset] = set()
    for i, row in rows.items():
        for a, b in itertools.combinations(row, 2):
            if a[1] != b[1]:
                edges.add(frozenset((a, b)))
    for j in range(1, c.M + 1):
        s = c.s(j)
        for cbit in (0, 1):
            top = (1, j, cbit)
            for L in rows[s]:
                if L[1] != j and L != f_move(c, s, j, cbit):
                    edges.add(frozenset((top, L)))
            for i in range(2, c.n + 1):
                if i == s:
                    continue
                keep = {f_move(c, i, j, 0), f_move(c, i, j, 1)}
                for L in rows[i]:
                    if L not in keep:
                        edges.add(frozenset((top, L)))
    return OccupancyGraph(lay.R, edges, lay)


# --- legal configurations -----------------------------------------------------------

@dataclass(frozen=True)
class LegalConfig:
    j: int
    d: tuple[int, ...]

    @property
    def paired(self) -> bool:
        return self.d[0] == 2


def legal_configs(c: Circuit) -> list[LegalConfig]:
    """All (j, d) with d_1 = d_s(j) in {0,1,2} and other bits in {0,1}, sorted."""
    out = []
    for j in range(1, c.M + 1):
        s = c.s(j)
        for d in itertools.product(*[(0, 1, 2) if i in (1, s) else (0, 1)
                                     for i in range(1, c.n + 1)]):
            if d[0] == d[s - 1]:
                out.append(LegalConfig(j, tuple(d)))
    return out


def config_elements(c: Circuit, cfg: LegalConfig) -> list[list[tuple]]:
    """Occupied elements, one list per branch (two branches for a paired config)."""
    j, d, s = cfg.j, cfg.d, c.s(cfg.j)
    rest = [f_move(c, i, j, d[i - 1]) for i in range(2, c.n + 1) if not (cfg.paired and i == s)]
    if not cfg.paired:
        return [[(1, j, d[0])] + rest]
    return [[(1, j, side), (s, j, side)] + rest for side in (0, 1)]


# --- the S1 basis ------------------------------------------------------------------

def _bits(x: int, n: int) -> tuple[int, ...]:
    return tuple((x >> (n - 1 - k)) & 1 for k in range(n))


class S1Basis:
    """Ordering of |j, d, z, a> lexicographic in (j, d, z, a)."""

    def __init__(self, c: Circuit):
        self.circuit = c
        self.n = c.n
        self.configs = legal_configs(c)
        self.config_index = {cfg: k for k, cfg in enumerate(self.configs)}
        self.block = 4 ** self.n

    @property
    def dim(self) -> int:
        return len(self.configs) * self.block

    def index(self, cfg: LegalConfig, z: int, a: int) -> int:
        return (self.config_index[cfg] * 2 ** self.n + z) * 2 ** self.n + a

    def unindex(self, r: int) -> tuple[LegalConfig, int, int]:
        k, rem = divmod(r, self.block)
        z, a = divmod(rem, 2 ** self.n)
        return self.configs[k], z, a

    def configs_at(self, j: int) -> list[LegalConfig]:
        return [cfg for cfg in self.configs if cfg.j == j]


def prefix_unitary(c: Circuit, j: int, d1: int, conj: bool) -> np.ndarray:
    """U_{j-1}...U_1 for d1 in {0,2}, U_j...U_1 for d1 = 1, on all n qubits."""
    upto = j if d1 == 1 else j - 1
    dim = 2 ** c.n
    u = np.eye(dim, dtype=complex)
    for g in c.gates[:upto]:
        m = g.matrix(conj)
        u = np.stack([apply_two_qubit(u[:, k], m, 1, g.s, c.n) for k in range(dim)], axis=1)
    return u


def in_basis_change(c: Circuit, basis: S1Basis) -> sp.csr_matrix:
    """W with W[(cfg,x,a),(cfg,z,a)] = <x|Ubar_{j,d1}(a1)|z>."""
    n = c.n
    dim2 = 2 ** n
    rows, cols, vals = [], [], []
    cache = {}
    for cfg in basis.configs:
        for a in range(dim2):
            a1 = _bits(a, n)[0]
            key = (cfg.j, 0 if cfg.d[0] == 2 else cfg.d[0], a1)
            if key not in cache:
                cache[key] = prefix_unitary(c, cfg.j, key[1], bool(a1))
            u = cache[key]
            x, z = np.nonzero(np.abs(u) > 1e-14)
            base = basis.config_index[cfg] * basis.block
            rows.append(base + x * dim2 + a)
            cols.append(base + z * dim2 + a)
            vals.append(u[x, z])
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(basis.dim, basis.dim))


# --- restricted operators: closed-form tables -----------------------------------------

def _f_diag(d, j, M) -> float:
    # each row-1 edge next to column j contributes; a paired state sees half of each
    left, right = j > 1, j < M
    if d[0] == 0:
        return left / 64
    if d[0] == 1:
        return right / 64
    return (left + right) / 128


def _f_off(c: Circuit, cv, dv, j) -> float:
    """Coupling between (j-1, cv) and (j, dv)."""
    sp_, s = c.s(j - 1), c.s(j)
    for r in range(2, c.n + 1):
        if r not in (sp_, s) and cv[r - 1] != dv[r - 1]:
            return 0.0
    key = (cv[0], cv[s - 1], dv[0], dv[sp_ - 1])
    if key in ((2, 0, 0, 0), (1, 1, 2, 1)):
        return 1 / (64 * SQ2)
    if key == (1, 0, 0, 1):
        return 1 / 64
    if key == (2, 1, 2, 0):
        return 1 / 128
    return 0.0


def _h1_entry(c: Circuit, j, cv, dv) -> float:
    n, s = c.n, c.s(j)
    if cv == dv:
        return (n - 1) / 64
    free = [i for i in range(2, n + 1) if i != s]
    diff = [i for i in range(1, n + 1) if cv[i - 1] != dv[i - 1]]
    if len(diff) == 1 and diff[0] in free:
        return 1 / 64
    if (cv[0], dv[0]) in ((2, 0), (0, 2), (1, 2), (2, 1)):
        if all(cv[r - 1] == dv[r - 1] for r in free):
            return 1 / (64 * SQ2)
    return 0.0


def _config_blocks(basis: S1Basis, entries) -> sp.csr_matrix:
    """Expand config-level entries (k1, k2, v) to identity blocks over (z, a)."""
    B = basis.block
    eye = np.arange(B)
    rows, cols, vals = [], [], []
    for k1, k2, v in entries:
        if v != 0:
            rows.append(k1 * B + eye)
            cols.append(k2 * B + eye)
            vals.append(np.full(B, v))
    if not rows:
        return sp.csr_matrix((basis.dim, basis.dim))
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(basis.dim, basis.dim))


@dataclass
class RestrictedOperators:
    """H1, H2, H_in,i and H_out on S1 in the In-basis (sparse, Hermitian)."""

    basis: S1Basis
    H1: sp.csr_matrix
    H2: sp.csr_matrix
    Hin: dict[int, sp.csr_matrix]
    Hout: sp.csr_matrix

    def items(self):
        yield "H1", self.H1
        yield "H2", self.H2
        for i, m in sorted(self.Hin.items()):
            yield f"Hin{i}", m
        yield "Hout", self.Hout

    def dense(self, name: str) -> np.ndarray:
        return dict(self.items())[name].toarray()

    def total(self, stage: str = "GX") -> sp.csr_matrix:
        m = self.H1 + self.H2
        if stage in ("G4", "GX"):
            for h in self.Hin.values():
                m = m + h
        if stage == "GX":
            m = m + self.Hout
        return sp.csr_matrix(m)


def formula_operators(c: Circuit, basis: S1Basis | None = None) -> RestrictedOperators:
    b = S1Basis(c) if basis is None else basis
    M, n = c.M, c.n
    ent1, ent2 = [], []
    for j in range(1, M + 1):
        cfgs = b.configs_at(j)
        for x in cfgs:
            for y in cfgs:
                ent1.append((b.config_index[x], b.config_index[y], _h1_entry(c, j, x.d, y.d)))
            ent2.append((b.config_index[x], b.config_index[x], _f_diag(x.d, j, M)))
        if j > 1:
            for x in b.configs_at(j - 1):
                for y in cfgs:
                    v = _f_off(c, x.d, y.d, j)
                    ent2.append((b.config_index[x], b.config_index[y], v))
                    ent2.append((b.config_index[y], b.config_index[x], v))
    dim2 = 2 ** n
    hin = {}
    for i in range(c.n_in + 1, n + 1):
        jmin = c.j_min(i)
        diag = np.zeros(b.dim)
        for cfg in b.configs:
            if cfg.j <= jmin and cfg.d[i - 1] == 0:
                for z in range(dim2):
                    if _bits(z, n)[i - 1] == 1:
                        k = b.index(cfg, z, 0)
                        diag[k:k + dim2] = 1 / 64
        hin[i] = sp.csr_matrix(sp.diags(diag))
    # output penalty: U^dagger |0><0|_2 U on the data register
    proj = {}
    for a1 in (0, 1):
        from .circuits import circuit_unitary
        u = circuit_unitary(c, conj=bool(a1))
        mask = np.array([_bits(k, n)[1] == 0 for k in range(dim2)])
        proj[a1] = (u[mask].conj().T @ u[mask]) / 64
    rows, cols, vals = [], [], []
    jmax = c.j_max()
    for cfg in b.configs:
        if cfg.j >= jmax and cfg.d[1] == 1:
            for a in range(dim2):
                p = proj[_bits(a, n)[0]]
                x, z = np.nonzero(np.abs(p) > 1e-15)
                rows.append(np.array([b.index(cfg, xx, a) for xx in x]))
                cols.append(np.array([b.index(cfg, zz, a) for zz in z]))
                vals.append(p[x, z])
    hout = (sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(b.dim, b.dim)) if rows else sp.csr_matrix((b.dim, b.dim)))
    return RestrictedOperators(b, _config_blocks(b, ent1), _config_blocks(b, ent2), hin, hout)


# --- restricted operators: single-particle evaluation on the real graph ---------------

@dataclass
class ModeSet:
    """Single-particle ground states rho^L_{z,a} for every L, as graph vectors."""

    keys: list[tuple]                 # (L, z, a)
    vectors: np.ndarray               # dim x len(keys)

    @cached_property
    def index(self) -> dict[tuple, int]:
        return {k: m for m, k in enumerate(self.keys)}


def rho_modes(cc: CompiledCircuit) -> ModeSet:
    lay = cc.layout
    R = lay.R
    keys, cols = [], []
    for L in lay.labels:
        comp = lay.components[lay.component_of[L]]
        utilde = "1" if comp.kind == "bnd" else gadgets.TWO_QUBIT[comp.kind]
        for z in (0, 1):
            for a in (0, 1):
                v = np.zeros(128 * R, dtype=complex)
                for q, zz, coef in gadgets.rho_terms(lay.local[L], z, a, utilde):
                    pos = comp.offset + q - 1       # ids are contiguous from 1
                    v[128 * pos:128 * (pos + 1)] += coef * gg.psi_local(zz, a)
                keys.append((L, z, a))
                cols.append(v)
    return ModeSet(keys, np.stack(cols, axis=1))


def _mode_matrix(modes: ModeSet, h: sp.csr_matrix) -> np.ndarray:
    V = modes.vectors
    return V.conj().T @ (h @ V)


class FockStates:
    """Legal-basis states as sums of square-free monomials in rho modes."""

    def __init__(self, c: Circuit, basis: S1Basis, modes: ModeSet):
        self.c, self.basis, self.modes = c, basis, modes
        self.terms: list[list[tuple[complex, tuple]]] = []
        n = c.n
        mi = modes.index
        for r in range(basis.dim):
            cfg, x, a = basis.unindex(r)
            xb, ab = _bits(x, n), _bits(a, n)
            j, s = cfg.j, c.s(cfg.j)
            rest = [mi[(f_move(c, i, j, cfg.d[i - 1]), xb[i - 1], ab[i - 1])]
                    for i in range(2, n + 1) if not (cfg.paired and i == s)]
            if not cfg.paired:
                mono = [mi[((1, j, cfg.d[0]), xb[0], ab[0])]] + rest
                self.terms.append([(1.0, tuple(sorted(mono)))])
                continue
            u = c.gates[j - 1].matrix(conj=bool(ab[0]))
            col = 2 * xb[0] + xb[s - 1]
            t = [(1 / SQ2, tuple(sorted([mi[((1, j, 0), xb[0], ab[0])],
                                          mi[((s, j, 0), xb[s - 1], ab[s - 1])]] + rest)))]
            for y1 in (0, 1):
                for ys in (0, 1):
                    amp = u[2 * y1 + ys, col]
                    if abs(amp) > 1e-15:
                        t.append((amp / SQ2, tuple(sorted(
                            [mi[((1, j, 1), y1, ab[0])], mi[((s, j, 1), ys, ab[s - 1])]] + rest))))
            self.terms.append(t)
        self.lookup: dict[tuple, list[tuple[int, complex]]] = {}
        for r, t in enumerate(self.terms):
            for coef, mono in t:
                self.lookup.setdefault(mono, []).append((r, coef))

    def one_body(self, m: np.ndarray, tol: float = 1e-14) -> sp.csr_matrix:
        """<psi|sum_w h^(w)|phi> for h with mode matrix m, on the legal basis."""
        nz = [np.nonzero(np.abs(m[:, b]) > tol)[0] for b in range(m.shape[0])]
        acc: dict[tuple[int, int], complex] = {}
        for r, t in enumerate(self.terms):
            for coef, mono in t:
                for p, beta in enumerate(mono):
                    others = mono[:p] + mono[p + 1:]
                    for alpha in nz[beta]:
                        if alpha in others:
                            continue
                        target = tuple(sorted(others + (int(alpha),)))
                        hits = self.lookup.get(target)
                        if not hits:
                            continue
                        w = m[alpha, beta] * coef
                        for r2, c2 in hits:
                            acc[(r2, r)] = acc.get((r2, r), 0) + np.conj(c2) * w
        if not acc:
            return sp.csr_matrix((self.basis.dim, self.basis.dim))
        keys = np.array(list(acc.keys()))
        vals = np.array(list(acc.values()))
        return sp.csr_matrix((vals, (keys[:, 0], keys[:, 1])),
                             shape=(self.basis.dim, self.basis.dim))


@dataclass
class NumericPath:
    ops: RestrictedOperators
    modes: ModeSet
    mode_matrices: dict[str, np.ndarray]
    rho_residual: float
    rho_gram_error: float


def numeric_operators(cc: CompiledCircuit, basis: S1Basis | None = None) -> NumericPath:
    """Evaluate the restricted operators from single-particle inner products on G_X."""
    c = cc.circuit
    b = S1Basis(c) if basis is None else basis
    modes = rho_modes(cc)
    d = cc.diagrams["GX"]
    V = modes.vectors
    a1 = cc.graph("G1").adjacency.csr
    rho_res = float(np.abs(a1 @ V - gg.E1 * V).max())
    gram = float(np.abs(V.conj().T @ V - np.eye(V.shape[1])).max())
    mats = {"H1": _mode_matrix(modes, gg.edge_matrix(d, cc.row_edges)),
            "H2": _mode_matrix(modes, gg.edge_matrix(d, cc.top_edges)),
            "Hout": _mode_matrix(modes, gg.loop_matrix(d, [cc.out_loop]))}
    for i, node in cc.in_loops.items():
        mats[f"Hin{i}"] = _mode_matrix(modes, gg.loop_matrix(d, [node]))
    fock = FockStates(c, b, modes)
    W = in_basis_change(c, b)
    Wh = W.conj().T.tocsr()

    def conv(m):
        return sp.csr_matrix(Wh @ fock.one_body(m) @ W)

    ops = RestrictedOperators(b, conv(mats["H1"]), conv(mats["H2"]),
                              {i: conv(mats[f"Hin{i}"]) for i in cc.in_loops},
                              conv(mats["Hout"]))
    return NumericPath(ops, modes, mats, rho_res, gram)


def compare_operators(a: RestrictedOperators, b: RestrictedOperators) -> dict[str, float]:
    """Largest entrywise difference per operator."""
    out = {}
    for (name, x), (_, y) in zip(a.items(), b.items()):
        diff = (x - y).tocoo()
        out[name] = float(np.abs(diff.data).max()) if diff.nnz else 0.0
    return out


# --- cube, C and history states ------------------------------------------------------------

def cube_state(c: Circuit, basis: S1Basis, k: int, j: int, z: int, a: int) -> np.ndarray:
    v = np.zeros(basis.dim, dtype=complex)
    norm = 1 / np.sqrt(2 ** (c.n - 2))
    for cfg in basis.configs_at(j):
        if cfg.d[0] == k:
            v[basis.index(cfg, z, a)] = norm * (-1) ** (sum(cfg.d) % 2)
    return v


def c_state(c: Circuit, basis: S1Basis, j: int, z: int, a: int) -> np.ndarray:
    return (0.5 * cube_state(c, basis, 0, j, z, a) + 0.5 * cube_state(c, basis, 1, j, z, a)
            - cube_state(c, basis, 2, j, z, a) / SQ2)


def history_state(c: Circuit, basis: S1Basis, z: int, a: int) -> np.ndarray:
    return sum(c_state(c, basis, j, z, a) for j in range(1, c.M + 1)) / np.sqrt(c.M)


def witness_history(c: Circuit, basis: S1Basis, witness: np.ndarray, a: int = 0) -> np.ndarray:
    """History state with input witness (x) |0...0> on the ancillas."""
    witness = np.asarray(witness, dtype=complex).reshape(-1)
    if witness.shape[0] != 2 ** c.n_in:
        raise CircuitError(f"witness has dimension {witness.shape[0]}, expected {2 ** c.n_in}")
    shift = c.n - c.n_in
    v = np.zeros(basis.dim, dtype=complex)
    for zin, amp in enumerate(witness):
        if amp != 0:
            v += amp * history_state(c, basis, zin << shift, a)
    return v


def completeness_formula(c: Circuit, witness: np.ndarray, a1: int = 0) -> float:
    from .circuits import acceptance_probability
    ap = acceptance_probability(c, witness, conj=bool(a1))
    w = np.linalg.norm(witness) ** 2
    return (c.M - c.j_max() + 0.5) / (128 * c.M) * (w - ap)


def completeness_energy(ops: RestrictedOperators, witness: np.ndarray, a1: int = 0) -> float:
    """<H^(witness, a)|H_out|H^(witness, a)> with a = (a1, 0, ..., 0)."""
    c = ops.basis.circuit
    v = witness_history(c, ops.basis, witness, a1 << (c.n - 1))
    return float(np.real(np.vdot(v, ops.Hout @ v)))


def restricted_ground_energy(ops: RestrictedOperators, seed: int | None = None) -> float:
    m = ops.total("GX")
    if m.shape[0] <= spectra.DENSE_MAX:
        return float(np.linalg.eigvalsh(m.toarray())[0])
    seed = spectra.default_seed() if seed is None else seed
    v0 = np.random.default_rng(seed).standard_normal(m.shape[0]).astype(m.dtype)
    return float(spla.eigsh(m, k=1, which="SA", v0=v0, tol=1e-12)[0][0])


# --- spectral chain S1 > S2 > S3 > S4 ---------------------------------------------------------

@dataclass
class SpectralChain:
    S2: np.ndarray
    S3: np.ndarray
    S4: np.ndarray
    gamma_h1: float
    containment: float
    block_leak: float


def _za_blocks(basis: S1Basis):
    dim2 = 2 ** basis.n
    idx = np.arange(basis.dim)
    z, a = (idx // dim2) % dim2, idx % dim2
    for zz in range(dim2):
        for aa in range(dim2):
            yield zz, aa, idx[(z == zz) & (a == aa)]


def spectral_chain(ops: RestrictedOperators, tol: float = 1e-9) -> SpectralChain:
    """Nullspaces of H1, H1+H2, H1+H2+sum Hin on S1, computed per (z, a) block."""
    b = ops.basis
    stages = [ops.H1, ops.H1 + ops.H2, ops.total("G4")]
    leak = 0.0
    outs = [[], [], []]
    gamma1 = np.inf
    for _, _, idx in _za_blocks(b):
        for k, m in enumerate(stages):
            full = m[idx]
            blk = full[:, idx].toarray()
            leak = max(leak, float(abs(full).sum() - np.abs(blk).sum()))
            w, v = np.linalg.eigh(blk)
            null = v[:, np.abs(w) <= tol]
            if k == 0:
                above = w[w > tol]
                if above.size:
                    gamma1 = min(gamma1, float(above[0]))
            emb = np.zeros((b.dim, null.shape[1]), dtype=complex)
            emb[idx] = null
            outs[k].append(emb)
    S2, S3, S4 = (np.concatenate(o, axis=1) for o in outs)

    def contained(small, big):
        if small.shape[1] == 0:
            return 0.0
        return float(np.linalg.norm(small - big @ (big.conj().T @ small), 2))

    cont = max(contained(S3, S2), contained(S4, S3))
    return SpectralChain(S2, S3, S4, gamma1, cont, leak)


def path_laplacian(M: int) -> np.ndarray:
    L = 2 * np.eye(M) - np.eye(M, k=1) - np.eye(M, k=-1)
    L[0, 0] = L[-1, -1] = 1
    if M == 1:
        L[0, 0] = 0
    return L


def h2_on_c_basis(ops: RestrictedOperators, z: int = 0, a: int = 0) -> np.ndarray:
    c = ops.basis.circuit
    C = np.stack([c_state(c, ops.basis, j, z, a) for j in range(1, c.M + 1)], axis=1)
    return C.conj().T @ (ops.H2 @ C)


def gamma_out_s4(ops: RestrictedOperators, chain: SpectralChain) -> float:
    """Smallest eigenvalue of H_out on S4."""
    S4 = chain.S4
    m = S4.conj().T @ (ops.Hout @ S4)
    return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])


# --- projector onto the occupancy-constrained subspace -----------------------------------------

def _component_elements(lay: GridLayout) -> dict[int, list[tuple]]:
    out: dict[int, list[tuple]] = {}
    for L in lay.labels:
        out.setdefault(lay.component_of[L], []).append(L)
    return out


def all_configurations(c: Circuit, lay: GridLayout):
    """Every n-particle configuration (J set, L tuple) on G1."""
    comps = _component_elements(lay)
    gate_comp = {j: lay.component_of[(1, j, 0)] for j in range(1, c.M + 1)}
    n = c.n
    for Y in range(0, n // 2 + 1):
        for Js in itertools.combinations(range(1, c.M + 1), Y):
            used = {gate_comp[j] for j in Js}
            free = [k for k in comps if k not in used]
            for ks in itertools.combinations(free, n - 2 * Y):
                for Ls in itertools.product(*[comps[k] for k in ks]):
                    yield Js, tuple(sorted(Ls))


def occupancy_weight(occ: OccupancyGraph, elems: list[tuple], on: list[float]) -> float:
    """<Pi_0> of a monomial whose k-th particle sits on elems[k] with probability on[k]."""
    total = 0.0
    n = len(elems)
    for mask in range(1 << n):
        chosen = [elems[k] for k in range(n) if mask >> k & 1]
        if not occ.allows(chosen):
            continue
        p = 1.0
        for k in range(n):
            p *= on[k] if mask >> k & 1 else 1 - on[k]
        total += p
    return total


def pi0_check(cc: CompiledCircuit, occ: OccupancyGraph | None = None,
              modes: ModeSet | None = None) -> dict:
    """Diagonal structure of Pi_0 on span(B_n), exact for the data-independent part.

    Every basis state is a sum of rho-monomials; Pi_0 is diagonal in element
    occupation and each rho^L meets only one constrained element (L itself)
    with weight w_L, so <mono|Pi_0|mono'> = delta * occupancy_weight.
    """
    c, lay = cc.circuit, cc.layout
    occ = occ_graph(c, lay) if occ is None else occ
    modes = rho_modes(cc) if modes is None else modes
    # weight of each mode on its own element, from the graph vectors
    on = {}
    for (L, z, a), m in modes.index.items():
        pos = lay.elements[L] - 1
        on[(L, z, a)] = float(np.linalg.norm(modes.vectors[128 * pos:128 * (pos + 1), m]) ** 2)
    w_on = {L: on[(L, 0, 0)] for L in lay.labels}
    spread = max(abs(v - w_on[k[0]]) for k, v in on.items())
    legal_sets = set()
    for cfg in legal_configs(c):
        for br in config_elements(c, cfg):
            legal_sets.add(tuple(sorted(br)))
    legal_min, illegal_max, n_legal, n_illegal = 1.0, 0.0, 0, 0
    for Js, Ls in all_configurations(c, lay):
        if Js:
            # a paired gadget contributes its input and output branches with weight 1/2
            (J,) = Js if len(Js) == 1 else (None,)
            if J is None:
                branches = None
            else:
                s = c.s(J)
                branches = [sorted([(1, J, side), (s, J, side)] + list(Ls)) for side in (0, 1)]
            if branches is None:
                val = _multi_pair_weight(c, occ, Js, Ls, w_on)
                is_legal = False
            else:
                val = 0.5 * sum(occupancy_weight(occ, br, [w_on[L] for L in br]) for br in branches)
                is_legal = all(tuple(br) in legal_sets for br in branches)
        else:
            val = occupancy_weight(occ, list(Ls), [w_on[L] for L in Ls])
            is_legal = tuple(Ls) in legal_sets
        if is_legal:
            legal_min = min(legal_min, val)
            n_legal += 1
        else:
            illegal_max = max(illegal_max, val)
            n_illegal += 1
    return {"legal_min": legal_min, "illegal_max": illegal_max, "n_legal": n_legal,
            "n_illegal": n_illegal, "on_weight": float(np.mean(list(w_on.values()))),
            "on_weight_spread": spread}


def _multi_pair_weight(c, occ, Js, Ls, w_on) -> float:
    total = 0.0
    for sides in itertools.product((0, 1), repeat=len(Js)):
        br = list(Ls)
        for J, side in zip(Js, sides):
            br += [(1, J, side), (c.s(J), J, side)]
        total += occupancy_weight(occ, br, [w_on[L] for L in br])
    return total / 2 ** len(Js)


def pi0_offdiagonal(cc: CompiledCircuit, occ: OccupancyGraph, modes: ModeSet,
                    basis: S1Basis, on_weight: float = 1 / 8) -> float:
    """Largest |<phi|Pi_0|psi>| between distinct legal-basis states."""
    fock = FockStates(cc.circuit, basis, modes)
    keys = modes.keys
    acc: dict[tuple[int, int], complex] = {}
    for mono, hits in fock.lookup.items():
        if len(hits) < 2:
            continue
        elems = [keys[m][0] for m in mono]
        f = occupancy_weight(occ, elems, [on_weight] * len(elems))
        for (r1, c1), (r2, c2) in itertools.combinations(hits, 2):
            if r1 != r2:
                acc[(r1, r2)] = acc.get((r1, r2), 0) + np.conj(c1) * c2 * f
    return max((abs(v) for v in acc.values()), default=0.0)


# --- K0 from gadget spectra ---------------------------------------------------------------------

def k0_estimate(kinds=("cnot12", "cnot21", "cnoth", "cnotht")) -> dict:
    """Single-particle gaps gamma(A(G) - e1) of every gadget in the gate set.

    The multi-particle terms in the definition of K0 live in sectors far past
    desk scale, so the minimum here is an upper bound on K0, not its value.
    """
    vals = {}
    for kind in tuple(kinds) + ("bnd",):
        g = gadgets.build_gadget(kind)
        spec = spectra.smallest_eigs(g.adjacency.csr, 24, sigma=gg.E1 - 0.05, dense_max=0,
                                     tol=1e-8)
        w = spec.eigenvalues - gg.E1
        vals[kind] = float(w[w > 1e-7][0])
    return {"gamma_single": vals, "upper_bound": min(1.0, *vals.values())}


# --- top level ------------------------------------------------------------------------------------

def step_by_step_circuit() -> Circuit:
    """Three qubits, input size 2, four gates."""
    return Circuit(3, 2, [("cnot12", 3), ("cnot21", 2), ("cnotht", 3), ("cnot12", 2)])


def verify_compiler(c: Circuit | None = None, tol: float = 1e-9, pi0: bool = True,
                    seed: int | None = None) -> VerificationReport:
    c = step_by_step_circuit() if c is None else c
    rep = VerificationReport(f"compiler n={c.n} M={c.M}")
    cc = build_gx(c)
    lay = cc.layout
    rep.equal("R = 32(M+2n-2)", 32 * (c.M + 2 * c.n - 2), lay.R)
    rep.equal("|L_gates| = 4M", 4 * c.M, len(lay.gates()), "TRIVIAL")
    rep.equal("row-1 diagram edges", 2 * (c.M - 1), len(cc.top_edges))
    for stage in STAGES:
        g = cc.graph(stage)
        rep.close(f"mu({stage}) = e1", gg.E1, gg.mu(g, seed=seed), tol)
    basis = S1Basis(c)
    rep.equal("legal configurations", c.M * 3 * 2 ** (c.n - 2), len(basis.configs), "TRIVIAL")
    occ = occ_graph(c, lay)
    bad = [cfg for cfg in basis.configs
           if not all(occ.allows(br) for br in config_elements(c, cfg))]
    rep.equal("legal configurations satisfy occupancy constraints", 0, len(bad))
    formula = formula_operators(c, basis)
    num = numeric_operators(cc, basis)
    rep.at_most("rho residual on G1", tol, num.rho_residual, "PAPER")
    rep.at_most("rho orthonormality", tol, num.rho_gram_error, "PAPER")
    for name, diff in compare_operators(formula, num.ops).items():
        rep.at_most(f"{name}: formula vs single-particle path", tol, diff, "PAPER")
    if pi0:
        info = pi0_check(cc, occ, num.modes)
        rep.close("Pi0 = 1 on legal states", 1.0, info["legal_min"], 1e-12)
        rep.at_most("Pi0 on illegal states <= 255/256", 255 / 256, info["illegal_max"], "PAPER")
        rep.at_most("Pi0 off-diagonal on legal states", 1e-12,
                    pi0_offdiagonal(cc, occ, num.modes, basis, info["on_weight"]), "PAPER")
        rep.info["configurations"] = info["n_legal"] + info["n_illegal"]
    return rep


def save_operators(path, ops: RestrictedOperators) -> None:
    """Dense operators in a binary container: one JSON header line, then raw complex128."""
    names, arrays = [], []
    for name, m in ops.items():
        names.append(name)
        arrays.append(np.ascontiguousarray(m.toarray(), dtype=np.complex128))
    header = {"format": "bhgates-dense-1", "dtype": "complex128", "dim": ops.basis.dim,
              "order": "C", "operators": names,
              "basis": "lexicographic (j, d, z, a), d in 0<1<2"}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode())
        for arr in arrays:
            fh.write(arr.tobytes())


def load_operators(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        dim = header["dim"]
        out = {}
        for name in header["operators"]:
            buf = fh.read(dim * dim * 16)
            out[name] = np.frombuffer(buf, dtype=np.complex128).reshape(dim, dim).copy()
    return out
