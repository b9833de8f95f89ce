"""Minimum Graph Eigenvalue instances from verification circuits.

A circuit over {H, HT, (HT)^dagger, (H x 1)CNOT} is run forward and then
backward on a 2M-step periodic clock. Every gate entry of -sqrt(2) W is a
power of omega = exp(i pi/4), which becomes the matching power of the
8-cycle shift S on an ancilla register. The result A_x is a symmetric
integer matrix on comp (x) clock (x) ancilla whose smallest eigenvalue
separates accepting from rejecting circuits.

Vertex order: index = (x * 2M + (t - 1)) * 8 + j for computational basis
state x (qubit 1 most significant), clock t in 1..2M and ancilla j in 0..7.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import gategraph as gg
from . import spectra
from .gadgets import CNOT12
from .report import VerificationReport

GATES = {
    "H": gg.H_GATE,
    "HT": gg.HT_GATE,
    "HTDG": gg.HT_GATE.conj().T,
    "HCNOT": np.kron(gg.H_GATE, np.eye(2)) @ CNOT12,
}
ARITY = {"H": 1, "HT": 1, "HTDG": 1, "HCNOT": 2}
PENALTY_POWERS = (3, 4, 5)
DENSE_LIMIT = 4096


class MgeError(ValueError):
    pass


@dataclass(frozen=True)
class MgeGate:
    name: str
    qubits: tuple[int, ...]

    def matrix(self) -> np.ndarray:
        return GATES[self.name]


@dataclass
class MgeCircuit:
    n: int
    n_in: int
    gates: list[MgeGate]
    output: int = 1

    def __post_init__(self):
        self.gates = [g if isinstance(g, MgeGate) else MgeGate(g[0].upper(), tuple(g[1:]))
                      for g in self.gates]
        if self.n < 1:
            raise MgeError("need at least one qubit")
        if not 0 <= self.n_in <= self.n:
            raise MgeError(f"input size {self.n_in} outside 0..{self.n}")
        if not 1 <= self.output <= self.n:
            raise MgeError(f"output qubit {self.output} outside 1..{self.n}")
        if not self.gates:
            raise MgeError("circuit has no gates")
        for k, g in enumerate(self.gates, 1):
            if g.name not in GATES:
                raise MgeError(f"gate {k}: unsupported gate {g.name!r}")
            if len(g.qubits) != ARITY[g.name] or len(set(g.qubits)) != len(g.qubits):
                raise MgeError(f"gate {k}: {g.name} needs {ARITY[g.name]} distinct qubits")
            if any(not 1 <= q <= self.n for q in g.qubits):
                raise MgeError(f"gate {k}: qubit outside 1..{self.n}")

    @property
    def M(self) -> int:
        return len(self.gates)

    @classmethod
    def from_text(cls, text: str) -> "MgeCircuit":
        lines = [ln.split("#")[0].split() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln]
        if not lines or lines[0][0] != "qubits":
            raise MgeError("header must read 'qubits n input nIn [output k]'")
        head = lines[0]
        kv = dict(zip(head[0::2], head[1::2]))
        try:
            n, n_in = int(kv["qubits"]), int(kv["input"])
        except KeyError as exc:
            raise MgeError(f"header is missing {exc}") from exc
        gates = [(ln[0].upper(), *map(int, ln[1:])) for ln in lines[1:]]
        return cls(n, n_in, gates, int(kv.get("output", 1)))

    def to_text(self) -> str:
        out = [f"qubits {self.n} input {self.n_in} output {self.output}"]
        out += [" ".join([g.name, *map(str, g.qubits)]) for g in self.gates]
        return "\n".join(out) + "\n"

    @classmethod
    def load(cls, path) -> "MgeCircuit":
        with open(path) as fh:
            return cls.from_text(fh.read())


def clock_gates(c: MgeCircuit) -> list[MgeGate | tuple[MgeGate, str]]:
    """W_1..W_2M: the circuit followed by its inverse."""
    return list(c.gates) + [(g, "dagger") for g in reversed(c.gates)]


def _w_matrix(w) -> tuple[np.ndarray, tuple[int, ...]]:
    if isinstance(w, tuple):
        g, _ = w
        return g.matrix().conj().T, g.qubits
    return w.matrix(), w.qubits


@dataclass
class MgeInstance:
    circuit: MgeCircuit
    a: float
    eps: float

    @property
    def n(self) -> int:
        return self.circuit.n

    @property
    def M(self) -> int:
        return self.circuit.M

    @property
    def T(self) -> int:
        return 2 * self.circuit.M

    @property
    def dim(self) -> int:
        return 2 ** self.n * self.T * 8

    def index(self, x: int, t: int, j: int) -> int:
        return (x * self.T + (t - 1)) * 8 + j

    def unindex(self, r: int) -> tuple[int, int, int]:
        if not 0 <= r < self.dim:
            raise IndexError(f"row {r} outside 0..{self.dim - 1}")
        xt, j = divmod(r, 8)
        x, t = divmod(xt, self.T)
        return x, t + 1, j

    def manifest(self) -> dict:
        c = self.circuit
        return {"n": c.n, "n_in": c.n_in, "M": c.M, "output": c.output, "dim": self.dim,
                "a": self.a, "eps": self.eps}

    @cached_property
    def blocks(self) -> list[tuple[np.ndarray, tuple[int, ...]]]:
        """B(W_t) for t = 1..2M with the qubits it acts on."""
        out = []
        for w in clock_gates(self.circuit):
            u, qs = _w_matrix(w)
            out.append((gg.substitute(u), qs))
        return out


def default_thresholds(c: MgeCircuit) -> tuple[float, float]:
    eps = 1 / (240 * c.M ** 4 * c.n)
    return float(gg.E1 + eps), eps


def make_instance(c: MgeCircuit, a: float | None = None, eps: float | None = None) -> MgeInstance:
    a0, e0 = default_thresholds(c)
    return MgeInstance(c, a0 if a is None else a, e0 if eps is None else eps)


# --- materialized matrix ----------------------------------------------------------

def _embed(b: np.ndarray, qubits: tuple[int, ...], n: int) -> sp.csr_matrix:
    """B acting on (qubits (x) ancilla) as an operator on (all qubits (x) ancilla)."""
    k = len(qubits)
    rows, cols, vals = [], [], []
    bb = sp.coo_matrix(b)
    for x in range(2 ** n):
        bits = [(x >> (n - q)) & 1 for q in range(1, n + 1)]
        loc = 0
        for q in qubits:
            loc = 2 * loc + bits[q - 1]
        for r_, c_, v in zip(bb.row, bb.col, bb.data):
            xl, jr = divmod(r_, 8)
            yl, jc = divmod(c_, 8)
            if yl != loc:
                continue
            nb = list(bits)
            for p, q in enumerate(qubits):
                nb[q - 1] = (xl >> (k - 1 - p)) & 1
            x2 = int("".join(map(str, nb)), 2)
            rows.append(x2 * 8 + jr)
            cols.append(x * 8 + jc)
            vals.append(v)
    return sp.csr_matrix((vals, (rows, cols)), shape=(2 ** n * 8, 2 ** n * 8))


@dataclass
class AxParts:
    prop: sp.csr_matrix
    penalty: sp.csr_matrix
    input: sp.csr_matrix
    output: sp.csr_matrix

    @property
    def total(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.prop + self.penalty + self.input + self.output)


def build_ax_parts(inst: MgeInstance) -> AxParts:
    c, T, n = inst.circuit, inst.T, inst.n
    dimc = 2 ** n

    def lift(op_ca: sp.csr_matrix, clock: sp.spmatrix) -> sp.csr_matrix:
        # op acts on comp (x) anc; place the clock factor in the middle
        full = sp.kron(op_ca, clock, format="coo")
        # kron index = (x*8 + j) * T + (t-1); map to (x*T + t-1)*8 + j
        xj, t = np.divmod(full.row, T)
        x, j = np.divmod(xj, 8)
        r = (x * T + t) * 8 + j
        xj, t = np.divmod(full.col, T)
        x, j = np.divmod(xj, 8)
        cc = (x * T + t) * 8 + j
        return sp.csr_matrix((full.data, (r, cc)), shape=(inst.dim, inst.dim))

    prop = sp.csr_matrix((inst.dim, inst.dim))
    for t, (b, qs) in enumerate(inst.blocks, 1):
        B = _embed(b, qs, n)
        fwd = sp.coo_matrix(([1.0], ([t % T], [t - 1])), shape=(T, T))   # |t+1><t|
        prop = prop + lift(B, fwd) + lift(B.T.tocsr(), fwd.T)
    pen = sum(np.linalg.matrix_power(gg.shift_matrix(), k) for k in PENALTY_POWERS)
    penalty = sp.csr_matrix(sp.kron(sp.identity(dimc * T), pen))
    diag_in = np.zeros(inst.dim)
    diag_out = np.zeros(inst.dim)
    for x in range(dimc):
        bits = [(x >> (n - q)) & 1 for q in range(1, n + 1)]
        if any(bits[c.n_in:]):
            diag_in[inst.index(x, 1, 0):inst.index(x, 1, 0) + 8] = 1
        if bits[c.output - 1] == 0:
            s = inst.index(x, c.M + 1, 0)
            diag_out[s:s + 8] = 1
    return AxParts(sp.csr_matrix(prop), penalty, sp.csr_matrix(sp.diags(diag_in)),
                   sp.csr_matrix(sp.diags(diag_out)))


def build_ax(c: MgeCircuit, a: float | None = None, eps: float | None = None):
    inst = make_instance(c, a, eps)
    return spectra.SparseSymMatrix(build_ax_parts(inst).total), inst


# --- row oracle ---------------------------------------------------------------------

def _local(x: int, qubits, n: int) -> int:
    v = 0
    for q in qubits:
        v = 2 * v + ((x >> (n - q)) & 1)
    return v


def _replace(x: int, qubits, val: int, n: int) -> int:
    k = len(qubits)
    for p, q in enumerate(qubits):
        bit = (val >> (k - 1 - p)) & 1
        shift = n - q
        x = (x & ~(1 << shift)) | (bit << shift)
    return x


def row_oracle(inst: MgeInstance, r: int) -> list[int]:
    """Sorted columns of the nonzero entries in row r, from the local rules alone."""
    c, n, T = inst.circuit, inst.n, inst.T
    x, t, j = inst.unindex(r)
    cols = set()
    # B(W_{t-1}) |t><t-1| : row (x,t,j) <- column (y,t-1,j')
    tp = (t - 2) % T + 1
    b, qs = inst.blocks[tp - 1]
    row = _local(x, qs, n) * 8 + j
    for cidx in np.nonzero(b[row])[0]:
        yl, jc = divmod(int(cidx), 8)
        cols.add(inst.index(_replace(x, qs, yl, n), tp, jc))
    # B(W_t)^T |t><t+1| : row (x,t,j) <- column (y,t+1,j') with B[(y,j'),(x,j)] != 0
    tn = t % T + 1
    b, qs = inst.blocks[t - 1]
    col = _local(x, qs, n) * 8 + j
    for ridx in np.nonzero(b[:, col])[0]:
        yl, jr = divmod(int(ridx), 8)
        cols.add(inst.index(_replace(x, qs, yl, n), tn, jr))
    for k in PENALTY_POWERS:
        cols.add(inst.index(x, t, (j - k) % 8))
    if t == 1 and any((x >> (n - q)) & 1 for q in range(c.n_in + 1, n + 1)):
        cols.add(r)
    if t == c.M + 1 and not (x >> (n - c.output)) & 1:
        cols.add(r)
    return sorted(cols)


def serve_rows(inst: MgeInstance, lines) -> list[str]:
    """Answer 'ROW r' requests with 'r: c1 c2 ...'."""
    out = []
    for ln in lines:
        parts = ln.split()
        if not parts:
            continue
        if len(parts) != 2 or parts[0].upper() != "ROW":
            raise MgeError(f"bad request {ln.strip()!r}; expected 'ROW r'")
        r = int(parts[1])
        out.append(f"{r}: " + " ".join(map(str, row_oracle(inst, r))))
    return out


# --- deciding ----------------------------------------------------------------------

@dataclass
class Decision:
    answer: str            # "yes", "no" or "promise violated"
    energy: float
    a: float
    eps: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


def smallest_eigenvalue(m: sp.csr_matrix, seed: int | None = None) -> float:
    if m.shape[0] <= DENSE_LIMIT:
        return float(np.linalg.eigvalsh(m.toarray())[0])
    return float(spectra.smallest_eigs(m, 1, seed=seed, dense_max=0, tol=1e-8).eigenvalues[0])


def decide_mge(inst: MgeInstance, seed: int | None = None) -> Decision:
    if inst.dim > 10 ** 6:
        raise MgeError(f"dimension {inst.dim} beyond desk scale")
    e = smallest_eigenvalue(build_ax_parts(inst).total, seed)
    if e <= inst.a:
        ans = "yes"
    elif e >= inst.a + inst.eps:
        ans = "no"
    else:
        ans = "promise violated"
    return Decision(ans, e, inst.a, inst.eps)


# --- checks ------------------------------------------------------------------------

def h_x(inst: MgeInstance) -> np.ndarray:
    """The complex clock Hamiltonian on comp (x) clock."""
    n, T = inst.n, inst.T
    dimc = 2 ** n
    h = np.zeros((dimc * T, dimc * T), dtype=complex)
    for t, w in enumerate(clock_gates(inst.circuit), 1):
        u, qs = _w_matrix(w)
        full = np.zeros((dimc, dimc), dtype=complex)
        for x in range(dimc):
            loc = _local(x, qs, n)
            for y in range(u.shape[0]):
                full[_replace(x, qs, y, n), x] += u[y, loc]
        tn = t % T
        idx_t = np.arange(dimc) * T + (t - 1)
        idx_n = np.arange(dimc) * T + tn
        h[np.ix_(idx_n, idx_t)] += -math.sqrt(2) * full
        h[np.ix_(idx_t, idx_n)] += -math.sqrt(2) * full.conj().T
    return h


def omega_sector(inst: MgeInstance, m: sp.csr_matrix) -> np.ndarray:
    w = gg.ancilla_state(0)
    V = sp.kron(sp.identity(2 ** inst.n * inst.T), w.reshape(8, 1))
    return (V.conj().T @ (m @ V)).toarray()


def verify_mge(c: MgeCircuit | None = None, seed: int | None = None,
               expect: str | None = None) -> VerificationReport:
    c = h_instance() if c is None else c
    inst = make_instance(c)
    rep = VerificationReport(f"mge n={c.n} M={c.M}")
    parts = build_ax_parts(inst)
    A = parts.total
    rep.equal("dim = 2^n * 2M * 8", 2 ** c.n * 2 * c.M * 8, A.shape[0])
    rep.equal("A_x symmetric", 0.0, float(abs(A - A.T).max()) if A.nnz else 0.0, "TRIVIAL")
    ints = np.all(A.data == np.round(A.data))
    rep.equal("A_x integer entries", True, bool(ints))
    rep.equal("A_x is 0-1", c.M >= 2, bool(set(np.unique(A.data)) <= {1.0}),
              note="" if c.M >= 2 else "two-step clock doubles each hop")
    rep.at_most("H_prop row weight <= 4", 4, float(np.abs(parts.prop).sum(axis=1).max()), "PAPER")
    rng = np.random.default_rng(spectra.default_seed() if seed is None else seed)
    v = rng.standard_normal(inst.dim)
    comm = parts.prop @ (parts.penalty @ v) - parts.penalty @ (parts.prop @ v)
    rep.at_most("[H_prop, H_penalty] = 0", 1e-12, float(np.abs(comm).max()), "PAPER")
    hx = h_x(inst)
    sect = omega_sector(inst, parts.prop)
    rep.at_most("omega sector of H_prop equals H_x", 1e-12, float(np.abs(sect - hx).max()), "PAPER")
    e5 = np.linalg.eigvalsh(hx)[:5]
    s5 = np.linalg.eigvalsh(0.5 * (sect + sect.conj().T))[:5]
    rep.at_most("smallest 5 eigenvalues match", 1e-10, float(np.abs(e5 - s5).max()), "PAPER")

    # row oracle against the materialized matrix
    if inst.dim <= 10 ** 5:
        mism, asym, maxdeg = 0, 0, 0
        rows = [row_oracle(inst, r) for r in range(inst.dim)]
        for r, cols in enumerate(rows):
            if cols != sorted(A.indices[A.indptr[r]:A.indptr[r + 1]].tolist()):
                mism += 1
            maxdeg = max(maxdeg, len(cols))
        for r, cols in enumerate(rows):
            asym += sum(r not in rows[cc] for cc in cols)
        rep.equal("row oracle matches materialized rows", 0, mism)
        rep.equal("row oracle symmetric", 0, asym, "TRIVIAL")
        rep.at_most("row degree <= 4+3+1+1", 9, maxdeg)

    # ground energy of H_prop + H_penalty and the NPL intermediate bound
    base = sp.csr_matrix(parts.prop + parts.penalty)
    w = np.linalg.eigvalsh(base.toarray()) if inst.dim <= DENSE_LIMIT else None
    if w is not None:
        rep.close("min(H_prop + H_penalty) = e1", gg.E1, float(w[0]), 1e-10)
        rep.equal("ground degeneracy 2 * 2^n", 2 * 2 ** c.n, int(np.sum(np.abs(w - gg.E1) < 1e-9)))
        mid = np.linalg.eigvalsh((base + parts.input).toarray()) - gg.E1
        gap = float(mid[mid > 1e-9][0])
        rep.at_least("gamma(H_prop+H_penalty+H_input-e1) >= 1/(20 M^3 n)", 1 / (20 * c.M ** 3 * c.n), gap)
        rep.info["gamma(H_prop+H_penalty+H_input-e1)"] = gap
    d = decide_mge(inst, seed)
    rep.info["decision"] = d.to_json()
    if expect == "yes":
        rep.close("yes instance: min eigenvalue = e1", gg.E1, d.energy, 1e-10, "DERIVED")
        rep.equal("decision", "yes", d.answer, "DERIVED")
    elif expect == "no":
        rep.at_least("no instance: min eigenvalue >= e1 + 1/(120 M^4 n)",
                     gg.E1 + 1 / (120 * c.M ** 4 * c.n), d.energy)
        rep.equal("decision", "no", d.answer, "DERIVED")
    return rep


def h_instance() -> MgeCircuit:
    """One qubit, one H gate, input size one: accepted by the witness H|1>."""
    return MgeCircuit(1, 1, [("H", 1)], output=1)


def rejecting_instance() -> MgeCircuit:
    """Two qubits, no witness; the output qubit is never touched and stays |0>."""
    return MgeCircuit(2, 0, [("H", 1), ("HT", 1), ("HTDG", 1), ("H", 1)], output=2)


def witness_energy(inst: MgeInstance, witness: np.ndarray) -> float:
    """<wit|A_x|wit> for the forward-backward history of witness (x) |0...0>."""
    c = inst.circuit
    n = c.n
    w = np.asarray(witness, dtype=complex).reshape(-1)
    anc = np.zeros(2 ** (n - c.n_in))
    anc[0] = 1
    state = np.kron(w, anc)
    T = inst.T
    hist = np.zeros((2 ** n, T), dtype=complex)
    for t, g in enumerate(clock_gates(c), 1):
        hist[:, t - 1] = state
        u, qs = _w_matrix(g)
        new = np.zeros_like(state)
        for x in range(2 ** n):
            loc = _local(x, qs, n)
            for y in range(u.shape[0]):
                new[_replace(x, qs, y, n)] += u[y, loc] * state[x]
        state = new
    vec = np.kron(hist.reshape(-1) / math.sqrt(T), gg.ancilla_state(0))
    A = build_ax_parts(inst).total
    return float(np.real(np.vdot(vec, A @ vec)))


def save_manifest(path, inst: MgeInstance) -> None:
    with open(path, "w") as fh:
        json.dump(inst.manifest(), fh, indent=1)
