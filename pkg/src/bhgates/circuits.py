"""Circuits over the mediated two-qubit gate set, normalization and simulation.

A mediated circuit acts on qubits 1..n. Every gate touches qubit 1 and a
second qubit s(j) in 2..n, consecutive gates use different s(j), and qubit 2
is the output. Basis states are ordered with qubit 1 as the most significant
bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .gadgets import CNOT12, CNOT21, gate_matrix

KINDS = ("cnot12", "cnot21", "cnoth", "cnotht")
TEXT_NAMES = {"cnot12": "CNOT", "cnot21": "CNOT", "cnoth": "CNOTH", "cnotht": "CNOTHT"}


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    kind: str
    s: int

    def matrix(self, conj: bool = False) -> np.ndarray:
        u = gate_matrix(self.kind)
        return u.conj() if conj else u

    def text(self) -> str:
        name = TEXT_NAMES[self.kind]
        return f"{name} {self.s} 1" if self.kind == "cnot21" else f"{name} 1 {self.s}"


@dataclass
class Circuit:
    n: int
    n_in: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        self.gates = [g if isinstance(g, Gate) else Gate(*g) for g in self.gates]
        self.validate()

    def validate(self) -> None:
        if self.n < 2:
            raise CircuitError("need at least two qubits")
        if not 0 <= self.n_in <= self.n:
            raise CircuitError(f"input size {self.n_in} outside 0..{self.n}")
        if not self.gates:
            raise CircuitError("circuit has no gates")
        for j, g in enumerate(self.gates, 1):
            if g.kind not in KINDS:
                raise CircuitError(f"gate {j}: unknown kind {g.kind!r}")
            if not 2 <= g.s <= self.n:
                raise CircuitError(f"gate {j}: second qubit {g.s} outside 2..{self.n}")
        for j in range(1, len(self.gates)):
            if self.gates[j].s == self.gates[j - 1].s:
                raise CircuitError(f"gates {j} and {j + 1} share their second qubit")
        missing = set(range(2, self.n + 1)) - {g.s for g in self.gates}
        if missing:
            raise CircuitError(f"qubits {sorted(missing)} are never acted on")

    @property
    def M(self) -> int:
        return len(self.gates)

    def s(self, j: int) -> int:
        """Second qubit of gate j (1-based)."""
        return self.gates[j - 1].s

    def j_max(self) -> int:
        """Last gate acting on the output qubit 2."""
        return max(j for j in range(1, self.M + 1) if self.s(j) == 2)

    def j_min(self, i: int) -> int:
        """First gate acting on qubit i."""
        return min(j for j in range(1, self.M + 1) if self.s(j) == i)

    # text and JSON forms

    def to_text(self) -> str:
        lines = [f"qubits {self.n} input {self.n_in}"] + [g.text() for g in self.gates]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Circuit":
        lines = [ln.split("#")[0].strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln]
        if not lines:
            raise CircuitError("empty circuit file")
        head = lines[0].split()
        if len(head) != 4 or head[0] != "qubits" or head[2] != "input":
            raise CircuitError("header must read 'qubits n input nIn'")
        n, n_in = int(head[1]), int(head[3])
        gates = [parse_gate_line(ln, k) for k, ln in enumerate(lines[1:], 2)]
        return cls(n, n_in, gates)

    def to_json(self) -> dict:
        return {"qubits": self.n, "input": self.n_in,
                "gates": [{"gate": TEXT_NAMES[g.kind],
                           "qubits": [g.s, 1] if g.kind == "cnot21" else [1, g.s]}
                          for g in self.gates]}

    @classmethod
    def from_json(cls, data: dict) -> "Circuit":
        gates = [parse_gate_line(f"{d['gate']} {d['qubits'][0]} {d['qubits'][1]}", k)
                 for k, d in enumerate(data["gates"], 1)]
        return cls(int(data["qubits"]), int(data["input"]), gates)

    @classmethod
    def load(cls, path) -> "Circuit":
        with open(path) as fh:
            text = fh.read()
        if text.lstrip().startswith("{"):
            return cls.from_json(json.loads(text))
        return cls.from_text(text)


def parse_gate_line(line: str, lineno: int = 0) -> Gate:
    parts = line.split()
    if len(parts) != 3:
        raise CircuitError(f"line {lineno}: expected 'NAME a b', got {line!r}")
    name, a, b = parts[0].upper(), int(parts[1]), int(parts[2])
    if name == "CNOT" and a == 1:
        return Gate("cnot12", b)
    if name == "CNOT" and b == 1:
        return Gate("cnot21", a)
    if name == "CNOTH" and a == 1:
        return Gate("cnoth", b)
    if name == "CNOTHT" and a == 1:
        return Gate("cnotht", b)
    raise CircuitError(f"line {lineno}: {line!r} is not a mediated gate")


# --- simulation ---------------------------------------------------------------

def apply_two_qubit(state: np.ndarray, u: np.ndarray, q1: int, q2: int, n: int) -> np.ndarray:
    """Apply a 4x4 gate on qubits (q1, q2), 1-based, q1 as the high-order index."""
    t = state.reshape((2,) * n)
    t = np.tensordot(u.reshape(2, 2, 2, 2), t, axes=([2, 3], [q1 - 1, q2 - 1]))
    t = np.moveaxis(t, [0, 1], [q1 - 1, q2 - 1])
    return t.reshape(-1)


def apply_one_qubit(state: np.ndarray, u: np.ndarray, q: int, n: int) -> np.ndarray:
    t = state.reshape((2,) * n)
    t = np.tensordot(u, t, axes=([1], [q - 1]))
    t = np.moveaxis(t, 0, q - 1)
    return t.reshape(-1)


def padded_input(witness: np.ndarray, n: int, n_in: int) -> np.ndarray:
    witness = np.asarray(witness, dtype=complex).reshape(-1)
    if witness.shape[0] != 2 ** n_in:
        raise CircuitError(f"witness has dimension {witness.shape[0]}, expected {2 ** n_in}")
    anc = np.zeros(2 ** (n - n_in), dtype=complex)
    anc[0] = 1
    return np.kron(witness, anc)


def simulate(c: Circuit, witness: np.ndarray, conj: bool = False) -> np.ndarray:
    if c.n > 20:
        raise CircuitError("dense simulation supports at most 20 qubits")
    state = padded_input(witness, c.n, c.n_in)
    for g in c.gates:
        state = apply_two_qubit(state, g.matrix(conj), 1, g.s, c.n)
    return state


def circuit_unitary(c: Circuit, conj: bool = False) -> np.ndarray:
    dim = 2 ** c.n
    cols = []
    for k in range(dim):
        v = np.zeros(dim, dtype=complex)
        v[k] = 1
        for g in c.gates:
            v = apply_two_qubit(v, g.matrix(conj), 1, g.s, c.n)
        cols.append(v)
    return np.stack(cols, axis=1)


def output_projector_weight(state: np.ndarray, n: int, value: int = 1, qubit: int = 2) -> float:
    t = state.reshape((2,) * n)
    return float(np.sum(np.abs(np.take(t, value, axis=qubit - 1)) ** 2))


def acceptance_probability(c: Circuit, witness: np.ndarray, conj: bool = False) -> float:
    return output_projector_weight(simulate(c, witness, conj), c.n)


def acceptance_operator(c: Circuit, conj: bool = False) -> np.ndarray:
    """Q with AP(w) = <w|Q|w> on the n_in-qubit witness space."""
    u = circuit_unitary(c, conj)
    dim_in = 2 ** c.n_in
    cols = [padded_input(np.eye(dim_in)[k], c.n, c.n_in) for k in range(dim_in)]
    iso = u @ np.stack(cols, axis=1)
    mask = np.array([(k >> (c.n - 2)) & 1 for k in range(2 ** c.n)], dtype=bool)
    out = iso[mask]
    return out.conj().T @ out


def max_acceptance(c: Circuit) -> float:
    return float(np.linalg.eigvalsh(acceptance_operator(c))[-1])


# --- raw circuits and normalization --------------------------------------------

RAW_NAMES = ("CNOT", "H", "HT")


@dataclass
class RawCircuit:
    n: int
    gates: list[tuple] = field(default_factory=list)
    n_in: int | None = None

    def __post_init__(self):
        for g in self.gates:
            name, qs = g[0], g[1:]
            if name not in RAW_NAMES:
                raise CircuitError(f"unknown raw gate {name!r}")
            if len(qs) != (2 if name == "CNOT" else 1):
                raise CircuitError(f"gate {g} has the wrong number of qubits")
            if any(not 1 <= q <= self.n for q in qs):
                raise CircuitError(f"gate {g} acts outside 1..{self.n}")
            if name == "CNOT" and qs[0] == qs[1]:
                raise CircuitError(f"gate {g} uses the same qubit twice")

    def unitary(self) -> np.ndarray:
        from .gategraph import H_GATE, HT_GATE
        dim = 2 ** self.n
        cols = []
        for k in range(dim):
            v = np.zeros(dim, dtype=complex)
            v[k] = 1
            for g in self.gates:
                if g[0] == "CNOT":
                    v = apply_two_qubit(v, CNOT12, g[1], g[2], self.n)
                else:
                    v = apply_one_qubit(v, H_GATE if g[0] == "H" else HT_GATE, g[1], self.n)
            cols.append(v)
        return np.stack(cols, axis=1)


def _swap(k: int) -> list[Gate]:
    return [Gate("cnot12", k), Gate("cnot21", k), Gate("cnot12", k)]


def _rewrite(g: tuple) -> list[Gate]:
    name = g[0]
    if name == "CNOT":
        c, t = g[1], g[2]
        if c == 1:
            return [Gate("cnot12", t)]
        if t == 1:
            return [Gate("cnot21", c)]
        return _swap(c) + [Gate("cnot12", t)] + _swap(c)
    kind = "cnoth" if name == "H" else "cnotht"
    q = g[1]
    # H on qubit 1 equals CNOT_1k applied after CNOT_1k (H (x) 1)
    partner = 2 if q != 2 else 3
    core = [Gate(kind, partner), Gate("cnot12", partner)]
    if q == 1:
        return core
    return _swap(q) + core + _swap(q)


def _pad_pair(n: int, avoid: set[int]) -> tuple[int, int]:
    free = [k for k in range(2, n + 1) if k not in avoid]
    if len(free) < 2:
        raise CircuitError("not enough qubits to pad")
    return free[0], free[1]


def _fix_repeats(gates: list[Gate], n: int) -> list[Gate]:
    out: list[Gate] = []
    for g in gates:
        if out and out[-1].s == g.s:
            a, b = _pad_pair(n, {g.s})
            out += [Gate("cnot12", a), Gate("cnot12", b), Gate("cnot12", a), Gate("cnot12", b)]
        out.append(g)
    return out


def normalize(rc: RawCircuit) -> Circuit:
    """Rewrite a circuit over {CNOT, H, HT} into mediated form with the same unitary."""
    n = rc.n
    if n < 4:
        raise CircuitError("normalization needs n >= 4; write smaller circuits in mediated "
                           "form by hand")
    gates: list[Gate] = []
    for g in rc.gates:
        gates += _rewrite(tuple(g))
    gates = _fix_repeats(gates, n)
    # make sure every qubit 2..n is touched, using identity blocks
    for k in range(2, n + 1):
        if all(g.s != k for g in gates):
            last = gates[-1].s if gates else None
            a = next(q for q in range(2, n + 1) if q not in (k, last))
            gates += [Gate("cnot12", k), Gate("cnot12", a), Gate("cnot12", k), Gate("cnot12", a)]
    n_in = n if rc.n_in is None else rc.n_in
    return Circuit(n, n_in, gates)
