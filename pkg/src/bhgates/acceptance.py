"""The fourteen acceptance criteria as runnable checks.

Each criterion is a function returning a VerificationReport; ``run`` times it
and records the runtime against its budget. The CLI ``verify-all`` command
and the acceptance test both go through ``CRITERIA``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import circuits, compiler, gadgets, manybody, mge, spectra, squash
from . import gategraph as gg
from .report import VerificationReport


# --- 1-3: g0 and g1 -----------------------------------------------------------

def check_g0(seed=None) -> VerificationReport:
    rep = VerificationReport("g0 spectrum")
    w = spectra.smallest_eigs(gg.build_g0(), 5, seed=seed).eigenvalues
    rep.at_most("max |lambda_1..4 - e1|", 1e-9, float(np.abs(w[:4] - gg.E1).max()), "PAPER")
    rep.within("gap lambda_5 - lambda_1", 0.7785, 0.7786, float(w[4] - w[0]))
    rep.info["e1"] = gg.E1
    rep.info["lowest"] = w.tolist()
    return rep


def check_g1(seed=None) -> VerificationReport:
    rep = VerificationReport("g1 spectrum")
    w = spectra.smallest_eigs(gg.build_g1(), 6, seed=seed).eigenvalues
    rep.equal("degeneracy at e1", 2, int(np.sum(np.abs(w - gg.E1) <= 1e-9)))
    rep.within("gap above e1", 0.0832, 0.0833, float(w[2] - gg.E1))
    rep.info["lowest"] = w.tolist()
    return rep


def check_two_particle(seed=None) -> VerificationReport:
    rep = VerificationReport("two-particle constants")
    bounds = {"g0": (gg.build_g0, 0.0035, 0.0036), "g1": (gg.build_g1, 0.0185, 0.0186)}
    for name, (build, lo, hi) in bounds.items():
        op = manybody.build_bh(build(), 2, mu=gg.E1)
        rep.equal(f"D_2({name})", 8256, op.dim, "TRIVIAL")
        spec = spectra.smallest_eigs(op.matrix, 1, seed=seed, dense_max=0)
        rep.within(f"lambda_2^1({name})", lo, hi, float(spec.eigenvalues[0]))
        rep.at_most(f"Lanczos residual ({name})", 1e-9, float(spec.residuals[0]), "TRIVIAL")
    return rep


# --- 4-6: gadgets ---------------------------------------------------------------

def check_move_together(seed=None) -> VerificationReport:
    return gadgets.verify_gadget("w", full_check=True)


def check_two_qubit(seed=None) -> VerificationReport:
    rep = VerificationReport("two-qubit gadgets")
    for kind in ("cnot12", "cnot21", "cnoth", "cnotht"):
        rep.extend(gadgets.verify_gadget(kind), f"{kind}: ")
    return rep


def check_boundary(seed=None) -> VerificationReport:
    return gadgets.verify_gadget("bnd")


# --- 7-10: compiler ---------------------------------------------------------------

def check_compiler_oracle(seed=None) -> VerificationReport:
    return compiler.verify_compiler(compiler.step_by_step_circuit(), seed=seed)


def check_spectral_chain(seed=None) -> VerificationReport:
    c = compiler.step_by_step_circuit()
    rep = VerificationReport(f"spectral chain n={c.n} M={c.M}")
    ops = compiler.formula_operators(c)
    chain = compiler.spectral_chain(ops)
    rep.close("gamma(H1|S1)", 1 / 64, chain.gamma_h1, 1e-10)
    lap = compiler.path_laplacian(c.M) / 128
    worst = max(float(np.abs(compiler.h2_on_c_basis(ops, z, a) - lap).max())
                for z in range(2 ** c.n) for a in range(2 ** c.n))
    rep.at_most("H2 on C-basis = path Laplacian/128", 1e-10, worst, "PAPER")
    w = np.linalg.eigvalsh(compiler.h2_on_c_basis(ops))
    rep.close("gap of H2 on C-basis", 2 * (1 - np.cos(np.pi / c.M)) / 128, float(w[1]), 1e-10)
    rep.equal("dim S2 = 2^(2n) M", 2 ** (2 * c.n) * c.M, chain.S2.shape[1])
    rep.equal("dim S3 = 2^(2n)", 2 ** (2 * c.n), chain.S3.shape[1])
    rep.equal("dim S4 = 2^n 2^n_in", 2 ** c.n * 2 ** c.n_in, chain.S4.shape[1])
    rep.at_most("chain containment", 1e-9, chain.containment, "TRIVIAL")
    rep.at_most("(z, a) block leakage", 1e-12, chain.block_leak, "TRIVIAL")
    return rep


def accepting_circuit() -> circuits.Circuit:
    return circuits.Circuit(2, 2, [("cnot12", 2)])


def check_completeness(seed=None) -> VerificationReport:
    rep = VerificationReport("completeness")
    c = accepting_circuit()
    ops = compiler.formula_operators(c)
    rep.close("restricted ground energy (CNOT12, n=2)", 0.0,
              compiler.restricted_ground_energy(ops, seed), 1e-10)
    wit = np.zeros(4)
    wit[0b01] = 1
    rep.close("completeness energy of |01>", 0.0, compiler.completeness_energy(ops, wit), 1e-10)
    rng = np.random.default_rng(spectra.default_seed() if seed is None else seed)
    for circ in (c, compiler.step_by_step_circuit()):
        ops = ops if circ is c else compiler.formula_operators(circ)
        worst = 0.0
        for _ in range(20):
            w = rng.standard_normal(2 ** circ.n_in) + 1j * rng.standard_normal(2 ** circ.n_in)
            w /= np.linalg.norm(w)
            a1 = int(rng.integers(2))
            worst = max(worst, abs(compiler.completeness_energy(ops, w, a1)
                                   - compiler.completeness_formula(circ, w, a1)))
        rep.at_most(f"closed form on 20 random witnesses (n={circ.n}, M={circ.M})",
                    1e-12, worst, "PAPER")
    return rep


def rejecting_circuit() -> circuits.Circuit:
    """Four qubits, one input; qubit 2 only ever sees CNOTs from a qubit stuck at 0."""
    return circuits.Circuit(4, 1, [("cnot12", s) for s in (2, 3, 2, 4, 3, 4)])


def check_soundness(seed=None) -> VerificationReport:
    c = rejecting_circuit()
    rep = VerificationReport(f"soundness surrogate n={c.n} M={c.M}")
    rep.close("max acceptance probability", 0.0, circuits.max_acceptance(c), 1e-12, "DERIVED")
    ops = compiler.formula_operators(c)
    chain = compiler.spectral_chain(ops)
    rep.equal("dim S4", 2 ** c.n * 2 ** c.n_in, chain.S4.shape[1])
    g = compiler.gamma_out_s4(ops, chain)
    rep.at_least("gamma(H_out|S4) >= (2/3)/(256 M)", (2 / 3) / (256 * c.M), g)
    rep.info["gamma(H_out|S4)"] = g
    rep.extend(npl_suite(200, seed), "projection bound: ")
    return rep


# --- 11-12 ------------------------------------------------------------------------

def check_squash(seed=None) -> VerificationReport:
    g, occ = squash.example_instance()
    rep = squash.verify_squash(g, occ, seed=seed)
    res = squash.build_g_square(g, occ)
    rep.equal("|L_sq| = 47 for the three-element example", 47, res.layout.element_count())
    R = res.layout.R
    rep.close("transfer factor 1/(3R+2)", 1 / (3 * R + 2), res.layout.block_norm() ** 2, 1e-12)
    return rep


def check_mge(seed=None) -> VerificationReport:
    rep = VerificationReport("minimum graph eigenvalue")
    rep.extend(mge.verify_mge(mge.h_instance(), seed, expect="yes"), "H gate: ")
    rep.extend(mge.verify_mge(mge.rejecting_instance(), seed, expect="no"), "rejecting: ")
    return rep


# --- 13-14 ------------------------------------------------------------------------

def small_graphs(kmax: int = 6):
    """Adjacency matrices of every simple graph on 1..kmax vertices, up to isomorphism."""
    import networkx as nx
    for G in nx.graph_atlas_g():
        K = G.number_of_nodes()
        if 1 <= K <= kmax:
            yield nx.to_numpy_array(G, nodelist=range(K))


def check_xy(seed=None) -> VerificationReport:
    rep = VerificationReport("XY reduction")
    worst, bad, mismatched, promise, count, graphs = 0.0, 0, 0, 0, 0, 0
    for a in small_graphs(6):
        graphs += 1
        K = a.shape[0]
        for N in range(1, min(3, K) + 1):
            cmp = manybody.xy_compare(a, N)
            count += 1
            worst = max(worst, cmp.hardcore_error)
            bad += not cmp.consistent
            for T in (4 * K, 8 * K, 64 * K):
                bh, xy = cmp.decisions(1 / T)
                if bh == "promise violated":
                    promise += 1
                elif bh != xy:
                    mismatched += 1
    rep.equal("graphs with K <= 6", 208, graphs, "TRIVIAL")
    rep.at_most("hard-core H_G^N vs O_G entrywise", 1e-12, worst, "PAPER")
    rep.equal("inequality chain violations", 0, bad)
    rep.equal("yes/no decisions disagreeing", 0, mismatched)
    rep.info["(G, N) pairs"] = count
    rep.info["outside Bose-Hubbard promise"] = promise
    return rep


def _random_psd(rng, d: int, rank: int) -> np.ndarray:
    x = rng.standard_normal((d, rank))
    return x @ x.T


def npl_suite(pairs: int = 200, seed=None) -> VerificationReport:
    """gamma(H_A + H_B) >= cd/(c + d + |H_B|) on random PSD pairs."""
    rep = VerificationReport("nullspace projection bound")
    rng = np.random.default_rng(spectra.default_seed() if seed is None else seed)
    worst, tested, drawn = np.inf, 0, 0
    while tested < pairs and drawn < 10 * pairs:
        drawn += 1
        d = int(rng.integers(2, 13))
        ha = _random_psd(rng, d, int(rng.integers(1, d)))
        hb = _random_psd(rng, d, int(rng.integers(1, d + 1)))
        null = spectra.dense_nullspace(ha, 1e-9).vectors
        if null.shape[1] == 0:
            continue
        hbs = null.T @ hb @ null
        if np.linalg.eigvalsh(hbs)[-1] <= 1e-9:
            continue
        c = spectra.dense_gamma(hbs, 1e-9)
        bound = spectra.npl_bound(c, spectra.dense_gamma(ha, 1e-9), np.linalg.norm(hb, 2))
        worst = min(worst, spectra.dense_gamma(ha + hb, 1e-9) - bound)
        tested += 1
    rep.equal("pairs tested", pairs, tested, "TRIVIAL")
    rep.at_least("min(gamma - bound)", -1e-10, float(worst))
    return rep


def random_graph(rng, kmin: int = 2, kmax: int = 6, loops: bool = True) -> np.ndarray:
    K = int(rng.integers(kmin, kmax + 1))
    a = np.triu((rng.random((K, K)) < 0.5).astype(float), 1)
    a = a + a.T
    if loops:
        a += np.diag((rng.random(K) < 0.3).astype(float))
    return a


def monotonicity_suite(graphs: int = 50, seed=None) -> VerificationReport:
    rep = VerificationReport("lambda_N^1 nondecreasing in N")
    rng = np.random.default_rng(spectra.default_seed() if seed is None else seed)
    worst = np.inf
    for _ in range(graphs):
        a = random_graph(rng)
        m = manybody.graph_mu(a)
        lam = [float(np.linalg.eigvalsh(manybody.build_bh(a, N, mu=m).matrix.dense())[0])
               for N in range(1, 5)]
        worst = min(worst, float(np.min(np.diff(lam))))
    rep.at_least("min(lambda_(N+1)^1 - lambda_N^1) over N = 1..3", -1e-10, worst)
    return rep


def union_suite(unions: int = 20, seed=None) -> VerificationReport:
    rep = VerificationReport("disjoint-union spectrum")
    rng = np.random.default_rng(spectra.default_seed() if seed is None else seed)
    worst = 0.0
    for _ in range(unions):
        mats = [random_graph(rng, 1, 4) for _ in range(int(rng.integers(2, 4)))]
        N = int(rng.integers(1, 4))
        union = manybody.disjoint_union(mats)
        m = manybody.graph_mu(union)
        direct = np.linalg.eigvalsh(manybody.build_bh(union, N, mu=m).matrix.dense())
        parts = [(sp.csr_matrix(x), range(N + 1)) for x in mats]
        composed = manybody.component_spectrum(parts, N, mu=m)
        if len(direct) != len(composed):
            worst = np.inf
            break
        worst = max(worst, float(np.abs(direct - composed).max()))
    rep.at_most("max eigenvalue difference", 1e-10, worst, "DERIVED")
    return rep


def check_properties(seed=None) -> VerificationReport:
    rep = VerificationReport("property suites")
    rep.extend(npl_suite(200, seed), "projection bound: ")
    rep.extend(monotonicity_suite(50, seed), "monotone: ")
    rep.extend(union_suite(20, seed), "unions: ")
    return rep


# --- registry -----------------------------------------------------------------------

@dataclass(frozen=True)
class Criterion:
    number: int
    title: str
    budget: float
    check: Callable[..., VerificationReport]

    def run(self, seed=None) -> VerificationReport:
        start = time.perf_counter()
        rep = self.check(seed=seed)
        elapsed = time.perf_counter() - start
        rep.title = f"{self.number}. {self.title}"
        rep.at_most("runtime seconds", self.budget, elapsed, "DERIVED")
        return rep


CRITERIA = (
    Criterion(1, "g0 spectrum", 1.0, check_g0),
    Criterion(2, "g1 spectrum", 1.0, check_g1),
    Criterion(3, "two-particle constants of g0 and g1", 30.0, check_two_particle),
    Criterion(4, "move-together gadget", 180.0, check_move_together),
    Criterion(5, "two-qubit gadgets", 120.0, check_two_qubit),
    Criterion(6, "boundary gadget", 30.0, check_boundary),
    Criterion(7, "compiler matrix-element oracle", 120.0, check_compiler_oracle),
    Criterion(8, "spectral chain on S1", 60.0, check_spectral_chain),
    Criterion(9, "completeness", 30.0, check_completeness),
    Criterion(10, "soundness surrogate", 120.0, check_soundness),
    Criterion(11, "occupancy-constraint squash", 180.0, check_squash),
    Criterion(12, "minimum graph eigenvalue", 60.0, check_mge),
    Criterion(13, "XY reduction", 60.0, check_xy),
    Criterion(14, "property suites", 120.0, check_properties),
)


def run_all(seed=None, only=None) -> list[VerificationReport]:
    return [c.run(seed) for c in CRITERIA if only is None or c.number in only]
