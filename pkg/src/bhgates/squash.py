"""Replace occupancy constraints by graph structure.

Given a gate diagram G on R elements and a simple graph G^occ on those
elements, build a larger gate diagram G^sq whose low-energy multi-particle
states reproduce the constrained states of G. Every element q becomes a chain
q_in, d(q,1), ..., d(q,R), q_out; each d(q,s) hangs four identity elements
e_ij(q,s), shared between q and s when {q,s} is a constraint and capped by a
self-loop otherwise. Two intermediate diagrams are kept for analysis:
G^tri drops the images of G's own edges and loops, and G^dia further drops
every edge, leaving disjoint g0 and g1 blocks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import gategraph as gg
from . import manybody, spectra
from .report import VerificationReport

CHAIN_LINKS = ((0, 7, 3), (1, 5, 1))           # (z, t out of left, t into right)
HANG = {(0, 0): (0, 1), (1, 0): (1, 3), (0, 1): (0, 5), (1, 1): (1, 7)}   # e_ij -> d node


class SquashError(ValueError):
    pass


def occupancy_edges(edges, R: int) -> set[frozenset]:
    out = set()
    for a, b in edges:
        a, b = int(a), int(b)
        if a == b or not (1 <= a <= R and 1 <= b <= R):
            raise SquashError(f"bad occupancy edge ({a}, {b}) for R={R}")
        out.add(frozenset((a, b)))
    return out


@dataclass
class SquashLayout:
    R: int
    occ: set[frozenset]
    ids: dict[tuple, int]                  # element key -> id in G^sq
    source_ids: list[int]                  # q -> id in G (q = 1..R)
    labels: dict[tuple, str]
    nonedge_elements: list[tuple] = field(default_factory=list)

    @property
    def odd(self) -> bool:
        return self.R % 2 == 1

    def partners(self, q: int) -> list[int]:
        return [s for s in range(1, self.R + 1) if self.odd or s != q]

    def alpha(self, q: int, s: int) -> int:
        return int(q > s and frozenset((q, s)) in self.occ)

    def e_key(self, i: int, j: int, q: int, s: int) -> tuple:
        """Canonical key of e_ij(q,s); shared elements are stored under q < s."""
        if q > s and frozenset((q, s)) in self.occ:
            return ("e", j, i, s, q)
        return ("e", i, j, q, s)

    def element_count(self) -> int:
        return len(self.ids)

    def expected_count(self) -> int:
        E, R = len(self.occ), self.R
        return 5 * R * R + 2 * R - 4 * E if self.odd else 5 * R * R - 3 * R - 4 * E

    def block(self, z: int, q: int) -> list[tuple[tuple, int, int]]:
        """Members of the (z, a, q) block as (element key, z of the state, sign)."""
        out = [(("in", q), z, 1)]
        for s in self.partners(q):
            sign = (-1) ** s
            if not self.odd and s > q:
                sign = -sign
            out.append((("d", q, s), z, sign))
            for x in (0, 1):
                out.append((self.e_key(z, x, q, s), self.alpha(q, s), -sign))
        out.append((("out", q), z, 1))
        return out

    def block_norm(self) -> float:
        return 1 / np.sqrt(3 * self.R + 2 if self.odd else 3 * self.R - 1)

    def to_json(self) -> dict:
        return {"R": self.R, "odd": self.odd,
                "occupancy": sorted(sorted(e) for e in self.occ),
                "elements": [{"key": list(k), "id": i, "label": self.labels[k]}
                             for k, i in sorted(self.ids.items(), key=lambda kv: kv[1])]}


@dataclass
class SquashResult:
    square: gg.GateDiagram
    triangle: gg.GateDiagram
    diamond: gg.GateDiagram
    layout: SquashLayout
    image_edges: list[tuple]
    image_loops: list[tuple]


def build_g_square(g: gg.GateDiagram, occ_edges) -> SquashResult:
    R = g.R
    if R < 2:
        raise SquashError("need at least two diagram elements")
    src = g.ids()
    occ = occupancy_edges(occ_edges, R)
    keys: list[tuple] = [("in", q) for q in range(1, R + 1)]
    odd = R % 2 == 1
    keys += [("d", q, s) for q in range(1, R + 1) for s in range(1, R + 1) if odd or q != s]
    nonedge = []
    for q, s in itertools.product(range(1, R + 1), repeat=2):
        if q == s and not odd:
            continue
        shared = frozenset((q, s)) in occ
        if shared and q > s:
            continue
        for i, j in itertools.product((0, 1), repeat=2):
            keys.append(("e", i, j, q, s))
            if not shared:
                nonedge.append(("e", i, j, q, s))
    keys += [("out", q) for q in range(1, R + 1)]
    ids = {k: n + 1 for n, k in enumerate(keys)}
    labels = {k: "1" for k in keys}
    for q in range(1, R + 1):
        labels[("out", q)] = g.labels[src[q - 1]]
    lay = SquashLayout(R, occ, ids, src, labels, nonedge)

    dia = gg.GateDiagram({ids[k]: labels[k] for k in keys})
    for k in nonedge:
        dia.add_loop((ids[k], 1, 1))
    tri = dia.copy()
    for q in range(1, R + 1):
        chain = [("in", q)] + [("d", q, s) for s in lay.partners(q)] + [("out", q)]
        for a, b in zip(chain, chain[1:]):
            for z, t, t2 in CHAIN_LINKS:
                tri.add_edge((ids[a], z, t), (ids[b], z, t2))
        for s in lay.partners(q):
            for (i, j), (z, t) in HANG.items():
                tri.add_edge((ids[("d", q, s)], z, t), (ids[lay.e_key(i, j, q, s)], lay.alpha(q, s), 1))
    pos = {qid: q for q, qid in enumerate(src, 1)}

    def new(node):
        qid, z, t = node
        q = pos[qid]
        return (ids[("in", q)] if gg.is_input_node(t) else ids[("out", q)], z, t)

    sq = tri.copy()
    img_e = [(new(a), new(b)) for a, b in g.edges]
    img_l = [new(n) for n in g.loops]
    for a, b in img_e:
        sq.add_edge(a, b)
    for n in img_l:
        sq.add_loop(n)
    return SquashResult(sq, tri, dia, lay, img_e, img_l)


# --- ground states ---------------------------------------------------------------

def w_state(lay: SquashLayout, key: tuple, z: int, a: int) -> np.ndarray:
    v = np.zeros(128 * len(lay.ids), dtype=complex)
    p = lay.ids[key] - 1
    v[128 * p:128 * (p + 1)] = gg.psi_local(z, a)
    return v


def w_basis(lay: SquashLayout) -> list[tuple[tuple, int, int]]:
    """(element key, z, a) for every ground state of the disjoint blocks."""
    nonedge = set(lay.nonedge_elements)
    out = []
    for k in sorted(lay.ids, key=lay.ids.get):
        for z in ((0,) if k in nonedge else (0, 1)):
            for a in (0, 1):
                out.append((k, z, a))
    return out


def phi_state(lay: SquashLayout, q: int, z: int, a: int) -> np.ndarray:
    v = sum(sign * w_state(lay, key, zz, a) for key, zz, sign in lay.block(z, q))
    return v * lay.block_norm()


def phi_matrix(lay: SquashLayout) -> tuple[np.ndarray, list[tuple]]:
    keys = [(q, z, a) for q in range(1, lay.R + 1) for z in (0, 1) for a in (0, 1)]
    return np.stack([phi_state(lay, *k) for k in keys], axis=1), keys


def source_states(g: gg.GateDiagram, keys) -> np.ndarray:
    R = g.R
    cols = []
    for q, z, a in keys:
        cols.append(gg.psi_state(q - 1, z, a, R))
    return np.stack(cols, axis=1)


def chain_laplacian(lay: SquashLayout) -> np.ndarray:
    """Laplacian of the in-d-out path with two pendant vertices per d, in block order."""
    members = lay.block(0, 1)
    n = len(members)
    L = np.zeros((n, n))

    def link(i, j):
        L[i, j] -= 1
        L[j, i] -= 1
        L[i, i] += 1
        L[j, j] += 1

    spine = [0] + [1 + 3 * k for k in range(len(lay.partners(1)))] + [n - 1]
    for a, b in zip(spine, spine[1:]):
        link(a, b)
    for k in range(len(lay.partners(1))):
        d = 1 + 3 * k
        link(d, d + 1)
        link(d, d + 2)
    return L


# --- verification ----------------------------------------------------------------

def two_particle_matrix(V: np.ndarray, h: sp.spmatrix, pairs: list[tuple[int, int]]) -> tuple[np.ndarray, np.ndarray]:
    """Gram and energy matrices of Sym(v_i v_j) states for one-body h on two particles."""
    m = V.conj().T @ (h @ V)
    s = V.conj().T @ V
    P = len(pairs)
    gram = np.zeros((P, P), dtype=complex)
    en = np.zeros((P, P), dtype=complex)
    for x, (i, j) in enumerate(pairs):
        for y, (k, l) in enumerate(pairs):
            # <Sym(ij)|Sym(kl)> with Sym(ij) = (ij + ji)/sqrt2
            gram[x, y] = s[i, k] * s[j, l] + s[i, l] * s[j, k]
            en[x, y] = (m[i, k] * s[j, l] + s[i, k] * m[j, l]
                        + m[i, l] * s[j, k] + s[i, l] * m[j, k])
    return gram, en


def allowed_pairs(keys, occ: set[frozenset]) -> list[tuple[int, int]]:
    out = []
    for i, j in itertools.combinations(range(len(keys)), 2):
        qi, qj = keys[i][0], keys[j][0]
        if qi != qj and frozenset((qi, qj)) not in occ:
            out.append((i, j))
    return out


def diamond_gap(seed: int | None = None) -> dict[str, float]:
    """One- and two-particle gaps of g0 and g1; their minimum is the gap of H(G^dia, N)."""
    out = {}
    for name, build in (("g0", gg.build_g0), ("g1", gg.build_g1)):
        a = build()
        w = spectra.smallest_eigs(a.csr, 10, seed=seed).eigenvalues - gg.E1
        out[f"gamma(H({name},1))"] = float(w[w > 1e-9][0])
        op = manybody.build_bh(a, 2, mu=gg.E1)
        out[f"lambda2({name})"] = float(spectra.smallest_eigs(op.matrix, 1, seed=seed,
                                                              dense_max=0).eigenvalues[0])
    return out


def verify_squash(g: gg.GateDiagram, occ_edges, N: int = 2, tol: float = 1e-10,
                  samples: int = 50, seed: int | None = None) -> VerificationReport:
    res = build_g_square(g, occ_edges)
    lay = res.layout
    R = lay.R
    rep = VerificationReport(f"squash R={R} |E|={len(lay.occ)}")
    rep.equal("|L_sq| element count", lay.expected_count(), lay.element_count())
    rep.at_most("|L_sq| <= 7R^2", 7 * R * R, lay.element_count(), "PAPER")

    sq, tri, dia = (gg.assemble(d) for d in (res.square, res.triangle, res.diamond))
    rep.close("mu(G_sq) = e1", gg.E1, gg.mu(sq, seed=seed), 1e-9)

    wb = w_basis(lay)
    rep.equal("ground states of G_dia", 12 * R * R + 8 * R if lay.odd else 12 * R * R - 4 * R,
              len(wb))
    Wv = np.stack([w_state(lay, k, z, a) for k, z, a in wb], axis=1)
    a_dia = dia.adjacency.csr
    rep.at_most("G_dia ground-state residual", tol, float(np.abs(a_dia @ Wv - gg.E1 * Wv).max()),
                "PAPER")

    # h on span(W): block diagonal, each block a signed Laplacian / 8
    h_tri = gg.edge_matrix(res.triangle)
    hw = Wv.conj().T @ (h_tri @ Wv)
    index = {k: n for n, k in enumerate(wb)}
    covered = np.zeros(hw.shape, dtype=bool)
    lap = chain_laplacian(lay) / 8
    worst = 0.0
    for q in range(1, R + 1):
        for z in (0, 1):
            for a in (0, 1):
                blk = lay.block(z, q)
                idx = [index[(k, zz, a)] for k, zz, _ in blk]
                signs = np.array([s for _, _, s in blk], dtype=float)
                sub = hw[np.ix_(idx, idx)]
                worst = max(worst, float(np.abs(signs[:, None] * sub * signs[None, :] - lap).max()))
                covered[np.ix_(idx, idx)] = True
    rep.at_most("h_tri on W equals signed Laplacian/8 per block", tol, worst, "PAPER")
    rep.at_most("h_tri on W vanishes across blocks", tol, float(np.abs(hw[~covered]).max()), "PAPER")
    rep.equal("blocks cover W", len(wb), int(covered.diagonal().sum()), "TRIVIAL")

    # block overlap rule
    bad = 0
    for (q1, z1), (q2, z2) in itertools.product(itertools.product(range(1, R + 1), (0, 1)), repeat=2):
        e1 = {k for k, _, _ in lay.block(z1, q1)}
        e2 = {k for k, _, _ in lay.block(z2, q2)}
        expect = q1 == q2 or frozenset((q1, q2)) in lay.occ
        bad += bool(e1 & e2) != expect
    rep.equal("blocks overlap iff same q or constrained pair", 0, bad)

    Phi, keys = phi_matrix(lay)
    a_tri = tri.adjacency.csr
    rep.at_most("phi residual on G_tri", tol, float(np.abs(a_tri @ Phi - gg.E1 * Phi).max()), "PAPER")
    rep.at_most("phi orthonormality", tol, float(np.abs(Phi.conj().T @ Phi - np.eye(4 * R)).max()),
                "PAPER")
    shifted = sp.csr_matrix(a_tri - gg.E1 * sp.identity(a_tri.shape[0]))
    null = spectra.nullspace(shifted, tol=1e-8, seed=seed, dense_max=0)
    rep.equal("ground dim of A(G_tri)", 4 * R, null.dim)
    gap_tri = spectra.gamma_min(shifted, tol=1e-8, seed=seed, dense_max=0, sigma=-1e-3)
    rep.at_least("gamma(A(G_tri)-e1) > 1/(30R)^2", 1 / (30 * R) ** 2, gap_tri)
    rep.info["gamma(A(G_tri)-e1)"] = gap_tri

    dg = diamond_gap(seed)
    rep.info.update(dg)
    rep.at_least(f"gamma(H(G_dia,{N})) > 1/300", 1 / 300, min(dg.values()))

    # energy transfer: one-body h_E0 + h_S0 on images vs h_E + h_S on G
    factor = lay.block_norm() ** 2
    h0 = gg.edge_matrix(res.square, res.image_edges) + gg.loop_matrix(res.square, res.image_loops)
    hG = gg.edge_matrix(g) + gg.loop_matrix(g)
    Psi = source_states(g, keys)
    rng = np.random.default_rng(spectra.default_seed() if seed is None else seed)
    pairs = allowed_pairs(keys, lay.occ)
    worst = 0.0
    if N == 1 or not pairs:
        m0, mG = Phi.conj().T @ (h0 @ Phi), Psi.conj().T @ (hG @ Psi)
        for _ in range(samples):
            c = rng.standard_normal(4 * R) + 1j * rng.standard_normal(4 * R)
            c /= np.linalg.norm(c)
            worst = max(worst, abs(np.vdot(c, m0 @ c) - factor * np.vdot(c, mG @ c)))
    else:
        g0_, e0_ = two_particle_matrix(Phi, h0, pairs)
        gG_, eG_ = two_particle_matrix(Psi, hG, pairs)
        rep.at_most("image map preserves overlaps", tol, float(np.abs(g0_ - gG_).max()), "PAPER")
        for _ in range(samples):
            c = rng.standard_normal(len(pairs)) + 1j * rng.standard_normal(len(pairs))
            c /= np.sqrt(np.real(np.vdot(c, gG_ @ c)))
            worst = max(worst, abs(np.vdot(c, e0_ @ c) - factor * np.vdot(c, eG_ @ c)))
        # constrained minimum maps to factor * minimum
        lam_g = _constrained_min(gG_, eG_)
        lam_sq = _constrained_min(g0_, e0_)
        rep.info[f"lambda_{N}(G,Gocc)"] = lam_g
        rep.close("constrained minimum scales by the transfer factor", factor * lam_g, lam_sq, tol)
    rep.at_most(f"energy transfer factor {factor:.6g} on {samples} random states", tol, worst, "PAPER")
    return rep


def _constrained_min(gram, en) -> float:
    w, v = np.linalg.eigh(gram)
    keep = w > 1e-10
    T = v[:, keep] / np.sqrt(w[keep])
    return float(np.linalg.eigvalsh(T.conj().T @ en @ T)[0])


def example_instance() -> tuple[gg.GateDiagram, list[tuple[int, int]]]:
    """Three elements H, HT, 1; one edge and one self-loop; one occupancy constraint."""
    d = gg.GateDiagram({1: "H", 2: "HT", 3: "1"})
    d.add_edge((2, 1, 3), (3, 0, 1))
    d.add_loop((3, 1, 7))
    return d, [(1, 2)]


def frustration_free_instance() -> tuple[gg.GateDiagram, list[tuple[int, int]]]:
    """A constrained two-particle instance with zero energy: the example without its loop."""
    d = gg.GateDiagram({1: "H", 2: "HT", 3: "1"})
    return d, [(1, 2)]
