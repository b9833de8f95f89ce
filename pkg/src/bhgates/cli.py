"""Command-line entry point: build, verify and inspect the constructions."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import acceptance, compiler, gadgets, manybody, mge, spectra, squash
from . import gategraph as gg
from .circuits import Circuit
from .report import VerificationReport


def _emit(args, rep: VerificationReport) -> int:
    if args.format == "json":
        print(rep.dumps())
    else:
        print(rep.render())
    return 0 if rep.passed else 1


def _write_tsv(path, values, column: str = "eigenvalue") -> None:
    with open(path, "w") as fh:
        fh.write(f"# index\t{column}\n")
        for k, v in enumerate(values):
            fh.write(f"{k}\t{v:.15g}\n")


def _load_graph(path):
    """A gate diagram in JSON, or a symmetric Matrix Market adjacency matrix."""
    p = Path(path)
    if p.suffix == ".mtx":
        return spectra.read_matrix_market(p).csr
    return gg.assemble(gg.GateDiagram.load(p))


def _read_pairs(path) -> list[tuple[int, int]]:
    pairs = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#")[0].strip()
        if line:
            a, b = line.split()
            pairs.append((int(a), int(b)))
    return pairs


# --- subcommands ----------------------------------------------------------------

def cmd_g0(args) -> int:
    rep = acceptance.check_g0(args.seed)
    g1 = acceptance.check_g1(args.seed)
    rep.extend(g1, "g1: ")
    w = np.asarray(rep.info["lowest"])
    rep.info["degeneracy at e1"] = spectra.degeneracy(w, 1e-9)
    rep.info["gap"] = float(w[4] - w[0])
    if args.tsv:
        _write_tsv(args.tsv, spectra.smallest_eigs(gg.build_g0(), args.k,
                                                   seed=args.seed).eigenvalues)
    return _emit(args, rep)


def cmd_gadget(args) -> int:
    return _emit(args, gadgets.verify_gadget(args.kind, tol=args.tol, full_check=args.full))


def cmd_graph(args) -> int:
    g = _load_graph(args.file)
    rep = VerificationReport(f"spectrum of {args.file}")
    mu = manybody.graph_mu(g)
    rep.info["vertices"] = spectra.as_csr(g.adjacency if hasattr(g, "adjacency") else g).shape[0]
    rep.info["mu"] = mu
    if args.particles == 1:
        a = g.adjacency if hasattr(g, "adjacency") else spectra.SparseSymMatrix(g)
        vals = spectra.smallest_eigs(a, args.k, seed=args.seed).eigenvalues
        rep.info["e1-gate graph"] = bool(abs(mu - gg.E1) <= 1e-9)
    else:
        op = manybody.build_bh(g, args.particles, mu=mu)
        if not op.materialized:
            raise manybody.SectorTooLarge(f"sector dimension {op.dim} is too large to solve")
        rep.info["sector dimension"] = op.dim
        vals = spectra.smallest_eigs(op.matrix, min(args.k, op.dim), seed=args.seed).eigenvalues
    rep.info["lowest"] = vals.tolist()
    if args.tsv:
        _write_tsv(args.tsv, vals)
    return _emit(args, rep)


def cmd_compile(args) -> int:
    c = Circuit.load(args.circuit)
    cc = compiler.build_gx(c)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cc.diagrams["GX"].save(out / "graph.json")
    spectra.write_matrix_market(out / "graph.mtx", cc.graph("GX").adjacency)
    occ = compiler.occ_graph(c, cc.layout)
    (out / "occupancy.txt").write_text(occ.to_edge_list())
    (out / "layout.json").write_text(json.dumps(cc.layout.to_json(), indent=1))
    ops = compiler.formula_operators(c)
    compiler.save_operators(out / "operators.bin", ops)
    rep = VerificationReport(f"compile {args.circuit}")
    rep.info.update({"R": cc.R, "vertices": 128 * cc.R, "occupancy edges": len(occ.edges),
                     "S1 dimension": ops.basis.dim, "out": str(out)})
    if args.verify:
        rep.extend(compiler.verify_compiler(c, tol=args.tol, seed=args.seed))
    return _emit(args, rep)


def cmd_squash(args) -> int:
    g = gg.GateDiagram.load(args.graph)
    occ = _read_pairs(args.occ)
    res = squash.build_g_square(g, occ)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        res.square.save(out / "square.json")
        (out / "layout.json").write_text(json.dumps(res.layout.to_json(), indent=1))
    if args.verify:
        rep = squash.verify_squash(g, occ, N=args.particles, tol=args.tol, seed=args.seed)
    else:
        rep = VerificationReport(f"squash R={g.R}")
    rep.info["elements"] = res.layout.element_count()
    rep.info["transfer factor"] = res.layout.block_norm() ** 2
    return _emit(args, rep)


def cmd_mge(args) -> int:
    c = mge.MgeCircuit.load(args.circuit)
    inst = mge.make_instance(c, args.a, args.eps)
    if args.action == "build":
        rep = VerificationReport(f"mge build {args.circuit}")
        rep.info.update(inst.manifest())
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            A, _ = mge.build_ax(c, inst.a, inst.eps)
            spectra.write_matrix_market(out / "ax.mtx", A)
            mge.save_manifest(out / "manifest.json", inst)
        return _emit(args, rep)
    if args.action == "rows":
        for line in mge.serve_rows(inst, sys.stdin):
            print(line, flush=True)
        return 0
    if args.action == "verify":
        return _emit(args, mge.verify_mge(c, args.seed, expect=args.expect))
    d = mge.decide_mge(inst, args.seed)
    rep = VerificationReport(f"mge decide {args.circuit}")
    rep.info.update(d.to_json())
    if args.expect:
        rep.equal("decision", args.expect, d.answer, "DERIVED")
    return _emit(args, rep)


def cmd_xy(args) -> int:
    g = _load_graph(args.graph)
    a = g.adjacency.csr if hasattr(g, "adjacency") else g
    K = a.shape[0]
    eps = args.eps if args.eps is not None else 1 / (4 * K)
    inst = manybody.xy_instance(a, args.N, eps)
    cmp = manybody.xy_compare(a, args.N)
    bh, xy = cmp.decisions(eps)
    rep = VerificationReport(f"xy reduce {args.graph} N={args.N}")
    rep.at_most("hard-core H_G^N vs O_G", 1e-12, cmp.hardcore_error, "PAPER")
    rep.equal("theta - N mu >= lambda_N^1", True, cmp.lower_ok)
    rep.equal("lambda_N^1 = 0 implies theta = N mu", True, cmp.zero_ok)
    rep.equal("theta - N mu <= 2(K^2+1) lambda/(2 - lambda)", True, cmp.upper_ok)
    if bh != "promise violated":
        rep.equal("XY decision matches Bose-Hubbard decision", bh, xy)
    rep.info.update({"K": K, "N": args.N, "mu": cmp.mu, "theta_N": cmp.theta,
                     "lambda_N^1": cmp.lam, "c": inst.c, "precision": inst.precision,
                     "Bose-Hubbard decision": bh, "XY decision": xy})
    return _emit(args, rep)


def cmd_verify_all(args) -> int:
    only = {int(x) for x in args.only.split(",")} if args.only else None
    reports = []
    for crit in acceptance.CRITERIA:
        if only is not None and crit.number not in only:
            continue
        rep = crit.run(args.seed)
        reports.append(rep)
        if args.format == "text":
            print(rep.render(), flush=True)
    ok = all(r.passed for r in reports)
    if args.format == "json":
        print(json.dumps({"passed": ok, "criteria": [r.to_json() for r in reports]}, indent=1))
    else:
        print(f"{sum(r.passed for r in reports)}/{len(reports)} criteria passed")
    return 0 if ok else 1


# --- parser ---------------------------------------------------------------------

def _common(suppress: bool) -> argparse.ArgumentParser:
    # subcommands repeat the global options; SUPPRESS keeps them from
    # overwriting values given before the subcommand name
    def d(x):
        return argparse.SUPPRESS if suppress else x
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default=d("text"))
    common.add_argument("--tol", type=float, default=d(1e-9), help="residual tolerance")
    common.add_argument("--seed", type=int, default=d(None),
                        help="solver seed (default: $BHF_SEED or a fixed value)")
    common.add_argument("--jobs", type=int, default=d(None), help="BLAS worker threads")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common(True)

    p = argparse.ArgumentParser(prog="bhgates", parents=[_common(False)],
                                description="Bose-Hubbard gate graphs: build and verify.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("g0", parents=[common], help="spectrum of the g0 block")
    s.add_argument("what", choices=("spectrum",))
    s.add_argument("-k", type=int, default=8)
    s.add_argument("--tsv", help="write gnuplot-ready eigenvalues here")
    s.set_defaults(func=cmd_g0)

    s = sub.add_parser("gadget", parents=[common], help="verify a gadget")
    s.add_argument("what", choices=("verify",))
    s.add_argument("kind", choices=gadgets.KINDS)
    s.add_argument("--full", action="store_true",
                   help="also diagonalize the full two-particle sector (w only)")
    s.set_defaults(func=cmd_gadget)

    s = sub.add_parser("graph", parents=[common], help="spectrum of a graph file")
    s.add_argument("what", choices=("spectrum",))
    s.add_argument("file")
    s.add_argument("--particles", "-N", type=int, default=1)
    s.add_argument("-k", type=int, default=6)
    s.add_argument("--tsv")
    s.set_defaults(func=cmd_graph)

    s = sub.add_parser("compile", parents=[common], help="compile a mediated circuit")
    s.add_argument("circuit")
    s.add_argument("--out", required=True)
    s.add_argument("--verify", action="store_true")
    s.set_defaults(func=cmd_compile)

    s = sub.add_parser("squash", parents=[common], help="replace occupancy constraints")
    s.add_argument("graph")
    s.add_argument("occ")
    s.add_argument("--verify", action="store_true")
    s.add_argument("--particles", "-N", type=int, default=2)
    s.add_argument("--out")
    s.set_defaults(func=cmd_squash)

    s = sub.add_parser("mge", parents=[common], help="minimum graph eigenvalue instances")
    s.add_argument("action", choices=("build", "decide", "rows", "verify"))
    s.add_argument("circuit")
    s.add_argument("--a", type=float, default=None)
    s.add_argument("--eps", type=float, default=None)
    s.add_argument("--expect", choices=("yes", "no"))
    s.add_argument("--out")
    s.set_defaults(func=cmd_mge)

    s = sub.add_parser("xy", parents=[common], help="reduce to the XY model")
    s.add_argument("what", choices=("reduce",))
    s.add_argument("graph")
    s.add_argument("-N", type=int, required=True)
    s.add_argument("--eps", type=float, default=None, help="precision 1/T with T >= 4K")
    s.set_defaults(func=cmd_xy)

    s = sub.add_parser("verify-all", parents=[common], help="run every acceptance criterion")
    s.add_argument("--only", help="comma-separated criterion numbers")
    s.set_defaults(func=cmd_verify_all)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is None:
        args.seed = spectra.default_seed()
    try:
        if args.jobs:
            from threadpoolctl import threadpool_limits
            with threadpool_limits(limits=args.jobs):
                return args.func(args)
        return args.func(args)
    except (OSError, ValueError, manybody.SectorTooLarge) as exc:
        print(f"bhgates: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
