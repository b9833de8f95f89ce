"""Time the compiled and numpy hopping kernels on a few Fock sectors.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import time

import numpy as np
import scipy.sparse as sp

from bhgates import gadgets, gategraph, manybody
from bhgates import _fock_py

try:
    from bhgates import _fock_ext
except ImportError:
    _fock_ext = None


def cases():
    yield "g0, N=2", gategraph.build_g0().csr, 2
    yield "g0, N=3", gategraph.build_g0().csr, 3
    yield "move-together gadget, N=2", gadgets.build_gadget("w").adjacency.csr, 2
    ring = sp.diags([1, 1], [-1, 1], shape=(20, 20)).tolil()
    ring[0, 19] = ring[19, 0] = 1
    yield "20-site ring, N=6", sp.csr_matrix(ring), 6


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"{'case':30s} {'dim':>9s} {'nnz':>10s} {'numpy s':>9s} {'cython s':>9s} {'speedup':>8s}")
    for name, a, N in cases():
        idx = manybody.FockIndexer(a.shape[0], N)
        tp, mp = best_of(lambda: manybody.hopping_matrix(a, idx, _fock_py), args.repeat)
        if _fock_ext is None:
            print(f"{name:30s} {idx.size:9d} {mp.nnz:10d} {tp:9.3f} {'n/a':>9s} {'n/a':>8s}")
            continue
        tc, mc = best_of(lambda: manybody.hopping_matrix(a, idx, _fock_ext), args.repeat)
        diff = abs(mp - mc).max() if mp.nnz else 0.0
        assert diff < 1e-12, f"kernels disagree on {name}: {diff}"
        print(f"{name:30s} {idx.size:9d} {mc.nnz:10d} {tp:9.3f} {tc:9.3f} {tp / tc:8.1f}")


if __name__ == "__main__":
    main()
