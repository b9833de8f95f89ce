"""Bose-Hubbard gate graphs, gadgets and the reductions built on them."""

from .gategraph import E1, GateDiagram, assemble, build_g0, build_g1
from .manybody import BACKEND, build_bh, ff_states
from .report import VerificationReport
from .spectra import SparseSymMatrix, smallest_eigs

__all__ = ["E1", "GateDiagram", "assemble", "build_g0", "build_g1", "BACKEND", "build_bh",
           "ff_states", "VerificationReport", "SparseSymMatrix", "smallest_eigs"]
__version__ = "0.1.0"
