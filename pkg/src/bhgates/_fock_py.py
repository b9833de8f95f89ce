"""Vectorized numpy version of the hopping assembly in ``_fock_ext``."""

from __future__ import annotations

import numpy as np


def colex_rank(pos: np.ndarray, binom: np.ndarray) -> np.ndarray:
    """Ranks of sorted position rows (shape (D, N))."""
    n = pos.shape[1]
    r = np.zeros(pos.shape[0], dtype=np.int64)
    for k in range(n):
        r += binom[pos[:, k] + k, k + 1]
    return r


def hop_count(pos: np.ndarray, indptr: np.ndarray) -> int:
    deg = np.diff(indptr)
    first = np.ones(pos.shape, dtype=bool)
    first[:, 1:] = pos[:, 1:] != pos[:, :-1]
    return int(deg[pos][first].sum())


def hop_entries(pos, indptr, indices, binom, row_offset: int = 0):
    pos = np.asarray(pos, dtype=np.int64)
    indptr = np.asarray(indptr, dtype=np.int64)
    indices = np.asarray(indices, dtype=np.int64)
    D, n = pos.shape
    deg = np.diff(indptr)
    rows, cols, vals = [], [], []
    for k in range(n):
        first = np.ones(D, dtype=bool) if k == 0 else pos[:, k] != pos[:, k - 1]
        src = np.nonzero(first)[0]
        j = pos[src, k]
        lj = (pos[src] == j[:, None]).sum(axis=1)
        cnt = deg[j]
        s = np.repeat(src, cnt)
        starts = np.repeat(indptr[j], cnt)
        within = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        i = indices[starts + within]
        rest = np.delete(pos[s], k, axis=1)
        li = (pos[s] == i[:, None]).sum(axis=1)
        new = np.sort(np.concatenate([rest, i[:, None]], axis=1), axis=1)
        rows.append(colex_rank(new, binom))
        cols.append(row_offset + s)
        vals.append(np.sqrt((li + 1) * np.repeat(lj, cnt)))
    if not rows:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy(), np.zeros(0)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals).astype(float)
