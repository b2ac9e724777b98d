"""Numpy flooding min-sum decoder; the reference for the compiled kernel.

Both backends perform the same floating-point operations in the same order
(check messages are sign/min selections scaled by ``alpha``; posteriors are
accumulated edge by edge, then the channel LLR is added), so they return
bit-identical results.
"""

import numpy as np


class MinSumGraph:
    """Edge layout of a parity-check matrix, edges grouped by check."""

    def __init__(self, var: np.ndarray, rowptr: np.ndarray, n_vars: int):
        self.var = np.ascontiguousarray(var, dtype=np.int32)
        self.rowptr = np.ascontiguousarray(rowptr, dtype=np.int32)
        self.n_vars = int(n_vars)
        deg = np.diff(self.rowptr)
        # checks of equal degree are processed together as a dense (checks x degree) block
        self.groups = []
        for d in np.unique(deg):
            rows = np.flatnonzero(deg == d)
            self.groups.append(self.rowptr[rows][:, None] + np.arange(d)[None, :])
        self.check_of_edge = np.repeat(np.arange(deg.size), deg)


def minsum_decode(llr, graph: MinSumGraph, alpha: float, max_iter: int):
    """Return ``(hard_bits, iterations, converged)``."""
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    var = graph.var
    c2v = np.zeros(var.size)
    post = llr.copy()
    hard = np.zeros(llr.size, dtype=np.uint8)
    for it in range(1, max_iter + 1):
        v2c = post[var] - c2v
        for edges in graph.groups:
            m = v2c[edges]
            a = np.abs(m)
            rows = np.arange(edges.shape[0])
            am = np.argmin(a, axis=1)
            min1 = a[rows, am]
            a[rows, am] = np.inf
            min2 = a.min(axis=1)
            neg = m < 0
            parity = (neg.sum(axis=1) & 1).astype(bool)
            mag = np.where(np.arange(edges.shape[1])[None, :] == am[:, None],
                           min2[:, None], min1[:, None])
            out = alpha * mag
            flip = neg ^ parity[:, None]
            out[flip] = -out[flip]
            c2v[edges] = out
        post = np.bincount(var, weights=c2v, minlength=llr.size) + llr
        hard = (post < 0).astype(np.uint8)
        syndrome = np.bincount(graph.check_of_edge, weights=hard[var]).astype(np.int64) & 1
        if not syndrome.any():
            return hard, it, True
    return hard, max_iter, False
