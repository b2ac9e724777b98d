"""Rate-1/3 quasi-cyclic LDPC code: systematic encoder and normalized min-sum decoder.

The parity part of the base graph is dual-diagonal, with one weight-3 column
whose outer shifts are equal and whose middle shift is zero. Summing all block
rows of ``H c = 0`` then isolates the first parity block, and the rest follow
by back-substitution, so encoding needs no matrix inversion.

The decoder kernel is compiled when the extension is available and falls back
to numpy otherwise; ``BACKEND`` names the default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from ._minsum_py import MinSumGraph
from ._minsum_py import minsum_decode as _decode_numpy

try:
    from ._minsum_ext import minsum_decode_kernel as _kernel
except ImportError:  # extension not built
    _kernel = None

BACKEND = "cython" if _kernel is not None else "numpy"
ALPHA = 0.75
MAX_ITER = 50
CODE_FILE = "ldpc_r13_z256.json"


@dataclass(frozen=True)
class QcLdpcCode:
    z: int
    n_rows: int
    n_cols: int
    info_cols: int
    parity_shift: int
    middle_row: int
    entries: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        expected = {(0, self.info_cols, self.parity_shift), (self.middle_row, self.info_cols, 0),
                    (self.n_rows - 1, self.info_cols, self.parity_shift)}
        for j in range(1, self.n_rows):
            expected |= {(j - 1, self.info_cols + j, 0), (j, self.info_cols + j, 0)}
        parity = {e for e in self.entries if e[1] >= self.info_cols}
        if parity != expected:
            raise ValueError("parity part of the base graph is not the encodable dual-diagonal form")
        if self.n_cols != self.info_cols + self.n_rows:
            raise ValueError("base graph must have one parity column per row")

    @property
    def k(self) -> int:
        return self.info_cols * self.z

    @property
    def n(self) -> int:
        return self.n_cols * self.z

    @property
    def rate(self) -> float:
        return self.k / self.n

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """(check, variable) index of every Tanner-graph edge."""
        t = np.arange(self.z)
        checks, vars_ = [], []
        for r, c, s in self.entries:
            checks.append(r * self.z + t)
            vars_.append(c * self.z + (t + s) % self.z)
        return np.concatenate(checks), np.concatenate(vars_)

    @property
    def graph(self) -> MinSumGraph:
        return _graph(self)


@lru_cache(maxsize=4)
def _graph(code: QcLdpcCode) -> MinSumGraph:
    chk, var = code.edges()
    order = np.lexsort((var, chk))
    rowptr = np.concatenate([[0], np.cumsum(np.bincount(chk, minlength=code.n_rows * code.z))])
    return MinSumGraph(var[order], rowptr, code.n)


def load_code(path: str | Path | None = None) -> QcLdpcCode:
    if path:
        doc = json.loads(Path(path).read_text())
    else:
        doc = json.loads(resources.files("uwbnbi.data").joinpath(CODE_FILE).read_text())
    return QcLdpcCode(
        z=int(doc["z"]), n_rows=int(doc["rows"]), n_cols=int(doc["cols"]),
        info_cols=int(doc["info_cols"]), parity_shift=int(doc["parity_shift"]),
        middle_row=int(doc["middle_row"]),
        entries=tuple(tuple(int(v) for v in e) for e in doc["entries"]),
    )


@lru_cache(maxsize=1)
def default_code() -> QcLdpcCode:
    return load_code()


def _shift(x: np.ndarray, s: int) -> np.ndarray:
    """Circulant P^s applied to a block: (P^s x)[t] = x[(t + s) mod z]."""
    return np.roll(x, -s, axis=-1)


def fec_encode(info_bits, code: QcLdpcCode | None = None) -> np.ndarray:
    """Systematic codeword: the information bits followed by the parity blocks."""
    code = code or default_code()
    u = np.asarray(info_bits).astype(np.uint8)
    if u.shape != (code.k,):
        raise ValueError(f"expected {code.k} information bits, got {u.size}")
    if np.any(u > 1):
        raise ValueError("information bits must be 0 or 1")
    z = code.z
    blocks = u.reshape(code.info_cols, z)
    lam = np.zeros((code.n_rows, z), dtype=np.uint8)
    for r, c, s in code.entries:
        if c < code.info_cols:
            lam[r] ^= _shift(blocks[c], s)
    p = np.zeros((code.n_rows, z), dtype=np.uint8)
    p[0] = np.bitwise_xor.reduce(lam, axis=0)
    p[1] = lam[0] ^ _shift(p[0], code.parity_shift)
    for i in range(1, code.n_rows - 1):
        p[i + 1] = lam[i] ^ p[i]
        if i == code.middle_row:
            p[i + 1] ^= p[0]
    return np.concatenate([u, p.ravel()])


def syndrome(codeword, code: QcLdpcCode | None = None) -> np.ndarray:
    code = code or default_code()
    c = np.asarray(codeword).astype(np.int64)
    chk, var = code.edges()
    return (np.bincount(chk, weights=c[var], minlength=code.n_rows * code.z).astype(np.int64) & 1)


def fec_decode(llrs, code: QcLdpcCode | None = None, alpha: float = ALPHA,
               max_iter: int = MAX_ITER, backend: str | None = None, return_iterations: bool = False):
    """Normalized min-sum decoding; positive LLR favours bit 0.

    Returns ``(info_bits, converged)``, plus the iteration count when
    ``return_iterations`` is set. Decoding stops at the first iteration whose
    hard decisions satisfy every parity check.
    """
    code = code or default_code()
    llr = np.ascontiguousarray(llrs, dtype=np.float64)
    if llr.shape != (code.n,):
        raise ValueError(f"expected {code.n} LLRs, got {llr.size}")
    if not np.all(np.isfinite(llr)):
        raise ValueError("LLRs must be finite")
    backend = backend or BACKEND
    g = code.graph
    if backend == "cython":
        if _kernel is None:
            raise RuntimeError("compiled min-sum kernel is not available")
        hard = np.zeros(code.n, dtype=np.uint8)
        it, ok = _kernel(llr, g.var, g.rowptr, float(alpha), int(max_iter), hard)
    elif backend == "numpy":
        hard, it, ok = _decode_numpy(llr, g, float(alpha), int(max_iter))
    else:
        raise ValueError(f"unknown backend {backend!r}")
    info = hard[: code.k].copy()
    return (info, bool(ok), int(it)) if return_iterations else (info, bool(ok))
