"""Generate the bundled rate-1/3 quasi-cyclic LDPC code.

Base graph: 20 check rows by 30 columns with lifting size 256. The first 10
columns carry information bits with the column degrees below; the last 20
are parity, with an encodable dual-diagonal structure (the first parity
column has weight 3). Shifts are drawn at random and redrawn whenever they
would close a length-4 cycle.

    python3 tools/make_ldpc.py src/uwbnbi/data/ldpc_r13_z256.json
"""

import argparse
import json
from itertools import combinations

import numpy as np

Z = 256
ROWS = 20
INFO_COLS = 10
INFO_DEGREES = [16, 8, 8, 6, 6, 4, 4, 4, 4, 4]
PARITY_SHIFT = 1
MIDDLE_ROW = 10


def parity_entries():
    cols0 = INFO_COLS
    out = [(0, cols0, PARITY_SHIFT), (MIDDLE_ROW, cols0, 0), (ROWS - 1, cols0, PARITY_SHIFT)]
    for j in range(1, ROWS):
        out.append((j - 1, cols0 + j, 0))
        out.append((j, cols0 + j, 0))
    return out


def closes_4cycle(shift, r, c, cand):
    """Would entry (r, c, cand) form a 4-cycle with the entries already placed?"""
    for (r2, c2) in shift:
        if r2 == r or c2 == c:
            continue
        if (r, c2) in shift and (r2, c) in shift:
            if (cand - shift[r, c2] + shift[r2, c2] - shift[r2, c]) % Z == 0:
                return True
    return False


def build(seed):
    rng = np.random.default_rng(seed)
    shift = {(r, c): s for r, c, s in parity_entries()}
    row_load = np.zeros(ROWS)
    for r, _, _ in parity_entries():
        row_load[r] += 1
    for c, deg in enumerate(INFO_DEGREES):
        # least-loaded rows first, ties broken at random
        order = np.lexsort((rng.random(ROWS), row_load))
        rows = sorted(order[:deg].tolist())
        for r in rows:
            for _ in range(10000):
                cand = int(rng.integers(0, Z))
                if not closes_4cycle(shift, r, c, cand):
                    break
            else:
                raise RuntimeError(f"no 4-cycle-free shift for ({r}, {c})")
            shift[r, c] = cand
            row_load[r] += 1
    return shift


def check_girth(shift):
    keys = list(shift)
    for (a, b) in combinations(sorted({r for r, _ in keys}), 2):
        cols = [c for (r, c) in keys if r == a and (b, c) in shift]
        for c1, c2 in combinations(cols, 2):
            if (shift[a, c1] - shift[a, c2] + shift[b, c2] - shift[b, c1]) % Z == 0:
                raise AssertionError("4-cycle found")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out")
    ap.add_argument("--seed", type=int, default=2560)
    args = ap.parse_args()
    shift = build(args.seed)
    check_girth(shift)
    doc = {
        "description": "Rate-1/3 quasi-cyclic LDPC, 2560 information bits, 7680 coded bits. "
                       "Entry [row, col, shift]: circulant P^shift, (P^s x)[t] = x[(t + s) mod z].",
        "z": Z,
        "rows": ROWS,
        "cols": INFO_COLS + ROWS,
        "info_cols": INFO_COLS,
        "parity_shift": PARITY_SHIFT,
        "middle_row": MIDDLE_ROW,
        "seed": args.seed,
        "entries": [[r, c, s] for (r, c), s in sorted(shift.items())],
    }
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=None, separators=(",", ":"))
        fh.write("\n")


if __name__ == "__main__":
    main()
