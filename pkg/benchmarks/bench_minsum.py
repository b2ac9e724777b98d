"""Time the compiled and numpy min-sum decoders on the same noisy codewords.

    python3 benchmarks/bench_minsum.py [--frames 20] [--ebn0 1.5]
"""

import argparse
import time

import numpy as np

from uwbnbi.fbmcss import ldpc


def noisy_llrs(code, ebn0_db, n, seed):
    rng = np.random.default_rng(seed)
    sigma = np.sqrt(1.0 / (2 * code.rate * 10 ** (ebn0_db / 10)))
    out = []
    for _ in range(n):
        cw = ldpc.fec_encode(rng.integers(0, 2, code.k), code)
        x = 1.0 - 2.0 * cw
        out.append(2 * (x + sigma * rng.standard_normal(code.n)) / sigma**2)
    return out


def run(backend, llrs, code):
    t0 = time.perf_counter()
    decoded = [ldpc.fec_decode(llr, code, backend=backend, return_iterations=True) for llr in llrs]
    return time.perf_counter() - t0, decoded


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=20)
    ap.add_argument("--ebn0", type=float, default=1.5, help="Eb/N0 in dB")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    code = ldpc.default_code()
    llrs = noisy_llrs(code, args.ebn0, args.frames, args.seed)
    run("numpy", llrs[:1], code)  # warm the graph cache

    t_np, out_np = run("numpy", llrs, code)
    iters = sum(o[2] for o in out_np)
    print(f"numpy : {t_np:7.3f} s  {1e3 * t_np / args.frames:7.2f} ms/frame  {iters} iterations")
    if ldpc.BACKEND != "cython":
        print("cython: extension not built")
        return
    t_cy, out_cy = run("cython", llrs, code)
    same = all(np.array_equal(a[0], b[0]) and a[1:] == b[1:] for a, b in zip(out_np, out_cy))
    print(f"cython: {t_cy:7.3f} s  {1e3 * t_cy / args.frames:7.2f} ms/frame  speedup {t_np / t_cy:5.1f}x"
          f"  identical={same}")


if __name__ == "__main__":
    main()
