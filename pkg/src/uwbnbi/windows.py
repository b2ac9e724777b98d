"""Spectral analysis windows."""

import numpy as np

BH4_COEFFS = (0.35875, 0.48829, 0.14128, 0.01168)


def blackman_harris(n: int) -> np.ndarray:
    """Periodic (DFT-even) 4-term Blackman-Harris window of length ``n``."""
    a0, a1, a2, a3 = BH4_COEFFS
    x = 2 * np.pi * np.arange(n) / n
    return a0 - a1 * np.cos(x) + a2 * np.cos(2 * x) - a3 * np.cos(3 * x)


def enbw_bins(n: int) -> float:
    """Equivalent noise bandwidth of the window, in DFT bins (about 2.004)."""
    w = blackman_harris(n)
    return float(n * np.sum(w**2) / np.sum(w) ** 2)
