"""Root-Nyquist prototype filter for an isolated-subcarrier filter bank.

With ``n_fft`` subcarrier channels and roll-off ``rolloff``, symbols are
spaced ``M = (1 + rolloff) * n_fft`` samples apart, so the square-root
Nyquist spectrum ends exactly at half the subcarrier spacing and adjacent
subcarriers do not overlap. The Nyquist transition is a regularized
incomplete beta function, which is smooth to high order and so lets a short
filter reach deep stopband and small Nyquist residual.
"""

from __future__ import annotations

import numpy as np
from scipy.special import betainc

NYQUIST_TARGET_DB = -50.0
STOPBAND_TARGET_DB = 50.0
_DENSE = 16


def symbol_spacing(n_fft: int, rolloff: float) -> int:
    m = (1.0 + rolloff) * n_fft
    if abs(m - round(m)) > 1e-9:
        raise ValueError(f"(1 + rolloff) * n_fft = {m} is not an integer")
    return int(round(m))


def root_nyquist_response(f: np.ndarray, spacing: int, rolloff: float, order: int) -> np.ndarray:
    """Square-root Nyquist amplitude for symbol spacing ``spacing`` (f in cycles/sample)."""
    f = np.abs(f)
    f1 = (1 - rolloff) / (2 * spacing)
    f2 = (1 + rolloff) / (2 * spacing)
    x = np.clip((f - f1) / (f2 - f1), 0.0, 1.0)
    return np.cos(0.5 * np.pi * betainc(order, order, x))


def composite(g: np.ndarray, spacing: int) -> np.ndarray:
    """``spacing * sum_n g[n] g[n + m*spacing]`` for lags m = 0, 1, 2, ..."""
    lags = np.arange(0, g.size, spacing)
    return np.array([spacing * np.dot(g[: g.size - k], g[k:]) for k in lags])


def nyquist_residual_db(g: np.ndarray, spacing: int) -> float:
    c = composite(g, spacing)
    return float(20 * np.log10(max(np.max(np.abs(c[1:])), 1e-300) / abs(c[0])))


def stopband_db(g: np.ndarray, n_fft: int, dense: int = _DENSE) -> float:
    """Attenuation (positive dB) for |f| >= half a subcarrier spacing."""
    nf = dense * g.size
    h = np.abs(np.fft.fft(g, nf))
    f = np.abs(np.fft.fftfreq(nf))
    stop = h[f >= 1.0 / (2 * n_fft) - 1e-12]
    return float(-20 * np.log10(np.max(stop) / h[0]))


def design_prototype(n_fft: int, overlap_factor: int = 12, rolloff: float = 0.5,
                     order: int = 4) -> np.ndarray:
    """Prototype coefficients of length ``M * overlap_factor`` with unit DC gain.

    Raises ValueError when the design misses the Nyquist residual or stopband
    target, reporting what was achieved.
    """
    if n_fft < 2 or n_fft & (n_fft - 1):
        raise ValueError(f"n_fft must be a power of two, got {n_fft}")
    if overlap_factor < 4:
        raise ValueError("overlap_factor must be at least 4")
    if not 0 < rolloff <= 1:
        raise ValueError("rolloff must lie in (0, 1]")
    spacing = symbol_spacing(n_fft, rolloff)
    length = spacing * overlap_factor
    nf = _DENSE * length
    f = np.fft.fftfreq(nf)
    h = np.fft.fftshift(np.fft.ifft(root_nyquist_response(f, spacing, rolloff, order)).real)
    c = nf // 2
    g = h[c - length // 2: c + length // 2]
    g = g / g.sum()
    nyq = nyquist_residual_db(g, spacing)
    stop = stopband_db(g, n_fft)
    if nyq > NYQUIST_TARGET_DB or stop < STOPBAND_TARGET_DB:
        raise ValueError(
            f"prototype (n_fft={n_fft}, overlap={overlap_factor}, rolloff={rolloff}) reaches a "
            f"Nyquist residual of {nyq:.1f} dB and stopband of {stop:.1f} dB; need <= "
            f"{NYQUIST_TARGET_DB:.0f} dB and >= {STOPBAND_TARGET_DB:.0f} dB"
        )
    return g
