"""Maximum-ratio combining of spread subcarriers and QPSK soft demapping."""

from __future__ import annotations

import math

import numpy as np

from .filterbank import FbmcConfig, analyze, filter_bank

_LLR_SCALE = 2.0 * math.sqrt(2.0)


def mrc_combine(y, h, nvar):
    """Combine diversity branches along the last axis.

    Returns ``(z, snr)``. ``z`` is the unbiased symbol estimate
    ``sum(conj(h) y / nvar) / sum(|h|^2 / nvar)`` and ``snr`` the
    post-combining SNR ``sum(|h|^2 / nvar)`` for unit-energy symbols.
    A branch with infinite variance gets zero weight.
    """
    y = np.asarray(y, dtype=complex)
    h = np.asarray(h, dtype=complex)
    nvar = np.asarray(nvar, dtype=float)
    if h.shape != nvar.shape or y.shape[-1] != h.shape[-1]:
        raise ValueError(f"shape mismatch: y {y.shape}, h {h.shape}, nvar {nvar.shape}")
    if np.any(~(nvar > 0)):
        raise ValueError("noise variances must be positive")
    w = np.conj(h) / nvar
    snr = np.sum(np.abs(h) ** 2 / nvar, axis=-1)
    z = np.sum(w * y, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        zhat = np.where(snr > 0, z / np.where(snr > 0, snr, 1.0), 0.0)
    return zhat, snr


def qpsk_llr(zhat, snr) -> np.ndarray:
    """Bit LLRs (positive favours bit 0) for Gray QPSK after MRC.

    The result has a trailing axis of 2 holding the I and Q bit of each symbol.
    """
    zhat = np.asarray(zhat)
    scale = _LLR_SCALE * np.asarray(snr)
    return np.stack([scale * zhat.real, scale * zhat.imag], axis=-1)


def combine_streams(r: np.ndarray, csi, nvar, cfg: FbmcConfig, suppression: bool = True) -> np.ndarray:
    """LLRs for one block from despread-free analysis outputs ``r`` (K x symbols).

    ``csi`` is the composite gain from each stream symbol to each subcarrier
    output (spreading phase included). With ``suppression`` off every
    subcarrier is weighted as if it saw the band-average variance.
    """
    k = cfg.n_subcarriers
    csi = np.asarray(csi, dtype=complex)
    nvar = np.asarray(nvar, dtype=float)
    if csi.shape != (k,) or nvar.shape != (k,):
        raise ValueError(f"csi and nvar must have length {k}, got {csi.shape} and {nvar.shape}")
    if np.any(~(nvar > 0)):
        raise ValueError("noise variances must be positive")
    if not suppression:
        nvar = np.full(k, np.mean(nvar))
    r = np.asarray(r, dtype=complex)
    if r.shape[0] != k:
        raise ValueError(f"analysis output has {r.shape[0]} subcarriers, expected {k}")
    ell = cfg.n_streams
    # subcarrier j*L + s belongs to stream s: (K, T) -> (sf, L, T) -> (T, L, sf)
    branches = r.reshape(cfg.spreading_factor, ell, -1).transpose(2, 1, 0)
    zhat, snr = mrc_combine(branches, csi.reshape(cfg.spreading_factor, ell).T,
                            nvar.reshape(cfg.spreading_factor, ell).T)
    # symbol q = t*L + s carries bits (2q, 2q+1)
    return qpsk_llr(zhat, snr[None, :]).reshape(-1)


def demod_combine(y, csi, nvar, cfg: FbmcConfig, suppression: bool = True) -> np.ndarray:
    """Analysis filter bank, per-stream MRC and soft demapping of one or more frames."""
    r = analyze(y, cfg)
    return np.concatenate([combine_streams(b, csi, nvar, cfg, suppression) for b in r])


def genie_csi(r_signal: np.ndarray, stream_symbols: np.ndarray, cfg: FbmcConfig) -> np.ndarray:
    """Least-squares composite gain per subcarrier from the noiseless analysis output (K x T)."""
    fb = filter_bank(cfg)
    ref = stream_symbols[fb.stream_of]
    return np.sum(np.conj(ref) * r_signal, axis=1) / np.sum(np.abs(ref) ** 2, axis=1)


def empirical_nvar(r_noise: np.ndarray) -> np.ndarray:
    """Per-subcarrier power of the noise-plus-interference analysis output (K x T)."""
    return np.mean(np.abs(r_noise) ** 2, axis=1)
