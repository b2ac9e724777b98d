"""Calibrated spectrograms, multi-chain stitching and band occupancy.

Each column is one non-overlapping ``nfft``-sample segment, windowed with a
4-term Blackman-Harris window. Bin values are PSDs in dBm/MHz::

    S_k = |X_k|^2 * 10^(cal/10) / (fs * sum(w^2)) * 1e6

so a white input of mean-square ``p`` reads ``p * 10^(cal/10) / (fs/1e6)``
on average, and summing ``S_k * df`` over a column gives the window-weighted
segment power.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .envgen import IQCapture
from .windows import blackman_harris, enbw_bins

FLOOR_DBM_PER_MHZ = -300.0


@dataclass(frozen=True)
class SpectrogramGrid:
    psd: np.ndarray  # (n_time, n_freq), dBm/MHz
    t0_s: float
    dt_s: float
    f_start_hz: float
    df_hz: float
    chain_boundaries: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        psd = np.asarray(self.psd, dtype=np.float64)
        if psd.ndim != 2:
            raise ValueError("psd must be a (time, frequency) matrix")
        if not np.all(np.isfinite(psd)):
            raise ValueError("psd entries must be finite (use the floor sentinel for zero power)")
        if not (self.dt_s > 0 and self.df_hz > 0):
            raise ValueError("dt_s and df_hz must be positive")
        psd = psd.copy() if psd is self.psd else psd
        psd.flags.writeable = False
        object.__setattr__(self, "psd", psd)
        object.__setattr__(self, "chain_boundaries", tuple(int(b) for b in self.chain_boundaries))

    @property
    def n_time(self) -> int:
        return self.psd.shape[0]

    @property
    def n_freq(self) -> int:
        return self.psd.shape[1]

    @property
    def freqs_hz(self) -> np.ndarray:
        return self.f_start_hz + self.df_hz * np.arange(self.n_freq)

    @property
    def times_s(self) -> np.ndarray:
        return self.t0_s + self.dt_s * np.arange(self.n_time)

    @property
    def duration_s(self) -> float:
        return self.n_time * self.dt_s

    @property
    def center_freq_hz(self) -> float:
        """Centre of the analysed span (the chain tuning for an unstitched grid)."""
        return self.f_start_hz + (self.n_freq // 2) * self.df_hz

    def linear(self) -> np.ndarray:
        """PSD in mW/MHz; floor-sentinel entries map to 0."""
        out = np.power(10.0, self.psd / 10.0)
        out[self.psd <= FLOOR_DBM_PER_MHZ] = 0.0
        return out

    def band_slice(self, f_lo: float, f_hi: float) -> slice:
        """Bins whose centres lie in ``[f_lo, f_hi)``."""
        i0 = max(0, math.ceil((f_lo - self.f_start_hz) / self.df_hz - 1e-9))
        i1 = min(self.n_freq, math.ceil((f_hi - self.f_start_hz) / self.df_hz - 1e-9))
        return slice(i0, i1)


def compute_spectrogram(cap: IQCapture, nfft: int = 8192, window: str = "blackman_harris_4term",
                        chunk_columns: int = 256) -> SpectrogramGrid:
    """One windowed FFT per non-overlapping segment; a trailing partial segment is dropped."""
    if window not in ("blackman_harris_4term", "blackman_harris"):
        raise ValueError(f"unsupported window {window!r}")
    n_cols = len(cap) // nfft
    if n_cols < 1:
        raise ValueError(f"capture has {len(cap)} samples, shorter than one {nfft}-sample segment")
    w = blackman_harris(nfft)
    fs = cap.sample_rate_hz
    scale = 10 ** (cap.cal_offset_db / 10) * 1e6 / (fs * np.sum(w**2))
    psd = np.empty((n_cols, nfft))
    for c0 in range(0, n_cols, chunk_columns):
        c1 = min(n_cols, c0 + chunk_columns)
        seg = cap.samples[c0 * nfft:c1 * nfft].astype(np.complex128).reshape(c1 - c0, nfft)
        spec = np.fft.fftshift(np.fft.fft(seg * w, axis=1), axes=1)
        p = (spec.real**2 + spec.imag**2) * scale
        with np.errstate(divide="ignore"):
            db = 10 * np.log10(p)
        psd[c0:c1] = np.maximum(db, FLOOR_DBM_PER_MHZ)
    df = fs / nfft
    return SpectrogramGrid(
        psd=psd,
        t0_s=cap.start_time_s,
        dt_s=nfft / fs,
        f_start_hz=cap.center_freq_hz - (nfft // 2) * df,
        df_hz=df,
    )


def kept_bins(n_freq: int, keep_fraction: float) -> slice:
    """Central ``keep_fraction`` of the bins, count rounded down to even."""
    keep = int(math.floor(keep_fraction * n_freq + 1e-9))
    keep -= keep % 2
    if keep <= 0:
        raise ValueError("keep_fraction leaves no bins")
    start = (n_freq - keep) // 2
    return slice(start, start + keep)


def stitch(grids, keep_fraction: float = 0.8) -> SpectrogramGrid:
    """Join per-chain grids into one wideband grid.

    Only the central ``keep_fraction`` of each chain survives; the rest is
    anti-aliasing transition band. Adjacent kept bands must abut: the gap
    between them, measured in bins, has to lie in [-0.5, 2], which admits the
    fractional misalignment of 160 MHz chain spacing on a 24.414 kHz grid plus
    the bin lost to even rounding. Time axes are aligned on ``t0_s`` to the
    nearest column and cropped to their common span.
    """
    grids = list(grids)
    if not grids:
        raise ValueError("nothing to stitch")
    dt, df = grids[0].dt_s, grids[0].df_hz
    for g in grids[1:]:
        if not math.isclose(g.dt_s, dt, rel_tol=1e-9) or not math.isclose(g.df_hz, df, rel_tol=1e-9):
            raise ValueError(
                f"grids differ in resolution: dt {g.dt_s} vs {dt} s, df {g.df_hz} vs {df} Hz"
            )
    grids.sort(key=lambda g: g.f_start_hz)
    sl = [kept_bins(g.n_freq, keep_fraction) for g in grids]
    for (a, sa), (b, sb) in zip(zip(grids, sl), zip(grids[1:], sl[1:])):
        hi_edge = a.f_start_hz + (sa.stop - 0.5) * df
        lo_edge = b.f_start_hz + (sb.start - 0.5) * df
        gap = (lo_edge - hi_edge) / df
        if gap < -0.5:
            raise ValueError(f"kept bands overlap by {-gap:.2f} bins at {hi_edge / 1e6:.3f} MHz")
        if gap > 2.0:
            raise ValueError(f"kept bands leave a {gap:.2f}-bin gap at {hi_edge / 1e6:.3f} MHz")

    ref = min(g.t0_s for g in grids)
    offsets = [int(round((g.t0_s - ref) / dt)) for g in grids]
    start = max(offsets)
    stop = min(o + g.n_time for o, g in zip(offsets, grids))
    if stop <= start:
        raise ValueError("grids do not overlap in time")
    parts, bounds, total = [], [], 0
    for g, s, o in zip(grids, sl, offsets):
        parts.append(g.psd[start - o:stop - o, s])
        if total:
            bounds.append(total)
        total += s.stop - s.start
    return SpectrogramGrid(
        psd=np.concatenate(parts, axis=1),
        t0_s=ref + start * dt,
        dt_s=dt,
        f_start_hz=grids[0].f_start_hz + sl[0].start * df,
        df_hz=df,
        chain_boundaries=tuple(bounds),
    )


def estimate_floor_dbm(grid: SpectrogramGrid) -> float:
    """Noise floor estimate from the grid median.

    A single-periodogram noise bin is exponentially distributed, whose median
    is ln 2 times the mean; the correction removes that bias.
    """
    med = float(np.median(grid.linear()))
    if med <= 0:
        return FLOOR_DBM_PER_MHZ
    return 10 * math.log10(med / math.log(2))


def occupancy(grid: SpectrogramGrid, band, threshold_db_above_floor: float = 10.0,
              floor_dbm_per_mhz: float | None = None) -> float:
    """Fraction of columns whose mean in-band PSD exceeds floor + threshold."""
    f_lo, f_hi = band
    if not f_hi > f_lo:
        raise ValueError("empty band")
    if f_lo < grid.f_start_hz - grid.df_hz / 2 or f_hi > grid.freqs_hz[-1] + grid.df_hz / 2:
        raise ValueError("band extends outside the grid")
    sl = grid.band_slice(f_lo, f_hi)
    if sl.stop <= sl.start:
        raise ValueError("band contains no bin centres")
    if floor_dbm_per_mhz is None:
        floor_dbm_per_mhz = estimate_floor_dbm(grid)
    mean_in_band = grid.linear()[:, sl].mean(axis=1)
    thresh = 10 ** ((floor_dbm_per_mhz + threshold_db_above_floor) / 10)
    return float(np.mean(mean_in_band > thresh))


def tone_power_dbm(grid: SpectrogramGrid, column: int, bin_index: int, nfft: int | None = None) -> float:
    """Power of a bin-centred tone from its peak-bin PSD (PSD times the window ENBW)."""
    nfft = nfft or grid.n_freq
    enbw_mhz = enbw_bins(nfft) * grid.df_hz / 1e6
    return float(grid.psd[column, bin_index] + 10 * math.log10(enbw_mhz))


# ---------------------------------------------------------------------------
# grid file: one JSON header line, then row-major little-endian float32 dBm/MHz

def save_grid(grid: SpectrogramGrid, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "dt_s": grid.dt_s,
        "df_hz": grid.df_hz,
        "f_start_hz": grid.f_start_hz,
        "t0_s": grid.t0_s,
        "n_time": grid.n_time,
        "n_freq": grid.n_freq,
        "chain_boundaries": list(grid.chain_boundaries),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        fh.write(grid.psd.astype("<f4").tobytes())
    return path


def load_grid(path: str | Path) -> SpectrogramGrid:
    path = Path(path)
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        payload = fh.read()
    n_t, n_f = int(header["n_time"]), int(header["n_freq"])
    data = np.frombuffer(payload, dtype="<f4")
    if data.size != n_t * n_f:
        raise ValueError(f"{path}: header promises {n_t}x{n_f} values, payload holds {data.size}")
    return SpectrogramGrid(
        psd=data.reshape(n_t, n_f).astype(np.float64),
        t0_s=float(header["t0_s"]),
        dt_s=float(header["dt_s"]),
        f_start_hz=float(header["f_start_hz"]),
        df_hz=float(header["df_hz"]),
        chain_boundaries=tuple(header.get("chain_boundaries", ())),
    )
