"""Band capacity and outage probability from interference grids.

Two receivers are compared. The naive one sees only the band-average SINR,
``W log2(1 + sum(s) / sum(n + i))``. The suppressing one treats every grid bin
as its own AWGN sub-channel and sums ``df log2(1 + s/(n + i))``; by convexity
of ``x -> log2(1 + s/x)`` it is never worse when ``s`` is flat.

An outage occurs in a packet interval when the capacity over that interval is
below the transmission rate.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .propagation import ChannelPlan, NoiseModel, PathLossParams, db_to_lin, noise_psd_dbm_mhz, rx_psd_dbm_mhz
from .specgram import FLOOR_DBM_PER_MHZ, SpectrogramGrid

HIRATE_BPS = 124.75e6
HIRATE_INTERVAL_S = 40.96e-6
LORATES_BPS = (31.25e3, 110e3, 250e3)
LORATE_INTERVAL_S = 30e-3
MIN_INTERVALS = 10
# a stitched grid may fall short of the nominal band by the bins lost to even rounding
BAND_EDGE_TOLERANCE = 1e-3
# log1p keeps low-SINR bins accurate
_LN2 = math.log(2.0)


@dataclass(frozen=True)
class SinrProfile:
    """Per-bin signal, noise and interference PSDs (mW/MHz) on bins ``df_hz`` wide."""

    s: np.ndarray
    n: np.ndarray
    i: np.ndarray
    df_hz: float

    def __post_init__(self):
        s, n, i = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (self.s, self.n, self.i))
        if not (s.shape == n.shape == i.shape) or s.ndim != 1:
            raise ValueError("s, n and i must be equal-length vectors")
        if s.size == 0:
            raise ValueError("profile is empty")
        if not self.df_hz > 0:
            raise ValueError("df_hz must be positive")
        if np.any(s < 0) or np.any(i < 0) or np.any(np.isnan(i)):
            raise ValueError("signal and interference PSDs must be non-negative")
        if not np.all(np.isfinite(s)):
            raise ValueError("signal PSD must be finite")
        if np.any(n <= 0) or not np.all(np.isfinite(n)):
            raise ValueError("noise PSD must be strictly positive and finite")
        for name, a in (("s", s), ("n", n), ("i", i)):
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    @property
    def bandwidth_hz(self) -> float:
        return self.s.size * self.df_hz

    def sinr(self) -> np.ndarray:
        return self.s / (self.n + self.i)


def capacity_naive(p: SinrProfile) -> float:
    """Capacity (bps) at the band-average SINR."""
    sinr = p.s.sum() / (p.n + p.i).sum()
    return float(p.bandwidth_hz * np.log1p(sinr) / _LN2)


def capacity_segmented(p: SinrProfile) -> float:
    """Sum of per-bin AWGN capacities (bps)."""
    return float(p.df_hz * np.sum(np.log1p(p.sinr())) / _LN2)


def _band_bins(grid: SpectrogramGrid, plan: ChannelPlan) -> slice:
    """Bins whose centres lie in the channel band.

    The grid must cover the band up to ``BAND_EDGE_TOLERANCE`` of its width.
    """
    half = grid.df_hz / 2 + BAND_EDGE_TOLERANCE * plan.bw_hz
    if plan.f_lo_hz < grid.f_start_hz - half or plan.f_hi_hz > grid.freqs_hz[-1] + half:
        raise ValueError(
            f"channel {plan.id} band [{plan.f_lo_hz / 1e6:.1f}, {plan.f_hi_hz / 1e6:.1f}] MHz "
            f"is not covered by the grid [{(grid.f_start_hz - grid.df_hz / 2) / 1e6:.1f}, "
            f"{(grid.freqs_hz[-1] + grid.df_hz / 2) / 1e6:.1f}] MHz"
        )
    sl = grid.band_slice(plan.f_lo_hz, plan.f_hi_hz)
    if sl.stop <= sl.start:
        raise ValueError("channel band holds no grid bins")
    return sl


def _window_columns(grid: SpectrogramGrid, t_window) -> slice:
    t_a, t_b = t_window
    c0 = max(0, math.ceil((t_a - grid.t0_s) / grid.dt_s - 1e-9))
    c1 = min(grid.n_time, math.ceil((t_b - grid.t0_s) / grid.dt_s - 1e-9))
    if c1 <= c0:
        raise ValueError(f"time window [{t_a}, {t_b}) s contains no grid column")
    return slice(c0, c1)


def build_profile(grid: SpectrogramGrid, t_window, plan: ChannelPlan, d: float,
                  plp: PathLossParams, nm: NoiseModel | None = None) -> SinrProfile:
    """SINR profile over the channel band for columns starting in ``[t_a, t_b)``.

    Interference is whatever the grid holds above the equipment noise, after
    averaging the window's columns in linear units.
    """
    fb = _band_bins(grid, plan)
    tc = _window_columns(grid, t_window)
    f = grid.freqs_hz[fb]
    n = db_to_lin(noise_psd_dbm_mhz(f, nm))
    measured = _mean_linear(grid, tc, fb)
    return SinrProfile(
        s=db_to_lin(rx_psd_dbm_mhz(d, f, plp)),
        n=n,
        i=np.maximum(0.0, measured - n),
        df_hz=grid.df_hz,
    )


@dataclass(frozen=True)
class OutageCurve:
    rate_bps: float
    interval_s: float
    distances_m: tuple[float, ...]
    pout_suppressed: tuple[float, ...]
    pout_unsuppressed: tuple[float, ...]
    channel: int
    environment: str
    n_intervals: int

    def __post_init__(self):
        if not len(self.distances_m) == len(self.pout_suppressed) == len(self.pout_unsuppressed):
            raise ValueError("distance and probability lists differ in length")
        for p in (*self.pout_suppressed, *self.pout_unsuppressed):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} outside [0, 1]")

    def metadata(self) -> dict:
        meta = asdict(self)
        for k in ("distances_m", "pout_suppressed", "pout_unsuppressed"):
            meta.pop(k)
        return meta

    def write(self, csv_path: str | Path) -> tuple[Path, Path]:
        """CSV of the curves plus a ``<stem>.json`` metadata file beside it."""
        csv_path = Path(csv_path)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["distance_m", "pout_suppressed", "pout_unsuppressed"])
            for row in zip(self.distances_m, self.pout_suppressed, self.pout_unsuppressed):
                w.writerow([repr(float(v)) for v in row])
        meta_path = csv_path.with_suffix(".json")
        meta_path.write_text(json.dumps(self.metadata(), indent=2) + "\n")
        return csv_path, meta_path

    @classmethod
    def read(cls, csv_path: str | Path) -> "OutageCurve":
        csv_path = Path(csv_path)
        with open(csv_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        meta = json.loads(csv_path.with_suffix(".json").read_text())
        return cls(
            distances_m=tuple(float(r["distance_m"]) for r in rows),
            pout_suppressed=tuple(float(r["pout_suppressed"]) for r in rows),
            pout_unsuppressed=tuple(float(r["pout_unsuppressed"]) for r in rows),
            **meta,
        )


def interval_columns(n_time: int, dt_s: float, interval_s: float) -> list[slice]:
    """Column ranges of the consecutive packet intervals that fit in the grid."""
    if interval_s < dt_s * (1 - 1e-9):
        raise ValueError(f"interval {interval_s} s is shorter than one column ({dt_s} s)")
    count = math.floor(n_time * dt_s / interval_s + 1e-9)
    edges = [math.floor(j * interval_s / dt_s + 1e-9) for j in range(count + 1)]
    return [slice(a, b) for a, b in zip(edges[:-1], edges[1:])]


def interval_capacities(grid: SpectrogramGrid, plan: ChannelPlan, plp: PathLossParams,
                        nm: NoiseModel | None, interval_s: float, distances,
                        chunk: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Both capacities for every (distance, interval) pair, each shaped (n_dist, n_intervals)."""
    fb = _band_bins(grid, plan)
    f = grid.freqs_hz[fb]
    n = db_to_lin(noise_psd_dbm_mhz(f, nm))
    intervals = interval_columns(grid.n_time, grid.dt_s, interval_s)
    if len(intervals) < MIN_INTERVALS:
        raise ValueError(
            f"grid of {grid.duration_s:.6g} s holds only {len(intervals)} intervals of "
            f"{interval_s:.6g} s; at least {MIN_INTERVALS} are needed"
        )
    distances = np.asarray(distances, dtype=float)
    signal = np.stack([db_to_lin(rx_psd_dbm_mhz(d, f, plp)) for d in distances])
    width = f.size * grid.df_hz
    c_seg = np.empty((distances.size, len(intervals)))
    c_naive = np.empty_like(c_seg)
    for j0 in range(0, len(intervals), chunk):
        block = intervals[j0:j0 + chunk]
        # noise + interference per (interval, bin): the measured level, never below equipment noise
        ni = np.stack([np.maximum(n, _mean_linear(grid, sl, fb)) for sl in block])
        ni_total = ni.sum(axis=1)
        for k, s in enumerate(signal):
            c_seg[k, j0:j0 + len(block)] = grid.df_hz * np.log1p(s / ni).sum(axis=1) / _LN2
            c_naive[k, j0:j0 + len(block)] = width * np.log1p(s.sum() / ni_total) / _LN2
    return c_seg, c_naive


def _mean_linear(grid: SpectrogramGrid, cols: slice, bins: slice) -> np.ndarray:
    block = grid.psd[cols, bins]
    lin = np.power(10.0, block / 10.0)
    lin[block <= FLOOR_DBM_PER_MHZ] = 0.0
    return lin.mean(axis=0)


def outage_curve(grid: SpectrogramGrid, plan: ChannelPlan, plp: PathLossParams,
                 nm: NoiseModel | None, rate_bps: float, interval_s: float,
                 distances) -> OutageCurve:
    """Fraction of packet intervals whose capacity falls below ``rate_bps``, per distance."""
    if rate_bps < 0:
        raise ValueError("rate must be non-negative")
    distances = [float(d) for d in distances]
    if not distances:
        raise ValueError("no distances given")
    c_seg, c_naive = interval_capacities(grid, plan, plp, nm, interval_s, distances)
    return OutageCurve(
        rate_bps=float(rate_bps),
        interval_s=float(interval_s),
        distances_m=tuple(distances),
        pout_suppressed=tuple(float(v) for v in np.mean(c_seg < rate_bps, axis=1)),
        pout_unsuppressed=tuple(float(v) for v in np.mean(c_naive < rate_bps, axis=1)),
        channel=plan.id,
        environment=plp.environment,
        n_intervals=c_seg.shape[1],
    )
