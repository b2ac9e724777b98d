"""Synthetic interference environments and IQ capture files.

A capture stores complex baseband samples in full-scale units together with a
calibration offset: a stream of mean-square 1.0 carries ``cal_offset_db`` dBm
of total power. Emitters are specified by the PSD they produce in a
calibrated spectrogram (dBm/MHz), which for a tone means the reading of its
peak bin with the default 8192-point Blackman-Harris analysis.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import fft as sp_fft

from .windows import enbw_bins

KINDS = ("tone", "ofdm_burst", "wideband_carrier")
DEFAULT_PERIOD_S = 1e-3
# mean-square target for the loudest possible instant, leaves ~20 dB of headroom
_TARGET_MS = 0.01


@dataclass(frozen=True)
class IQCapture:
    samples: np.ndarray
    sample_rate_hz: float
    center_freq_hz: float
    cal_offset_db: float = 0.0
    start_time_s: float = 0.0

    def __post_init__(self):
        x = np.ascontiguousarray(self.samples, dtype=np.complex64)
        if x.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if not np.all(np.isfinite(x.view(np.float32))):
            raise ValueError("capture contains non-finite samples")
        if x.size and np.max(np.abs(x)) > 1.0 + 1e-6:
            raise ValueError("samples exceed full scale (|x| > 1)")
        x.flags.writeable = False
        object.__setattr__(self, "samples", x)

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def power_mw(self) -> np.ndarray:
        """Instantaneous power of each sample in mW."""
        return 10 ** (self.cal_offset_db / 10) * np.abs(self.samples.astype(np.complex128)) ** 2

    def scaled(self) -> np.ndarray:
        """Samples in sqrt(mW) units (complex128)."""
        return self.samples.astype(np.complex128) * 10 ** (self.cal_offset_db / 20)


@dataclass(frozen=True)
class EmitterSpec:
    kind: str
    center_freq_hz: float
    psd_dbm_per_mhz: float
    bandwidth_hz: float = 0.0
    duty_cycle: float = 1.0
    mean_on_s: float | None = None
    mean_off_s: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown emitter kind {self.kind!r}; expected one of {KINDS}")
        if not 0.0 <= self.duty_cycle <= 1.0:
            raise ValueError(f"duty_cycle {self.duty_cycle} outside [0, 1]")
        if self.kind != "tone" and not self.bandwidth_hz > 0:
            raise ValueError(f"{self.kind} emitter needs a positive bandwidth_hz")
        if self.mean_on_s is not None and self.mean_off_s is not None:
            if self.mean_on_s < 0 or self.mean_off_s < 0 or self.mean_on_s + self.mean_off_s <= 0:
                raise ValueError("burst means must be non-negative with a positive sum")
            implied = self.mean_on_s / (self.mean_on_s + self.mean_off_s)
            if abs(implied - self.duty_cycle) > 1e-9:
                raise ValueError(
                    f"mean_on/(mean_on+mean_off) = {implied:.12g} does not match "
                    f"duty_cycle {self.duty_cycle}"
                )

    def burst_means(self) -> tuple[float, float]:
        if self.mean_on_s is not None and self.mean_off_s is not None:
            return self.mean_on_s, self.mean_off_s
        return self.duty_cycle * DEFAULT_PERIOD_S, (1 - self.duty_cycle) * DEFAULT_PERIOD_S

    @property
    def band_hz(self) -> tuple[float, float]:
        half = self.bandwidth_hz / 2
        return self.center_freq_hz - half, self.center_freq_hz + half


@dataclass(frozen=True)
class EnvironmentSpec:
    noise_psd_dbm_per_mhz: float
    duration_s: float
    seed: int = 0
    emitters: tuple[EmitterSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.duration_s > 0:
            raise ValueError("duration_s must be positive")
        object.__setattr__(self, "emitters", tuple(self.emitters))

    @classmethod
    def from_dict(cls, d: dict) -> "EnvironmentSpec":
        known = {"noise_psd_dbm_per_mhz", "duration_s", "seed", "emitters"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown environment field(s): {sorted(extra)}")
        emitters = []
        for i, e in enumerate(d.get("emitters", [])):
            try:
                emitters.append(EmitterSpec(**e))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"emitters[{i}]: {exc}") from None
        return cls(
            noise_psd_dbm_per_mhz=float(d["noise_psd_dbm_per_mhz"]),
            duration_s=float(d["duration_s"]),
            seed=int(d.get("seed", 0)),
            emitters=tuple(emitters),
        )

    def to_dict(self) -> dict:
        return {
            "noise_psd_dbm_per_mhz": self.noise_psd_dbm_per_mhz,
            "duration_s": self.duration_s,
            "seed": self.seed,
            "emitters": [asdict(e) for e in self.emitters],
        }


def _gate(rng: np.random.Generator, e: EmitterSpec, n: int, fs: float) -> np.ndarray | None:
    """Boolean on/off mask per sample, or None when always on."""
    if e.duty_cycle >= 1.0:
        return None
    if e.duty_cycle <= 0.0:
        return np.zeros(n, dtype=bool)
    mean_on, mean_off = e.burst_means()
    duration = n / fs
    state = bool(rng.random() < e.duty_cycle)
    # stationary start: the first interval is a fresh exponential draw (memoryless)
    edges, t = [0.0], 0.0
    states = []
    while t < duration:
        t += rng.exponential(mean_on if state else mean_off)
        states.append(state)
        edges.append(t)
        state = not state
    idx = np.minimum(np.round(np.asarray(edges) * fs).astype(np.int64), n)
    mask = np.zeros(n, dtype=bool)
    for on, a, b in zip(states, idx[:-1], idx[1:]):
        if on:
            mask[a:b] = True
    return mask


def _emitter_waveform(rng: np.random.Generator, e: EmitterSpec, n: int, fs: float,
                      offset_hz: float, band: tuple[float, float], nfft_ref: int) -> np.ndarray:
    """Unit-calibrated waveform (sqrt(mW)) of an always-on emitter."""
    psd_mw = 10 ** (e.psd_dbm_per_mhz / 10)
    if e.kind == "tone":
        df = fs / nfft_ref
        k = round(offset_hz / df)
        power_mw = psd_mw * enbw_bins(nfft_ref) * df / 1e6
        phase = rng.uniform(0, 2 * np.pi)
        t = np.arange(n)
        return math.sqrt(power_mw) * np.exp(1j * (2 * np.pi * k * t / nfft_ref + phase))
    lo, hi = band
    nfast = sp_fft.next_fast_len(n)
    f = np.fft.fftfreq(nfast, 1 / fs)
    inband = (f >= lo) & (f < hi)
    nb = int(inband.sum())
    if nb == 0:
        return np.zeros(n, complex)
    spec = np.zeros(nfast, complex)
    spec[inband] = rng.standard_normal(nb) + 1j * rng.standard_normal(nb)
    x = sp_fft.ifft(spec)[:n]
    power_mw = psd_mw * (nb * fs / nfast) / 1e6
    # exact normalisation so the realised in-band PSD equals the requested level on average
    return x * math.sqrt(power_mw / np.mean(np.abs(x) ** 2))


def synth_environment(spec: EnvironmentSpec, chain_cf_hz: float, chain_rate_hz: float,
                      cal_offset_db: float | None = None, nfft_ref: int = 8192,
                      out_of_band: str = "error") -> IQCapture:
    """Render an environment as a calibrated capture for one radio chain.

    Parameters
    ----------
    spec : EnvironmentSpec
    chain_cf_hz, chain_rate_hz : float
        Tuning of the chain. The capture spans ``chain_cf_hz +/- chain_rate_hz/2``.
    cal_offset_db : float, optional
        Calibration of the output. By default it is chosen so that the
        loudest state (noise plus every emitter on) sits 20 dB below full scale.
    nfft_ref : int
        Analysis length used to interpret tone PSDs. Tones are placed on the
        nearest bin centre of that analysis grid.
    out_of_band : {"error", "clip"}
        What to do with emitters that leave the chain's Nyquist span. ``"clip"``
        drops emitters entirely outside the span and trims partial overlaps,
        which is what multi-chain rendering of one environment needs.

    The output depends only on the arguments; every emitter has its own
    sub-seed derived from ``spec.seed``, and its on/off timeline is drawn from
    a stream that does not depend on the chain tuning, so chains rendered from
    one environment at one rate share burst timing.
    """
    if not chain_rate_hz > 0:
        raise ValueError("chain_rate_hz must be positive")
    if out_of_band not in ("error", "clip"):
        raise ValueError("out_of_band must be 'error' or 'clip'")
    fs = float(chain_rate_hz)
    n = int(round(spec.duration_s * fs))
    if n < 1:
        raise ValueError("duration too short for a single sample")
    nyq_lo, nyq_hi = chain_cf_hz - fs / 2, chain_cf_hz + fs / 2

    children = np.random.SeedSequence(spec.seed).spawn(1 + len(spec.emitters))
    active = []
    for i, (e, ss) in enumerate(zip(spec.emitters, children[1:])):
        lo, hi = (e.center_freq_hz,) * 2 if e.kind == "tone" else e.band_hz
        outside = lo < nyq_lo or hi > nyq_hi if e.kind != "tone" else not nyq_lo <= lo < nyq_hi
        if outside:
            if out_of_band == "error":
                raise ValueError(
                    f"emitter {i} ({e.kind} at {e.center_freq_hz / 1e6:.3f} MHz) extends outside "
                    f"the chain span [{nyq_lo / 1e6:.3f}, {nyq_hi / 1e6:.3f}] MHz"
                )
            if hi <= nyq_lo or lo >= nyq_hi or e.kind == "tone":
                continue
            lo, hi = max(lo, nyq_lo), min(hi, nyq_hi)
        if e.duty_cycle <= 0.0:
            continue
        active.append((i, e, ss, (lo - chain_cf_hz, hi - chain_cf_hz)))

    noise_mw = 10 ** (spec.noise_psd_dbm_per_mhz / 10) * fs / 1e6
    rng_noise = np.random.default_rng(children[0])
    x = (rng_noise.standard_normal(n) + 1j * rng_noise.standard_normal(n)) * math.sqrt(noise_mw / 2)
    peak_mw = noise_mw
    for _, e, ss, band in active:
        gate_ss, wave_ss = ss.spawn(2)
        w = _emitter_waveform(np.random.default_rng(wave_ss), e, n, fs,
                              e.center_freq_hz - chain_cf_hz, band, nfft_ref)
        peak_mw += float(np.mean(np.abs(w) ** 2))
        mask = _gate(np.random.default_rng(gate_ss), e, n, fs)
        if mask is not None:
            w[~mask] = 0
        x += w

    if cal_offset_db is None:
        cal_offset_db = 10 * math.log10(peak_mw / _TARGET_MS)
    y = x * 10 ** (-cal_offset_db / 20)
    peak = float(np.max(np.abs(y))) if n else 0.0
    if peak > 1.0:
        y /= peak
        cal_offset_db += 20 * math.log10(peak)
    return IQCapture(y.astype(np.complex64), fs, float(chain_cf_hz), float(cal_offset_db), 0.0)


# ---------------------------------------------------------------------------
# file format: interleaved little-endian float32 I/Q plus a JSON sidecar

def sidecar_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_suffix(".json") if path.suffix else path.with_name(path.name + ".json")


def export_iq(cap: IQCapture, path: str | Path) -> tuple[Path, Path]:
    path = Path(path)
    side = sidecar_path(path)
    if side == path:
        raise ValueError("IQ payload path must not end in .json")
    path.parent.mkdir(parents=True, exist_ok=True)
    inter = np.empty(2 * len(cap), dtype="<f4")
    inter[0::2] = cap.samples.real
    inter[1::2] = cap.samples.imag
    inter.tofile(path)
    meta = {
        "sample_rate_hz": cap.sample_rate_hz,
        "center_freq_hz": cap.center_freq_hz,
        "cal_offset_db": cap.cal_offset_db,
        "start_time_s": cap.start_time_s,
        "sample_count": len(cap),
    }
    side.write_text(json.dumps(meta, indent=2) + "\n")
    return path, side


def import_iq(path: str | Path) -> IQCapture:
    path = Path(path)
    side = sidecar_path(path)
    if not side.exists():
        raise FileNotFoundError(f"missing sidecar {side} for {path}")
    meta = json.loads(side.read_text())
    missing = {"sample_rate_hz", "center_freq_hz", "cal_offset_db", "start_time_s",
               "sample_count"} - set(meta)
    if missing:
        raise ValueError(f"sidecar {side} lacks field(s) {sorted(missing)}")
    if not float(meta["sample_rate_hz"]) > 0:
        raise ValueError(f"sidecar {side}: sample_rate_hz must be positive")
    raw = np.fromfile(path, dtype="<f4")
    expected = 2 * int(meta["sample_count"])
    if raw.size != expected:
        raise ValueError(
            f"{path}: expected {expected} float32 values ({meta['sample_count']} complex samples, "
            f"{4 * expected} bytes), found {raw.size} values ({path.stat().st_size} bytes)"
        )
    if not np.all(np.isfinite(raw)):
        raise ValueError(f"{path}: payload contains non-finite samples")
    samples = (raw[0::2] + 1j * raw[1::2]).astype(np.complex64)
    return IQCapture(samples, float(meta["sample_rate_hz"]), float(meta["center_freq_hz"]),
                     float(meta["cal_offset_db"]), float(meta["start_time_s"]))
