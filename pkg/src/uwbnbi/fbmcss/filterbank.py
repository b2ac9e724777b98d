"""FBMC-SS synthesis and analysis filter banks.

A frame holds ``P`` symbol slots of ``M`` samples each and is processed as one
circular block of ``Nf = P * M`` samples in the frequency domain. Subcarrier
``k`` (of ``K`` active ones, centred on DC) owns FFT bins around
``(k - K/2 + 1/2) * c`` with ``c = Nf / n_fft``. Symbols occupy the middle
slots only, so the prototype tails and the channel spread never wrap and the
circular frame equals the linear waveform.

Each stream symbol is repeated on all subcarriers of its stream, multiplied by
a fixed pseudo-random QPSK phase per subcarrier. Stream ``s`` owns
subcarriers ``s, s + L, s + 2L, ...``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from .prototype import design_prototype, symbol_spacing

GUARD_SLOTS = 4
_SQRT_HALF = math.sqrt(0.5)


@dataclass(frozen=True)
class FbmcConfig:
    n_subcarriers: int = 256
    n_fft: int = 512
    n_streams: int = 32
    symbols_per_block: int = 120
    overlap_factor: int = 12
    rolloff: float = 0.5
    modulation: str = "QPSK"
    fec_rate: float = 1.0 / 3.0
    info_bits: int = 2560
    fec_family: str = "qc-ldpc-r13-z256"
    bandwidth_hz: float = 499.2e6
    channel: int = 3
    target_coded_rate_bps: float = 83.2e6
    spreading_seed: int = 0x5EED

    def __post_init__(self):
        k, n, l = self.n_subcarriers, self.n_fft, self.n_streams
        if k < 1 or k & (k - 1):
            raise ValueError(f"n_subcarriers must be a power of two, got {k}")
        if n < k or n & (n - 1):
            raise ValueError(f"n_fft must be a power of two no smaller than n_subcarriers, got {n}")
        if l < 1 or k % l:
            raise ValueError(f"n_streams {l} must divide n_subcarriers {k}")
        if self.modulation != "QPSK":
            raise ValueError("only QPSK is supported")
        if self.coded_bits_per_block != self.coded_bits:
            raise ValueError(
                f"a block carries {self.coded_bits_per_block} coded bits but a codeword has "
                f"{self.coded_bits}"
            )
        rate = self.coded_rate_bps
        if abs(rate - self.target_coded_rate_bps) > 0.01 * self.target_coded_rate_bps:
            raise ValueError(
                f"configuration gives {rate / 1e6:.3f} Mbps coded, target is "
                f"{self.target_coded_rate_bps / 1e6:.3f} Mbps"
            )

    @property
    def sample_rate_hz(self) -> float:
        return self.bandwidth_hz * self.n_fft / self.n_subcarriers

    @property
    def spacing(self) -> int:
        """Samples per symbol slot."""
        return symbol_spacing(self.n_fft, self.rolloff)

    @property
    def subcarrier_spacing_hz(self) -> float:
        return self.sample_rate_hz / self.n_fft

    @property
    def symbol_rate_hz(self) -> float:
        return self.sample_rate_hz / self.spacing

    @property
    def spreading_factor(self) -> int:
        return self.n_subcarriers // self.n_streams

    @property
    def coded_rate_bps(self) -> float:
        return 2 * self.n_streams * self.symbol_rate_hz

    @property
    def info_rate_bps(self) -> float:
        return self.coded_rate_bps * self.fec_rate

    @property
    def coded_bits(self) -> int:
        return int(round(self.info_bits / self.fec_rate))

    @property
    def coded_bits_per_block(self) -> int:
        return 2 * self.n_streams * self.symbols_per_block

    @property
    def packet_duration_s(self) -> float:
        return self.symbols_per_block / self.symbol_rate_hz

    @property
    def n_slots(self) -> int:
        """Slots per frame: data plus prototype tails plus a guard, with an even bin count per subcarrier."""
        p = self.symbols_per_block + self.overlap_factor + GUARD_SLOTS
        while (p * self.spacing) % self.n_fft or ((p * self.spacing) // self.n_fft) % 2:
            p += 1
        return p

    @property
    def frame_len(self) -> int:
        return self.n_slots * self.spacing

    @property
    def first_slot(self) -> int:
        return self.overlap_factor // 2

    def stream_subcarriers(self, s: int) -> np.ndarray:
        return np.arange(s, self.n_subcarriers, self.n_streams)

    def subcarrier_freqs_hz(self) -> np.ndarray:
        """Subcarrier centre offsets from the carrier."""
        k = np.arange(self.n_subcarriers) - self.n_subcarriers // 2 + 0.5
        return k * self.subcarrier_spacing_hz

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(sample_rate_hz=self.sample_rate_hz, coded_rate_bps=self.coded_rate_bps,
                 info_rate_bps=self.info_rate_bps, symbol_rate_hz=self.symbol_rate_hz)
        return d


class FilterBank:
    """Frequency-domain synthesis/analysis for one configuration."""

    def __init__(self, cfg: FbmcConfig):
        self.cfg = cfg
        p, nf = cfg.n_slots, cfg.frame_len
        self.P, self.Nf = p, nf
        c = nf // cfg.n_fft
        g = design_prototype(cfg.n_fft, cfg.overlap_factor, cfg.rolloff)
        g = g / np.linalg.norm(g)
        half = g.size // 2
        circ = np.zeros(nf)
        circ[:half] = g[half:]
        circ[nf - half:] = g[:half]
        full = np.fft.fft(circ)
        offsets = np.arange(-p, p)
        self.taps = full[offsets % nf]
        centres = (np.arange(cfg.n_subcarriers) - cfg.n_subcarriers // 2) * c + c // 2
        self.bins = (centres[:, None] + offsets[None, :]) % nf
        self.alias = (offsets % p)
        rng = np.random.default_rng(cfg.spreading_seed)
        self.spreading = np.exp(0.5j * np.pi * rng.integers(0, 4, cfg.n_subcarriers))
        self.stream_of = np.arange(cfg.n_subcarriers) % cfg.n_streams
        self.data_slots = slice(cfg.first_slot, cfg.first_slot + cfg.symbols_per_block)

    def synthesize_spectrum(self, slots: np.ndarray) -> np.ndarray:
        """Frame spectrum (length Nf) from per-subcarrier slot symbols (K x P)."""
        d = np.fft.fft(slots, axis=1)[:, self.alias] * self.taps
        idx = self.bins.ravel()
        re = np.bincount(idx, d.real.ravel(), minlength=self.Nf)
        im = np.bincount(idx, d.imag.ravel(), minlength=self.Nf)
        return re + 1j * im

    def analyze_spectrum(self, spec: np.ndarray) -> np.ndarray:
        """Matched-filter outputs (K x P) of every subcarrier at every slot."""
        folded = (spec[self.bins] * np.conj(self.taps)).reshape(len(self.bins), 2, self.P).sum(axis=1)
        return np.fft.ifft(folded, axis=1) * (self.P / self.Nf)

    def subcarrier_slots(self, stream_symbols: np.ndarray, amplitudes=None) -> np.ndarray:
        """Spread (L x n_sym) stream symbols onto the K x P slot grid."""
        cfg = self.cfg
        slots = np.zeros((cfg.n_subcarriers, self.P), dtype=complex)
        gain = self.spreading if amplitudes is None else self.spreading * np.asarray(amplitudes)
        slots[:, self.data_slots] = gain[:, None] * stream_symbols[self.stream_of]
        return slots


@lru_cache(maxsize=8)
def filter_bank(cfg: FbmcConfig) -> FilterBank:
    return FilterBank(cfg)


def qpsk_map(bits) -> np.ndarray:
    """Gray QPSK, bit 0 -> +1 on each rail, unit average energy."""
    b = np.asarray(bits, dtype=np.int8).reshape(-1, 2)
    return ((1 - 2 * b[:, 0]) + 1j * (1 - 2 * b[:, 1])) * _SQRT_HALF


def bits_to_streams(coded_bits, cfg: FbmcConfig) -> np.ndarray:
    """Symbol ``q`` of the block goes to stream ``q mod L`` at time ``q // L``."""
    sym = qpsk_map(coded_bits)
    if sym.size % (cfg.n_streams * cfg.symbols_per_block):
        raise ValueError(
            f"{2 * sym.size} bits do not fill whole blocks of {cfg.coded_bits_per_block} bits"
        )
    return sym.reshape(-1, cfg.symbols_per_block, cfg.n_streams).transpose(0, 2, 1)


def modulate(coded_bits, cfg: FbmcConfig, amplitudes=None) -> np.ndarray:
    """Baseband samples at ``cfg.sample_rate_hz``, one ``frame_len`` frame per block.

    ``amplitudes`` optionally scales each subcarrier (length K).
    """
    bits = np.asarray(coded_bits)
    if bits.size % cfg.coded_bits_per_block:
        raise ValueError(
            f"{bits.size} bits is not a whole number of {cfg.coded_bits_per_block}-bit blocks"
        )
    fb = filter_bank(cfg)
    frames = [np.fft.ifft(fb.synthesize_spectrum(fb.subcarrier_slots(s, amplitudes)))
              for s in bits_to_streams(bits, cfg)]
    return np.concatenate(frames)


def analyze(y, cfg: FbmcConfig) -> np.ndarray:
    """Per-subcarrier matched-filter outputs at the data slots, shape (blocks, K, symbols)."""
    y = np.asarray(y, dtype=complex)
    fb = filter_bank(cfg)
    if y.size % fb.Nf:
        raise ValueError(f"{y.size} samples is not a whole number of {fb.Nf}-sample frames")
    out = [fb.analyze_spectrum(np.fft.fft(f))[:, fb.data_slots] for f in y.reshape(-1, fb.Nf)]
    return np.stack(out)


def despread(r: np.ndarray, cfg: FbmcConfig) -> np.ndarray:
    """Remove the per-subcarrier spreading phase from analysis outputs (..., K, symbols)."""
    return r * np.conj(filter_bank(cfg).spreading)[:, None]
