"""Ready-made synthetic interference scenarios.

The reference scenario is a noisy band with one strong partial-band emitter
that is active about 30% of the time, a persistent moderate carrier and a few
weak tones. It is
rendered either as one wideband capture (for the link simulator) or as a set
of 200 MS/s radio chains spaced 160 MHz apart and stitched into one grid.
"""

from __future__ import annotations

import math

from .envgen import EmitterSpec, EnvironmentSpec, synth_environment
from .propagation import NoiseModel
from .specgram import compute_spectrogram, stitch

CHAIN_RATE_HZ = 200e6
CHAIN_SPACING_HZ = 160e6
SURVEY_NOISE_DBM_PER_MHZ = -85.0


def partial_band_environment(center_hz: float, duration_s: float, seed: int = 0,
                             noise_dbm_per_mhz: float = SURVEY_NOISE_DBM_PER_MHZ,
                             interferer_offset_hz: float = 60e6,
                             interferer_bw_hz: float = 40e6,
                             interferer_excess_db: float = 30.0,
                             duty_cycle: float = 0.3, mean_period_s: float = 0.5e-3) -> EnvironmentSpec:
    """Noise floor plus emitters around ``center_hz``.

    Emitters: one bursty partial-band emitter, one always-on 20 MHz carrier
    20 dB above the floor at -100 MHz, and three weak tones.
    """
    on = duty_cycle * mean_period_s
    emitters = [
        EmitterSpec("ofdm_burst", center_hz + interferer_offset_hz,
                    noise_dbm_per_mhz + interferer_excess_db, interferer_bw_hz,
                    duty_cycle, on, mean_period_s - on),
        EmitterSpec("wideband_carrier", center_hz - 100e6, noise_dbm_per_mhz + 20.0, 20e6),
        EmitterSpec("tone", center_hz - 137e6, noise_dbm_per_mhz + 15.0),
        EmitterSpec("tone", center_hz - 31e6, noise_dbm_per_mhz + 10.0),
        EmitterSpec("tone", center_hz + 173e6, noise_dbm_per_mhz + 12.0),
    ]
    return EnvironmentSpec(noise_dbm_per_mhz, duration_s, seed, tuple(emitters))


def survey_noise_model(noise_dbm_per_mhz: float = SURVEY_NOISE_DBM_PER_MHZ) -> NoiseModel:
    return NoiseModel(noise_dbm_per_mhz)


def chain_centers(center_hz: float, n_chains: int, spacing_hz: float = CHAIN_SPACING_HZ) -> list[float]:
    return [center_hz + (i - (n_chains - 1) / 2) * spacing_hz for i in range(n_chains)]


def chains_for_band(bandwidth_hz: float, spacing_hz: float = CHAIN_SPACING_HZ) -> int:
    return max(1, math.ceil(bandwidth_hz / spacing_hz - 1e-9))


def stitched_grid(spec: EnvironmentSpec, center_hz: float, n_chains: int, nfft: int = 8192):
    """Render ``spec`` on ``n_chains`` adjacent chains and stitch their spectrograms."""
    grids = []
    for cf in chain_centers(center_hz, n_chains):
        cap = synth_environment(spec, cf, CHAIN_RATE_HZ, out_of_band="clip")
        grids.append(compute_spectrogram(cap, nfft))
        del cap
    return stitch(grids)
