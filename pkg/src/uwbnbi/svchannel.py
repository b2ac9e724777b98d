"""IEEE 802.15.4a Saleh-Valenzuela multipath channels.

Clusters arrive as a Poisson process (rate ``cluster_rate_per_ns``), the
number of clusters is Poisson with mean ``mean_clusters`` (at least one), and
rays inside a cluster follow a two-rate mixed Poisson process. Cluster powers
decay exponentially with lognormal cluster shadowing; rays decay
exponentially within their cluster. Tap magnitudes are Nakagami with a
lognormal m-factor and phases are uniform. Every realization is normalized
to unit energy; path loss is applied elsewhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

# rays are drawn until their mean power has decayed by exp(-RAY_SPAN)
RAY_SPAN = 10.0
MIN_NAKAGAMI_M = 0.5


@dataclass(frozen=True)
class SvParams:
    cluster_rate_per_ns: float
    mean_clusters: float
    ray_rate_1_per_ns: float
    ray_rate_2_per_ns: float
    ray_mix_beta: float
    cluster_decay_ns: float
    ray_decay_ns: float
    ray_decay_slope: float
    cluster_shadow_db: float
    m0_db: float
    m_slope_db_per_ns: float
    m_sigma_db: float
    m_sigma_slope_db_per_ns: float
    first_path_m: float | None = None


def load_sv_params(environment: str, path: str | Path | None = None) -> SvParams:
    if path:
        data = json.loads(Path(path).read_text())
    else:
        data = json.loads(resources.files("uwbnbi.data").joinpath("sv_802154a.json").read_text())
    try:
        return SvParams(**data["environments"][environment])
    except KeyError:
        raise ValueError(
            f"no multipath parameters for {environment!r}; known: {sorted(data['environments'])}"
        ) from None


@dataclass(frozen=True)
class CirRealization:
    delays_s: np.ndarray
    gains: np.ndarray
    environment: str = ""
    seed: int | None = None

    def __post_init__(self):
        d = np.asarray(self.delays_s, dtype=float)
        g = np.asarray(self.gains, dtype=complex)
        if d.shape != g.shape or d.ndim != 1 or d.size == 0:
            raise ValueError("delays and gains must be equal-length, non-empty vectors")
        if np.any(d < 0) or np.any(np.diff(d) < 0):
            raise ValueError("delays must be non-negative and sorted ascending")
        d.flags.writeable = False
        g.flags.writeable = False
        object.__setattr__(self, "delays_s", d)
        object.__setattr__(self, "gains", g)

    def __len__(self):
        return self.delays_s.size

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.gains) ** 2))

    def to_json(self) -> str:
        return json.dumps({
            "environment": self.environment,
            "seed": self.seed,
            "taps": [[float(t), float(g.real), float(g.imag)] for t, g in zip(self.delays_s, self.gains)],
        })

    @classmethod
    def from_json(cls, text: str) -> "CirRealization":
        obj = json.loads(text)
        taps = np.asarray(obj["taps"], dtype=float).reshape(-1, 3)
        return cls(taps[:, 0], taps[:, 1] + 1j * taps[:, 2], obj.get("environment", ""), obj.get("seed"))


def _ray_delays(rng: np.random.Generator, p: SvParams, horizon_ns: float) -> np.ndarray:
    """Ray arrival times (ns) within one cluster, first ray at 0."""
    out = [0.0]
    t = 0.0
    while True:
        rate = p.ray_rate_1_per_ns if rng.random() < p.ray_mix_beta else p.ray_rate_2_per_ns
        t += rng.exponential(1.0 / rate)
        if t > horizon_ns:
            return np.asarray(out)
        out.append(t)


def _nakagami_power(rng: np.random.Generator, mean_power: np.ndarray, m: np.ndarray) -> np.ndarray:
    return rng.gamma(m, mean_power / m)


def generate_cir(environment: str = "office_los", seed: int = 0,
                 params: SvParams | None = None) -> CirRealization:
    p = params or load_sv_params(environment)
    rng = np.random.default_rng(seed)
    n_clusters = max(1, int(rng.poisson(p.mean_clusters)))
    cluster_t = np.concatenate([[0.0], np.cumsum(rng.exponential(1.0 / p.cluster_rate_per_ns,
                                                                 n_clusters - 1))])
    mix_rate = p.ray_mix_beta * p.ray_rate_1_per_ns + (1 - p.ray_mix_beta) * p.ray_rate_2_per_ns
    delays, powers, ms = [], [], []
    for t_c in cluster_t:
        gamma = p.ray_decay_slope * t_c + p.ray_decay_ns
        shadow = rng.normal(0.0, p.cluster_shadow_db) if p.cluster_shadow_db > 0 else 0.0
        omega = np.exp(-t_c / p.cluster_decay_ns) * 10 ** (shadow / 10)
        tau = _ray_delays(rng, p, RAY_SPAN * gamma)
        delays.append(t_c + tau)
        powers.append(omega / (gamma * (mix_rate + 1.0)) * np.exp(-tau / gamma))
        m_db = rng.normal(p.m0_db - p.m_slope_db_per_ns * (t_c + tau),
                          np.maximum(0.0, p.m_sigma_db - p.m_sigma_slope_db_per_ns * (t_c + tau)))
        m = np.maximum(MIN_NAKAGAMI_M, 10 ** (m_db / 10))
        if p.first_path_m is not None:
            m[0] = p.first_path_m
        ms.append(m)
    delays = np.concatenate(delays)
    mean_power = np.concatenate(powers)
    m = np.concatenate(ms)
    amp = np.sqrt(_nakagami_power(rng, mean_power, m))
    gains = amp * np.exp(2j * np.pi * rng.random(amp.size))
    order = np.argsort(delays, kind="stable")
    gains = gains[order] / np.sqrt(np.sum(amp**2))
    return CirRealization(delays[order] * 1e-9, gains, environment, seed)


def rms_delay_spread(cir: CirRealization) -> float:
    """Power-weighted RMS delay spread in seconds."""
    w = np.abs(cir.gains) ** 2
    w = w / w.sum()
    mean = np.sum(w * cir.delays_s)
    return float(np.sqrt(max(0.0, np.sum(w * cir.delays_s**2) - mean**2)))


def discretize(cir: CirRealization, fs: float) -> np.ndarray:
    """Tap vector on the 1/fs grid; each path lands on its nearest sample."""
    if not fs > 0:
        raise ValueError("fs must be positive")
    idx = np.rint(cir.delays_s * fs).astype(np.int64)
    h = np.zeros(int(idx[-1]) + 1, dtype=complex)
    np.add.at(h, idx, cir.gains)
    return h


def apply_channel(x, cir: CirRealization, fs: float) -> np.ndarray:
    """Linear convolution with the discretized CIR; output is ``len(x) + span`` long."""
    x = np.asarray(x, dtype=complex)
    h = discretize(cir, fs)
    if h.size == 1:
        return x * h[0]
    return fftconvolve(x, h)
