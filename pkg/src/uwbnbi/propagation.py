"""Received-PSD model for UWB links: path gain, equipment noise and channel plan.

The received PSD at distance ``d`` and frequency ``f`` is the regulatory mask
level (-41.3 dBm/MHz) plus the path gain in dB, where the path gain follows
the IEEE 802.15.4a power law::

    G(d, f) = pl0_db - 10 n log10(d / d0) - 20 (kappa + 1) log10(f / f_ref)

``kappa`` here is the excess frequency exponent over free space, so
``kappa = -1`` is frequency-flat. The bundled parameter table stores the
report's own exponent (``kappa_report``) and converts on load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

MASK_DBM_PER_MHZ = -41.3
# -174 dBm/Hz thermal + 60 dB (Hz -> MHz) + 7 dB noise figure
DEFAULT_NOISE_DBM_PER_MHZ = -107.0
UWB_MIN_BW_HZ = 499.2e6

ENVIRONMENTS = (
    "office_los",
    "office_nlos",
    "residential_los",
    "residential_nlos",
    "industrial_los",
    "industrial_nlos",
    "outdoor_los",
    "outdoor_nlos",
)


@dataclass(frozen=True)
class ChannelPlan:
    id: int
    cf_hz: float
    bw_hz: float

    def __post_init__(self):
        if self.bw_hz < UWB_MIN_BW_HZ - 1e-3:
            raise ValueError(
                f"channel {self.id}: bandwidth {self.bw_hz / 1e6:.1f} MHz is below "
                f"the UWB minimum of {UWB_MIN_BW_HZ / 1e6:.1f} MHz"
            )

    @property
    def f_lo_hz(self) -> float:
        return self.cf_hz - self.bw_hz / 2

    @property
    def f_hi_hz(self) -> float:
        return self.cf_hz + self.bw_hz / 2


@dataclass(frozen=True)
class PathLossParams:
    environment: str
    pl0_db: float
    d0_m: float = 1.0
    n_exp: float = 2.0
    kappa: float = -1.0
    shadow_sigma_db: float = 0.0
    f_ref_hz: float = 5.0e9

    def __post_init__(self):
        if self.d0_m <= 0:
            raise ValueError("d0_m must be positive")
        if self.n_exp <= 0:
            raise ValueError("n_exp must be positive")
        if self.pl0_db > 0:
            raise ValueError("pl0_db is a path gain and must be <= 0 dB")
        if self.shadow_sigma_db < 0:
            raise ValueError("shadow_sigma_db must be non-negative")


@dataclass(frozen=True)
class NoiseModel:
    """Equipment noise: a flat base PSD plus offsets on (f_lo, f_hi] bands."""

    base_psd_dbm_per_mhz: float = DEFAULT_NOISE_DBM_PER_MHZ
    per_band_offsets: tuple[tuple[float, float, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        bands = sorted((float(lo), float(hi), float(off)) for lo, hi, off in self.per_band_offsets)
        for lo, hi, _ in bands:
            if not hi > lo:
                raise ValueError(f"noise band ({lo}, {hi}] is empty")
        for (_, hi1, _), (lo2, _, _) in zip(bands, bands[1:]):
            if lo2 < hi1:
                raise ValueError("noise offset bands overlap")
        object.__setattr__(self, "per_band_offsets", tuple(bands))


def _load_json(name: str) -> dict:
    return json.loads(resources.files("uwbnbi.data").joinpath(name).read_text())


def load_channel_plans(path: str | Path | None = None) -> dict[int, ChannelPlan]:
    """Read the channel plan table (the bundled one unless ``path`` is given)."""
    data = json.loads(Path(path).read_text()) if path else _load_json("channel_plan.json")
    return {int(c["id"]): ChannelPlan(int(c["id"]), float(c["cf_hz"]), float(c["bw_hz"]))
            for c in data["channels"]}


def channel_plan(channel_id: int) -> ChannelPlan:
    plans = load_channel_plans()
    try:
        return plans[int(channel_id)]
    except KeyError:
        raise ValueError(f"unknown channel {channel_id}; known: {sorted(plans)}") from None


def load_pathloss(environment: str, path: str | Path | None = None,
                  shadowing: bool = False) -> PathLossParams:
    """Path-loss parameters for one environment.

    Shadowing is off unless ``shadowing=True``, in which case the tabulated
    standard deviation is used.
    """
    data = json.loads(Path(path).read_text()) if path else _load_json("pathloss_802154a.json")
    try:
        row = data["environments"][environment]
    except KeyError:
        raise ValueError(
            f"unknown environment {environment!r}; known: {sorted(data['environments'])}"
        ) from None
    return PathLossParams(
        environment=environment,
        pl0_db=-float(row["pl0_db"]),
        d0_m=float(data.get("d0_m", 1.0)),
        n_exp=float(row["n_exp"]),
        kappa=float(row["kappa_report"]) - 1.0,
        shadow_sigma_db=float(row["shadow_sigma_db"]) if shadowing else 0.0,
        f_ref_hz=float(data.get("f_ref_hz", 5.0e9)),
    )


def path_gain_db(d, f, p: PathLossParams, rng: np.random.Generator | None = None):
    """Path gain in dB (<= 0 near the reference point) at distance ``d`` and frequency ``f``.

    ``d`` and ``f`` broadcast against each other. With ``shadow_sigma_db > 0``
    one lognormal shadowing draw per output element is added, taken from
    ``rng``, which is then mandatory.
    """
    d = np.asarray(d, dtype=float)
    f = np.asarray(f, dtype=float)
    if np.any(d < p.d0_m):
        raise ValueError(f"distance below reference distance d0 = {p.d0_m} m")
    if np.any(f <= 0):
        raise ValueError("frequency must be positive")
    gain = (p.pl0_db
            - 10.0 * p.n_exp * np.log10(d / p.d0_m)
            - 20.0 * (p.kappa + 1.0) * np.log10(f / p.f_ref_hz))
    if p.shadow_sigma_db > 0:
        if rng is None:
            raise ValueError("shadowing enabled: pass an explicit numpy Generator as rng")
        gain = gain + rng.normal(0.0, p.shadow_sigma_db, size=np.shape(gain))
    return gain[()] if np.ndim(gain) == 0 else gain


def rx_psd_dbm_mhz(d, f, p: PathLossParams, rng: np.random.Generator | None = None):
    """Received UWB signal PSD in dBm/MHz for a transmitter at the spectral mask."""
    return MASK_DBM_PER_MHZ + path_gain_db(d, f, p, rng)


def noise_psd_dbm_mhz(f, nm: NoiseModel | None = None):
    nm = nm or NoiseModel()
    f = np.asarray(f, dtype=float)
    out = np.full(f.shape, nm.base_psd_dbm_per_mhz)
    for lo, hi, off in nm.per_band_offsets:
        out[(f > lo) & (f <= hi)] += off
    return out[()] if out.ndim == 0 else out


def db_to_lin(x):
    return np.power(10.0, np.asarray(x, dtype=float) / 10.0)


def lin_to_db(x):
    return 10.0 * np.log10(x)
