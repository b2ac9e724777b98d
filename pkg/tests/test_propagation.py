import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uwbnbi.propagation import (MASK_DBM_PER_MHZ, ChannelPlan, NoiseModel, PathLossParams, channel_plan,
                                db_to_lin, lin_to_db, load_channel_plans, load_pathloss, noise_psd_dbm_mhz,
                                path_gain_db, rx_psd_dbm_mhz)

FLAT = PathLossParams("test", pl0_db=-40.0, n_exp=2.0, kappa=-1.0)


def test_reference_point():
    p = load_pathloss("office_los")
    assert path_gain_db(p.d0_m, p.f_ref_hz, p) == p.pl0_db


def test_doubling_distance_free_space_exponent():
    drop = path_gain_db(2.0, 4e9, FLAT) - path_gain_db(4.0, 4e9, FLAT)
    assert drop == pytest.approx(20 * math.log10(2), abs=1e-12)
    assert drop == pytest.approx(6.0206, abs=1e-4)


def test_office_los_table_row():
    p = load_pathloss("office_los")
    assert (p.pl0_db, p.n_exp, p.shadow_sigma_db) == (-35.4, 1.63, 0.0)
    assert p.kappa == pytest.approx(0.03 - 1.0)
    delta = path_gain_db(8.0, 5e9, p) - path_gain_db(3.0, 5e9, p)
    assert delta == pytest.approx(-10 * 1.63 * math.log10(8 / 3), abs=1e-12)
    assert load_pathloss("office_los", shadowing=True).shadow_sigma_db == 1.9


def test_frequency_term_matches_amplitude_exponent():
    # the table's exponent describes amplitude, sqrt(PL) ~ f^-k, so power falls as f^-2k
    p = load_pathloss("office_nlos")
    g = path_gain_db(1.0, np.array([2.5e9, 5e9]), p)
    assert g[0] - g[1] == pytest.approx(20 * 0.71 * math.log10(2), abs=1e-12)


def test_rx_psd_is_mask_plus_gain():
    p0 = PathLossParams("z", pl0_db=0.0, kappa=-1.0)
    assert rx_psd_dbm_mhz(1.0, 4e9, p0) == pytest.approx(MASK_DBM_PER_MHZ)
    p40 = PathLossParams("z", pl0_db=-40.0, kappa=-1.0)
    assert rx_psd_dbm_mhz(1.0, 4e9, p40) == pytest.approx(-81.3)


def test_office_los_psd_falls_across_channel3():
    p, plan = load_pathloss("office_los"), channel_plan(3)
    f = np.linspace(plan.f_lo_hz, plan.f_hi_hz, 101)
    assert p.kappa > -1
    assert np.all(np.diff(rx_psd_dbm_mhz(5.0, f, p)) < 0)


@given(st.floats(1.0, 1e3), st.floats(1.0, 1e3), st.floats(1e9, 1e10))
def test_non_increasing_in_distance(d1, d2, f):
    p = load_pathloss("residential_nlos")
    lo, hi = sorted((d1, d2))
    assert rx_psd_dbm_mhz(hi, f, p) <= rx_psd_dbm_mhz(lo, f, p)


@given(st.floats(1.0, 100.0), st.floats(0.5, 4.0), st.floats(1e9, 1e10))
def test_depends_only_on_distance_ratio(ratio, d0, f):
    p = PathLossParams("z", pl0_db=-30.0, d0_m=d0, n_exp=2.7, kappa=-0.5)
    delta = rx_psd_dbm_mhz(ratio * d0, f, p) - rx_psd_dbm_mhz(d0, f, p)
    assert delta == pytest.approx(-27.0 * math.log10(ratio), abs=1e-9)


def test_shadowing_mean():
    p = load_pathloss("office_nlos", shadowing=True)
    n = 20000
    draws = path_gain_db(np.full(n, 4.0), 4e9, p, rng=np.random.default_rng(0))
    det = path_gain_db(4.0, 4e9, load_pathloss("office_nlos"))
    assert abs(draws.mean() - det) < 3 * p.shadow_sigma_db / math.sqrt(n)
    assert np.std(draws) == pytest.approx(p.shadow_sigma_db, rel=0.03)
    with pytest.raises(ValueError, match="rng"):
        path_gain_db(4.0, 4e9, p)


def test_distance_and_frequency_validation():
    with pytest.raises(ValueError, match="d0"):
        path_gain_db(0.5, 4e9, FLAT)
    with pytest.raises(ValueError, match="frequency"):
        path_gain_db(1.0, 0.0, FLAT)
    with pytest.raises(ValueError):
        PathLossParams("z", pl0_db=3.0)
    with pytest.raises(ValueError, match="unknown environment"):
        load_pathloss("moon_los")


def test_noise_model():
    assert np.all(noise_psd_dbm_mhz(np.linspace(3e9, 6e9, 7)) == -107.0)
    nm = NoiseModel(-107.0, ((4e9, 5e9, 3.0),))
    assert noise_psd_dbm_mhz(4.5e9, nm) == pytest.approx(-104.0)
    # half-open (lo, hi]: a boundary belongs to the lower band
    assert noise_psd_dbm_mhz(4e9, nm) == -107.0
    assert noise_psd_dbm_mhz(5e9, nm) == pytest.approx(-104.0)
    two = NoiseModel(-100.0, ((5e9, 6e9, -2.0), (4e9, 5e9, 1.0)))
    assert noise_psd_dbm_mhz(5e9, two) == pytest.approx(-99.0)
    with pytest.raises(ValueError, match="overlap"):
        NoiseModel(-100.0, ((4e9, 5e9, 1.0), (4.5e9, 6e9, 1.0)))


def test_channel_plans():
    plans = load_channel_plans()
    assert sorted(plans) == [1, 2, 3, 4]
    assert plans[3].cf_hz == 4992.8e6 and plans[3].bw_hz == 499.2e6
    assert plans[4].bw_hz == 1280e6
    with pytest.raises(ValueError, match="unknown channel"):
        channel_plan(9)
    with pytest.raises(ValueError, match="UWB minimum"):
        ChannelPlan(5, 4e9, 100e6)


@given(st.floats(-200, 50))
def test_db_round_trip(x):
    assert lin_to_db(db_to_lin(x)) == pytest.approx(x, abs=1e-9)
