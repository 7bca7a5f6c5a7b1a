import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from aoi_lab import channel
from aoi_lab.aoi import Tour
from aoi_lab.kinematics import (build_ledger, effective_energy, fly_energy, fly_time, hover_energy, hover_time,
                                propulsion_power)
from aoi_lab.scenario import UavParams

from .conftest import hand_scenario, small_instance

mp.mp.dps = 50


def mp_power(v, u):
    v = mp.mpf(v)
    blade = u.p0 * (1 + 3 * v ** 2 / mp.mpf(u.u_tip) ** 2)
    induced = u.p1 * mp.sqrt(mp.sqrt(1 + v ** 4 / (4 * mp.mpf(u.v0) ** 4)) - v ** 2 / (2 * mp.mpf(u.v0) ** 2))
    parasite = mp.mpf(1) / 2 * u.d0 * u.rho * u.s0 * u.delta * v ** 3
    return blade + induced + parasite


def test_fly_time(uav):
    assert fly_time((1, 2, 3), (1, 2, 3), uav) == 0.0
    assert fly_time((0, 0, 100), (900, 1200, 100), uav) == pytest.approx(100.0, rel=1e-15)
    a, b = (3.0, -7.0, 100.0), (1200.0, 50.0, 100.0)
    assert fly_time(a, b, uav) == fly_time(b, a, uav)


def test_power_hover(uav):
    assert propulsion_power(0.0, uav) == pytest.approx(219.82, rel=1e-15)


@pytest.mark.parametrize("v", [0.05, 1.0, 15.0, 29.9])
def test_power_matches_extended_precision(uav, v):
    assert propulsion_power(v, uav) == pytest.approx(float(mp_power(v, uav)), rel=1e-12)


def test_power_cruise_frozen(uav):
    assert propulsion_power(15.0, uav) == pytest.approx(104.39719633333333, rel=1e-12)


def test_blade_term_at_tip_speed():
    u = UavParams(p1=1e-300, d0=1e-300)
    assert propulsion_power(u.u_tip, u) == pytest.approx(4 * u.p0, rel=1e-12)


def test_power_shape(uav):
    v = np.arange(0, 300 + 1) / 10.0
    p = propulsion_power(v, uav)
    assert np.all(np.isfinite(p)) and np.all(p > 0)
    d = np.sign(np.diff(p))
    assert np.count_nonzero(d[1:] != d[:-1]) == 1


def test_hover_time_and_energy(env, uav):
    assert hover_time(20, 5e6, env) == pytest.approx(22.0, rel=1e-15)
    assert hover_time(0, 5e6, env) == 0.0
    assert hover_time(20, 1e7, env) - 20 * env.slot_seconds == pytest.approx(10.0)
    assert hover_energy(20, 5e6, env, uav) == pytest.approx(4838.04, rel=1e-13)
    assert hover_energy(0, 5e6, env, uav) == 0.0


@given(st.integers(0, 40), st.floats(1e5, 5e7))
def test_hover_energy_dominates(n, r):
    from aoi_lab.scenario import EnvParams
    env, uav = EnvParams(), UavParams()
    assert hover_energy(n, r, env, uav) >= uav.hover_power * hover_time(n, r, env)


def test_fly_energy(uav):
    a, b, c = np.array([0, 0, 100.0]), np.array([1500, 0, 100.0]), np.array([2000, 0, 100.0])
    assert fly_energy(a, a, uav) == 0.0
    assert fly_energy(a, b, uav) == pytest.approx(float(mp_power(15, uav)) * 100, rel=1e-12)
    assert fly_energy(a, c, uav) == pytest.approx(fly_energy(a, b, uav) + fly_energy(b, c, uav), rel=1e-14)


def test_effective_energy_single_stop(env, uav):
    sc = hand_scenario([(1000.0, 0.0)], [10])
    stop = np.array([1000.0, 0.0, 100.0])
    tour = Tour((0,), stop[None])
    r = float(channel.rate(0.0, env))
    expect = hover_energy(10, r, env, uav) + fly_energy(stop, sc.start, uav)
    assert effective_energy(tour, sc) == pytest.approx(expect, rel=1e-14)


def test_ledger_consistency():
    inst = small_instance(5, 6, l_sub=3)
    tour = inst.tour((3, 1, 0, 5, 2, 4), (0, 1, 2, 0, 1, 2))
    led = build_ledger(tour, inst.scenario)
    assert len(led.fly_time) == 7 and len(led.hover_time) == 6
    assert all(x >= 0 for x in led.fly_time + led.hover_time + led.fly_energy + led.hover_energy)
    assert led.effective_energy >= sum(led.hover_energy)
    assert led.total_energy - led.fly_energy[0] == pytest.approx(led.effective_energy, rel=1e-13)
    assert math.fsum(led.fly_time[1:]) == led.fly_time_after_first
