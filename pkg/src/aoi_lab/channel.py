"""Probabilistic line-of-sight air-to-ground channel.

Every function accepts the horizontal CH-to-UAV distance either as a scalar or
as a numpy array and evaluates element-wise; the UAV altitude comes from
``env.altitude`` unless a :class:`LinkGeometry` is passed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import InfeasibleError

_RADIUS_RTOL = 1e-9
_MAX_BISECTIONS = 200


@dataclass(frozen=True)
class LinkGeometry:
    horizontal_dist: float
    altitude: float

    def __post_init__(self):
        if self.horizontal_dist < 0 or self.altitude < 0:
            raise ValueError("distances must be nonnegative")

    @property
    def elevation_deg(self):
        return math.degrees(math.atan2(self.altitude, self.horizontal_dist))


@dataclass(frozen=True)
class LinkBudget:
    p_los: float
    avg_loss_db: float
    snr_linear: float
    rate_bps: float


def _geometry(geom, env):
    if isinstance(geom, LinkGeometry):
        return np.asarray(geom.horizontal_dist, dtype=np.float64), geom.altitude
    return np.asarray(geom, dtype=np.float64), env.altitude


def elevation_deg(geom, env):
    r, h = _geometry(geom, env)
    return np.degrees(np.arctan2(h, r))


def los_probability(geom, env):
    """LoS probability; the elevation angle enters in degrees (R = 0 gives 90 degrees)."""
    theta = elevation_deg(geom, env)
    return 1.0 / (1.0 + env.beta * np.exp(-env.beta_tilde * (theta - env.beta)))


def free_space_loss_db(geom, env):
    r, h = _geometry(geom, env)
    d = np.hypot(h, r)
    return 20.0 * np.log10(4.0 * math.pi * env.carrier_freq * d / env.light_speed)


def avg_path_loss(geom, env):
    """LoS/NLoS-probability-weighted path loss in dB."""
    p = los_probability(geom, env)
    fspl = free_space_loss_db(geom, env)
    return p * (fspl + env.xi_los) + (1.0 - p) * (fspl + env.xi_nlos)


def snr(geom, env):
    return env.ch_tx_power / (env.noise_power * 10.0 ** (avg_path_loss(geom, env) / 10.0))


def rate(geom, env):
    """Average achievable uplink rate in bit/s."""
    return env.bandwidth * np.log2(1.0 + snr(geom, env))


def link_budget(geom, env):
    p = float(los_probability(geom, env))
    loss = float(avg_path_loss(geom, env))
    g = float(snr(geom, env))
    return LinkBudget(p_los=p, avg_loss_db=loss, snr_linear=g,
                      rate_bps=env.bandwidth * math.log2(1.0 + g))


@lru_cache(maxsize=256)
def service_radius(env):
    """Largest horizontal offset at which the SNR still meets ``env.snr_threshold``.

    SNR is strictly decreasing in the horizontal distance at fixed altitude, so
    the root is bracketed by doubling from H and refined by bisection.
    """
    target = env.snr_threshold
    s0 = float(snr(0.0, env))
    if abs(s0 - target) <= _RADIUS_RTOL * target:
        return 0.0
    if s0 < target:
        raise InfeasibleError(
            f"SNR directly above the CH ({10 * math.log10(s0):.3f} dB) is below the "
            f"threshold ({10 * math.log10(target):.3f} dB) at altitude {env.altitude} m")
    lo, hi = 0.0, env.altitude
    while float(snr(hi, env)) >= target:
        lo, hi = hi, 2.0 * hi
    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        s = float(snr(mid, env))
        if abs(s - target) < _RADIUS_RTOL * target:
            return mid
        if s >= target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return lo
