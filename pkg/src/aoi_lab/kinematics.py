"""Flight/hover timing and UAV energy bookkeeping."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import channel


def fly_time(a, b, uav):
    """Straight-line flight time between two 3D points at cruise speed."""
    return float(np.linalg.norm(np.subtract(a, b, dtype=np.float64))) / uav.speed


def propulsion_power(v, uav):
    """Rotary-wing propulsion power at horizontal speed ``v`` (W).

    The induced term is evaluated as sqrt(1 + a^2) - a == 1 / (sqrt(1 + a^2) + a)
    with a = v^2 / (2 v0^2); the direct difference cancels catastrophically
    once v >> v0.
    """
    v = np.asarray(v, dtype=np.float64)
    blade = uav.p0 * (1.0 + 3.0 * v ** 2 / uav.u_tip ** 2)
    a = v ** 2 / (2.0 * uav.v0 ** 2)
    induced = uav.p1 * np.sqrt(1.0 / (np.sqrt(1.0 + a * a) + a))
    parasite = 0.5 * uav.d0 * uav.rho * uav.s0 * uav.delta * v ** 3
    out = blade + induced + parasite
    return float(out) if out.ndim == 0 else out


def upload_time(n_nodes, rate, env):
    """Time for the CH to forward ``n_nodes`` packets to the UAV."""
    return n_nodes * env.packet_bits / rate


def hover_time(n_nodes, rate, env):
    """Data-collection time: TDM slots inside the cluster plus the CH uplink."""
    return n_nodes * env.slot_seconds + upload_time(n_nodes, rate, env)


def hover_energy(n_nodes, rate, env, uav):
    return uav.hover_power * hover_time(n_nodes, rate, env) + uav.p_com * upload_time(n_nodes, rate, env)


def fly_energy(a, b, uav):
    return propulsion_power(uav.speed, uav) * fly_time(a, b, uav)


@dataclass(frozen=True)
class TimeEnergyLedger:
    """Per-leg and per-stop times/energies of one tour, in visiting order.

    ``fly_time[0]`` is the outbound leg from the start point; the last entry is
    the return leg.  ``hover_*`` has one entry per visited cluster.
    """

    fly_time: tuple[float, ...]
    hover_time: tuple[float, ...]
    fly_energy: tuple[float, ...]
    hover_energy: tuple[float, ...]

    @property
    def effective_energy(self):
        """Energy from the first hovering point back to the start (outbound leg excluded)."""
        total = 0.0
        for k, e in enumerate(self.hover_energy):
            total += e
            total += self.fly_energy[k + 1]
        return total

    @property
    def total_energy(self):
        return self.fly_energy[0] + self.effective_energy

    @property
    def fly_time_after_first(self):
        return math.fsum(self.fly_time[1:])

    @property
    def total_hover_time(self):
        return math.fsum(self.hover_time)


def build_ledger(tour, scenario):
    """Timing/energy ledger of ``tour`` (see :mod:`aoi_lab.aoi` for the Tour type)."""
    env, uav = scenario.env, scenario.uav
    stops = [np.asarray(scenario.start, dtype=np.float64)] + [p for p in tour.points] \
        + [np.asarray(scenario.start, dtype=np.float64)]
    p_mov = propulsion_power(uav.speed, uav)
    f_time = tuple(fly_time(stops[k], stops[k + 1], uav) for k in range(len(stops) - 1))
    f_energy = tuple(p_mov * t for t in f_time)
    h_time, h_energy = [], []
    for m, p in zip(tour.order, tour.points):
        cl = scenario.clusters[m]
        r = float(channel.rate(math.hypot(p[0] - cl.ch_position[0], p[1] - cl.ch_position[1]), env))
        h_time.append(hover_time(cl.node_count, r, env))
        h_energy.append(hover_energy(cl.node_count, r, env, uav))
    return TimeEnergyLedger(f_time, tuple(h_time), f_energy, tuple(h_energy))


def effective_energy(tour, scenario):
    return build_ledger(tour, scenario).effective_energy
