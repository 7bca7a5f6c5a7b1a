"""Exact age-of-information evaluation of a data-collection tour.

Packets of node ``n`` in the cluster visited at step ``t`` age from their TDM
slot until the UAV lands back at the start point.  Summed over all nodes the
objective regroups into

    sum_g W_g * (T_hov(g) + T_fly(g -> g+1)) - tau * sum_m N_m (N_m - 1) / 2

with ``W_g`` the number of nodes already served at step ``g``.  This makes the
objective additive over the edges of a layered graph, which the router uses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ParameterError
from .kinematics import TimeEnergyLedger, build_ledger


@dataclass(frozen=True)
class Tour:
    """Visiting order (0-based cluster ids) and the hovering point used at each stop.

    The start point is implicit at both ends; ``points[k]`` belongs to cluster
    ``order[k]``.
    """

    order: tuple[int, ...]
    points: np.ndarray

    def __post_init__(self):
        order = tuple(int(m) for m in self.order)
        pts = np.array(self.points, dtype=np.float64).reshape(len(order), 3)
        pts.setflags(write=False)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_indices(cls, order, point_index, grids):
        """Build from per-stop grid indices (``point_index[k]`` indexes ``grids[order[k]]``)."""
        order = tuple(int(m) for m in order)
        pts = [grids[m].points[int(i)] for m, i in zip(order, point_index)]
        return cls(order, np.array(pts).reshape(len(order), 3))

    def __eq__(self, other):
        return isinstance(other, Tour) and self.order == other.order and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash((self.order, self.points.tobytes()))


@dataclass(frozen=True)
class AoIReport:
    per_node_aoi: tuple[np.ndarray, ...]
    total_aoi: float
    oldest_aoi: float
    ledger: TimeEnergyLedger


def validate_tour(tour, scenario, grids=None, atol=1e-9):
    """Raise ParameterError unless ``tour`` is a permutation with points from the grids."""
    m = scenario.m
    if sorted(tour.order) != list(range(m)):
        raise ParameterError(f"order {tour.order} is not a permutation of 0..{m - 1}")
    if grids is None:
        return
    for k, c in zip(tour.order, tour.points):
        d = np.abs(grids[k].points - c).max(axis=1)
        if not np.any(d <= atol):
            raise ParameterError(f"point {c.tolist()} is not a candidate of cluster {k}")


def instantaneous_aoi(now, generated_at):
    return max(0.0, now - generated_at)


def cumulative_weights(order, scenario):
    counts = scenario.node_counts
    return np.cumsum(counts[list(order)])


def _constant_offset(scenario):
    n = scenario.node_counts
    return scenario.env.slot_seconds * float(np.sum(n * (n - 1))) / 2.0


def node_aoi(tour, t, n, scenario, ledger=None):
    """AoI of node ``n`` (1-based) in the cluster visited at step ``t`` (1-based)."""
    m = len(tour.order)
    if not 1 <= t <= m:
        raise IndexError(f"visit step {t} outside 1..{m}")
    n_nodes = scenario.clusters[tour.order[t - 1]].node_count
    if not 1 <= n <= n_nodes:
        raise IndexError(f"node {n} outside 1..{n_nodes}")
    ledger = ledger or build_ledger(tour, scenario)
    carried = 0.0
    for g in range(t, m + 1):
        carried += ledger.hover_time[g - 1] + ledger.fly_time[g]
    return carried - (n - 1) * scenario.env.slot_seconds


def total_aoi_direct(tour, scenario, ledger=None):
    """Literal double sum of per-node AoI (slow; used for cross-checking)."""
    ledger = ledger or build_ledger(tour, scenario)
    total = 0.0
    for t, m in enumerate(tour.order, start=1):
        for n in range(1, scenario.clusters[m].node_count + 1):
            total += node_aoi(tour, t, n, scenario, ledger)
    return total


def total_aoi(tour, scenario, ledger=None):
    """Total AoI over all ground nodes via the cumulative-weight regrouping."""
    ledger = ledger or build_ledger(tour, scenario)
    w = cumulative_weights(tour.order, scenario)
    acc = 0.0
    for g in range(len(tour.order)):
        acc += w[g] * (ledger.hover_time[g] + ledger.fly_time[g + 1])
    return float(acc - _constant_offset(scenario))


def oldest_packet_aoi(tour, scenario, ledger=None):
    """AoI of the first node of the first visited cluster: every stop's hover plus all legs after it."""
    ledger = ledger or build_ledger(tour, scenario)
    return ledger.total_hover_time + ledger.fly_time_after_first


def evaluate(tour, scenario):
    ledger = build_ledger(tour, scenario)
    tau = scenario.env.slot_seconds
    tail = 0.0
    carried = [0.0] * len(tour.order)
    for g in range(len(tour.order) - 1, -1, -1):
        tail += ledger.hover_time[g] + ledger.fly_time[g + 1]
        carried[g] = tail
    per_node = tuple(
        carried[t] - tau * np.arange(scenario.clusters[m].node_count, dtype=np.float64)
        for t, m in enumerate(tour.order)
    )
    return AoIReport(per_node_aoi=per_node, total_aoi=total_aoi(tour, scenario, ledger),
                     oldest_aoi=oldest_packet_aoi(tour, scenario, ledger), ledger=ledger)


def fly_hover_split(report):
    """Shares of the oldest packet's AoI spent flying and hovering (they sum to 1)."""
    fly = report.ledger.fly_time_after_first
    hover = report.ledger.total_hover_time
    total = fly + hover
    if total <= 0:
        return 0.0, 0.0
    f = fly / total
    return f, 1.0 - f


def relative_gap(a, b):
    return abs(a - b) / max(abs(a), abs(b), math.ulp(1.0))
