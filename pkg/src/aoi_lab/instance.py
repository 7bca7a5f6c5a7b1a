"""Precomputed per-instance arrays shared by the search, baseline and policy code."""
from __future__ import annotations

import numpy as np

from . import channel
from .aoi import Tour
from .kinematics import hover_time
from .scenario import build_grids


class Instance:
    """A scenario together with its candidate grids and per-candidate hover times.

    Everything here is derived data; the exact objective lives in
    :mod:`aoi_lab.aoi`.  ``cost`` is a fast path used inside search loops.
    """

    def __init__(self, scenario, grids=None):
        self.scenario = scenario
        self.grids = list(grids) if grids is not None else build_grids(scenario)
        if len(self.grids) != scenario.m:
            raise ValueError(f"expected {scenario.m} grids, got {len(self.grids)}")
        env = scenario.env
        self.start = np.asarray(scenario.start, dtype=np.float64)
        self.counts = scenario.node_counts
        self.speed = scenario.uav.speed
        self.points = [g.points for g in self.grids]
        self.centers = np.array([(c.ch_position[0], c.ch_position[1], env.altitude)
                                 for c in scenario.clusters])
        self.hover = []
        for cl, pts in zip(scenario.clusters, self.points):
            r = channel.rate(np.hypot(pts[:, 0] - cl.ch_position[0], pts[:, 1] - cl.ch_position[1]), env)
            self.hover.append(hover_time(cl.node_count, np.asarray(r, dtype=np.float64), env))
        self.slack = np.array([np.linalg.norm(p - c, axis=1).max() for p, c in zip(self.points, self.centers)])
        n = self.counts
        self.offset = scenario.env.slot_seconds * float(np.sum(n * (n - 1))) / 2.0

    @property
    def m(self):
        return self.scenario.m

    @property
    def grid_sizes(self):
        return [len(p) for p in self.points]

    def cost(self, order, point_index):
        """Total AoI of the tour given by cluster order and per-stop grid indices."""
        w = 0.0
        acc = 0.0
        pts = self.points
        prev = None
        for k, (m, i) in enumerate(zip(order, point_index)):
            p = pts[m][i]
            if prev is not None:
                acc += w * np.sqrt(((p - prev) ** 2).sum()) / self.speed
            w += self.counts[m]
            acc += w * self.hover[m][i]
            prev = p
        acc += w * np.sqrt(((self.start - prev) ** 2).sum()) / self.speed
        return float(acc) - self.offset

    def tour(self, order, point_index):
        return Tour.from_indices(order, point_index, self.grids)


def as_instance(obj, grids=None):
    return obj if isinstance(obj, Instance) else Instance(obj, grids)
