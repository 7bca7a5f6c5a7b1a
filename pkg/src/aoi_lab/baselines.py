"""Classical solvers for the joint order / hovering-point problem."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import channel
from .aoi import total_aoi
from .exceptions import ParameterError
from .instance import as_instance
from .kinematics import hover_time
from .router import build_layered_graph, exact_dp


@dataclass(frozen=True)
class MetaheuristicConfig:
    sa_t0: float = 100.0
    sa_cooling: float = 0.99
    sa_max_iter: int = 1000
    ga_population: int | None = None     # None: total number of candidate points
    ga_max_iter: int = 10000
    ga_crossover_rate: float = 0.1
    ga_mutation_rate: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not self.sa_t0 > 0:
            raise ParameterError("sa_t0 must be positive")
        if not 0 < self.sa_cooling < 1:
            raise ParameterError("sa_cooling must lie in (0, 1)")
        for name in ("ga_crossover_rate", "ga_mutation_rate"):
            if not 0 <= getattr(self, name) <= 1:
                raise ParameterError(f"{name} must lie in [0, 1]")
        if self.sa_max_iter < 0 or self.ga_max_iter < 0:
            raise ParameterError("iteration counts must be >= 0")
        if self.ga_population is not None and self.ga_population < 2:
            raise ParameterError("ga_population must be >= 2")


class _Packed:
    """Padded per-cluster arrays for evaluating many (order, index) pairs at once."""

    def __init__(self, inst):
        self.inst = inst
        self.sizes = np.array(inst.grid_sizes)
        k = self.sizes.max()
        m = inst.m
        self.points = np.zeros((m, k, 3))
        self.hover = np.zeros((m, k))
        for j in range(m):
            self.points[j, :self.sizes[j]] = inst.points[j]
            self.hover[j, :self.sizes[j]] = inst.hover[j]

    def costs(self, orders, idx):
        """Total AoI of P solutions; ``idx[p, j]`` is the grid index used for cluster j."""
        inst = self.inst
        rows = np.arange(len(orders))[:, None]
        point_idx = idx[rows, orders]
        pts = self.points[orders, point_idx]
        w = np.cumsum(inst.counts[orders], axis=1)
        legs = np.sqrt(((pts[:, 1:] - pts[:, :-1]) ** 2).sum(axis=2))
        back = np.sqrt(((pts[:, -1] - inst.start) ** 2).sum(axis=1))
        acc = (w * self.hover[orders, point_idx]).sum(axis=1)
        acc += (w[:, :-1] * legs).sum(axis=1) / inst.speed + w[:, -1] * back / inst.speed
        return acc - inst.offset


def _finish(inst, order, point_index):
    tour = inst.tour(order, point_index)
    return tour, total_aoi(tour, inst.scenario)


def _random_solution(rng, sizes):
    order = rng.permutation(len(sizes))
    idx = np.array([rng.integers(s) for s in sizes])
    return order, idx


def solve_sa(scenario, grids=None, config=None, history=None):
    """Simulated annealing over order and hovering points jointly.

    A move either reverses a segment of the order or redraws one cluster's
    grid index, each with probability one half.  ``history`` (a list) receives
    the best-so-far cost after every iteration.
    """
    config = config or MetaheuristicConfig()
    inst = as_instance(scenario, grids)
    pack = _Packed(inst)
    rng = np.random.default_rng(config.seed)
    m = inst.m
    order, idx = _random_solution(rng, pack.sizes)
    cost = float(pack.costs(order[None], idx[None])[0])
    best = (order.copy(), idx.copy(), cost)
    temp = config.sa_t0
    for _ in range(config.sa_max_iter):
        new_order, new_idx = order.copy(), idx.copy()
        if m > 1 and rng.random() < 0.5:
            i, j = sorted(rng.choice(m, size=2, replace=False))
            new_order[i:j + 1] = new_order[i:j + 1][::-1]
        else:
            c = rng.integers(m)
            new_idx[c] = rng.integers(pack.sizes[c])
        new_cost = float(pack.costs(new_order[None], new_idx[None])[0])
        delta = new_cost - cost
        if delta <= 0 or rng.random() < np.exp(-delta / temp):
            order, idx, cost = new_order, new_idx, new_cost
            if cost < best[2]:
                best = (order.copy(), idx.copy(), cost)
        temp *= config.sa_cooling
        if history is not None:
            history.append(best[2])
    order, idx, _ = best
    return _finish(inst, order, idx[order])


def _ox1(rng, a, b):
    """Order crossover: keep a slice of ``a``, fill the rest in ``b``'s order."""
    m = len(a)
    i, j = sorted(rng.choice(m + 1, size=2, replace=False))
    child = np.full(m, -1)
    child[i:j] = a[i:j]
    kept = set(a[i:j].tolist())
    fill = [g for g in b.tolist() if g not in kept]
    child[[k for k in range(m) if not i <= k < j]] = fill
    return child


def solve_ga(scenario, grids=None, config=None, history=None, initial=None):
    """Elitist generational GA over (order, per-cluster grid index) chromosomes.

    Parents come from binary tournaments; the order part uses order crossover
    and swap mutation, the index part uniform crossover and reset mutation.
    ``initial`` optionally seeds the population as ``(orders, idx)`` arrays.
    """
    config = config or MetaheuristicConfig()
    inst = as_instance(scenario, grids)
    pack = _Packed(inst)
    rng = np.random.default_rng(config.seed)
    m = inst.m
    size = config.ga_population or int(pack.sizes.sum())
    size = max(size, 2)
    if initial is not None:
        orders, idx = (np.array(a, dtype=np.int64) for a in initial)
        size = len(orders)
    else:
        orders = np.array([rng.permutation(m) for _ in range(size)])
        idx = np.floor(rng.random((size, m)) * pack.sizes).astype(np.int64)
    costs = pack.costs(orders, idx)
    for _ in range(config.ga_max_iter):
        elite = int(np.argmin(costs))
        a = rng.integers(size, size=(2, size))
        b = rng.integers(size, size=(2, size))
        pa = np.where(costs[a[0]] <= costs[a[1]], a[0], a[1])
        pb = np.where(costs[b[0]] <= costs[b[1]], b[0], b[1])
        child_o, child_i = orders[pa].copy(), idx[pa].copy()
        cross = np.flatnonzero(rng.random(size) < config.ga_crossover_rate)
        for k in cross:
            child_o[k] = _ox1(rng, orders[pa[k]], orders[pb[k]])
            take = rng.random(m) < 0.5
            child_i[k, take] = idx[pb[k], take]
        mut = rng.random(size) < config.ga_mutation_rate
        if m > 1:
            s1 = rng.integers(m, size=size)
            s2 = (s1 + rng.integers(1, m, size=size)) % m
            rows = np.flatnonzero(mut)
            child_o[rows, s1[rows]], child_o[rows, s2[rows]] = child_o[rows, s2[rows]], child_o[rows, s1[rows]]
        c = rng.integers(m, size=size)
        reset = np.floor(rng.random(size) * pack.sizes[c]).astype(np.int64)
        rows = np.flatnonzero(mut)
        child_i[rows, c[rows]] = reset[rows]
        child_o[0], child_i[0] = orders[elite], idx[elite]
        orders, idx = child_o, child_i
        costs = pack.costs(orders, idx)
        if history is not None:
            history.append(float(costs.min()))
    best = int(np.argmin(costs))
    return _finish(inst, orders[best], idx[best][orders[best]])


def _refine_exact(inst, order):
    res = exact_dp(build_layered_graph(inst, order=order))
    return _finish(inst, order, res.chosen_points)


def solve_nearest_neighbor(scenario, grids=None, seed=0):
    """Greedy constructive order on cluster centers, then optimal points for that order.

    ``seed`` is accepted for a uniform solver signature; the result is deterministic.
    """
    inst = as_instance(scenario, grids)
    env = inst.scenario.env
    center_hover = np.array([hover_time(n, float(channel.rate(0.0, env)), env) for n in inst.counts])
    pos = inst.start
    w = 0
    left = list(range(inst.m))
    order = []
    while left:
        d = np.sqrt(((inst.centers[left] - pos) ** 2).sum(axis=1))
        inc = w * d / inst.speed + (w + inst.counts[left]) * center_hover[left]
        k = left[int(np.argmin(inc))]
        order.append(k)
        left.remove(k)
        w += inst.counts[k]
        pos = inst.centers[k]
    return _refine_exact(inst, tuple(order))


def solve_random(scenario, grids=None, seed=0):
    """Uniformly random order, then optimal points for that order."""
    inst = as_instance(scenario, grids)
    order = tuple(int(v) for v in np.random.default_rng(seed).permutation(inst.m))
    return _refine_exact(inst, order)
