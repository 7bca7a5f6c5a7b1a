"""Hovering-point selection for a fixed visiting order.

The order induces a layered DAG: the start point, one layer per visited
cluster's candidate grid, and a clone of the start.  With cumulative node
weights W_g, entering candidate p of layer g costs W_g * T_hov(p) and the leg
from layer g to g+1 costs W_g * T_fly, so a start-to-clone path cost minus
tau * sum N_m (N_m - 1) / 2 is exactly the tour's total AoI.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InfeasibleError, ParameterError
from .instance import as_instance

DEFAULT_OMEGA = 1.2
EXACT_GLOBAL_CAP = 7


@dataclass
class LayeredGraph:
    """Layers 0..M+1 of candidate points with node weights and heuristic tables."""

    order: tuple[int, ...]
    layers: list
    node_cost: list
    weights: np.ndarray
    speed: float
    constant_offset: float
    centers: np.ndarray
    slack: np.ndarray
    _tail: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n_layers = len(self.layers)
        tail = np.zeros(n_layers)
        for g in range(n_layers - 2, 0, -1):
            leg = max(0.0, np.linalg.norm(self.centers[g] - self.centers[g + 1]) - self.slack[g] - self.slack[g + 1])
            tail[g - 1] = tail[g] + float(self.node_cost[g].min()) + self.weights[g] * leg / self.speed
        self._tail = tail

    @property
    def n_layers(self):
        return len(self.layers)

    def step_costs(self, g, i):
        """Cost of moving from point i of layer g to every point of layer g+1 (hover included)."""
        nxt = self.layers[g + 1]
        d = np.sqrt(((nxt - self.layers[g][i]) ** 2).sum(axis=1))
        return self.weights[g] * d / self.speed + self.node_cost[g + 1]

    def heuristic(self, g, i):
        """Lower bound on the remaining cost from point i of layer g to the clone.

        Each remaining leg is bounded by the distance between layer centers minus
        both layers' radii, each remaining stop by its cheapest candidate.
        """
        if g >= self.n_layers - 1:
            return 0.0
        p = self.layers[g][i]
        first = max(0.0, np.linalg.norm(p - self.centers[g + 1]) - self.slack[g + 1])
        return self.weights[g] * first / self.speed + self._tail[g]


def build_layered_graph(instance, grids=None, order=None):
    """Layered graph for ``order`` (defaults to 0..M-1) over the instance's grids."""
    inst = as_instance(instance, grids)
    order = tuple(range(inst.m)) if order is None else tuple(int(m) for m in order)
    if sorted(order) != list(range(inst.m)):
        raise ParameterError(f"order {order} is not a permutation of 0..{inst.m - 1}")
    for m in order:
        if len(inst.points[m]) == 0:
            raise InfeasibleError(f"cluster {m} has no candidate hovering point")
    start = inst.start.reshape(1, 3)
    layers = [start] + [inst.points[m] for m in order] + [start]
    w = np.concatenate([[0.0], np.cumsum(inst.counts[list(order)]).astype(np.float64), [0.0]])
    node_cost = [np.zeros(1)] + [w[g + 1] * inst.hover[m] for g, m in enumerate(order)] + [np.zeros(1)]
    centers = np.vstack([start, inst.centers[list(order)], start])
    slack = np.concatenate([[0.0], inst.slack[list(order)], [0.0]])
    return LayeredGraph(order=order, layers=layers, node_cost=node_cost, weights=w, speed=inst.speed,
                        constant_offset=-inst.offset, centers=centers, slack=slack)


@dataclass
class SearchResult:
    order: tuple[int, ...]
    chosen_points: tuple[int, ...]
    total_aoi: float
    expanded_nodes: int
    came_from: dict
    expansions: list = field(default_factory=list, repr=False)

    def tour(self, instance):
        return as_instance(instance).tour(self.order, self.chosen_points)


def weighted_astar(graph, omega=DEFAULT_OMEGA):
    """Best-first search on f = g + omega * h over the layered graph.

    Stale heap entries are skipped on pop (lazy deletion); a state is pushed
    again whenever a cheaper path to it is found.  Ties on f go to the lower
    layer, then to the earlier insertion.
    """
    if not omega >= 1:
        raise ParameterError(f"omega must be >= 1, got {omega!r}")
    goal_layer = graph.n_layers - 1
    start = (0, 0)
    cost = {start: 0.0}
    came_from = {start: None}
    counter = itertools.count()
    frontier = [(omega * graph.heuristic(0, 0), 0, next(counter), 0, 0.0)]
    expansions = []
    goal = None
    while frontier:
        f, g, _, i, g_cost = heapq.heappop(frontier)
        if g_cost > cost[(g, i)]:
            continue
        expansions.append((g, i, g_cost, f))
        if g == goal_layer:
            goal = (g, i)
            break
        new = g_cost + graph.step_costs(g, i)
        for j, c in enumerate(new.tolist()):
            s = (g + 1, j)
            if s not in cost or c < cost[s]:
                cost[s] = c
                came_from[s] = (g, i)
                heapq.heappush(frontier, (c + omega * graph.heuristic(g + 1, j), g + 1, next(counter), j, c))
    if goal is None:  # pragma: no cover - every layer is nonempty by construction
        raise InfeasibleError("clone of the start point is unreachable")
    path = []
    s = came_from[goal]
    while s is not None and s[0] > 0:
        path.append(s[1])
        s = came_from[s]
    path.reverse()
    return SearchResult(order=graph.order, chosen_points=tuple(path),
                        total_aoi=cost[goal] + graph.constant_offset,
                        expanded_nodes=len(expansions), came_from=came_from, expansions=expansions)


def exact_dp(graph):
    """Optimal point assignment by forward value iteration over the layers."""
    value = np.zeros(1)
    back = []
    for g in range(graph.n_layers - 1):
        cur, nxt = graph.layers[g], graph.layers[g + 1]
        d = np.sqrt(((cur[:, None, :] - nxt[None, :, :]) ** 2).sum(axis=2))
        total = value[:, None] + graph.weights[g] * d / graph.speed
        arg = np.argmin(total, axis=0)
        value = total[arg, np.arange(len(nxt))] + graph.node_cost[g + 1]
        back.append(arg)
    path = []
    j = 0
    for arg in reversed(back[1:]):
        j = int(arg[j])
        path.append(j)
    path.reverse()
    came_from = {}
    for g, arg in enumerate(back):
        for j, i in enumerate(arg.tolist()):
            came_from[(g + 1, j)] = (g, i)
    came_from[(0, 0)] = None
    return SearchResult(order=graph.order, chosen_points=tuple(path),
                        total_aoi=float(value[0]) + graph.constant_offset,
                        expanded_nodes=sum(len(layer) for layer in graph.layers), came_from=came_from)


def cost_to_go(graph):
    """Exact remaining cost from every node to the clone (backward DP)."""
    out = [None] * graph.n_layers
    out[-1] = np.zeros(1)
    for g in range(graph.n_layers - 2, -1, -1):
        cur, nxt = graph.layers[g], graph.layers[g + 1]
        d = np.sqrt(((cur[:, None, :] - nxt[None, :, :]) ** 2).sum(axis=2))
        out[g] = (graph.weights[g] * d / graph.speed + graph.node_cost[g + 1][None, :] + out[g + 1][None, :]).min(axis=1)
    return out


def refine(instance, order, omega=DEFAULT_OMEGA, grids=None):
    """Pick hovering points for ``order`` with weighted A*."""
    graph = build_layered_graph(instance, grids, order)
    return weighted_astar(graph, omega)


def exact_global(instance, grids=None, cap=EXACT_GLOBAL_CAP):
    """Global optimum over all M! orders, each solved exactly by :func:`exact_dp`."""
    inst = as_instance(instance, grids)
    if inst.m > cap:
        raise ParameterError(f"exact_global enumerates M! orders; refusing M={inst.m} above cap {cap}")
    best = None
    for order in itertools.permutations(range(inst.m)):
        res = exact_dp(build_layered_graph(inst, order=order))
        if best is None or res.total_aoi < best.total_aoi:
            best = res
    return best.tour(inst), best.total_aoi, best


def order_count(m):
    return math.factorial(m)
