import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from aoi_lab.aoi import total_aoi
from aoi_lab.exceptions import InfeasibleError, ParameterError
from aoi_lab.router import (build_layered_graph, cost_to_go, exact_dp, exact_global, order_count, refine,
                            weighted_astar)

from .conftest import small_instance


def enumerate_assignments(inst, order):
    best = np.inf
    for idx in itertools.product(*[range(len(inst.points[k])) for k in order]):
        best = min(best, total_aoi(inst.tour(order, idx), inst.scenario))
    return best


def test_single_forced_path():
    inst = small_instance(2, 1, l_sub=1)
    g = build_layered_graph(inst)
    assert g.n_layers == 3
    res = weighted_astar(g, 1.0)
    assert res.chosen_points == (0,)
    assert res.total_aoi == pytest.approx(total_aoi(res.tour(inst), inst.scenario), rel=1e-12)
    assert exact_dp(g).total_aoi == pytest.approx(res.total_aoi, rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_dp_matches_assignment_enumeration(seed):
    inst = small_instance(seed, 4, l_sub=2)
    order = tuple(np.random.default_rng(seed).permutation(4).tolist())
    dp = exact_dp(build_layered_graph(inst, order=order))
    assert dp.total_aoi == pytest.approx(enumerate_assignments(inst, order), rel=1e-12)
    assert dp.total_aoi == pytest.approx(total_aoi(dp.tour(inst), inst.scenario), rel=1e-9)


def test_first_layer_weight_zero():
    g = build_layered_graph(small_instance(0, 3))
    assert g.weights[0] == 0.0 and g.weights[-1] == 0.0
    # leaving the start costs nothing but the hover at the first stop
    np.testing.assert_allclose(g.step_costs(0, 0), g.node_cost[1])


def test_heuristic_goal_and_degenerate():
    inst = small_instance(4, 3, l_sub=1)
    g = build_layered_graph(inst, order=(1, 2, 0))
    ctg = cost_to_go(g)
    assert g.heuristic(g.n_layers - 1, 0) == 0.0
    # singleton layers: the bound is exact everywhere
    for layer in range(g.n_layers):
        assert g.heuristic(layer, 0) == pytest.approx(ctg[layer][0], rel=1e-9, abs=1e-9)


@given(st.integers(0, 100_000), st.integers(1, 6), st.integers(1, 5))
def test_heuristic_admissible(seed, m, l_sub):
    inst = small_instance(seed, m, l_sub=l_sub)
    order = tuple(np.random.default_rng(seed).permutation(m).tolist())
    g = build_layered_graph(inst, order=order)
    ctg = cost_to_go(g)
    for layer in range(g.n_layers):
        for i in range(len(g.layers[layer])):
            assert g.heuristic(layer, i) <= ctg[layer][i] * (1 + 1e-12) + 1e-9


@given(st.integers(0, 100_000), st.integers(1, 8))
def test_astar_matches_dp_and_bound(seed, m):
    inst = small_instance(seed, m, l_sub=3)
    order = tuple(np.random.default_rng(seed).permutation(m).tolist())
    g = build_layered_graph(inst, order=order)
    dp = exact_dp(g).total_aoi
    exact = weighted_astar(g, 1.0)
    assert abs(exact.total_aoi - dp) <= 1e-9 * abs(dp)
    fast = weighted_astar(g, 1.2)
    assert fast.total_aoi <= 1.2 * dp
    assert fast.total_aoi == pytest.approx(total_aoi(fast.tour(inst), inst.scenario), rel=1e-9)


@given(st.integers(0, 100_000), st.integers(1, 6))
def test_frontier_monotone_with_unit_weight(seed, m):
    g = build_layered_graph(small_instance(seed, m, l_sub=3))
    fs = [f for _, _, _, f in weighted_astar(g, 1.0).expansions]
    assert all(b >= a - 1e-9 * max(1.0, abs(a)) for a, b in zip(fs, fs[1:]))


def test_dp_single_layer_picks_best_hover_plus_return():
    inst = small_instance(9, 1, l_sub=4)
    g = build_layered_graph(inst)
    res = exact_dp(g)
    d = np.linalg.norm(inst.points[0] - inst.start, axis=1)
    w = inst.counts[0]
    assert res.chosen_points[0] == int(np.argmin(w * inst.hover[0] + w * d / inst.speed))


def test_dp_hover_shift_with_singletons():
    inst = small_instance(3, 3, l_sub=1)
    order = (2, 0, 1)
    base = exact_dp(build_layered_graph(inst, order=order))
    shifted_hover = [h + 5.0 for h in inst.hover]
    inst.hover = shifted_hover
    shifted = exact_dp(build_layered_graph(inst, order=order))
    w = np.cumsum(inst.counts[list(order)])
    assert shifted.total_aoi - base.total_aoi == pytest.approx(5.0 * w.sum(), rel=1e-12)
    assert shifted.chosen_points == base.chosen_points


def test_empty_grid_infeasible():
    inst = small_instance(1, 2)
    inst.points[1] = np.zeros((0, 3))
    with pytest.raises(InfeasibleError):
        build_layered_graph(inst)


def test_bad_order_and_omega():
    inst = small_instance(1, 3)
    with pytest.raises(ParameterError):
        build_layered_graph(inst, order=(0, 0, 1))
    with pytest.raises(ParameterError):
        weighted_astar(build_layered_graph(inst), omega=0.5)


def test_exact_global_small_cases():
    inst = small_instance(6, 1)
    tour, cost, _ = exact_global(inst)
    assert tour.order == (0,)
    inst = small_instance(6, 3, l_sub=2)
    brute = min(enumerate_assignments(inst, o) for o in itertools.permutations(range(3)))
    assert exact_global(inst)[1] == pytest.approx(brute, rel=1e-12)
    assert order_count(3) == 6


def test_exact_global_lower_bounds_refine():
    inst = small_instance(8, 5, l_sub=2)
    opt = exact_global(inst)[1]
    for order in itertools.islice(itertools.permutations(range(5)), 0, 120, 7):
        assert refine(inst, order).total_aoi >= opt * (1 - 1e-12)


def test_exact_global_cap():
    with pytest.raises(ParameterError, match="cap"):
        exact_global(small_instance(0, 8, l_sub=1))
