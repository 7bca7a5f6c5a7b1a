import numpy as np
import pytest
from hypothesis import given, strategies as st

from aoi_lab.aoi import total_aoi
from aoi_lab.baselines import (MetaheuristicConfig, _Packed, solve_ga, solve_nearest_neighbor, solve_random,
                               solve_sa)
from aoi_lab.exceptions import ParameterError
from aoi_lab.router import exact_global

from .conftest import small_instance

FAST = MetaheuristicConfig(sa_max_iter=300, ga_max_iter=150, seed=3)


def test_config_validation():
    for kw in (dict(sa_cooling=1.0), dict(sa_t0=0.0), dict(ga_mutation_rate=1.5), dict(sa_max_iter=-1),
               dict(ga_population=1)):
        with pytest.raises(ParameterError):
            MetaheuristicConfig(**kw)


def test_packed_costs_match_instance_cost():
    inst = small_instance(2, 5)
    pack = _Packed(inst)
    rng = np.random.default_rng(0)
    orders = np.array([rng.permutation(5) for _ in range(20)])
    idx = np.floor(rng.random((20, 5)) * pack.sizes).astype(int)
    got = pack.costs(orders, idx)
    for o, i, c in zip(orders, idx, got):
        assert c == pytest.approx(inst.cost(o, i[o]), rel=1e-12)


@pytest.mark.parametrize("solver", [solve_sa, solve_ga])
def test_zero_iterations_returns_initial(solver):
    inst = small_instance(4, 4)
    cfg = MetaheuristicConfig(sa_max_iter=0, ga_max_iter=0, seed=9)
    hist = []
    tour, cost = solver(inst, config=cfg, history=hist)
    assert hist == []
    assert cost == pytest.approx(total_aoi(tour, inst.scenario), rel=1e-12)
    if solver is solve_sa:
        rng = np.random.default_rng(9)
        order = rng.permutation(4)
        assert tuple(tour.order) == tuple(order)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_solvers_never_beat_exact(seed):
    inst = small_instance(seed, 5)
    _, best, _ = exact_global(inst)
    for tour, cost in (solve_sa(inst, config=FAST), solve_ga(inst, config=FAST),
                       solve_nearest_neighbor(inst), solve_random(inst, seed=seed)):
        assert cost >= best - 1e-9 * best
        assert cost == pytest.approx(total_aoi(tour, inst.scenario), rel=1e-12)


def test_ga_keeps_optimum_when_seeded_with_clones():
    inst = small_instance(7, 5)
    _, best, res = exact_global(inst)
    idx = np.zeros(5, dtype=int)
    idx[list(res.order)] = res.chosen_points
    pop = 6
    _, cost = solve_ga(inst, config=FAST, initial=(np.tile(res.order, (pop, 1)), np.tile(idx, (pop, 1))))
    assert cost == pytest.approx(best, rel=1e-12)


@pytest.mark.parametrize("solver", [solve_sa, solve_ga])
def test_best_so_far_history_non_increasing(solver):
    inst = small_instance(5, 5)
    hist = []
    _, cost = solver(inst, config=FAST, history=hist)
    assert len(hist) > 0
    assert np.all(np.diff(hist) <= 1e-9)
    assert hist[-1] == pytest.approx(cost, rel=1e-9)


def test_single_cluster_all_agree():
    inst = small_instance(3, 1)
    _, best, _ = exact_global(inst)
    for _, cost in (solve_sa(inst, config=MetaheuristicConfig(sa_max_iter=200)),
                    solve_ga(inst, config=MetaheuristicConfig(ga_max_iter=50)),
                    solve_nearest_neighbor(inst), solve_random(inst)):
        assert cost == pytest.approx(best, rel=1e-12)


@given(st.integers(0, 10_000))
def test_random_reproducible(seed):
    inst = small_instance(11, 4)
    a, b = solve_random(inst, seed=seed), solve_random(inst, seed=seed)
    assert tuple(a[0].order) == tuple(b[0].order) and a[1] == b[1]


def test_metaheuristics_reproducible():
    inst = small_instance(12, 5)
    assert solve_sa(inst, config=FAST)[1] == solve_sa(inst, config=FAST)[1]
    assert solve_ga(inst, config=FAST)[1] == solve_ga(inst, config=FAST)[1]


def test_nearest_neighbor_beats_mean_random():
    nn, rnd = [], []
    for s in range(6):
        inst = small_instance(s, 6)
        nn.append(solve_nearest_neighbor(inst)[1])
        rnd.append(np.mean([solve_random(inst, seed=k)[1] for k in range(100)]))
    assert np.mean(nn) <= np.mean(rnd)
