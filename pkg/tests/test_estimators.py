import numpy as np
import pytest
from sklearn.base import clone

from aoi_lab.estimators import (ExactPlanner, GeneticPlanner, NearestNeighborPlanner, RandomPlanner,
                                SimulatedAnnealingPlanner, TWAStarPlanner, check_positive, check_scenarios)
from aoi_lab.exceptions import ParameterError
from aoi_lab.harness import make_scenario
from aoi_lab.policy import ModelConfig, TransformerPolicy
from aoi_lab.aoi import total_aoi
from sklearn.exceptions import NotFittedError

from .conftest import small_instance


@pytest.fixture(scope="module")
def scenarios():
    return [make_scenario(s, 4) for s in range(3)]


@pytest.mark.parametrize("cls", [SimulatedAnnealingPlanner, GeneticPlanner, NearestNeighborPlanner,
                                 RandomPlanner, ExactPlanner, TWAStarPlanner])
def test_get_params_and_clone(cls):
    est = cls(omega=1.5, l_sub=2)
    params = est.get_params()
    assert params["omega"] == 1.5 and params["l_sub"] == 2
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(omega=2.0)
    assert est.omega == 2.0


def test_predict_requires_fit(scenarios):
    with pytest.raises(NotFittedError):
        NearestNeighborPlanner(l_sub=2).predict(scenarios)


def test_predict_and_score(scenarios):
    exact = ExactPlanner(l_sub=2).fit(scenarios)
    nn = NearestNeighborPlanner(l_sub=2).fit(scenarios)
    tours = exact.predict(scenarios)
    assert len(tours) == 3
    costs = exact.predict_cost(scenarios)
    assert costs == pytest.approx([total_aoi(t, s) for t, s in zip(tours, scenarios)])
    assert exact.score(scenarios) == pytest.approx(-costs.mean())
    assert exact.score(scenarios) >= nn.score(scenarios)


def test_metaheuristic_params_reach_solver(scenarios):
    a = SimulatedAnnealingPlanner(max_iter=0, l_sub=2, random_state=1).fit().predict_cost(scenarios)
    b = SimulatedAnnealingPlanner(max_iter=200, l_sub=2, random_state=1).fit().predict_cost(scenarios)
    assert np.all(b <= a)
    g = GeneticPlanner(max_iter=5, population=8, l_sub=2).fit().predict_cost(scenarios)
    assert np.all(np.isfinite(g))


def test_check_scenarios_errors(scenarios):
    with pytest.raises(ParameterError):
        check_scenarios(scenarios[0], 2)
    with pytest.raises(ParameterError):
        check_scenarios([], 2)
    with pytest.raises(ParameterError):
        check_scenarios(5, 2)
    with pytest.raises(ParameterError):
        check_scenarios([scenarios[0], "nope"], 2)
    with pytest.raises(ParameterError):
        check_scenarios([small_instance(0, 3, l_sub=3)], 2)
    inst = small_instance(0, 3, l_sub=2)
    assert check_scenarios([inst, scenarios[0]], 2)[0] is inst


def test_check_positive():
    assert check_positive("w", 3, integer=True) == 3
    for v, integer in ((0, False), (-1.0, False), (2.5, True)):
        with pytest.raises(ParameterError):
            check_positive("w", v, integer=integer)


def test_twa_planner_from_checkpoint(tmp_path, scenarios):
    path = tmp_path / "p.twa"
    TransformerPolicy(ModelConfig(d_em=16, heads=4, encoder_layers=1, decoder_layers=1, l_sub=2), seed=0).save(path)
    for decoding, width in (("greedy", None), ("sample", 8), ("beam", 3)):
        est = TWAStarPlanner(decoding=decoding, width=width, checkpoint=str(path)).fit()
        costs = est.predict_cost(scenarios)
        assert costs.shape == (3,) and np.all(costs > 0)
    with pytest.raises(ParameterError):
        TWAStarPlanner(decoding="nucleus", checkpoint=str(path)).fit().predict(scenarios)
    with pytest.raises(ParameterError):
        TWAStarPlanner(checkpoint=str(path), l_sub=3).fit()
    with pytest.raises(ParameterError):
        TWAStarPlanner(decoding="sample", width=0, checkpoint=str(path)).fit().predict(scenarios)


def test_twa_planner_trains(scenarios):
    est = TWAStarPlanner(d_em=16, heads=4, encoder_layers=1, epochs=1, steps_per_epoch=2, batch_size=4,
                         eval_set_size=4, m_train=4).fit()
    assert len(est.history_) == 2
    assert est.predict_cost(scenarios).shape == (3,)
