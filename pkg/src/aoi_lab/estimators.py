"""scikit-learn style planners.

``X`` is a sequence of scenarios (or prebuilt :class:`~aoi_lab.instance.Instance`
objects).  ``predict`` returns one :class:`~aoi_lab.aoi.Tour` per scenario and
``score`` is the negated mean total AoI, so that larger is better as sklearn's
model-selection tools expect.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .aoi import total_aoi
from .baselines import MetaheuristicConfig
from .exceptions import ParameterError
from .harness import SolverSettings, run_solver
from .instance import Instance
from .policy import ModelConfig, TransformerPolicy
from .router import DEFAULT_OMEGA
from .scenario import Scenario, build_grids
from .training import TrainConfig, train


def check_scenarios(X, l_sub):
    """Validate ``X`` and turn it into a list of Instances with ``l_sub`` grids."""
    if isinstance(X, (Scenario, Instance)):
        raise ParameterError("X must be a sequence of scenarios, not a single scenario")
    try:
        items = list(X)
    except TypeError:
        raise ParameterError(f"X must be a sequence of scenarios, got {type(X).__name__}") from None
    if not items:
        raise ParameterError("X is empty")
    out = []
    for k, item in enumerate(items):
        if isinstance(item, Instance):
            sizes = item.grid_sizes
            if max(sizes) > l_sub ** 2:
                raise ParameterError(f"X[{k}] has grids larger than l_sub={l_sub}")
            out.append(item)
        elif isinstance(item, Scenario):
            out.append(Instance(item, build_grids(item, l_sub=l_sub)))
        else:
            raise ParameterError(f"X[{k}] is a {type(item).__name__}, expected Scenario or Instance")
    return out


def check_positive(name, value, integer=False):
    if integer and int(value) != value:
        raise ParameterError(f"{name} must be an integer, got {value!r}")
    if not value > 0:
        raise ParameterError(f"{name} must be positive, got {value!r}")
    return value


class _PlannerBase(BaseEstimator):
    _solver = None

    def _settings(self):
        return SolverSettings(omega=self.omega, seed=self.random_state)

    def _policy(self):
        return None

    def fit(self, X=None, y=None):
        """No-op for search-based planners; kept for pipeline compatibility."""
        self.fitted_ = True
        return self

    def predict(self, X):
        check_is_fitted(self)
        check_positive("omega", self.omega)
        insts = check_scenarios(X, self.l_sub)
        settings, policy = self._settings(), self._policy()
        return [run_solver(self._solver, inst, settings, policy)[0] for inst in insts]

    def predict_cost(self, X):
        tours = self.predict(X)
        insts = check_scenarios(X, self.l_sub)
        return np.array([total_aoi(t, inst.scenario) for t, inst in zip(tours, insts)])

    def score(self, X, y=None):
        return -float(self.predict_cost(X).mean())


class SimulatedAnnealingPlanner(_PlannerBase):
    _solver = "sa"

    def __init__(self, t0=100.0, cooling=0.99, max_iter=1000, omega=DEFAULT_OMEGA, l_sub=5, random_state=0):
        self.t0 = t0
        self.cooling = cooling
        self.max_iter = max_iter
        self.omega = omega
        self.l_sub = l_sub
        self.random_state = random_state

    def _settings(self):
        mh = MetaheuristicConfig(sa_t0=self.t0, sa_cooling=self.cooling, sa_max_iter=self.max_iter,
                                 seed=self.random_state)
        return SolverSettings(omega=self.omega, seed=self.random_state, metaheuristic=mh)


class GeneticPlanner(_PlannerBase):
    _solver = "ga"

    def __init__(self, population=None, max_iter=10000, crossover_rate=0.1, mutation_rate=0.8,
                 omega=DEFAULT_OMEGA, l_sub=5, random_state=0):
        self.population = population
        self.max_iter = max_iter
        self.crossover_rate = crossover_rate
        self.mutation_rate = mutation_rate
        self.omega = omega
        self.l_sub = l_sub
        self.random_state = random_state

    def _settings(self):
        mh = MetaheuristicConfig(ga_population=self.population, ga_max_iter=self.max_iter,
                                 ga_crossover_rate=self.crossover_rate, ga_mutation_rate=self.mutation_rate,
                                 seed=self.random_state)
        return SolverSettings(omega=self.omega, seed=self.random_state, metaheuristic=mh)


class NearestNeighborPlanner(_PlannerBase):
    _solver = "nn"

    def __init__(self, omega=DEFAULT_OMEGA, l_sub=5, random_state=0):
        self.omega = omega
        self.l_sub = l_sub
        self.random_state = random_state


class RandomPlanner(_PlannerBase):
    _solver = "random"

    def __init__(self, omega=DEFAULT_OMEGA, l_sub=5, random_state=0):
        self.omega = omega
        self.l_sub = l_sub
        self.random_state = random_state


class ExactPlanner(_PlannerBase):
    """Enumerates every visiting order; only for small instances."""

    _solver = "exact"

    def __init__(self, omega=DEFAULT_OMEGA, l_sub=5, random_state=0):
        self.omega = omega
        self.l_sub = l_sub
        self.random_state = random_state


class TWAStarPlanner(_PlannerBase):
    """Attention policy for the visiting order plus weighted A* for the hovering points.

    ``fit`` trains the policy with REINFORCE on freshly generated instances of
    ``m_train`` clusters (``X`` is not used for training) unless ``checkpoint``
    names a saved policy, which is then loaded instead.
    """

    def __init__(self, decoding="greedy", width=None, select="aoi", omega=DEFAULT_OMEGA, l_sub=2,
                 d_em=64, heads=8, encoder_layers=2, decoder_layers=1, epochs=20, steps_per_epoch=50,
                 batch_size=64, learning_rate=1e-4, m_train=5, eval_set_size=512, checkpoint=None,
                 random_state=0):
        self.decoding = decoding
        self.width = width
        self.select = select
        self.omega = omega
        self.l_sub = l_sub
        self.d_em = d_em
        self.heads = heads
        self.encoder_layers = encoder_layers
        self.decoder_layers = decoder_layers
        self.epochs = epochs
        self.steps_per_epoch = steps_per_epoch
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.m_train = m_train
        self.eval_set_size = eval_set_size
        self.checkpoint = checkpoint
        self.random_state = random_state

    @property
    def _solver(self):
        if self.decoding not in ("greedy", "sample", "beam"):
            raise ParameterError(f"decoding must be greedy, sample or beam, got {self.decoding!r}")
        return f"twa-{self.decoding}"

    def fit(self, X=None, y=None):
        if self.checkpoint is not None:
            self.policy_ = TransformerPolicy.load(self.checkpoint)
            if self.policy_.config.l_sub != self.l_sub:
                raise ParameterError(f"l_sub={self.l_sub} but the checkpoint uses {self.policy_.config.l_sub}")
            self.history_ = []
            return self
        model = ModelConfig(d_em=self.d_em, heads=self.heads, encoder_layers=self.encoder_layers,
                            decoder_layers=self.decoder_layers, l_sub=self.l_sub)
        config = TrainConfig(epochs=self.epochs, steps_per_epoch=self.steps_per_epoch, batch_size=self.batch_size,
                             learning_rate=self.learning_rate, m_train=self.m_train,
                             eval_set_size=self.eval_set_size, seed=self.random_state, l_sub=self.l_sub,
                             omega=self.omega, model=model)
        res = train(config)
        self.policy_ = res.policy
        self.history_ = res.metrics
        return self

    def _settings(self):
        if self.width is not None:
            check_positive("width", self.width, integer=True)
        return SolverSettings(width=self.width, omega=self.omega, seed=self.random_state, select=self.select)

    def _policy(self):
        return self.policy_
