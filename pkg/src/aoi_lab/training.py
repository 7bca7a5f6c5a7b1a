"""REINFORCE with a greedy-rollout baseline for the order policy."""
from __future__ import annotations

import csv
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import numerics as nx
from .exceptions import NumericalError, ParameterError
from .instance import Instance
from .numerics import Tensor
from .policy import ModelConfig, TransformerPolicy
from .router import DEFAULT_OMEGA, refine
from .scenario import build_grids, generate_scenario

METRIC_COLUMNS = ("epoch", "step", "mean_sample_cost", "mean_greedy_cost", "baseline_cost", "grad_norm", "seconds")


def desk_model_config(l_sub=2):
    return ModelConfig(d_em=64, heads=8, encoder_layers=2, decoder_layers=1, l_sub=l_sub)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    steps_per_epoch: int = 50
    batch_size: int = 64
    learning_rate: float = 1e-4
    m_train: int = 5
    ttest_alpha: float = 0.05
    eval_set_size: int = 512
    seed: int = 0
    l_sub: int = 2
    omega: float = DEFAULT_OMEGA
    model: ModelConfig = field(default_factory=desk_model_config)

    def __post_init__(self):
        for name in ("epochs", "steps_per_epoch", "batch_size", "m_train", "eval_set_size", "l_sub"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 1:
                raise ParameterError(f"TrainConfig.{name} must be a positive integer")
        if not self.learning_rate > 0:
            raise ParameterError("TrainConfig.learning_rate must be positive")
        if not 0 < self.ttest_alpha < 1:
            raise ParameterError("TrainConfig.ttest_alpha must lie in (0, 1)")
        if self.omega < 1:
            raise ParameterError("TrainConfig.omega must be >= 1")
        if self.model.l_sub != self.l_sub:
            raise ParameterError(f"TrainConfig.l_sub={self.l_sub} but model.l_sub={self.model.l_sub}")

    def to_dict(self):
        d = asdict(self)
        d["model"] = self.model.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        model = ModelConfig.from_dict(d.pop("model")) if "model" in d else desk_model_config(d.get("l_sub", 2))
        return cls(model=model, **d)


def make_instances(seeds, m, l_sub, env=None):
    out = []
    for s in seeds:
        sc = generate_scenario(int(s), m, env=env)
        out.append(Instance(sc, build_grids(sc, l_sub=l_sub)))
    return out


@dataclass
class RolloutBatch:
    orders: np.ndarray
    log_prob: Tensor
    costs: np.ndarray


def rollout_batch(policy, instances, mode="sample", rng=None, omega=DEFAULT_OMEGA):
    """Decode one order per instance and price it after weighted-A* point selection."""
    if not instances:
        raise ParameterError("rollout_batch needs at least one instance")
    r = policy.rollout(instances, mode=mode, rng=rng)
    if not np.all(np.isfinite(r.log_prob.data)) or np.any(r.orders < 0):
        raise NumericalError("policy produced non-finite probabilities")
    costs = np.array([refine(inst, order, omega).total_aoi for inst, order in zip(instances, r.orders)])
    return RolloutBatch(orders=r.orders, log_prob=r.log_prob, costs=costs)


def greedy_costs(policy, instances, omega=DEFAULT_OMEGA):
    with nx.no_grad():
        return rollout_batch(policy, instances, "greedy", omega=omega).costs


def surrogate_loss(log_prob, advantage):
    """Mean of advantage * log-probability; the advantage is a constant."""
    adv = Tensor(np.asarray(advantage, dtype=np.float64))
    return nx.scale(nx.tsum(nx.mul(log_prob, adv)), 1.0 / len(advantage))


def paired_t_test(candidate, reference):
    """One-sided paired t-test of mean(candidate - reference) < 0; returns (t, p).

    Zero-variance differences give t = -inf / +inf / nan and p = 0 / 1 / 1 for a
    negative / positive / zero mean difference.
    """
    d = np.asarray(candidate, dtype=np.float64) - np.asarray(reference, dtype=np.float64)
    n = d.size
    if n < 2:
        raise ParameterError("paired t-test needs at least two pairs")
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0 or not np.isfinite(sd):
        if mean < 0:
            return -math.inf, 0.0
        return (math.inf if mean > 0 else math.nan), 1.0
    t = mean / (sd / math.sqrt(n))
    return float(t), float(stats.t.cdf(t, n - 1))


@dataclass
class TrainerState:
    config: TrainConfig
    policy: TransformerPolicy
    baseline: TransformerPolicy
    adam: nx.AdamState
    instance_rng: np.random.Generator
    sample_rng: np.random.Generator
    eval_rng: np.random.Generator
    epoch: int = 0
    step: int = 0
    baseline_updates: int = 0
    metrics: list = field(default_factory=list)

    @classmethod
    def create(cls, config):
        inst_seq, sample_seq, eval_seq, init_seq = np.random.SeedSequence(config.seed).spawn(4)
        init_seed = int(init_seq.generate_state(1)[0])
        policy = TransformerPolicy(config.model, seed=init_seed)
        return cls(config=config, policy=policy, baseline=policy.copy(),
                   adam=nx.AdamState(lr=config.learning_rate),
                   instance_rng=np.random.default_rng(inst_seq),
                   sample_rng=np.random.default_rng(sample_seq),
                   eval_rng=np.random.default_rng(eval_seq))

    def draw_seeds(self, rng, n):
        return rng.integers(0, 2 ** 63 - 1, size=n)


@dataclass
class StepResult:
    loss: float
    mean_sample_cost: float
    mean_greedy_cost: float
    baseline_cost: float
    grad_norm: float


def reinforce_step(state, instances, greedy_of_current=True):
    """One policy-gradient update on ``instances`` (modifies ``state`` in place)."""
    cfg = state.config
    params = state.policy.params
    for p in params.values():
        p.grad = None
    batch = rollout_batch(state.policy, instances, "sample", rng=state.sample_rng, omega=cfg.omega)
    bl_costs = greedy_costs(state.baseline, instances, cfg.omega)
    loss = surrogate_loss(batch.log_prob, batch.costs - bl_costs)
    nx.backward(loss)
    grads = {k: (np.zeros_like(p.data) if p.grad is None else p.grad) for k, p in params.items()}
    grad_norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if not (np.isfinite(float(loss.data)) and np.isfinite(grad_norm)):
        bad = [k for k, g in grads.items() if not np.all(np.isfinite(g))]
        raise NumericalError(f"non-finite loss {float(loss.data)!r} or gradient (parameters: {bad[:5]})")
    nx.adam_step(params, grads, state.adam)
    for p in params.values():
        p.grad = None
    mean_greedy = float(greedy_costs(state.policy, instances, cfg.omega).mean()) if greedy_of_current else math.nan
    state.step += 1
    return StepResult(loss=float(loss.data), mean_sample_cost=float(batch.costs.mean()),
                      mean_greedy_cost=mean_greedy, baseline_cost=float(bl_costs.mean()), grad_norm=grad_norm)


def maybe_update_baseline(state, eval_instances):
    """Copy the current policy into the baseline if it is significantly better on ``eval_instances``."""
    cur = greedy_costs(state.policy, eval_instances, state.config.omega)
    ref = greedy_costs(state.baseline, eval_instances, state.config.omega)
    _, p = paired_t_test(cur, ref)
    improved = cur.mean() < ref.mean() and p < state.config.ttest_alpha
    if improved:
        state.baseline = state.policy.copy()
        state.baseline_updates += 1
    return improved


def write_metrics(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for r in rows:
            w.writerow([r["epoch"], r["step"]] + [repr(float(r[c])) for c in METRIC_COLUMNS[2:]])


@dataclass
class TrainResult:
    policy: TransformerPolicy
    metrics: list
    checkpoint: Path | None
    baseline_updates: int


def train(config, out_dir=None, log=None):
    """Run the full schedule; writes ``metrics.csv`` and ``policy.twa`` into ``out_dir`` if given."""
    state = TrainerState.create(config)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "policy.twa" if out is not None else None
    for epoch in range(config.epochs):
        state.epoch = epoch
        for step in range(config.steps_per_epoch):
            t0 = time.perf_counter()
            seeds = state.draw_seeds(state.instance_rng, config.batch_size)
            res = reinforce_step(state, make_instances(seeds, config.m_train, config.l_sub))
            state.metrics.append({"epoch": epoch, "step": step, "mean_sample_cost": res.mean_sample_cost,
                                  "mean_greedy_cost": res.mean_greedy_cost, "baseline_cost": res.baseline_cost,
                                  "grad_norm": res.grad_norm, "seconds": time.perf_counter() - t0})
        eval_seeds = state.draw_seeds(state.eval_rng, config.eval_set_size)
        updated = maybe_update_baseline(state, make_instances(eval_seeds, config.m_train, config.l_sub))
        if log is not None:
            last = state.metrics[-config.steps_per_epoch:]
            log(f"epoch {epoch}: greedy {np.mean([r['mean_greedy_cost'] for r in last]):.1f} "
                f"baseline {np.mean([r['baseline_cost'] for r in last]):.1f} updated={updated}")
        if out is not None:
            state.policy.save(ckpt)
            write_metrics(out / "metrics.csv", state.metrics)
    return TrainResult(policy=state.policy, metrics=state.metrics, checkpoint=ckpt,
                       baseline_updates=state.baseline_updates)
