"""Experiment runner: solver registry, sweeps, result rows and plot series."""
from __future__ import annotations

import csv
import itertools
import os
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from .aoi import evaluate
from .baselines import MetaheuristicConfig, solve_ga, solve_nearest_neighbor, solve_random, solve_sa
from .exceptions import ParameterError
from .instance import Instance
from .router import DEFAULT_OMEGA, EXACT_GLOBAL_CAP, exact_global, refine
from .scenario import DEFAULT_NODE_CHOICES, EnvParams, build_grids, generate_scenario

SOLVERS = ("twa-greedy", "twa-sample", "twa-beam", "sa", "ga", "nn", "random", "exact")
POLICY_SOLVERS = ("twa-greedy", "twa-sample", "twa-beam")
DEFAULT_WIDTH = {"twa-sample": 5120, "twa-beam": 100}


def thread_count():
    """Worker cap from ``AOI_LAB_THREADS`` (default 1)."""
    raw = os.environ.get("AOI_LAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ParameterError(f"AOI_LAB_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ParameterError(f"AOI_LAB_THREADS must be >= 1, got {n}")
    return n


@dataclass(frozen=True)
class SolverSettings:
    width: int | None = None
    omega: float = DEFAULT_OMEGA
    seed: int = 0
    select: str = "aoi"
    metaheuristic: MetaheuristicConfig = field(default_factory=MetaheuristicConfig)

    def __post_init__(self):
        problems = []
        if self.width is not None and self.width < 1:
            problems.append("width: must be >= 1")
        if not self.omega >= 1:
            problems.append("omega: must be >= 1")
        if self.select not in ("aoi", "probability"):
            problems.append("select: must be aoi or probability")
        if problems:
            raise ParameterError("invalid solver settings: " + "; ".join(problems))

    def width_for(self, solver):
        return self.width if self.width is not None else DEFAULT_WIDTH.get(solver, 1)


def run_solver(name, instance, settings=None, policy=None):
    """Solve ``instance`` with solver ``name``; returns ``(Tour, total_aoi)``."""
    settings = settings or SolverSettings()
    if name not in SOLVERS:
        raise ParameterError(f"unknown solver {name!r}; choose from {', '.join(SOLVERS)}")
    if name in POLICY_SOLVERS:
        if policy is None:
            raise ParameterError(f"solver {name} needs a trained policy (--checkpoint)")
        if name == "twa-greedy":
            order, _ = policy.decode_greedy(instance)
        elif name == "twa-beam":
            order, _ = policy.decode_beam(instance, settings.width_for(name))
        else:
            order, _ = policy.decode_sample(instance, settings.width_for(name), settings.seed,
                                            select=settings.select, omega=settings.omega)
        res = refine(instance, order, settings.omega)
        return res.tour(instance), res.total_aoi
    if name == "sa":
        return solve_sa(instance, config=settings.metaheuristic)
    if name == "ga":
        return solve_ga(instance, config=settings.metaheuristic)
    if name == "nn":
        return solve_nearest_neighbor(instance, seed=settings.seed)
    if name == "random":
        return solve_random(instance, seed=settings.seed)
    tour, cost, _ = exact_global(instance)
    return tour, cost


@dataclass(frozen=True)
class ResultRow:
    instance_id: str
    solver: str
    m: int
    gamma_th_db: float
    n_policy: str
    total_aoi: float
    oldest_aoi: float
    effective_energy: float
    fly_time: float
    hover_time: float
    wall_seconds: float

    @classmethod
    def columns(cls):
        return tuple(f.name for f in fields(cls))


def make_row(instance_id, solver, instance, tour, wall_seconds, gamma_th_db, n_policy):
    rep = evaluate(tour, instance.scenario)
    led = rep.ledger
    return ResultRow(instance_id=instance_id, solver=solver, m=instance.m, gamma_th_db=float(gamma_th_db),
                     n_policy=n_policy, total_aoi=rep.total_aoi, oldest_aoi=rep.oldest_aoi,
                     effective_energy=led.effective_energy, fly_time=led.fly_time_after_first,
                     hover_time=led.total_hover_time, wall_seconds=wall_seconds)


def write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ResultRow.columns())
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in asdict(r).values()])


def read_rows(path):
    with open(path, newline="") as fh:
        out = []
        for rec in csv.DictReader(fh):
            out.append(ResultRow(
                instance_id=rec["instance_id"], solver=rec["solver"], m=int(rec["m"]),
                gamma_th_db=float(rec["gamma_th_db"]), n_policy=rec["n_policy"],
                **{k: float(rec[k]) for k in ("total_aoi", "oldest_aoi", "effective_energy",
                                              "fly_time", "hover_time", "wall_seconds")}))
        return out


def n_policy_label(n_per_cluster):
    if n_per_cluster is None:
        return "choice:" + "/".join(str(n) for n in DEFAULT_NODE_CHOICES)
    return f"fixed:{int(n_per_cluster)}"


def make_scenario(seed, m, gamma_th_db=20.0, n_per_cluster=None):
    env = EnvParams().with_threshold_db(gamma_th_db)
    choices = DEFAULT_NODE_CHOICES if n_per_cluster is None else (int(n_per_cluster),)
    return generate_scenario(seed, m, node_count_choices=choices, env=env)


def make_instance(seed, m, gamma_th_db=20.0, n_per_cluster=None, l_sub=5):
    sc = make_scenario(seed, m, gamma_th_db, n_per_cluster)
    return Instance(sc, build_grids(sc, l_sub=l_sub))


@dataclass(frozen=True)
class RunSpec:
    solvers: tuple = ("twa-greedy",)
    seeds: tuple = (0,)
    m_values: tuple = (10,)
    gamma_th_db_values: tuple = (20.0,)
    n_values: tuple = (None,)
    l_sub: int = 5
    settings: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        problems = []
        if not self.solvers:
            problems.append("solvers: at least one solver required")
        bad = [s for s in self.solvers if s not in SOLVERS]
        if bad:
            problems.append(f"solvers: unknown {bad}")
        if any(int(m) != m or m < 1 for m in self.m_values):
            problems.append("m: values must be positive integers")
        if any(n is not None and n < 1 for n in self.n_values):
            problems.append("n-per-cluster: values must be >= 1")
        if self.l_sub < 1:
            problems.append("l-sub: must be >= 1")
        if problems:
            raise ParameterError("invalid run: " + "; ".join(problems))

    def cases(self):
        for m, g, n, s in itertools.product(self.m_values, self.gamma_th_db_values, self.n_values, self.seeds):
            yield int(m), float(g), n, int(s)


def _run_case(spec, case, policy):
    m, g, n, seed = case
    inst = make_instance(seed, m, g, n, spec.l_sub)
    iid = f"m{m}-g{g:g}-{n_policy_label(n)}-s{seed}"
    rows = []
    for solver in spec.solvers:
        if solver == "exact" and m > EXACT_GLOBAL_CAP:
            continue
        t0 = time.perf_counter()
        tour, _ = run_solver(solver, inst, spec.settings, policy)
        wall = time.perf_counter() - t0
        rows.append(make_row(iid, solver, inst, tour, wall, g, n_policy_label(n)))
    return rows


def run_sweep(spec, policy=None):
    """All ResultRows of ``spec``, ordered by case then solver (independent of worker count)."""
    if policy is not None and policy.config.l_sub != spec.l_sub:
        raise ParameterError(f"l-sub: run uses {spec.l_sub} but the checkpoint was trained with "
                             f"{policy.config.l_sub}")
    if policy is None and any(s in POLICY_SOLVERS for s in spec.solvers):
        raise ParameterError("checkpoint: policy solvers requested without a checkpoint")
    cases = list(spec.cases())
    n_jobs = min(thread_count(), max(len(cases), 1))
    if n_jobs == 1:
        chunks = [_run_case(spec, c, policy) for c in cases]
    else:
        chunks = Parallel(n_jobs=n_jobs)(delayed(_run_case)(spec, c, policy) for c in cases)
    return [r for chunk in chunks for r in chunk]


PLOT_AXES = ("m", "gamma_th_db", "n_policy")
PLOT_METRICS = ("total_aoi", "oldest_aoi", "effective_energy", "fly_time", "hover_time", "wall_seconds")


def plot_series(rows, x="m", metric="total_aoi"):
    """Per-solver mean/std of ``metric`` against ``x``: {solver: [(x, mean, std, count), ...]}."""
    if x not in PLOT_AXES:
        raise ParameterError(f"x must be one of {PLOT_AXES}")
    if metric not in PLOT_METRICS:
        raise ParameterError(f"metric must be one of {PLOT_METRICS}")
    groups = {}
    for r in rows:
        groups.setdefault(r.solver, {}).setdefault(getattr(r, x), []).append(getattr(r, metric))
    out = {}
    for solver in sorted(groups):
        series = []
        for key in sorted(groups[solver]):
            vals = np.asarray(groups[solver][key])
            series.append((key, float(vals.mean()), float(vals.std()), int(vals.size)))
        out[solver] = series
    return out


def write_plot_data(rows, out_dir, x="m", metrics=PLOT_METRICS):
    """One whitespace-separated ``<metric>_vs_<x>__<solver>.dat`` file per solver and metric."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for metric in metrics:
        for solver, series in plot_series(rows, x, metric).items():
            path = out_dir / f"{metric}_vs_{x}__{solver}.dat"
            with open(path, "w") as fh:
                fh.write(f"# {x} mean std count\n")
                for key, mean, std, count in series:
                    fh.write(f"{key} {mean!r} {std!r} {count}\n")
            written.append(path)
    return written
