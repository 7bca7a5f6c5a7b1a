"""Command-line entry point: ``aoi-lab {gen,train,eval,solve,bench,plotdata}``."""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

from . import harness
from .aoi import evaluate, fly_hover_split
from .baselines import MetaheuristicConfig
from .exceptions import InfeasibleError, NumericalError, SchemaError
from .instance import Instance
from .policy import TransformerPolicy
from .scenario import build_grids, load_scenario, save_scenario
from .training import TrainConfig, desk_model_config, train

EXIT_OK, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4


def _add_instance_flags(p, multi):
    nargs = "+" if multi else None
    p.add_argument("--seed", type=int, default=0, help="first instance seed")
    p.add_argument("--m", type=int, nargs=nargs, default=[10] if multi else 10, help="number of clusters")
    p.add_argument("--gamma-th-db", type=float, nargs=nargs, default=[20.0] if multi else 20.0,
                   help="SNR threshold in dB")
    p.add_argument("--n-per-cluster", type=int, nargs=nargs, default=None,
                   help="fixed node count per cluster (default: random choice)")
    p.add_argument("--l-sub", type=int, default=None, help="candidate grid side (default 5, or the checkpoint's)")


def _add_solver_flags(p, multi, default):
    p.add_argument("--solver", choices=harness.SOLVERS, nargs="+" if multi else None, default=default)
    p.add_argument("--omega", type=float, default=harness.DEFAULT_OMEGA, help="weighted A* inflation")
    p.add_argument("--width", type=int, default=None, help="sampling / beam width")
    p.add_argument("--select", choices=("aoi", "probability"), default="aoi",
                   help="how twa-sample picks among its samples")
    p.add_argument("--checkpoint", type=Path, default=None)
    p.add_argument("--sa-iter", type=int, default=None)
    p.add_argument("--ga-iter", type=int, default=None)


def build_parser():
    ap = argparse.ArgumentParser(prog="aoi-lab", description="UAV data-collection tour planning experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write scenario JSON files")
    _add_instance_flags(p, multi=False)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out", type=Path, required=True, help="output directory")

    p = sub.add_parser("train", help="train the order policy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--l-sub", type=int, default=2)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--eval-size", type=int, default=512)
    p.add_argument("--omega", type=float, default=harness.DEFAULT_OMEGA)
    p.add_argument("--config", type=Path, default=None, help="JSON TrainConfig overriding the flags")
    p.add_argument("--out", type=Path, required=True, help="output directory")

    for name, default, help_ in (("eval", ["twa-greedy"], "decode a checkpoint across a sweep"),
                                 ("bench", None, "compare solvers with timing (default: all that apply)")):
        p = sub.add_parser(name, help=help_)
        _add_instance_flags(p, multi=True)
        _add_solver_flags(p, multi=True, default=default)
        p.add_argument("--count", type=int, default=20, help="instances per sweep point")
        p.add_argument("--out", type=Path, required=True, help="results CSV")

    p = sub.add_parser("solve", help="solve one instance verbosely")
    _add_instance_flags(p, multi=False)
    _add_solver_flags(p, multi=False, default="twa-greedy")
    p.add_argument("--exact", action="store_const", const="exact", dest="solver",
                   help="shorthand for --solver exact")
    p.add_argument("--scenario", type=Path, default=None, help="scenario JSON (default: generate)")
    p.add_argument("--out", type=Path, default=None, help="optional results CSV")

    p = sub.add_parser("plotdata", help="turn a results CSV into per-solver series files")
    p.add_argument("--results", type=Path, required=True)
    p.add_argument("--x", choices=harness.PLOT_AXES, default="m")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    return ap


def _load_policy(path):
    if path is None:
        return None
    if not Path(path).is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return TransformerPolicy.load(path)


def _settings(args):
    mh = MetaheuristicConfig(seed=args.seed,
                             sa_max_iter=args.sa_iter if args.sa_iter is not None else 1000,
                             ga_max_iter=args.ga_iter if args.ga_iter is not None else 10000)
    return harness.SolverSettings(width=args.width, omega=args.omega, seed=args.seed, select=args.select,
                                  metaheuristic=mh)


def _l_sub(args, policy):
    if args.l_sub is not None:
        return args.l_sub
    return policy.config.l_sub if policy is not None else 5


def cmd_gen(args, out):
    args.out.mkdir(parents=True, exist_ok=True)
    for k in range(args.count):
        seed = args.seed + k
        path = args.out / f"scenario_m{args.m}_s{seed}.json"
        save_scenario(harness.make_scenario(seed, args.m, args.gamma_th_db, args.n_per_cluster), path)
        print(path, file=out)


def cmd_train(args, out):
    if args.config is not None:
        config = TrainConfig.from_dict(json.loads(args.config.read_text()))
    else:
        config = TrainConfig(epochs=args.epochs, steps_per_epoch=args.steps, batch_size=args.batch,
                             learning_rate=args.lr, m_train=args.m, eval_set_size=args.eval_size, seed=args.seed,
                             l_sub=args.l_sub, omega=args.omega, model=desk_model_config(args.l_sub))
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "train_config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    res = train(config, args.out, log=lambda s: print(s, file=out))
    print(f"checkpoint {res.checkpoint}", file=out)


def _sweep(args, out):
    policy = _load_policy(args.checkpoint)
    if args.solver is None:
        args.solver = [s for s in harness.SOLVERS if policy is not None or s not in harness.POLICY_SOLVERS]
    spec = harness.RunSpec(solvers=tuple(args.solver), seeds=tuple(range(args.seed, args.seed + args.count)),
                           m_values=tuple(args.m), gamma_th_db_values=tuple(args.gamma_th_db),
                           n_values=tuple(args.n_per_cluster) if args.n_per_cluster else (None,),
                           l_sub=_l_sub(args, policy), settings=_settings(args))
    rows = harness.run_sweep(spec, policy)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    harness.write_rows(args.out, rows)
    print(f"{len(rows)} rows -> {args.out}", file=out)


def cmd_solve(args, out):
    policy = _load_policy(args.checkpoint)
    l_sub = _l_sub(args, policy)
    if args.scenario is not None:
        sc = load_scenario(args.scenario)
        inst = Instance(sc, build_grids(sc, l_sub=l_sub))
        iid, g, npol = args.scenario.stem, 10 * math.log10(sc.env.snr_threshold), "file"
    else:
        inst = harness.make_instance(args.seed, args.m, args.gamma_th_db, args.n_per_cluster, l_sub)
        iid, g, npol = f"s{args.seed}", args.gamma_th_db, harness.n_policy_label(args.n_per_cluster)
    if policy is not None and policy.config.l_sub != l_sub:
        raise ValueError(f"l-sub: {l_sub} does not match checkpoint l_sub {policy.config.l_sub}")
    t0 = time.perf_counter()
    tour, cost = harness.run_solver(args.solver, inst, _settings(args), policy)
    wall = time.perf_counter() - t0
    rep = evaluate(tour, inst.scenario)
    fly, hov = fly_hover_split(rep)
    print(f"solver          {args.solver}", file=out)
    print(f"order           {' '.join(str(m + 1) for m in tour.order)}", file=out)
    for m, p in zip(tour.order, tour.points):
        print(f"  cluster {m + 1:3d}  hover at ({p[0]:.2f}, {p[1]:.2f}, {p[2]:.2f})", file=out)
    print(f"total_aoi       {rep.total_aoi:.6f}", file=out)
    print(f"oldest_aoi      {rep.oldest_aoi:.6f}  (fly {fly:.4f} / hover {hov:.4f})", file=out)
    print(f"effective_energy {rep.ledger.effective_energy:.3f}", file=out)
    print(f"wall_seconds    {wall:.4f}", file=out)
    if args.out is not None:
        harness.write_rows(args.out, [harness.make_row(iid, args.solver, inst, tour, wall, g, npol)])


def cmd_plotdata(args, out):
    rows = harness.read_rows(args.results)
    for path in harness.write_plot_data(rows, args.out, x=args.x):
        print(path, file=out)


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": _sweep, "bench": _sweep, "solve": cmd_solve,
            "plotdata": cmd_plotdata}


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args, out)
    except InfeasibleError as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SchemaError, ValueError, NumericalError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
