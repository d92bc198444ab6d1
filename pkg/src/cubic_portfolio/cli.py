"""Command-line entry point: ``python -m cubic_portfolio <command> ...``.

Commands: ``gen``, ``solve``, ``bench``, ``report``, ``oracle``, ``audit``.
The only environment knob is the worker count for ``bench``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench
from .baselines import AnnealConfig, TabuConfig, decoded_native, sa_solve, tabu_solve
from .diagnostics import brute_force_optimum, feasibility_record
from .hamd import MODES, HamdConfig, solve
from .instance import dumps_instance, generate_instance, load_instance, save_instance
from .quadratize import build_augmented


def _add_instance_args(p, seed_flag="--instance-seed"):
    p.add_argument("--instance", type=Path, help="instance file (overrides --n/--k)")
    p.add_argument("--n", type=int, help="number of assets")
    p.add_argument("--k", type=int, help="cardinality target K")
    p.add_argument(seed_flag, dest="instance_seed", type=int, default=bench.DEFAULT_INSTANCE_SEED,
                   help="instance generation seed (default %(default)s)")


def _add_budget_args(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--budget-secs", type=float, help="wall-clock budget per run")
    g.add_argument("--budget-iters", type=int,
                   help="fixed budget per run: HAMD steps, SA sweeps or tabu flips")


def _instance(args):
    if args.instance is not None:
        return load_instance(args.instance)
    if args.n is None or args.k is None:
        raise SystemExit("give --instance or both --n and --k")
    return generate_instance(args.n, args.k, args.instance_seed)


def _emit(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)


def cmd_gen(args):
    inst = generate_instance(args.n, args.k, args.seed)
    if args.out is None:
        sys.stdout.write(dumps_instance(inst))
    else:
        save_instance(inst, args.out)
        print(f"wrote {args.out} (n={inst.n}, K={inst.K}, {inst.n_triples} triples)")


def _read_state(path: Path) -> np.ndarray:
    text = "".join(path.read_text().split())
    if not text or set(text) - {"0", "1"}:
        raise SystemExit(f"{path}: expected a string of 0/1 characters")
    return np.frombuffer(text.encode(), dtype=np.uint8) - ord("0")


def cmd_solve(args):
    inst = _instance(args)
    timed = args.budget_secs is not None
    if args.solver == "hamd":
        cfg = HamdConfig(mode=args.mode, budget_secs=args.budget_secs, budget_iters=args.budget_iters)
        tr = solve(inst, cfg, seed=args.seed)
        out = {"solver": "hamd", "mode": args.mode, "seed": args.seed, "n": inst.n, "K": inst.K,
               "native_objective": tr.value, "selection": tr.portfolio.indices.tolist(),
               "restarts": tr.restarts, "ils_steps": tr.ils_steps, "ttt": tr.ttt(),
               "config": cfg.to_dict()}
        if timed:
            out["wall_time"] = tr.wall_time
    else:
        qubo = build_augmented(inst, lambda_multiplier=args.lambda_mult)
        if args.solver == "sa":
            res = sa_solve(qubo, AnnealConfig(budget_secs=args.budget_secs,
                                              budget_sweeps=args.budget_iters, seed=args.seed))
        else:
            res = tabu_solve(qubo, TabuConfig(budget_secs=args.budget_secs,
                                              budget_iters=args.budget_iters, seed=args.seed))
        feas = feasibility_record(qubo, res.best_state, inst)
        out = {"solver": args.solver, "seed": args.seed, "n": inst.n, "K": inst.K,
               "native_objective": decoded_native(qubo, res.best_state),
               "lambda_multiplier": args.lambda_mult, "lambda_K": qubo.lambda_K,
               "best_energy": res.best_energy, "feasibility": feas.to_dict(),
               "ttt": res.trace.ttt, "config": res.trace.config}
        if timed:
            out["wall_time"] = res.trace.wall_time
        if args.state_out is not None:
            args.state_out.write_text(bench._state_string(res.best_state) + "\n")
    _emit(json.dumps(out, sort_keys=True, indent=1) + "\n", args.out)


def cmd_bench(args):
    kw = dict(kind=args.kind, budget_secs=args.budget_secs, budget_iters=args.budget_iters,
              instance_seed=args.instance_seed, out=str(args.out))
    if args.n is not None or args.k is not None:
        if args.n is None or args.k is None or len(args.n) != len(args.k):
            raise SystemExit("--n and --k must be given together with matching lengths")
        kw["sizes"] = tuple(zip(args.n, args.k))
    if args.seeds:
        kw["seeds"] = tuple(args.seeds)
    if args.lambda_mult:
        kw["multipliers"] = tuple(args.lambda_mult)
    if args.solver:
        kw["solvers"] = tuple(args.solver)
    if args.mode:
        kw["modes"] = tuple(args.mode)
    spec = bench.ExperimentSpec(**kw)
    records, summary = bench.run_experiment(spec, fmt=args.format)
    for table in bench.tables_for(summary):
        if table.rows:
            print(f"[{table.name}]")
            print(bench.table_to_text(table))
    print(f"{len(records)} records written to {args.out}")


def cmd_report(args):
    records = bench.load_records(args.results)
    if not records:
        raise SystemExit(f"no result records under {args.results}")
    for summary in bench.summarize(records).values():
        paths = bench.render_report(summary, args.format, args.out)
        for p in paths:
            print(p)


def cmd_oracle(args):
    inst = _instance(args)
    opt = brute_force_optimum(inst, cap=args.cap)
    print(json.dumps({"n": inst.n, "K": inst.K, "value": opt.value, "visited": opt.visited,
                      "selection": opt.portfolio.indices.tolist()}, indent=1))


def cmd_audit(args):
    inst = _instance(args)
    qubo = build_augmented(inst, lambda_multiplier=args.lambda_mult)
    if args.state is not None:
        state = _read_state(args.state)
    else:
        rec = json.loads(args.result.read_text())
        if not rec.get("state"):
            raise SystemExit(f"{args.result} carries no augmented state")
        state = np.array([int(c) for c in rec["state"]], dtype=np.int8)
    if len(state) != qubo.n_aug:
        raise SystemExit(f"state has {len(state)} bits, the augmented QUBO has {qubo.n_aug}")
    print(json.dumps(feasibility_record(qubo, state, inst).to_dict(), sort_keys=True, indent=1))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cubic-portfolio", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an instance file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, default=bench.DEFAULT_INSTANCE_SEED)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="run one solver on one instance")
    _add_instance_args(p)
    _add_budget_args(p)
    p.add_argument("--solver", choices=bench.SOLVERS, default="hamd")
    p.add_argument("--mode", choices=MODES, default="full")
    p.add_argument("--seed", type=int, default=42, help="solver seed")
    p.add_argument("--lambda-mult", type=float, default=1.0)
    p.add_argument("--out", type=Path)
    p.add_argument("--state-out", type=Path, help="write the best augmented state (baselines)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="run an experiment grid and render its tables")
    p.add_argument("--kind", choices=bench.KINDS, required=True)
    p.add_argument("--n", type=int, nargs="+")
    p.add_argument("--k", type=int, nargs="+")
    p.add_argument("--seeds", "--seed", type=int, nargs="+", dest="seeds")
    p.add_argument("--instance-seed", type=int, default=bench.DEFAULT_INSTANCE_SEED)
    _add_budget_args(p)
    p.add_argument("--lambda-mult", type=float, nargs="+")
    p.add_argument("--solver", choices=bench.SOLVERS, nargs="+")
    p.add_argument("--mode", choices=MODES, nargs="+")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--format", choices=bench.FORMATS, default="csv")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="aggregate saved records and render tables")
    p.add_argument("--results", type=Path, required=True, help="record file or directory")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--format", choices=bench.FORMATS, default="table-text")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("oracle", help="brute-force optimum over all exact-K portfolios")
    _add_instance_args(p, seed_flag="--seed")
    p.add_argument("--cap", type=int, default=10**7)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("audit", help="feasibility record for a saved augmented state")
    _add_instance_args(p)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--state", type=Path, help="file holding the 0/1 state string")
    src.add_argument("--result", type=Path, help="result record carrying a state")
    p.add_argument("--lambda-mult", type=float, default=1.0)
    p.set_defaults(func=cmd_audit)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0
