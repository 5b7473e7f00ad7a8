"""Command line entry points for the experiment harness.

    dgopt run --spec spec.json [--out DIR] [--seeds a,b,c] [--threads N]
    dgopt shootout --spec shootout.json [--out DIR]
    dgopt sweep --spec spec.json --taus 0.1,1,10 [--out DIR]
    dgopt list-problems

Exit status is nonzero on validation errors and when more than 10% of the
requested runs fail.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .core import ConfigError, MetadataError
from .discrete_gradients import DiscreteGradientKind
from .harness import (
    ExperimentSpec,
    build_problem,
    format_shootout,
    list_problems,
    run,
    solver_shootout,
    tau_sweep,
)


def _parse_seeds(text):
    return [int(s) for s in text.split(",") if s.strip() != ""]


def _cmd_run(args) -> int:
    spec = ExperimentSpec.from_json(args.spec)
    if args.seeds:
        spec.seeds = _parse_seeds(args.seeds)
    if args.seed is not None:
        spec.seeds = [args.seed]
    out = args.out or f"out/{spec.name}"
    result = run(spec, out, threads=args.threads)
    print(f"wrote {sum(len(v) for v in result.trace_paths.values())} trace files to {result.out_dir}")
    for label, fails in result.failures.items():
        if fails:
            print(f"  {label}: {len(fails)} failed runs", file=sys.stderr)
    if result.failure_fraction > 0.10:
        print(f"failure fraction {result.failure_fraction:.0%} exceeds 10%", file=sys.stderr)
        return 2
    return 0


def _cmd_shootout(args) -> int:
    with open(args.spec) as fh:
        cfg = json.load(fh)
    problems = [(p.get("label", p["kind"]), build_problem({k: v for k, v in p.items() if k != "label"}))
                for p in cfg["problems"]]
    rows = solver_shootout(
        problems,
        DiscreteGradientKind(cfg.get("dg_kind", "mean_value")),
        tau=cfg.get("tau"),
        tau_over_l=cfg.get("tau_over_l", 4.0),
        tolerances=cfg.get("tolerances", [1e-6, 1e-12]),
        iters=cfg.get("iterations", 50),
        max_iter=cfg.get("max_iter", 500),
    )
    table = format_shootout(rows)
    print(table)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "shootout.txt").write_text(table + "\n")
        (out / "shootout.json").write_text(json.dumps([r.__dict__ for r in rows], indent=2) + "\n")
    return 0


def _cmd_sweep(args) -> int:
    spec = ExperimentSpec.from_json(args.spec)
    taus = [float(t) for t in args.taus.split(",")]
    problem = build_problem(spec.problem)
    out = args.out or f"out/{spec.name}_sweep"
    Path(out).mkdir(parents=True, exist_ok=True)
    code = 0
    for entry in spec.methods:
        rows = tau_sweep(problem, entry, taus, spec.iterations, out_dir=out,
                         seed=spec.seeds[0] if spec.seeds else 0)
        for row in rows:
            status = "monotone" if row["monotone"] else "NON-MONOTONE"
            print(f"{entry.name} tau={row['tau']:<10g} final={row['final_objective']:.6e} {status}")
    return code


def _cmd_list_problems(_args) -> int:
    for name, cfg in list_problems():
        print(f"{name:<16} {json.dumps(cfg)}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dgopt", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment spec")
    p_run.add_argument("--spec", required=True)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--seeds", default=None, help="comma separated seed override")
    p_run.add_argument("--seed", type=int, default=None, help="single seed override")
    p_run.add_argument("--threads", type=int, default=1)
    p_run.set_defaults(func=_cmd_run)

    p_shoot = sub.add_parser("shootout", help="inner-solver CPU time comparison")
    p_shoot.add_argument("--spec", required=True)
    p_shoot.add_argument("--out", default=None)
    p_shoot.set_defaults(func=_cmd_shootout)

    p_sweep = sub.add_parser("sweep", help="run one method over a list of time steps")
    p_sweep.add_argument("--spec", required=True)
    p_sweep.add_argument("--taus", required=True)
    p_sweep.add_argument("--out", default=None)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_list = sub.add_parser("list-problems", help="print the canonical problem configs")
    p_list.set_defaults(func=_cmd_list_problems)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, MetadataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
