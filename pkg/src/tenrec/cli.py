"""Command-line driver: ``tenrec {analyze, phase, gaussian-sweep, replay}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiments as ex


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t)


def _load_spec(path: str | None) -> ex.ExperimentSpec:
    return ex.ExperimentSpec.from_json(Path(path).read_text()) if path else ex.ExperimentSpec()


def cmd_analyze(args) -> int:
    report = ex.analyze(args.dims, args.ranks)
    print(report.table())
    text = report.to_json()
    if args.output:
        Path(args.output).write_text(text)
    else:
        print(text)
    return 0


def cmd_phase(args) -> int:
    spec = _load_spec(args.config)
    overrides = dict(model=args.model, n_grid=args.n_grid, rho_grid=args.rho_grid, trials=args.trials,
                     master_seed=args.seed, output_dir=args.output, threshold=args.threshold)
    if args.full:
        overrides.update(n_grid=args.n_grid or ex.FULL_N_GRID, rho_grid=args.rho_grid or ex.FULL_RHO_GRID)
        alb = dict(spec.alb)
        alb.pop("max_iters", None)
        alb.pop("stall_window", None)
        overrides["alb"] = alb
    spec = ex.with_overrides(spec, **overrides)
    grids = ex.run_phase_transition(spec, workers=args.workers)
    out = ex.resolve_output_dir(spec.output_dir)
    for model, grid in grids.items():
        print(f"{model}: success fractions (rows n={list(grid.row_values)}, cols rho={list(grid.col_values)})")
        for n, row in zip(grid.row_values, grid.successes):
            print(f"  n={n:3d}  " + " ".join(f"{s}/{grid.trials}" for s in row))
    print(f"wrote results to {out}")
    return 0


def cmd_gaussian(args) -> int:
    spec = ex.GaussianSweepSpec()
    if args.config:
        spec = ex.GaussianSweepSpec(**json.loads(Path(args.config).read_text()))
    spec = ex.with_overrides(spec, n=args.n, K=args.order, rank=args.rank, m_grid=args.m_grid,
                             trials=args.trials, master_seed=args.seed, output_dir=args.output)
    grids, report = ex.run_gaussian_sweep(spec, workers=args.workers)
    print(f"kappa = {report['kappa']:.6g}, square exponent = {report['square_sample_exponent']}, N = {report['N']}")
    for model, fr in report["success_fractions"].items():
        print(f"{model}: " + ", ".join(f"m={m}: {f}" for m, f in fr.items()))
    print(f"wrote results to {ex.resolve_output_dir(spec.output_dir)}")
    return 0


def cmd_replay(args) -> int:
    spec = _load_spec(args.config)
    n, rho, trial = args.cell
    n, trial = int(n), int(trial)
    rec = ex.replay_completion(spec, args.model, n, float(rho), trial)
    print(json.dumps({"model": rec.model, "n": rec.n, "rho": rec.axis_value, "trial": rec.trial,
                      "instance_seed": rec.instance_seed, "measurement_seed": rec.measurement_seed,
                      "rel_error": repr(rec.rel_error), "iterations": rec.iterations,
                      "success": rec.success}))
    if args.check:
        recorded = [r for r in ex.load_records(args.check)
                    if r.model == rec.model and r.n == n and r.axis_value == rec.axis_value and r.trial == trial]
        if not recorded:
            print("cell not found in recorded trials", file=sys.stderr)
            return 2
        same = recorded[0].rel_error == rec.rel_error or (recorded[0].rel_error != recorded[0].rel_error
                                                          and rec.rel_error != rec.rel_error)
        print("bit-exact match" if same else f"MISMATCH: recorded {recorded[0].rel_error!r}")
        return 0 if same else 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tenrec", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="sample-complexity scales for a tensor shape and Tucker rank")
    a.add_argument("--dims", type=_ints, default=(10, 10, 10, 10))
    a.add_argument("--ranks", type=_ints, default=(2, 2, 2, 2))
    a.add_argument("--output", help="write report JSON here instead of stdout")
    a.set_defaults(func=cmd_analyze)

    ph = sub.add_parser("phase", help="tensor completion phase transition over (n, rho)")
    ph.add_argument("--config", help="JSON file mirroring ExperimentSpec")
    ph.add_argument("--model", choices=("snn", "square", "both"))
    ph.add_argument("--n-grid", type=_ints)
    ph.add_argument("--rho-grid", type=_floats)
    ph.add_argument("--trials", type=int)
    ph.add_argument("--threshold", type=float)
    ph.add_argument("--seed", type=int)
    ph.add_argument("--output")
    ph.add_argument("--workers", type=int)
    ph.add_argument("--full", action="store_true",
                    help="n = 10..30, rho = 0.01..0.20, the solver's default iteration cap and no stall rule (slow)")
    ph.set_defaults(func=cmd_phase)

    g = sub.add_parser("gaussian-sweep", help="recovery vs. number of Gaussian measurements")
    g.add_argument("--config")
    g.add_argument("--n", type=int)
    g.add_argument("--order", type=int)
    g.add_argument("--rank", type=int)
    g.add_argument("--m-grid", type=_ints)
    g.add_argument("--trials", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--output")
    g.add_argument("--workers", type=int)
    g.set_defaults(func=cmd_gaussian)

    r = sub.add_parser("replay", help="re-run one completion trial from its derived seeds")
    r.add_argument("--config", help="config.json written by the sweep")
    r.add_argument("--model", choices=ex.MODELS, required=True)
    r.add_argument("--cell", type=lambda s: s.split(","), required=True, metavar="N,RHO,TRIAL")
    r.add_argument("--check", help="trials_<model>.csv to compare against")
    r.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "replay" and len(args.cell) != 3:
        print("--cell expects N,RHO,TRIAL", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
