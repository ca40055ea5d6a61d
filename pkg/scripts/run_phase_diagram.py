"""Tensor-completion phase transition: SNN versus the square reshaping norm.

Runs the desk grid by default; ``--full`` switches to n = 10..30 and
rho = 0.01..0.20 (several hours on one core). Outputs land in ``--output``
or in $TENREC_OUTPUT_DIR when set.
"""
import argparse
import logging

from tenrec import experiments as ex


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--full", action="store_true")
    parser.add_argument("--trials", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--output", default="results_phase")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    spec = ex.ExperimentSpec(trials=args.trials, master_seed=args.seed, output_dir=args.output)
    if args.full:
        spec = ex.with_overrides(spec, n_grid=ex.FULL_N_GRID, rho_grid=ex.FULL_RHO_GRID, alb={})
    grids = ex.run_phase_transition(spec, workers=args.workers)
    for model, grid in grids.items():
        print(f"{model}: successes out of {grid.trials}")
        print("   n  " + " ".join(f"{rho:5.2f}" for rho in grid.col_values))
        for n, row in zip(grid.row_values, grid.successes):
            print(f"{n:4d}  " + " ".join(f"{int(s):5d}" for s in row))
    print(f"outputs in {ex.resolve_output_dir(spec.output_dir)}")


if __name__ == "__main__":
    main()
