"""Gaussian-measurement sweep on a 5x5x5x5 supersymmetric rank-1 tensor.

Prints the success fraction of each model at each measurement count next to
kappa and the square-norm sample scale.
"""
import argparse
import json
import logging

from tenrec import experiments as ex


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--m-grid", default="62,150,300,625")
    parser.add_argument("--trials", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--output", default="results_gaussian")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    spec = ex.GaussianSweepSpec(m_grid=tuple(int(m) for m in args.m_grid.split(",")), trials=args.trials,
                                master_seed=args.seed, output_dir=args.output)
    _, report = ex.run_gaussian_sweep(spec)
    print(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()
