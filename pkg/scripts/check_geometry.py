"""Monte-Carlo statistical dimension of circular cones against the closed-form bound."""
import math

import numpy as np

from tenrec.geometry import CircularConeSpec, circ_sd_bound, estimate_statistical_dimension


def main(n=100, samples=100_000):
    print(f"{'theta':>8} {'estimate':>10} {'se':>7} {'bound':>8} {'polar':>10} {'sum':>8}")
    for theta in np.linspace(0.1, math.pi / 2 - 0.1, 7):
        cone = CircularConeSpec(np.eye(n)[0], theta)
        est, se = estimate_statistical_dimension(cone, samples=samples, seed=1)
        pest, _ = estimate_statistical_dimension(cone.polar(), samples=samples, seed=2)
        print(f"{theta:8.3f} {est:10.3f} {se:7.3f} {circ_sd_bound(n, theta):8.3f} {pest:10.3f} {est + pest:8.3f}")


if __name__ == "__main__":
    main()
