"""How the cascade Carleman ratio moves with lambda.

For each local exponent l, prints the max LHS/RHS ratio over seeded samples
at lambda in {1, 2, 4} * lambda0 and the spread between the extremes. The
left side carries powers of lambda*gamma up to d = 3n while the right side
carries power l, so the ratio drifts roughly like (lambda*gamma)^(d - l).

Usage: python3 scripts/carleman_scaling.py [--samples 10] [--seed 0]
"""
import argparse

import numpy as np

from cascade_hum import CascadeCoefficients, Grid1D, PiecewiseField, SubdomainMask, build_tree
from cascade_hum.carleman import build_psi, carleman_check_cascade, eval_weights, random_initial_states
from cascade_hum.model import compute_lambda0


def sweep(coeffs, l, samples, seed, mu=2.0):
    grid, tree = Grid1D(31), build_tree(10, 1.0)
    psi = build_psi(grid, SubdomainMask(grid, 0.45, 0.65))
    lam0 = compute_lambda0(coeffs, 1.0, 1.0, tree, grid)
    base = eval_weights(lam0, mu, 1.0, psi, grid, tree)
    z0 = random_initial_states(coeffs.n, grid.nx, samples, seed)
    mask = SubdomainMask(grid, 0.35, 0.75)
    return lam0, [carleman_check_cascade(coeffs, tree, grid, base.with_lambda(k * lam0), l, z0, mask).max_ratio
                  for k in (1, 2, 4)]


if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    systems = {
        "n=1 heat": CascadeCoefficients(1),
        "n=2 coupled": CascadeCoefficients(2, a={(1, 0): PiecewiseField(1.0, 0.35, 0.75)}),
    }
    print(f"{'system':12s} {'l':>3s} {'lambda0':>8s} {'ratio(l0)':>11s} {'ratio(2l0)':>11s} {'ratio(4l0)':>11s} {'spread':>8s}")
    for name, coeffs in systems.items():
        d = 3 * coeffs.n
        for l in sorted({d, d + 1, 3 * (coeffs.n + 1)}):
            lam0, r = sweep(coeffs, l, args.samples, args.seed)
            print(f"{name:12s} {l:3d} {lam0:8.3g} {r[0]:11.3e} {r[1]:11.3e} {r[2]:11.3e} {max(r) / min(r):8.1f}")
