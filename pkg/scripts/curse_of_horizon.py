"""Variance of trajectory importance sampling on the loop scenario as the horizon grows.

Prints, per horizon, the empirical variance of the per-trajectory IS values
next to its exact value, and the least-squares slope of log-variance in units
of log 2. The exact value uses that the product weight is 2^H on the single
all-a1 path (probability 2^-H) and 0 elsewhere.
"""

import argparse
import math

import numpy as np

from offrl import ope
from offrl.data import sample_trajectories
from offrl.scenarios import loop


def exact_variance(H: int, gamma: float) -> float:
    g = (1 - gamma**H) / (1 - gamma)
    return g**2 * (2.0**H - 1)


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--hmin", type=int, default=2)
    p.add_argument("--hmax", type=int, default=10)
    p.add_argument("--seed", type=int, default=2)
    args = p.parse_args()
    Hs = np.arange(args.hmin, args.hmax + 1)
    emp, exact = [], []
    print(f"{'H':>3}{'empirical var':>16}{'exact var':>14}{'weight var':>14}")
    for H in Hs:
        sc = loop(H=int(H), gamma=args.gamma)
        td = sample_trajectories(sc.mdp, sc.behavior_policy, args.n, int(H), args.seed + int(H))
        est = ope.is_estimate(td, sc.targets["always_a1"])
        emp.append(est.diagnostics["is_var"])
        exact.append(exact_variance(int(H), args.gamma))
        print(f"{H:>3}{emp[-1]:>16.5f}{exact[-1]:>14.5f}{2.0**H - 1:>14.1f}")
    slope = lambda v: np.polyfit(Hs, np.log(v), 1)[0] / math.log(2)
    print(f"slope / log 2: empirical {slope(emp):.4f}, exact {slope(exact):.4f}, "
          f"weight only {slope(2.0**Hs - 1):.4f}")


if __name__ == "__main__":
    main()
