"""FQI against version-space pessimism on partial-coverage bandits.

For each sample size, reports how often each method picks each arm and the
median suboptimality against the comparator arm.
"""

import argparse
import json

import numpy as np

from offrl import opt
from offrl.checks import TRAP
from offrl.data import sample_tuples
from offrl.scenarios import bandit

DEFAULT = dict(means=(0.7, 0.8, 0.5), behavior=(0.9, 0.05, 0.05), cp=0)


def report(params: dict, n_grid, seeds: int, delta: float) -> None:
    sc = bandit(**params)
    A = sc.mdp.n_actions
    arms = [sc.targets[f"arm_{a}"] for a in range(A)]
    cp = arms[params["cp"]]
    print(f"means {list(params['means'])} behavior {list(params['behavior'])} comparator arm {params['cp']}")
    for n in n_grid:
        picks = {"pess": np.zeros(A, int), "fqi": np.zeros(A, int)}
        gaps = {"pess": [], "fqi": []}
        for s in range(seeds):
            tu = sample_tuples(sc.mdp, sc.data_dist(), n, 10_000 * n + s)
            ps = opt.pessimistic_search(arms, sc.classes["finite"], tu, delta, sc.mdp.init_dist,
                                        mdp=sc.mdp, comparator=cp)
            fq = opt.fqi(sc.classes["tabular"], tu, 1, ridge=1e-8, mdp=sc.mdp, comparator=cp)
            for key, res in (("pess", ps), ("fqi", fq)):
                picks[key][int(res.policy.probs[0].argmax())] += 1
                gaps[key].append(res.truth_gap)
        for key in ("pess", "fqi"):
            print(f"  n={n:<6} {key:<5} picks {picks[key].tolist()}  median gap {np.median(gaps[key]):.3f}")


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--instance", choices=("default", "trap"), default="default")
    p.add_argument("--params", help="JSON dict of bandit() arguments; overrides --instance")
    p.add_argument("--n", type=int, nargs="+", default=[60, 240])
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--delta", type=float, default=0.05)
    args = p.parse_args()
    params = json.loads(args.params) if args.params else (TRAP if args.instance == "trap" else DEFAULT)
    report(params, args.n, args.seeds, args.delta)


if __name__ == "__main__":
    main()
