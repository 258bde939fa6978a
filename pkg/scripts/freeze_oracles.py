"""Recompute the oracle values in tests/oracles.py and write tests/frozen_values.json."""

import json
import sys
from pathlib import Path

import numpy as np

TESTS = Path(__file__).resolve().parents[1] / "tests"
sys.path.insert(0, str(TESTS))

import oracles  # noqa: E402


def main() -> None:
    out = {}
    P, R, g, d0 = oracles.instance("rand3")
    pi = oracles.policy("rand3")
    out["rand3_q_pi"] = oracles.q_by_iteration(P, R, g, pi).tolist()
    out["rand3_q_star"] = oracles.q_star_by_iteration(P, R, g).tolist()
    out["rand3_best_deterministic_J"] = oracles.best_deterministic_return(P, R, g, d0)

    P, R, g, d0 = oracles.instance("chain3")
    out["chain3_occupancy"] = oracles.occupancy_by_series(P, R, g, d0, oracles.policy("chain3")).tolist()

    P, R, g, d0 = oracles.instance("rand4")
    mean, se = oracles.monte_carlo_return(P, R, g, d0, oracles.policy("rand4"), 10**6, seed=9)
    out["rand4_mc_J"] = {"mean": mean, "se": se, "n": 10**6}

    P, R, g, d0 = oracles.instance("two_state")
    steps = oracles.policy("two_state_steps")
    q2 = oracles.two_step_enumeration(P, R, g, steps)
    out["two_state_q2"] = q2.tolist()
    out["two_state_J2"] = float(d0 @ (q2 * steps[1]).sum(1))

    *_, coef = oracles.pinv_fit()
    out["pinv_coef"] = coef.tolist()

    out["loop_H4_J"] = oracles.loop_horizon_return(4, 0.9)
    out["divergence_multiplier_095"] = oracles.divergence_multiplier(0.95)
    out["chi_sq_two_point"] = oracles.chi_sq_two_point()
    out["tree_minimax_2_3"] = oracles.tree_minimax(2, 3)
    out["is_expectation_loop_H4"] = oracles.is_expectation_loop(4, 0.9, 0)
    out["bvft_hand_cells"] = oracles.bvft_hand_cells()

    path = TESTS / "frozen_values.json"
    path.write_text(json.dumps(out, indent=1, sort_keys=True) + "\n")
    print(f"wrote {len(out)} values to {path}")


if __name__ == "__main__":
    main()
