"""Run acceptance criteria and print one PASS/FAIL line each.

    python3 scripts/run_acceptance.py            # all eleven
    python3 scripts/run_acceptance.py 2 5 --json results/acceptance.json
"""

import argparse
import json
import sys
from pathlib import Path

from offrl.checks import CHECKS, run_check


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("criteria", nargs="*", type=int, default=sorted(CHECKS))
    p.add_argument("--json", help="also write full results (metrics included) to this file")
    args = p.parse_args()
    results = []
    for c in args.criteria:
        res = run_check(c)
        print(res.line(), flush=True)
        results.append(res)
    if args.json:
        path = Path(args.json)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps([r.to_dict() for r in results], indent=1) + "\n")
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} passed")
    return 0 if passed == len(results) else 1


if __name__ == "__main__":
    sys.exit(main())
