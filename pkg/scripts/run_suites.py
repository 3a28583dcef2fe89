"""Run the experiment suites and write one canonical JSON file per suite.

    python3 scripts/run_suites.py --out results/ --seed 0 [suite ...]

Set STABLECUBE_THREADS to fan independent trials out over threads.
"""

import argparse
import sys
from pathlib import Path

from stablecube.export import canonical_json
from stablecube.suites import SUITES, run_suite


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("suites", nargs="*", default=list(SUITES), help="suite names (default: all)")
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    failed = []
    for name in args.suites:
        kwargs = {"unit": "E"} if name == "tree-perturbation" else {}
        res = run_suite(name, seed=args.seed, **kwargs)
        (args.out / f"{name}.json").write_text(canonical_json(res))
        bad = [k for k, (ok, _) in res.checks.items() if not ok]
        print(f"{name:24s} {'pass' if res.passed else 'FAIL'} {res.runtime:7.1f}s {' '.join(bad)}", flush=True)
        if bad:
            failed.append(name)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
