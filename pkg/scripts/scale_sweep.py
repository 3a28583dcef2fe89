"""Plateau measurements at literal diameters and at multiples of the
intrinsic length scale, side by side.

    python3 scripts/scale_sweep.py [--multiples 50 100 200 400] [--seed 0]

At literal diameters 50..400 the default constants (E = 64, M = 32 on trees)
make the smallest instances degenerate: one cluster, or no subdivision
points, so the baseline of each plateau is zero.  The table shows where each
measured constant starts growing.
"""

import argparse

from stablecube.suites import run_suite

ROWS = {
    "tree-perturbation": ("per_diameter", ("exceptions", "complement_count", "complement_diameter"), "E"),
    "stable-cubulation": ("per_multiple", ("N", "defect"), "M"),
    "barycenter": ("per_multiple", ("kappa1", "midpoint_offset"), "M"),
    "bicombing": ("per_multiple", ("kappa2", "step_max", "qi_defect", "backtrack"), "M"),
}


def table(name, unit, multiples, seed):
    key, columns, _ = ROWS[name]
    diameters = "diameters" if name == "tree-perturbation" else "multiples"
    res = run_suite(name, seed=seed, unit=unit, **{diameters: multiples})
    per = res.measured[key]
    scale = res.measured["unit"]
    print(f"\n{name}, unit {unit!r} (= {scale}); plateau checks {'pass' if res.passed else 'FAIL'}")
    print(f"  {'diameter':>9s} " + " ".join(f"{c:>20s}" for c in columns))
    for k, row in per.items():
        d = k if name == "tree-perturbation" else k * scale
        print(f"  {d:9d} " + " ".join(f"{row[c]:20.4g}" for c in columns))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--multiples", type=int, nargs="+", default=[50, 100, 200, 400])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--only", choices=sorted(ROWS), action="append")
    args = ap.parse_args(argv)
    for name in args.only or ROWS:
        table(name, 1, tuple(args.multiples), args.seed)
        table(name, ROWS[name][2], tuple(args.multiples), args.seed)


if __name__ == "__main__":
    main()
