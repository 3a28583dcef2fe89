"""How the subdivision spacing M affects the cubulation of a long path and
its stability under a one-step perturbation of F.

    python3 scripts/m_sensitivity.py [--length 6400] [--spacings 4 8 16 32 64 128]

For each spacing the script prints the number of walls, the QI distortion and
Hausdorff defect of the realisation, the deletions needed for a certified
isomorphism, the commutation defect, and the barycenter offset from the
midpoint.  Spacings below the measured floor are flagged.
"""

import argparse

from stablecube.combing import barycenter
from stablecube.geomgraph import path_graph
from stablecube.hhsmodel import trivial_hhs
from stablecube.hullcubulation import CubulationParams, cubulate, cubulation_quality, refine_and_compare


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--length", type=int, default=6400)
    ap.add_argument("--spacings", type=int, nargs="+", default=[4, 8, 16, 32, 64, 128])
    args = ap.parse_args(argv)
    d = args.length
    h = trivial_hhs(path_graph(d))
    print(f"{'M':>5s} {'walls':>6s} {'qi_dist':>9s} {'haus':>6s} {'N':>4s} {'defect':>7s} {'bary_off':>9s}  note")
    for M in args.spacings:
        p = CubulationParams(M=M)
        cr = cubulate(h, [0, d], p)
        q = cubulation_quality(cr)
        rep = refine_and_compare(h, [0, d], [1, d], params=p)
        off = abs(barycenter(h, [0, d], p) - d / 2)
        note = "below floor" if M < cr.params["M_floor"] else ""
        if not rep.certified:
            note += f" uncertified ({rep.reason})"
        print(f"{M:5d} {q['walls']:6d} {q['qi_distortion']:9.4f} {q['hausdorff_to_hull']:6d} "
              f"{rep.N:4d} {rep.commutation_defect:7d} {off:9.1f}  {note}")


if __name__ == "__main__":
    main()
