"""Run the lacunary separation experiment and print the per-mode curves.

The default geometry matches the headline run (halfwidth 2^14, spacing
2^-8, bumps at 3^k for k <= 8) and takes about twenty seconds.  The
separation needs that many decades: --small runs a cut-down box that
exercises the plumbing quickly but usually reports INCONCLUSIVE.
"""

import argparse

from oscillab.experiments import exp_lacunary


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument(
        "--small",
        action="store_true",
        help="cut-down box for quick iteration; verdicts are usually INCONCLUSIVE",
    )
    args = ap.parse_args()

    kw = {}
    if args.small:
        kw = dict(
            k_max=6,
            halfwidth=1024.0,
            spacing=2.0**-6,
            stride=0.5,
            radius_max=512.0,
            distance_max=512.0,
        )
    rep = exp_lacunary(**kw)

    for mode in sorted(rep.curves):
        curve = rep.curves[mode]
        v = rep.verdicts[mode]
        print(f"{mode}: {v.verdict} (terminal {v.terminal:.4f}, tol {v.tol:.4f})")
        for a, val, cnt in zip(curve.ladder, curve.values, curve.counts):
            mark = "" if cnt else "  (no balls)"
            print(f"    a={a:<10.4g} sup={val:.5f} over {cnt} balls{mark}")
    print(
        f"far floor {rep.floor:.4f} (required {rep.floor_required:.4f}, ok={rep.floor_ok}), "
        f"trend exponent {rep.trend_exponent:.3f}, {rep.n_balls} balls total"
    )


if __name__ == "__main__":
    main()
