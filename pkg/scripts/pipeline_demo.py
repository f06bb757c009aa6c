"""Run the cutoff/average/compare pipeline on one corpus member and report.

The default geometry is small enough for a laptop.  The headline run uses
--halfwidth 65536 --spacing 0.00390625 --eps-fraction 0.1, which needs
roughly 5 GB of memory and a couple of minutes; see configs/pipeline-large.json
for the same run driven through the CLI.
"""

import argparse

from oscillab.experiments import exp_pipeline


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--member", default="bump-narrow")
    ap.add_argument("--halfwidth", type=float, default=256.0)
    ap.add_argument("--spacing", type=float, default=2.0**-6)
    ap.add_argument("--eps-fraction", type=float, default=0.7)
    ap.add_argument("--osc-fraction", type=float, default=0.25)
    args = ap.parse_args()

    rep = exp_pipeline(
        args.member,
        eps_fraction=args.eps_fraction,
        halfwidth=args.halfwidth,
        spacing=args.spacing,
        osc_fraction=args.osc_fraction,
    )
    print(f"{rep.member}: {rep.verdict} (eps {rep.eps:.5f}, norm {rep.norm:.5f})")
    if rep.verdict != "MEMBER":
        print(f"  scan exhausted: {rep.exhausted_condition}")
        return
    th = rep.thresholds
    print(f"  cutoffs: fine 2^-{th.fine_exponent}, core 2^{th.core_exponent}, outer 2^{th.outer_exponent}")
    print(f"  gate: p1 sup {rep.p1_sup:.5f} ok={rep.p1_ok}, p2 max {rep.p2_max:.5f} ok={rep.p2_ok}, sizes ok={rep.size_ratio_ok}")
    print(f"  distances: averaged {rep.distance_averaged:.6f}, full {rep.distance_full:.6f}")
    print(f"  budgets: case {rep.case_bound:.5f}, corpus {rep.corpus_bound:.5f}, mollifier t {rep.t_eps}")


if __name__ == "__main__":
    main()
