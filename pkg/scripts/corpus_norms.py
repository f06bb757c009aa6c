"""Tabulate oscillation and tent norms for every corpus member.

Builds the shared corpus grid and operator once, then prints one row per
member: the plain oscillation norm, the split norm with its size part,
the semigroup variant, and the tent norm of the square-function field
with the resulting tent/oscillation ratio.
"""

import argparse
import math

from oscillab.corpus import CORPUS, corpus_grid, corpus_operator
from oscillab.experiments import RHO_CONSTANT_UNIT
from oscillab.family import FamilyPolicy, make_ball_family
from oscillab.oscillation import bmo_l_norm, bmo_norm, tilde_bmo_l_norm
from oscillab.semigroup import TLadder, square_function_field
from oscillab.tent import t2p_norm


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--per-decade", type=int, default=16)
    args = ap.parse_args()

    grid = corpus_grid()
    op = corpus_operator(grid)
    fam = make_ball_family(
        grid, FamilyPolicy(center_stride=0.5, radius_min=0.125, radius_max=4.0)
    )
    ladder = TLadder.geometric(grid.spacing, grid.halfwidth / 4.0, per_decade=args.per_decade)

    print(f"{'member':>12} {'bmo':>8} {'bmo_l':>8} {'size':>8} {'tilde':>8} {'tent':>8} {'ratio':>7}")
    for m in CORPUS:
        f = m.build(grid, op)
        plain = bmo_norm(f, fam).value
        split = bmo_l_norm(f, RHO_CONSTANT_UNIT, fam)
        tilde = tilde_bmo_l_norm(f, op, fam, ladder).value
        tent = t2p_norm(square_function_field(op, f, ladder), math.inf, family=fam).value
        ratio = tent / split.value if split.value > 0 else float("nan")
        print(
            f"{m.name:>12} {plain:>8.4f} {split.value:>8.4f} {split.size_part:>8.4f} "
            f"{tilde:>8.4f} {tent:>8.4f} {ratio:>7.3f}"
        )


if __name__ == "__main__":
    main()
