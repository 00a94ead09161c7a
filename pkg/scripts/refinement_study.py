"""Grid refinement study: soliton residual, free gap edge and the Jordan block at 0.

    python3 scripts/refinement_study.py --out out/refinement
"""

import argparse
import math
from pathlib import Path

import numpy as np

from nlsdecay import (
    NonlinearitySpec,
    assemble_H,
    assemble_H0,
    closed_form_soliton,
    jordan_chain,
    linearization_potentials,
    make_grid,
    solve_ground_state,
)
from nlsdecay.io import write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--half-length", type=float, default=20.0)
    ap.add_argument("--sizes", default="256,512,1024,2048")
    ap.add_argument("--order", type=int, default=2, choices=(2, 4))
    ap.add_argument("--out", default="out/refinement")
    args = ap.parse_args()

    L = args.half_length
    nl = NonlinearitySpec(1.0)
    edge = 1.0 + (math.pi / (2 * L)) ** 2
    rows = []
    for N in (int(s) for s in args.sizes.split(",")):
        g = make_grid(1, L, N)
        seed = closed_form_soliton(g, 1.0, nl, args.order)
        prof = solve_ground_state(g, 1.0, nl, seed.field, order=args.order)
        pots = linearization_potentials(prof, nl)
        lam = np.linalg.eigvalsh(-assemble_H0(g, 1.0, args.order).block(1, 1).toarray())
        J = jordan_chain(assemble_H(g, 1.0, pots, args.order), 0.0)
        row = (N, g.spacing, seed.residual, prof.residual, abs(lam[0] - edge), J.riesz_rank, J.geometric, J.index)
        rows.append(row)
        print("N=%5d h=%.4f formula residual %.3e  Newton %.1e  edge error %.3e  rank %d geometric %d index %d" % row)

    res = np.array([r[2] for r in rows])
    print("residual ratios:", np.round(res[:-1] / res[1:], 2))
    out = Path(args.out)
    header = ["N", "h", "formula_residual", "newton_residual", "edge_error", "riesz_rank", "geometric", "index"]
    print("wrote", write_csv(out / f"refinement_order{args.order}.csv", header, rows))


if __name__ == "__main__":
    main()
