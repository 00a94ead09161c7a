"""Tail profiles and weighted-estimate sweeps for the zero-energy chain.

Writes (|x|, log amplitude) curves for every chain vector, the fitted rates
against the bounds sqrt(mu - 2 delta), and the eps sweep of both sides of the
single-vector estimate.

    python3 scripts/decay_profiles.py --points 1024 --out out/profiles
"""

import argparse
from pathlib import Path

from nlsdecay import (
    DecayParameters,
    NonlinearitySpec,
    assemble_H,
    assemble_HhatE,
    closed_form_soliton,
    fit_decay_rate,
    jordan_chain,
    lemma3_check,
    linearization_potentials,
    make_grid,
    solve_ground_state,
    tail_profile,
)
from nlsdecay.io import write_csv

DELTAS = (0.05, 0.1, 0.2)
EPS = (1.0, 0.3, 0.1, 0.03, 0.0)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=1024)
    ap.add_argument("--half-length", type=float, default=20.0)
    ap.add_argument("--out", default="out/profiles")
    args = ap.parse_args()
    out = Path(args.out)

    nl = NonlinearitySpec(1.0)
    g = make_grid(1, args.half_length, args.points)
    prof = solve_ground_state(g, 1.0, nl, closed_form_soliton(g, 1.0, nl).field)
    pots = linearization_potentials(prof, nl)
    J = jordan_chain(assemble_H(g, 1.0, pots), 0.0)
    Hhat = assemble_HhatE(g, 1.0, 0.0, pots)

    fits = []
    for c, chain in enumerate(J.chains):
        for l, v in enumerate(chain):
            label = f"c{c}_l{l}"
            write_csv(out / f"tail_{label}.csv", ["r", "log_amplitude"], tail_profile(v))
            rep = fit_decay_rate(v, mu=1.0, deltas=DELTAS)
            fits.append((label, rep.rate, rep.power, *rep.bounds, all(rep.passes)))
            print(f"{label}: rate {rep.rate:.5f} (power {rep.power:+.1f})  bounds {[round(b, 4) for b in rep.bounds]}")
    write_csv(out / "fits.csv", ["vector", "rate", "power", "bound_005", "bound_01", "bound_02", "pass"], fits)

    sweep = []
    for d in DELTAS:
        for c, chain in enumerate(J.chains):
            rep = lemma3_check(Hhat, chain[-1], DecayParameters(1.0, 0.0, d), eps_list=EPS)
            for r in rep.rows:
                sweep.append((d, c, rep.radius, r.eps, r.lhs, r.rhs, r.ratio))
            print(f"delta {d}: chain {c} R={rep.radius:.3f} max ratio {rep.max_ratio:.3e} {rep.status}")
    print("wrote", write_csv(out / "eps_sweep.csv", ["delta", "chain", "R", "eps", "lhs", "rhs", "ratio"], sweep))


if __name__ == "__main__":
    main()
