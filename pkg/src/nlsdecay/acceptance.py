"""The ten acceptance criteria at desk scale (d = 1, L = 20, N up to 1024).

Each ``criterion_*`` function returns a :class:`CriterionResult`; expensive
building blocks (profiles, operators, spectra, chains) are cached per grid size
so the whole suite shares them.  ``run_all`` is what ``nlsdecay verify`` and the
acceptance tests call.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import decay as dk
from .grid import Vec2Field, make_grid
from .nls import NonlinearitySpec, PotentialPair, closed_form_soliton, linearization_potentials, solve_ground_state
from .operators import assemble_H, assemble_H0, assemble_HhatE, symmetry_conjugate
from .spectral import (
    SpectralConfig,
    dense_spectrum,
    gap_eigenvalues,
    hausdorff,
    jordan_chain,
    match_spectra,
    riesz_projection,
    symmetry_check,
)

L = 20.0
MU = 1.0
MARGIN = 0.05
IMAG_CAP = 3.5
DELTAS = (0.05, 0.1, 0.2)
EPS = dk.DEFAULT_EPS
RATE_TOL = 0.02

__all__ = ["CriterionResult", "CRITERIA", "run_all", "format_line"]


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0


@lru_cache(maxsize=None)
def potentials(sigma: float, N: int) -> PotentialPair:
    g = make_grid(1, L, N)
    nl = NonlinearitySpec(sigma)
    prof = solve_ground_state(g, MU, nl, closed_form_soliton(g, MU, nl).field)
    return linearization_potentials(prof, nl)


@lru_cache(maxsize=None)
def operator(sigma: float, N: int):
    pots = potentials(sigma, N)
    return assemble_H(pots.grid, MU, pots)


@lru_cache(maxsize=None)
def gap_set(sigma: float, N: int):
    return gap_eigenvalues(operator(sigma, N), MARGIN, IMAG_CAP, SpectralConfig())


@lru_cache(maxsize=None)
def dense_set(sigma: float, N: int):
    return dense_spectrum(operator(sigma, N)).in_strip(MU - MARGIN, IMAG_CAP)


@lru_cache(maxsize=None)
def zero_chain(sigma: float, N: int, full_space: bool = False):
    H = operator(sigma, N)
    return jordan_chain(H, 0.0, full_space=full_space)


def _wrap(number, name, fn):
    t0 = time.perf_counter()
    passed, detail = fn()
    return CriterionResult(number, name, bool(passed), detail, time.perf_counter() - t0)


def criterion_1() -> CriterionResult:
    def run():
        detail = {}
        errors = []
        edge = MU + (math.pi / (2 * L)) ** 2
        for N in (128, 256, 512):
            g = make_grid(1, L, N)
            vals = np.linalg.eigvals(assemble_H0(g, MU).dense())
            err = max(abs(vals[vals > 0].min() - edge), abs(vals[vals < 0].max() + edge))
            errors.append(err)
            if N == 256:
                detail.update(
                    max_imag=float(np.max(np.abs(vals.imag))),
                    negation=hausdorff(vals, -vals),
                    min_abs=float(np.min(np.abs(vals))),
                    edge_error=float(err),
                )
        detail["edge_errors"] = [float(e) for e in errors]
        ok = (
            detail["max_imag"] <= 1e-10
            and detail["negation"] <= 1e-8
            and detail["min_abs"] >= MU
            and detail["edge_error"] <= 1e-3
            and errors[0] >= errors[1] >= errors[2]
        )
        return ok, detail

    return _wrap(1, "free-operator gap", run)


def criterion_2(count: int = 20, seed: int = 2024) -> CriterionResult:
    def run():
        rng = np.random.default_rng(seed)
        bad = 0
        for k in range(count):
            N = int(rng.choice([16, 33, 64]))
            g = make_grid(1, float(rng.uniform(2, 20)), N)
            pots = PotentialPair(g, rng.standard_normal(g.size), rng.standard_normal(g.size))
            H = assemble_H(g, float(rng.uniform(0.1, 5)), pots, order=int(rng.choice([2, 4])))
            adj = H.matrix.conj().T.tocsr()
            s3 = symmetry_conjugate(H, "sigma3").matrix
            s1 = symmetry_conjugate(H, "sigma1").matrix
            if (s3 != adj).nnz or (s1 != -H.matrix).nnz:
                bad += 1
        return bad == 0, {"pairs": count, "mismatches": bad}

    return _wrap(2, "exact unitary equivalences", run)


def criterion_3() -> CriterionResult:
    def run():
        sets = {}
        for sigma in (1.0, 3.0):
            for N in (128, 256, 512, 1024):
                sets[f"gap s={sigma:g} N={N}"] = gap_set(sigma, N)
            for N in (128, 256, 512):
                sets[f"dense s={sigma:g} N={N}"] = dense_set(sigma, N)
        worst = 0.0
        for S in sets.values():
            rep = symmetry_check(S, 1e-8)
            worst = max(worst, rep.negation_distance, rep.conjugation_distance)
        return worst <= 1e-8, {"sets": len(sets), "max_hausdorff": worst}

    return _wrap(3, "spectral symmetry", run)


def criterion_4() -> CriterionResult:
    def run():
        detail = {}
        ok = True
        for N, full in ((512, True), (1024, False)):
            H = operator(1.0, N)
            coarse = riesz_projection(H, 0.0, 0.3, m=32, max_nodes=32)
            fine = riesz_projection(H, 0.0, 0.3, m=64, max_nodes=64)
            J = zero_chain(1.0, N, full)
            d = {
                "riesz_rank": J.riesz_rank,
                "rank_m32": coarse.rank,
                "rank_m64": fine.rank,
                "geometric": J.geometric,
                "index": J.index,
                "kernel_dims": J.kernel_dims,
                "full_kernel_dims": J.full_kernel_dims,
            }
            detail[N] = d
            ok &= J.riesz_rank == 4 and coarse.rank == fine.rank == 4
            ok &= J.geometric == 2 and J.index == 2 and J.algebraic == 4 and J.consistent
        return ok, detail

    return _wrap(4, "cubic Jordan structure", run)


def _fit_all(vectors, energy=0.0):
    reps = [dk.fit_decay_rate(v, mu=MU, energy=energy, deltas=DELTAS, rate_tol=RATE_TOL) for v in vectors]
    return reps


def criterion_5() -> CriterionResult:
    def run():
        J = zero_chain(1.0, 1024)
        reps = _fit_all(J.all_vectors)
        rates = [r.rate for r in reps]
        ok = len(reps) == 4 and all(r.passed for r in reps) and all(abs(x - math.sqrt(MU)) <= 0.02 for x in rates)
        return ok, {"rates": rates, "bounds": list(reps[0].bounds)}

    return _wrap(5, "decay rates at E=0", run)


def _imaginary_pair(S):
    return [p for p in S.points if abs(p.value.imag) > 0.1]


def criterion_6() -> CriterionResult:
    def run():
        fine = _imaginary_pair(gap_set(3.0, 1024))
        gap512 = _imaginary_pair(gap_set(3.0, 512))
        dense512 = _imaginary_pair(dense_set(3.0, 512))
        detail = {"pair_1024": [p.value for p in fine], "dense_512": [p.value for p in dense512]}
        if len(fine) != 2 or len(gap512) != 2 or len(dense512) != 2:
            return False, detail
        vals = np.array([p.value for p in fine])
        detail["max_re"] = float(np.max(np.abs(vals.real)))
        detail["pair_symmetry"] = max(hausdorff(vals, -vals), hausdorff(vals, vals.conj()))
        im_gap = np.sort([p.value.imag for p in gap512])
        im_dense = np.sort([p.value.imag for p in dense512])
        detail["im_vs_dense"] = float(np.max(np.abs(im_gap - im_dense)))
        H = operator(3.0, 1024)
        rates = []
        ok_tail = True
        for p in fine:
            J = jordan_chain(H, p.value, radius=0.3)
            for rep in _fit_all(J.all_vectors, p.value):
                rates.append(rep.rate)
                ok_tail &= rep.passed
        detail["rates"] = rates
        ok = detail["max_re"] < 1e-6 and detail["pair_symmetry"] <= 1e-8 and detail["im_vs_dense"] <= 1e-7 and ok_tail
        return ok, detail

    return _wrap(6, "supercritical imaginary pair", run)


def criterion_7() -> CriterionResult:
    def run():
        pots = potentials(1.0, 1024)
        Hhat = assemble_HhatE(pots.grid, MU, 0.0, pots)
        rows = []
        ok = True
        for R in (5.0, 8.0, 12.0):
            q = dk.exterior_quotient(Hhat, R)
            bound = MU - (pots.sup_beyond(R) + 1e-8)
            rows.append({"R": R, "quotient": q, "bound": bound})
            ok &= q >= bound
        qs = [r["quotient"] for r in rows]
        ok &= all(b >= a - 1e-12 for a, b in zip(qs, qs[1:]))
        return ok, {"rows": rows}

    return _wrap(7, "exterior lower bound", run)


def criterion_8() -> CriterionResult:
    def run():
        checked = 0
        failures = []
        worst = 0.0
        for sigma in (1.0, 3.0):
            pots = potentials(sigma, 1024)
            H = operator(sigma, 1024)
            S = gap_set(sigma, 1024)
            for pt in S.points:
                E = pt.value
                radius = 0.3 if abs(E) < 0.5 else min(0.3, 0.4 * abs(E))
                J = jordan_chain(H, E, radius=radius)
                Hhat = assemble_HhatE(pots.grid, MU, E, pots)
                mu_E = MU - abs(E.real)
                for frac in DELTAS:
                    params = dk.DecayParameters(MU, E.real, frac * mu_E)
                    for chain in J.chains:
                        reps = [dk.lemma3_check(Hhat, chain[-1], params, eps_list=EPS)]
                        if len(chain) > 1:
                            reps.append(dk.chain_decay_check(chain, Hhat, params, eps_list=EPS, tol=1e-6))
                        for rep in reps:
                            checked += 1
                            worst = max(worst, rep.max_ratio if rep.applicable else 0.0)
                            if rep.status != "pass":
                                failures.append({"E": E, "delta": params.delta, "status": rep.status, "reason": rep.reason})
        return not failures and checked > 0, {"checked": checked, "max_ratio": worst, "failures": failures}

    return _wrap(8, "weighted estimates (single and chain)", run)


def random_identity_pair(g, rng):
    """Smooth weight (three Gaussian bumps) and a two-component wave packet."""
    x = g.axis
    weight = np.zeros_like(x)
    for _ in range(3):
        a, c, s = rng.uniform(-0.5, 0.5), rng.uniform(-8, 8), rng.uniform(1, 3)
        weight += a * np.exp(-((x - c) ** 2) / (2 * s * s))

    def packet():
        c, s, k = rng.uniform(-6, 6), rng.uniform(1, 2.5), rng.uniform(-2, 2)
        return np.exp(-((x - c) ** 2) / (2 * s * s) + 1j * k * x)

    return weight, Vec2Field(g, packet(), packet())


def criterion_9(pairs: int = 10, seed: int = 9) -> CriterionResult:
    def run():
        sizes = (512, 1024, 2048)
        table = []
        for k in range(pairs):
            row = []
            for N in sizes:
                g = make_grid(1, L, N)
                pots = linearization_potentials(closed_form_soliton(g, MU, NonlinearitySpec(1.0)), NonlinearitySpec(1.0))
                rng = np.random.default_rng([seed, k])
                E = complex(rng.uniform(-0.5, 0.5), rng.uniform(-1, 1))
                w, psi = random_identity_pair(g, rng)
                row.append(dk.conjugation_identity_residual(assemble_HhatE(g, MU, E, pots), w, psi))
            table.append(row)
        t = np.array(table)
        at1024 = float(t[:, 1].max())
        factors = np.concatenate([t[:, 0] / t[:, 1], t[:, 1] / t[:, 2]])
        ok = at1024 <= 1e-4 and float(factors.min()) >= 3.5
        return ok, {"max_residual_1024": at1024, "min_factor": float(factors.min())}

    return _wrap(9, "conjugation identity", run)


def criterion_10() -> CriterionResult:
    def run():
        detail = {}
        ok = True
        for sigma in (1.0, 3.0):
            for N in (128, 256, 512):
                m = match_spectra(gap_set(sigma, N), dense_set(sigma, N), 1e-7)
                detail[f"s={sigma:g} N={N}"] = {
                    "count": len(gap_set(sigma, N)),
                    "max_distance": m.max_distance,
                    "multiplicities_equal": m.counts_equal,
                }
                ok &= m.passed
        return ok, detail

    return _wrap(10, "oracle equivalence", run)


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
}


def format_line(r: CriterionResult) -> str:
    return f"criterion {r.number:2d} [{'PASS' if r.passed else 'FAIL'}] {r.name} ({r.seconds:.1f}s)"


def run_all(select=None, echo=None) -> list:
    out = []
    for n, fn in CRITERIA.items():
        if select and n not in select:
            continue
        r = fn()
        if echo:
            echo(format_line(r))
        out.append(r)
    return out
