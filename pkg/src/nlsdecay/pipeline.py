"""End-to-end runs: profile, potentials, operator, gap spectrum, Jordan data and decay checks."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import decay as dk
from .config import RunConfig
from .grid import make_grid
from .io import read_potentials_csv
from .nls import (
    NonlinearitySpec,
    PotentialPair,
    StationaryProfile,
    closed_form_soliton,
    linearization_potentials,
    solve_ground_state,
)
from .operators import BlockOperator, assemble_H, assemble_HhatE, assemble_Lminus
from .spectral import (
    SpectralConfig,
    SpectralSet,
    axis_confinement,
    gap_eigenvalues,
    jordan_chain,
    riesz_projection,
    symmetry_check,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"

__all__ = ["SCHEMA_VERSION", "Run", "build_problem", "run_spectrum", "run_decay", "new_report"]


@dataclass
class Run:
    cfg: RunConfig
    grid: object = None
    profile: StationaryProfile | None = None
    potentials: PotentialPair | None = None
    H: BlockOperator | None = None
    spectrum: SpectralSet | None = None
    chains: dict = field(default_factory=dict)
    lminus: object = None
    timing: dict = field(default_factory=dict)


class _Timer:
    def __init__(self, sink: dict, key: str):
        self.sink, self.key = sink, key

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.sink[self.key] = self.sink.get(self.key, 0.0) + time.perf_counter() - self.t0


def new_report(cfg: RunConfig) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.echo(),
        "profile": None,
        "spectrum": None,
        "symmetry": None,
        "decay": None,
        "checks": {},
        "timing": {},
    }


def build_problem(cfg: RunConfig) -> Run:
    """Grid, stationary profile (or tabulated/zero potentials) and the operator H."""
    run = Run(cfg)
    with _Timer(run.timing, "profile"):
        if cfg.potentials_file:
            g, pots = read_potentials_csv(cfg.potentials_file)
        else:
            g = make_grid(cfg.dimension, cfg.half_length, cfg.points)
            if cfg.potentials_off:
                pots = PotentialPair.zero(g)
            else:
                nl = NonlinearitySpec(cfg.sigma)
                seed = closed_form_soliton(g, cfg.mu, nl, cfg.order)
                run.profile = solve_ground_state(g, cfg.mu, nl, seed.field, tol=cfg.newton_tol, order=cfg.order)
                pots = linearization_potentials(run.profile, nl)
        run.grid, run.potentials = g, pots
    with _Timer(run.timing, "assemble"):
        run.H = assemble_H(g, cfg.mu, pots, cfg.order)
    return run


def _lminus(run: Run):
    if run.lminus is None:
        run.lminus = assemble_Lminus(run.grid, run.cfg.mu, run.potentials, run.cfg.order)
    return run.lminus


def profile_summary(run: Run) -> dict:
    cfg = run.cfg
    lm = _lminus(run)
    src = "file" if cfg.potentials_file else ("free" if cfg.potentials_off else "soliton")
    out = {
        "source": src,
        "points": run.grid.points,
        "half_length": run.grid.half_length,
        "tail": run.potentials.tail,
        "lminus_smallest": lm.smallest_eigenvalue,
        "positivity": lm.positive,
    }
    if run.profile is not None:
        p = run.profile
        out.update(
            residual=p.residual,
            iterations=p.iterations,
            sign_changing=p.sign_changing,
            peak=float(np.max(np.abs(p.values))),
        )
    return out


def _contour_radius(value: complex, others, mu: float) -> float:
    dist = [abs(value - o) for o in others if o != value]
    r = 0.3 * mu
    if dist:
        r = min(r, 0.4 * min(dist))
    return r


def run_spectrum(run: Run) -> dict:
    """Gap eigenvalues plus Riesz rank and Jordan structure for each of them."""
    cfg = run.cfg
    scfg = SpectralConfig(tol=cfg.eig_tol, seed=cfg.seed, dense_cap=cfg.dense_cap)
    with _Timer(run.timing, "gap_eigenvalues"):
        S = gap_eigenvalues(run.H, cfg.strip_margin, cfg.imag_cap, scfg)
    run.spectrum = S
    values = [p.value for p in S.points]
    entries = []
    for i, pt in enumerate(S.points):
        entry = {
            "value": pt.value,
            "members": list(pt.members),
            "multiplicity": pt.multiplicity,
            "residual": pt.residual,
            "shift": pt.shift,
            "operator_applications": pt.iterations,
        }
        with _Timer(run.timing, "jordan"):
            radius = _contour_radius(pt.value, values, cfg.mu)
            rp = riesz_projection(run.H, pt.value, radius, seed=cfg.seed + i)
            entry["riesz"] = {
                "radius": radius,
                "rank": rp.rank,
                "defect": rp.defect,
                "nodes": rp.nodes,
                "gap_ratio": rp.gap_ratio,
                "history": [list(h) for h in rp.history],
            }
            J = jordan_chain(
                run.H,
                pt.value,
                tol=cfg.chain_tol,
                riesz=rp,
                full_space=cfg.full_space_check and run.H.shape[0] <= cfg.dense_cap,
            )
        pt.geometric, pt.algebraic, pt.index = J.geometric, J.algebraic, J.index
        entry.update(geometric=J.geometric, algebraic=J.algebraic, jordan_index=J.index)
        entry["jordan"] = {
            "kernel_dims": J.kernel_dims,
            "full_kernel_dims": J.full_kernel_dims,
            "chain_lengths": [len(c) for c in J.chains],
            "chain_residuals": J.chain_residuals,
            "terminal_residual": J.terminal_residual,
            "consistent": J.consistent,
        }
        run.chains[i] = J
        entries.append(entry)
    sym = symmetry_check(S)
    spectrum = {
        "strip": list(S.strip),
        "cluster_radius": S.cluster_radius,
        "partial": S.partial,
        "failures": S.failures,
        "count": len(S.points),
        "eigenvalues": entries,
    }
    symmetry = {
        "negation_distance": sym.negation_distance,
        "conjugation_distance": sym.conjugation_distance,
        "tol": sym.tol,
        "passed": sym.passed,
        "positivity": _lminus(run).positive,
        "axis_distance": None,
    }
    if _lminus(run).positive:
        # L_- >= 0 confines the spectrum to the two axes and forces k = 1 away from 0
        symmetry["axis_distance"] = axis_confinement(S)
        trivial = all(p.index == 1 for p in S.points if abs(p.value) > S.cluster_radius)
        symmetry["passed"] = sym.passed and symmetry["axis_distance"] <= sym.tol and trivial
    return {"spectrum": spectrum, "symmetry": symmetry}


def _lemma_entry(kind, label, rep: dk.LemmaReport) -> dict:
    return {
        "kind": kind,
        "vector": label,
        "delta": rep.delta,
        "status": rep.status,
        "reason": rep.reason,
        "radius": rep.radius,
        "quotient": rep.quotient,
        "monotone": rep.monotone if rep.applicable else None,
        "rows": [{"eps": r.eps, "lhs": r.lhs, "rhs": r.rhs, "ratio": r.ratio, "holds": r.holds} for r in rep.rows],
    }


def run_decay(run: Run) -> tuple[dict, dict]:
    """Decay fits, lemma checks and identity residuals for every gap eigenvalue.

    Returns the report section and the tail profiles keyed by a file stem.
    """
    cfg = run.cfg
    if run.spectrum is None:
        run_spectrum(run)
    entries = []
    tails = {}
    for i, pt in enumerate(run.spectrum.points):
        J = run.chains[i]
        E = pt.value
        mu_E = cfg.mu - abs(E.real)
        deltas = tuple(f * mu_E for f in cfg.delta_list)
        Hhat = assemble_HhatE(run.grid, cfg.mu, E, run.potentials, cfg.order)
        item = {"value": E, "mu_E": mu_E, "deltas": list(deltas), "fits": [], "lemmas": [], "identity": None}
        with _Timer(run.timing, "decay_fit"):
            for c, chain in enumerate(J.chains):
                for l, vec in enumerate(chain):
                    label = f"e{i}_c{c}_l{l}"
                    try:
                        rep = dk.fit_decay_rate(
                            vec, cfg.fit_window, mu=cfg.mu, energy=E, deltas=deltas, rate_tol=cfg.rate_tol
                        )
                    except ValueError as exc:
                        item["fits"].append({"vector": label, "status": "skipped", "reason": str(exc)})
                        continue
                    item["fits"].append(
                        {
                            "vector": label,
                            "status": "pass" if rep.passed else "fail",
                            "rate": rep.rate,
                            "tail_rates": list(rep.tail_rates),
                            "power": rep.power,
                            "rms": rep.rms,
                            "window": list(rep.window),
                            "bounds": list(rep.bounds),
                            "passes": list(rep.passes),
                        }
                    )
                    tails[label] = dk.tail_profile(vec)
        with _Timer(run.timing, "lemmas"):
            for d in deltas:
                params = dk.DecayParameters(cfg.mu, E.real, d)
                for c, chain in enumerate(J.chains):
                    eig = chain[-1]
                    rep = dk.lemma3_check(Hhat, eig, params, eps_list=cfg.eps_list, tol=cfg.eig_tol)
                    item["lemmas"].append(_lemma_entry("lemma3", f"e{i}_c{c}_l{len(chain) - 1}", rep))
                    if len(chain) > 1:
                        rep = dk.chain_decay_check(chain, Hhat, params, eps_list=cfg.eps_list, tol=cfg.chain_tol)
                        item["lemmas"].append(_lemma_entry("chain", f"e{i}_c{c}", rep))
        with _Timer(run.timing, "identity"):
            params = dk.DecayParameters(cfg.mu, E.real, deltas[0], max(cfg.eps_list) or 1.0)
            w = dk.weight_field(run.grid, params)
            item["identity"] = dk.conjugation_identity_residual(Hhat, w.values, J.chains[0][-1])
        entries.append(item)
    return {"eigenvalues": entries}, tails


def summarize_checks(report: dict) -> dict:
    checks = {}
    if report.get("profile") and "residual" in report["profile"]:
        checks["profile_residual"] = "pass" if report["profile"]["residual"] < 1e-8 else "fail"
    if report.get("symmetry"):
        checks["symmetry"] = "pass" if report["symmetry"]["passed"] else "fail"
    if report.get("spectrum"):
        checks["spectrum_complete"] = "fail" if report["spectrum"]["partial"] else "pass"
    dec = report.get("decay")
    if dec:
        fits = [f["status"] for e in dec["eigenvalues"] for f in e["fits"]]
        lem = [m["status"] for e in dec["eigenvalues"] for m in e["lemmas"]]
        checks["decay_fits"] = _fold(fits)
        checks["lemmas"] = _fold(lem)
        checks["lemmas_skipped"] = sum(s == "skipped" for s in lem)
    return checks


def _fold(statuses) -> str:
    if any(s == "fail" for s in statuses):
        return "fail"
    if statuses and all(s == "skipped" for s in statuses):
        return "skipped"
    return "pass"
