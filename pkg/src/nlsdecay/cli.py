"""Command-line front end: ``nlsdecay {soliton,spectrum,decay,verify,report}``.

Exit status: 0 success, 1 a check or criterion failed, 2 invalid input,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import acceptance
from .config import build_config, load_config_file
from .errors import NLSDecayError, ValidationError
from .io import read_json, write_csv, write_json, write_potentials_csv, write_triplets, write_vec2field
from .pipeline import build_problem, new_report, profile_summary, run_decay, run_spectrum, summarize_checks

log = logging.getLogger("nlsdecay")

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="PATH", help="flat key = value config file (flags override it)")
    p.add_argument("--mu", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--domain-half-length", type=float, dest="half_length")
    p.add_argument("--points", type=int)
    p.add_argument("--order", type=int, choices=(2, 4))
    p.add_argument("--strip-margin", type=float)
    p.add_argument("--imag-cap", type=float)
    p.add_argument("--delta-list", metavar="CSV", help="delta values as fractions of mu_E")
    p.add_argument("--eps-list", metavar="CSV")
    p.add_argument("--rate-tol", type=float)
    p.add_argument("--fit-window", metavar="R1,R2")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--seed", type=int)
    p.add_argument("--potentials-file", metavar="PATH")
    p.add_argument("--potentials-off", action="store_true", default=None, help="use U = W = 0")
    p.add_argument("--full-space-check", action="store_true", default=None)
    p.add_argument("--canonical", action="store_true", default=None, help="sorted keys, timing omitted")
    p.add_argument("-v", "--verbose", action="store_true")


OVERRIDE_KEYS = (
    "mu sigma half_length points order strip_margin imag_cap delta_list eps_list rate_tol fit_window "
    "out seed potentials_file potentials_off full_space_check canonical"
).split()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlsdecay",
        description="Gap spectra, Jordan chains and exponential decay for linearized NLS operators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("soliton", "solve for the stationary profile and write it with the potentials"),
        ("spectrum", "gap eigenvalues, symmetry check, Riesz ranks and Jordan structure"),
        ("decay", "spectrum plus decay fits, weighted estimates and tail profiles"),
        ("verify", "run the acceptance suite"),
    ):
        _add_common(sub.add_parser(name, help=text, description=text))
    rep = sub.add_parser("report", help="re-render a report JSON into CSV tables")
    rep.add_argument("report", metavar="JSON")
    rep.add_argument("--out", metavar="DIR")
    rep.add_argument("-v", "--verbose", action="store_true")
    return parser


def config_from_args(args):
    file_values = load_config_file(args.config) if args.config else {}
    overrides = {k: getattr(args, k) for k in OVERRIDE_KEYS if getattr(args, k, None) is not None}
    return build_config(file_values, overrides)


def _finish(report: dict, cfg, out: Path, started: float) -> Path:
    report["checks"] = summarize_checks(report)
    report["timing"]["total"] = time.perf_counter() - started
    path = write_json(out / "report.json", report, canonical=cfg.canonical)
    print(f"report: {path}")
    return path


def _status(report: dict) -> int:
    return EXIT_FAIL if any(v == "fail" for v in report["checks"].values()) else EXIT_OK


def cmd_soliton(cfg) -> int:
    started = time.perf_counter()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    print(f"output directory: {out.resolve()}")
    if cfg.dimension != 1 or cfg.potentials_off or cfg.potentials_file:
        raise ValidationError("soliton needs d = 1 and the built-in power nonlinearity")
    run = build_problem(cfg)
    report = new_report(cfg)
    report["profile"] = profile_summary(run)
    report["timing"].update(run.timing)
    g = run.grid
    write_csv(out / "profile.csv", ["x", "phi"], zip(g.axis, run.profile.values))
    write_potentials_csv(out / "potentials.csv", run.potentials)
    print(f"residual: {run.profile.residual:.3e} after {run.profile.iterations} Newton steps")
    _finish(report, cfg, out, started)
    return _status(report)


def _spectrum_run(cfg, out: Path):
    run = build_problem(cfg)
    report = new_report(cfg)
    report["profile"] = profile_summary(run)
    report.update(run_spectrum(run))
    report["timing"].update(run.timing)
    write_triplets(out / "operator_triplets.csv", run.H.matrix)
    rows = [
        (e["value"].real, e["value"].imag, e["multiplicity"], e["geometric"], e["jordan_index"], e["riesz"]["rank"])
        for e in report["spectrum"]["eigenvalues"]
    ]
    write_csv(out / "spectrum.csv", ["re", "im", "multiplicity", "geometric", "jordan_index", "riesz_rank"], rows)
    for i, J in run.chains.items():
        for c, chain in enumerate(J.chains):
            for l, vec in enumerate(chain):
                write_vec2field(out / "vectors" / f"e{i}_c{c}_l{l}.csv", vec)
    for e in report["spectrum"]["eigenvalues"]:
        print(
            f"E = {e['value'].real:+.10f} {e['value'].imag:+.10f}i  algebraic {e['algebraic']}"
            f"  geometric {e['geometric']}  index {e['jordan_index']}"
        )
    if report["spectrum"]["partial"]:
        print("warning: some shifts failed; spectrum marked partial")
    return run, report


def cmd_spectrum(cfg) -> int:
    started = time.perf_counter()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _, report = _spectrum_run(cfg, out)
    print(f"symmetry: {'pass' if report['symmetry']['passed'] else 'fail'}")
    _finish(report, cfg, out, started)
    return _status(report)


def cmd_decay(cfg) -> int:
    started = time.perf_counter()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    run, report = _spectrum_run(cfg, out)
    section, tails = run_decay(run)
    report["decay"] = section
    report["timing"].update(run.timing)
    tail_dir = out / "tails"
    for label, arr in tails.items():
        write_csv(tail_dir / f"{label}.csv", ["r", "log_amplitude"], arr)
    _write_decay_tables(report, out)
    for item in section["eigenvalues"]:
        for f in item["fits"]:
            rate = f.get("rate")
            print(f"{f['vector']}: rate {rate:.4f} {f['status']}" if rate is not None else f"{f['vector']}: skipped")
    _finish(report, cfg, out, started)
    return _status(report)


def _write_decay_tables(report: dict, out: Path):
    dec = report.get("decay") or {"eigenvalues": []}
    fits, lemmas = [], []
    for item in dec["eigenvalues"]:
        v = item["value"]
        re, im = (v["re"], v["im"]) if isinstance(v, dict) else (v.real, v.imag)
        for f in item["fits"]:
            fits.append((re, im, f["vector"], f["status"], f.get("rate", ""), f.get("power", ""), f.get("rms", "")))
        for m in item["lemmas"]:
            if not m["rows"]:
                lemmas.append((re, im, m["kind"], m["vector"], m["delta"], "", "", "", "", m["status"]))
            for r in m["rows"]:
                lemmas.append(
                    (re, im, m["kind"], m["vector"], m["delta"], r["eps"], r["lhs"], r["rhs"], r["ratio"], m["status"])
                )
    write_csv(out / "decay_fits.csv", ["re", "im", "vector", "status", "rate", "power", "rms"], fits)
    write_csv(
        out / "lemma_checks.csv",
        ["re", "im", "kind", "vector", "delta", "eps", "lhs", "rhs", "ratio", "status"],
        lemmas,
    )


def cmd_verify(cfg) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    results = acceptance.run_all(echo=print)
    payload = {
        "schema_version": "1.0",
        "config": cfg.echo(),
        "criteria": [
            {"number": r.number, "name": r.name, "passed": r.passed, "detail": r.detail} for r in results
        ],
        "passed": all(r.passed for r in results),
        "timing": {f"criterion_{r.number}": r.seconds for r in results},
    }
    path = write_json(out / "verify.json", payload, canonical=cfg.canonical)
    print(f"verify: {path}")
    failed = [r for r in results if not r.passed]
    for r in failed:
        print(f"failed: criterion {r.number} ({r.name})", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_report(path: str, out: str | None) -> int:
    src = Path(path)
    if not src.is_file():
        raise ValidationError(f"report not found: {path}")
    try:
        report = read_json(src)
    except ValueError as exc:
        raise ValidationError(f"{path} is not valid JSON") from exc
    missing = {"schema_version", "config", "spectrum", "decay"} - set(report)
    if missing:
        raise ValidationError(f"{path} lacks keys {sorted(missing)}")
    dest = Path(out) if out else src.parent
    spec = report.get("spectrum") or {"eigenvalues": []}
    rows = [
        (e["value"]["re"], e["value"]["im"], e["multiplicity"], e["geometric"], e["jordan_index"], e["riesz"]["rank"])
        for e in spec["eigenvalues"]
    ]
    write_csv(dest / "spectrum.csv", ["re", "im", "multiplicity", "geometric", "jordan_index", "riesz_rank"], rows)
    _write_decay_tables(report, dest)
    print(f"tables written to {dest}")
    return EXIT_OK


COMMANDS = {"soliton": cmd_soliton, "spectrum": cmd_spectrum, "decay": cmd_decay, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        if args.command == "report":
            return cmd_report(args.report, args.out)
        cfg = config_from_args(args)
        return COMMANDS[args.command](cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NLSDecayError, np.linalg.LinAlgError, ArithmeticError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
