"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from collections import Counter
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .data import ingest_csv
from .estimation import TylerConfig
from .exceptions import DataError, NumericalError
from .gof import NULLS, TestConfig, run_tests
from .models import mahalanobis_qq, model_comparison
from .simulation import ExperimentConfig, emit_pvalue_ecdf, manifest, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path: Path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _num(v):
    """repr-based formatting keeps floats exact on re-parse."""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(int(v)) if isinstance(v, (int, np.integer)) else str(v)


def _out_dir(args) -> Path | None:
    if args.out is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args):
    columns = [c for c in args.columns.split(",") if c] if args.columns else None
    return ingest_csv(args.input, columns)


# -- test ---------------------------------------------------------------------


def report_dict(reports: dict, dataset, cfg: TestConfig) -> dict:
    first = next(iter(reports.values()))
    fit = first.fitted
    out = {
        "input": {"source": dataset.source, "columns": list(dataset.columns), "n": dataset.n, "m": dataset.m,
                  "rows_read": dataset.n_read, "rows_dropped": dataset.n_dropped},
        "config": {"alpha": cfg.alpha, "bootstrap_B": cfg.bootstrap_B, "seed": cfg.seed, "null": cfg.null,
                   "rho": cfg.tyler.rho, "beta_bounds": list(cfg.beta_bounds)},
        "fit": {
            "mu": fit.params.mu.tolist(),
            "sigma": fit.params.sigma.matrix.tolist(),
            "beta": fit.params.beta,
            "rho": fit.diagnostics.rho,
            "tyler_iterations": fit.diagnostics.tyler_iterations,
            "tyler_converged": fit.diagnostics.tyler_converged,
            "beta_clamped": fit.diagnostics.beta_clamped,
            "condition_number": fit.diagnostics.spectrum.condition_number,
        },
        "tests": {},
    }
    for meth, rep in reports.items():
        out["tests"][meth] = {
            "statistic": rep.t_obs,
            "z": rep.z_obs,
            "p_value": rep.p_value,
            "reject": rep.reject,
            "n_failed": rep.n_failed,
            "boot_stats": list(rep.boot_stats),
        }
    return out


def render_text(doc: dict) -> str:
    fit = doc["fit"]
    lines = [
        f"input        {doc['input']['source']} (n={doc['input']['n']}, m={doc['input']['m']}, dropped {doc['input']['rows_dropped']})",
        f"null         {doc['config']['null']}  alpha={doc['config']['alpha']}  B={doc['config']['bootstrap_B']}  seed={doc['config']['seed']}",
        f"fitted beta  {fit['beta']:.4f}{'  (clamped)' if fit['beta_clamped'] else ''}",
        f"tyler        rho={fit['rho']:.4f}  iterations={fit['tyler_iterations']}  converged={fit['tyler_converged']}",
        f"condition    {fit['condition_number']:.4g}",
    ]
    for meth, t in doc["tests"].items():
        stat = f"T={t['statistic']}  z={t['z']:.3f}" if meth == "nn" else f"E={t['statistic']:.6g}"
        verdict = "reject" if t["reject"] else "do not reject"
        lines.append(f"{meth:<12} {stat}  p={t['p_value']:.4f}  -> {verdict}")
    return "\n".join(lines) + "\n"


def cmd_test(args) -> int:
    dataset = _load(args)
    cfg = TestConfig(
        alpha=args.alpha,
        bootstrap_B=args.bootstrap,
        tyler=TylerConfig(rho=args.rho),
        seed=args.seed,
        null=args.null,
        workers=args.threads,
    )
    methods = tuple(m for m in args.methods.split(",") if m)
    reports = run_tests(dataset.values, cfg, methods)
    doc = report_dict(reports, dataset, cfg)
    sys.stdout.write(render_text(doc))
    out = _out_dir(args)
    if out is not None:
        _write_json(out / "report.json", doc)
        boot = [reports[m].boot_stats for m in methods]
        _write_csv(out / "bootstrap.csv", ("replicate",) + methods, ([b] + [_num(s[b]) for s in boot] for b in range(len(boot[0]))))
        if "nn" in reports:
            hist = Counter(int(t) for t in reports["nn"].boot_stats)
            _write_csv(out / "nn_histogram.csv", ("statistic", "count"), sorted(hist.items()))
    return EXIT_OK


# -- simulate -----------------------------------------------------------------


def load_experiment(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"config file {path} not found") from exc
    except yaml.YAMLError as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise DataError(f"{path} must contain a mapping")
    try:
        return ExperimentConfig.from_dict(raw)
    except TypeError as exc:
        raise DataError(str(exc)) from exc


def cmd_simulate(args) -> int:
    cfg = load_experiment(args.config)
    if args.threads is not None:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "workers": args.threads})
    if args.seed is not None:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    table = run_experiment(cfg)
    sys.stdout.write(table.to_csv())
    out = _out_dir(args)
    if out is not None:
        (out / "table.csv").write_text(table.to_csv())
        _write_csv(
            out / "pvalues.csv",
            ("method", "m", "scenario", "index", "p"),
            ([r.method, r.m, r.scenario, i, _num(p)] for r in table.rows for i, p in enumerate(r.pvalues)),
        )
        for row in table.rows:
            if row.pvalues:
                emit_pvalue_ecdf(row.pvalues, out / f"ecdf_{row.method}_m{row.m}_{row.scenario}.csv")
        _write_json(out / "manifest.json", manifest(cfg))
    return EXIT_OK


# -- compare-models -----------------------------------------------------------


def cmd_compare(args) -> int:
    dataset = _load(args)
    mc = model_comparison(dataset.values)
    lines = [f"{'model':<8}{'loglik':>14}{'k':>4}{'AIC':>14}{'BIC':>14}  shape"]
    for f in mc.fits:
        shape = "" if f.shape is None else f"{'nu' if f.name == 't' else 'beta'}={f.shape:g}"
        edge = " (grid edge)" if f.at_grid_edge else ""
        lines.append(f"{f.name:<8}{f.loglik:>14.3f}{f.k:>4}{f.aic:>14.3f}{f.bic:>14.3f}  {shape}{edge}")
    lines.append("AIC ranking: " + " < ".join(mc.ranking("aic")))
    sys.stdout.write("\n".join(lines) + "\n")
    out = _out_dir(args)
    if out is not None:
        _write_csv(
            out / "models.csv",
            ("model", "loglik", "k", "aic", "bic", "shape", "grid_edge"),
            ([f.name, _num(f.loglik), f.k, _num(f.aic), _num(f.bic), "" if f.shape is None else _num(f.shape), int(f.at_grid_edge)] for f in mc.fits),
        )
        _write_csv(out / "beta_profile.csv", ("beta", "loglik"), ((_num(b), _num(l)) for b, l in mc.beta_profile))
        _write_csv(out / "nu_profile.csv", ("nu", "loglik"), ((_num(v), _num(l)) for v, l in mc.nu_profile))
    return EXIT_OK


# -- qq / ecdf ----------------------------------------------------------------


def cmd_qq(args) -> int:
    dataset = _load(args)
    theo, obs = mahalanobis_qq(dataset.values)
    rows = [(_num(a), _num(b)) for a, b in zip(theo, obs)]
    out = _out_dir(args)
    if out is not None:
        _write_csv(out / "qq.csv", ("chi2_quantile", "mahalanobis_sq"), rows)
    sys.stdout.write(f"{len(rows)} points; max observed {obs[-1]:.4g}, max theoretical {theo[-1]:.4g}\n")
    return EXIT_OK


def cmd_ecdf(args) -> int:
    try:
        with open(args.input, newline="") as fh:
            reader = csv.DictReader(fh)
            if args.column not in (reader.fieldnames or []):
                raise DataError(f"column {args.column!r} not found in {args.input}")
            pvalues = [float(r[args.column]) for r in reader]
    except FileNotFoundError as exc:
        raise DataError(f"cannot read {args.input}") from exc
    except ValueError as exc:
        raise DataError(f"non-numeric p-value in {args.input}: {exc}") from exc
    if any(not 0 <= p <= 1 for p in pvalues):
        raise DataError("p-values must lie in [0, 1]")
    out = _out_dir(args) or Path(".")
    ks = emit_pvalue_ecdf(pvalues, out / "ecdf.csv")
    sys.stdout.write(f"n={len(pvalues)} kolmogorov_distance={ks!r} critical_95={1.36 / len(pvalues) ** 0.5!r}\n")
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _level(s):
    v = float(s)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("must lie in (0, 1)")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nnmggd", description="Nearest-neighbour goodness-of-fit testing for MGGD models.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_args(sp):
        sp.add_argument("--input", required=True, help="CSV file with a header row")
        sp.add_argument("--columns", help="comma-separated column names (default: all)")
        sp.add_argument("--out", help="output directory")

    t = sub.add_parser("test", help="run the goodness-of-fit test")
    data_args(t)
    t.add_argument("--alpha", type=_level, default=0.05)
    t.add_argument("--bootstrap", type=_positive_int, default=200, help="bootstrap replicates B")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--rho", type=float, default=None, help="Tyler regularization weight (default: from n and m)")
    t.add_argument("--null", choices=NULLS, default="mggd")
    t.add_argument("--methods", default="nn,energy", help="comma-separated subset of nn,energy")
    t.add_argument("--threads", type=_positive_int, default=1)
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("simulate", help="run a Monte Carlo experiment from a YAML config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="output directory")
    s.add_argument("--seed", type=int, default=None, help="override the config seed")
    s.add_argument("--threads", type=_positive_int, default=None)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compare-models", help="Normal, t and MGGD fits with AIC and BIC")
    data_args(c)
    c.set_defaults(func=cmd_compare)

    q = sub.add_parser("qq", help="Mahalanobis chi-square QQ data")
    data_args(q)
    q.set_defaults(func=cmd_qq)

    e = sub.add_parser("ecdf", help="ECDF of a column of p-values")
    e.add_argument("--input", required=True)
    e.add_argument("--column", default="p")
    e.add_argument("--out", help="output directory")
    e.set_defaults(func=cmd_ecdf)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
