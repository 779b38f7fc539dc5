"""Command-line interface.

Commands: fwhm, resolve, simulate, fit, classify, report.  Every command
takes --output-dir and never writes outside it.  Exit codes: 0 success,
1 numerical failure, 2 usage/validation error.  Outputs carry no
timestamps and use deterministic formatting, so a fixed seed reproduces
files byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .discrimination import DecisionRule, classify_tags, confusion, optimal_thresholds
from .emg import EmgParams, emg_fwhm, emg_pdf
from .errors import (
    IllPosedFitError,
    InsufficientDataError,
    NumericalFailureError,
    ParameterDomainError,
    PhotonNumberRangeError,
)
from .fitting import FitConfig, fit_histogram, goodness_of_fit
from .model import load_model_config
from .montecarlo import (
    bin_arrivals,
    histogram,
    read_histogram,
    read_tags,
    simulate_tags,
    write_histogram,
    write_labeled_tags,
    write_tags,
)
from .resolvability import resolve_exact

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Maps to exit code 2."""


def _write_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _out_path(args, name) -> Path:
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    p = Path(name)
    target = (p if p.is_absolute() else out_dir / p).resolve()
    if not target.is_relative_to(out_dir.resolve()):
        raise UsageError(f"refusing to write outside --output-dir: {name}")
    target.parent.mkdir(parents=True, exist_ok=True)
    return target


def _load_config(args):
    path = Path(args.config)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    return load_model_config(path)


def _read_tags_arg(args):
    path = Path(args.tags)
    if not path.is_file():
        raise UsageError(f"tags file not found: {path}")
    return read_tags(path)


# --- commands ---------------------------------------------------------------


def cmd_fwhm(args) -> int:
    res = emg_fwhm(EmgParams(mu=args.mu, sigma=args.sigma, tau=args.tau))
    payload = {
        "mode_ps": res.mode,
        "peak_height_per_ps": res.peak_height,
        "left_half_ps": res.left_half,
        "right_half_ps": res.right_half,
        "fwhm_ps": res.fwhm,
    }
    if args.format == "csv":
        keys = sorted(payload)
        text = ",".join(keys) + "\n" + ",".join(repr(payload[k]) for k in keys) + "\n"
    else:
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        _out_path(args, args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _density_grid(model, points: int):
    comps = [model.component(n) for n in range(1, model.n_max + 1)]
    lo = min(c.mu - 5.0 * c.sigma for c in comps)
    hi = max(c.mu + 5.0 * c.sigma + 8.0 * c.tau for c in comps)
    return np.linspace(lo, hi, points), comps


def _write_fig2_files(args, model, report) -> None:
    # one two-column (n, value) file per curve
    for name, attr in (("fig2b_separation.csv", "separation"), ("fig2b_fwhm.csv", "fwhm")):
        with open(_out_path(args, name), "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["n", f"{attr}_ps"])
            for e in report.per_n:
                w.writerow([e.n, repr(getattr(e, attr))])

    grid, comps = _density_grid(model, args.grid_points)
    shapes = [emg_fwhm(c) for c in comps]
    dens_path = _out_path(args, "fig2a_density.csv")
    with open(dens_path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["t_ps"] + [f"density_n{n}" for n in range(1, model.n_max + 1)])
        cols = [emg_pdf(c, grid) / s.peak_height for c, s in zip(comps, shapes)]
        for i, t in enumerate(grid):
            w.writerow([repr(float(t))] + [repr(float(col[i])) for col in cols])
    marks_path = _out_path(args, "fig2a_fwhm.csv")
    with open(marks_path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["n", "mode_ps", "left_half_ps", "right_half_ps", "fwhm_ps"])
        for n, s in enumerate(shapes, start=1):
            w.writerow([n, repr(s.mode), repr(s.left_half), repr(s.right_half), repr(s.fwhm)])


def cmd_resolve(args) -> int:
    model, source = _load_config(args)
    report = resolve_exact(model)
    _write_json(report.to_dict(), _out_path(args, "report.json"))
    _write_fig2_files(args, model, report)
    print(
        f"n_resolvable_exact={report.n_resolvable_exact} "
        f"n_resolvable_gaussian={report.n_resolvable_gaussian}"
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    model, source = _load_config(args)
    tags = simulate_tags(model, source, args.shots, args.seed)
    write_tags(tags, _out_path(args, args.out))
    if args.bin_width_ps is not None or args.range_ps is not None:
        if args.bin_width_ps is None or args.range_ps is None:
            raise UsageError("histogram output needs both --bin-width-ps and --range-ps")
        h = histogram(tags, args.bin_width_ps, args.range_ps)
        write_histogram(h, _out_path(args, args.histogram_out))
    print(f"clicks={len(tags)} shots={args.shots}")
    return EXIT_OK


def cmd_fit(args) -> int:
    model, source = _load_config(args)
    if (args.tags is None) == (args.histogram is None):
        raise UsageError("give exactly one of --tags or --histogram")
    if args.tags is not None:
        if args.bin_width_ps is None or args.range_ps is None:
            raise UsageError("--tags input needs --bin-width-ps and --range-ps")
        tags = _read_tags_arg(args)
        h = bin_arrivals(tags.arrival_ps, args.bin_width_ps, args.range_ps)
    else:
        path = Path(args.histogram)
        if not path.is_file():
            raise UsageError(f"histogram file not found: {path}")
        h = read_histogram(path)
    cfg = FitConfig()
    if args.fit_config:
        path = Path(args.fit_config)
        if not path.is_file():
            raise UsageError(f"fit config file not found: {path}")
        try:
            cfg = FitConfig.from_dict(json.loads(path.read_text()))
        except json.JSONDecodeError as exc:
            raise UsageError(f"invalid JSON in {path}: {exc}") from exc
    result = fit_histogram(h, model, source, cfg)
    payload = result.to_dict()
    try:
        payload["chi2_summary"] = goodness_of_fit(
            h, result.model, result.source, n_free=len(cfg.free)
        )
    except InsufficientDataError:
        payload["chi2_summary"] = None
    _write_json(payload, _out_path(args, args.out))
    print(
        f"converged={result.converged} objective={result.objective:.6g} "
        f"iterations={result.iterations}"
    )
    return EXIT_OK


def cmd_classify(args) -> int:
    model, source = _load_config(args)
    tags = _read_tags_arg(args)
    if args.rule:
        path = Path(args.rule)
        if not path.is_file():
            raise UsageError(f"rule file not found: {path}")
        try:
            rule = DecisionRule.from_dict(json.loads(path.read_text()))
        except (json.JSONDecodeError, KeyError) as exc:
            raise UsageError(f"invalid rule file {path}: {exc}") from exc
    else:
        rule = optimal_thresholds(model, source, args.labels or model.n_max)
    labels, empirical = classify_tags(tags, rule)
    analytic = confusion(model, source, rule)
    _write_json(rule.to_dict(), _out_path(args, "rule.json"))
    write_labeled_tags(tags, labels, _out_path(args, "labeled.csv"))
    _write_json(analytic.to_dict(), _out_path(args, "confusion_analytic.json"))
    _write_json(empirical.to_dict(), _out_path(args, "confusion_empirical.json"))
    if len(tags):
        err = float(np.mean(np.minimum(tags.true_n, rule.n_labels) != labels))
    else:
        err = 0.0
    print(f"tags={len(tags)} labels={rule.n_labels} empirical_error={err:.6g}")
    return EXIT_OK


def cmd_report(args) -> int:
    model, source = _load_config(args)
    report = resolve_exact(model)
    labels = args.labels or model.n_max
    rule = optimal_thresholds(model, source, labels)
    analytic = confusion(model, source, rule)
    payload = {
        "resolvability": report.to_dict(),
        "decision_rule": rule.to_dict(),
        "confusion_analytic": analytic.to_dict(),
        "components": [
            {
                "n": n,
                "mu_ps": model.mu_n(n),
                "sigma_ps": model.sigma_n(n),
                "tau_ps": model.tau_n(n),
                "sigma_tot_ps": model.sigma_tot_n(n),
            }
            for n in range(1, model.n_max + 1)
        ],
    }
    _write_json(payload, _out_path(args, args.out))
    _write_fig2_files(args, model, report)
    print(
        f"n_resolvable_exact={report.n_resolvable_exact} "
        f"n_resolvable_gaussian={report.n_resolvable_gaussian} labels={labels}"
    )
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pnrres",
        description="Photon-number resolvability analysis for arrival-time statistics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--output-dir", default=".", help="directory all outputs go under")

    p = sub.add_parser("fwhm", help="mode and FWHM of one EMG component")
    p.add_argument("--mu", type=float, default=0.0, help="Gaussian center, ps")
    p.add_argument("--sigma", type=float, required=True, help="Gaussian width, ps")
    p.add_argument("--tau", type=float, default=0.0, help="exponential tail constant, ps")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=None, help="write the result here instead of stdout")
    add_common(p)
    p.set_defaults(func=cmd_fwhm)

    p = sub.add_parser("resolve", help="resolvability report and figure data")
    p.add_argument("--config", required=True, help="model config JSON")
    p.add_argument("--grid-points", type=int, default=401, help="density grid samples")
    add_common(p)
    p.set_defaults(func=cmd_resolve)

    p = sub.add_parser("simulate", help="simulate a click time-tag stream")
    p.add_argument("--config", required=True, help="model config JSON")
    p.add_argument("--shots", type=int, required=True, help="trigger shots")
    p.add_argument("--seed", type=int, required=True, help="RNG seed")
    p.add_argument("--out", default="tags.csv", help="tag stream CSV name")
    p.add_argument("--bin-width-ps", type=float, default=None)
    p.add_argument("--range-ps", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    p.add_argument("--histogram-out", default="histogram.csv")
    add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="maximum-likelihood fit of a histogram")
    p.add_argument("--config", required=True, help="initial model config JSON")
    p.add_argument("--tags", default=None, help="tag stream CSV to bin and fit")
    p.add_argument("--histogram", default=None, help="histogram CSV to fit directly")
    p.add_argument("--bin-width-ps", type=float, default=None)
    p.add_argument("--range-ps", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    p.add_argument("--fit-config", default=None, help="fit config JSON (free, bounds, ...)")
    p.add_argument("--out", default="fit.json")
    add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("classify", help="threshold classification of a tag stream")
    p.add_argument("--config", required=True, help="model config JSON")
    p.add_argument("--tags", required=True, help="tag stream CSV")
    p.add_argument("--labels", type=int, default=None, help="label count B (default n_max)")
    p.add_argument("--rule", default=None, help="reuse a decision-rule JSON")
    add_common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("report", help="one-stop resolvability + classification report")
    p.add_argument("--config", required=True, help="model config JSON")
    p.add_argument("--labels", type=int, default=None, help="label count B (default n_max)")
    p.add_argument("--grid-points", type=int, default=401)
    p.add_argument("--out", default="report.json")
    add_common(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ParameterDomainError, PhotonNumberRangeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailureError, IllPosedFitError, InsufficientDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
