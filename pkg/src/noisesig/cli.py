"""Command-line front end.

Subcommands
-----------
pvalues    P-values of every covariate subset under noise substitution.
select     Two-step functional choice (step-1/step-2 survivors, chosen subset).
calibrate  Cut-off tables p0(n, k, alpha), nested or chi-squared approximate.
nonsig     Non-significance intervals and ellipsoids.
cover      Covering-frequency studies (location and regression), CSV output.
datasets   Built-in datasets.

Contract: a fixed-width UTF-8 table (CSV for ``cover``) on stdout,
byte-identical for identical argv + seed across runs and worker counts;
an optional machine report via ``--out report.json`` (schema 1, embeds
seed, sims, objective, noise kind and version); exit 0 on success, 2 on
usage errors, 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .calibration import (DEFAULT_ALPHA_GRID, CutoffTable, chisq_cutoff_table,
                          nested_cutoff_table)
from .coverage import (ERROR_FAMILIES, MEDIAN_FAMILIES, GeneratorSpec,
                       coverage_median, coverage_regression)
from .datasets import builtin_names, load_builtin, load_csv
from .errors import NumericalError, UsageError
from .model import (Dataset, NonSigInterval, ObjectiveSpec, full_subset,
                    subset_members, subset_size, subsets_of)
from .noise import NOISE_KINDS
from .pvalues import p_all_subsets
from .regions import (nonsig_asymptotic_l1, nonsig_l1_component,
                      nonsig_m_regression, nonsig_median, nonsig_mlocation)
from .selection import choose_functional

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    """argparse that reports problems through the usual error channel."""

    def error(self, message: str):
        raise UsageError(message)


# -- formatting ---------------------------------------------------------

def _fmt_p(p: Optional[float]) -> str:
    return "-" if p is None else f"{p:.4g}"


def _fmt(x: Optional[float], nd: int = 4) -> str:
    return "-" if x is None else f"{x:.{nd}f}"


def _table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))

    def line(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    out = [line(headers), line(["-" * w for w in widths])]
    out.extend(line(row) for row in rows)
    return "\n".join(out) + "\n"


def _subset_label(e: int, names: Sequence[str]) -> str:
    if e == 0:
        return "(none)"
    return "{" + ",".join(names[j] for j in subset_members(e, len(names))) + "}"


def _json_default(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON-serialisable: {type(x).__name__}")


def _write_report(path: str, payload: dict) -> None:
    payload.setdefault("schema", 1)
    payload.setdefault("version", __version__)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


# -- shared argument handling -------------------------------------------

def _load_data(args) -> tuple[Dataset, str]:
    name = args.data
    if name in builtin_names():
        return load_builtin(name), name
    if os.path.exists(name):
        if not getattr(args, "response", None):
            raise UsageError("--response NAME is required with a CSV file")
        return load_csv(name, args.response), name
    raise UsageError(
        f"unknown dataset {name!r}: not a built-in "
        f"({', '.join(builtin_names())}) and no such file")


def _objective(args) -> ObjectiveSpec:
    return ObjectiveSpec.parse(args.objective)


def _parse_cutoff(text: str):
    if text in ("auto", "chisq"):
        return text
    try:
        return float(text)
    except ValueError:
        pass
    if os.path.exists(text):
        with open(text, "r", encoding="utf-8") as fh:
            return CutoffTable.loads(fh.read())
    raise UsageError("--cutoff must be auto, chisq, a number, or a JSON "
                     f"cutoff-table file; got {text!r}")


def _meta_line(command: str, pairs: Sequence[tuple[str, object]]) -> str:
    body = " ".join(f"{k}={v}" for k, v in pairs)
    return f"{command}: {body} version={__version__}\n\n"


# -- subcommands --------------------------------------------------------

def _cmd_pvalues(args) -> tuple[str, dict]:
    d, label = _load_data(args)
    obj = _objective(args)
    reports = p_all_subsets(d, obj, args.method, args.sims, args.noise,
                            args.seed, args.threads)
    if args.subset is not None:
        reports = [r for r in reports if r.subset == args.subset]
        if not reports:
            raise UsageError(f"subset {args.subset} is out of range for "
                             f"k={d.k}")
    rows = [[str(r.subset), _subset_label(r.subset, d.names),
             str(subset_size(r.subset)), _fmt(r.objective_subset),
             _fmt_p(r.p_raw), _fmt_p(r.p_gamma), _fmt_p(r.p_asymptotic)]
            for r in reports]
    text = _meta_line("pvalues", [
        ("dataset", label), ("n", d.n), ("k", d.k),
        ("objective", obj.label()), ("method", args.method),
        ("noise", args.noise), ("sims", args.sims), ("seed", args.seed)])
    text += _table(["subset", "covariates", "size", "objective",
                    "p_raw", "p_gamma", "p_asymptotic"], rows)
    payload = {
        "command": "pvalues", "dataset": label, "n": d.n, "k": d.k,
        "objective": obj.label(), "method": args.method,
        "noise": args.noise, "sims": args.sims, "seed": args.seed,
        "rows": [{
            "subset": r.subset,
            "covariates": [d.names[j] for j in subset_members(r.subset, d.k)],
            "objective_subset": r.objective_subset,
            "objective_full": r.objective_full,
            "p_raw": r.p_raw, "p_gamma": r.p_gamma,
            "p_asymptotic": r.p_asymptotic,
            "gamma_shape": r.gamma_shape, "gamma_scale": r.gamma_scale,
            "degenerate_gamma_fit": r.degenerate_gamma_fit,
            "n_sims": r.n_sims,
        } for r in reports],
    }
    return text, payload


def _cmd_select(args) -> tuple[str, dict]:
    d, label = _load_data(args)
    obj = _objective(args)
    cutoff = _parse_cutoff(args.cutoff)
    outcome = choose_functional(d, obj, args.alpha, cutoff, args.method,
                                args.sims, args.noise, args.seed,
                                args.threads, args.cutoff_sims)
    pvals = {r.subset: r for r in outcome.reports}
    e_f = full_subset(d.k)

    def member(e, group):
        return "yes" if e in group else "no"

    rows = []
    for e in subsets_of(d.k):
        r = pvals[e]
        p = {"raw": r.p_raw, "gamma": r.p_gamma,
             "asymptotic": r.p_asymptotic}[args.method]
        rows.append([str(e), _subset_label(e, d.names),
                     str(subset_size(e)), _fmt_p(p),
                     "-" if e == e_f else member(e, outcome.survivors_step1),
                     member(e, outcome.survivors_step2),
                     "yes" if e == outcome.chosen else "no"])
    cut_text = "  ".join(f"k={k} p0={outcome.cutoffs[k]:.4g}"
                         for k in sorted(outcome.cutoffs))
    text = _meta_line("select", [
        ("dataset", label), ("n", d.n), ("k", d.k),
        ("objective", obj.label()), ("method", args.method),
        ("noise", args.noise), ("sims", args.sims), ("seed", args.seed),
        ("alpha", args.alpha), ("cutoff", args.cutoff)])
    text += f"cutoffs: {cut_text}\n\n"
    text += _table(["subset", "covariates", "size", "p", "step1", "step2",
                    "chosen"], rows)
    if outcome.chosen is None:
        text += "\nchosen: none\n"
    else:
        text += (f"\nchosen: {outcome.chosen} "
                 f"{_subset_label(outcome.chosen, d.names)}\n")
    payload = {
        "command": "select", "dataset": label, "n": d.n, "k": d.k,
        "objective": obj.label(), "method": args.method,
        "noise": args.noise, "sims": args.sims, "seed": args.seed,
        "alpha": args.alpha, "cutoff": str(args.cutoff),
        "cutoffs": {str(k): v for k, v in outcome.cutoffs.items()},
        "survivors_step1": list(outcome.survivors_step1),
        "survivors_step2": list(outcome.survivors_step2),
        "chosen": outcome.chosen,
        "chosen_covariates": None if outcome.chosen is None else
            [d.names[j] for j in subset_members(outcome.chosen, d.k)],
        "pvalues": {str(r.subset): r.best() for r in outcome.reports},
    }
    return text, payload


def _cmd_calibrate(args) -> tuple[str, dict]:
    ks = sorted(set(args.k))
    if args.method == "chisq":
        alphas = args.alphas if args.alphas else list(DEFAULT_ALPHA_GRID)
        table = chisq_cutoff_table(ks, args.sims, args.seed, alphas,
                                   args.threads)
        meta = [("method", "chisq"), ("ks", ",".join(map(str, ks))),
                ("alphas", len(alphas)), ("objective", "-"),
                ("noise", "gaussian"), ("sims", args.sims),
                ("seed", args.seed)]
    else:
        if args.data is None:
            raise UsageError("--method nested needs --data (the response "
                             "supplies the calibration sample)")
        d, _label = _load_data(args)
        obj = _objective(args)
        alphas = args.alphas if args.alphas else [0.01, 0.05, 0.1]
        table = nested_cutoff_table(d.y, ks, obj, alphas, args.outer_sims,
                                    args.inner_sims, args.seed, args.threads)
        meta = [("method", "nested"), ("ks", ",".join(map(str, ks))),
                ("alphas", len(alphas)), ("objective", obj.label()),
                ("noise", "gaussian"), ("outer-sims", args.outer_sims),
                ("inner-sims", args.inner_sims), ("seed", args.seed)]
    rows = [[str(n) if n is not None else "-", str(k), f"{a:.4g}",
             f"{p0:.6g}"]
            for (n, k, a), p0 in sorted(table.entries.items(),
                                        key=lambda kv: (kv[0][0] or 0,
                                                        kv[0][1], kv[0][2]))]
    text = _meta_line("calibrate", meta)
    text += _table(["n", "k", "alpha", "p0"], rows)
    if table.fits:
        fit_rows = [[str(k), f"{c[0]:.6g}", f"{c[1]:.6g}", f"{c[2]:.6g}"]
                    for k, c in sorted(table.fits.items())]
        text += "\n" + _table(["k", "c1", "c2", "c3"], fit_rows)
    payload = table.to_json_dict()
    payload["command"] = "calibrate"
    payload["noise"] = "gaussian"
    return text, payload


def _parse_member(text: str, size: int) -> np.ndarray:
    try:
        vec = np.array([float(s) for s in text.split(",")], float)
    except ValueError:
        raise UsageError(f"--member expects comma-separated numbers, "
                         f"got {text!r}") from None
    if vec.size != size:
        raise UsageError(f"--member needs {size} values "
                         f"(intercept first), got {vec.size}")
    return vec


def _ellipsoid_report(region, names: Sequence[str], member: Optional[str],
                      meta: list, command_meta: dict) -> tuple[str, dict]:
    rows = [[name, _fmt(float(c), 6)] for name, c in zip(names, region.center)]
    text = _meta_line("nonsig", meta)
    text += _table(["coefficient", "center"], rows)
    text += f"\nradius2 {region.radius2:.6g}  method {region.method}\n"
    verdict = None
    if member is not None:
        vec = _parse_member(member, len(names))
        verdict = bool(region.contains(vec))
        text += f"member {member}: {'yes' if verdict else 'no'}\n"
    payload = dict(command_meta)
    payload.update({
        "center": region.center, "shape": region.shape,
        "radius2": region.radius2, "alpha": region.alpha,
        "method": region.method, "coefficients": list(names),
        "member": member, "member_inside": verdict,
    })
    return text, payload


def _cmd_nonsig(args) -> tuple[str, dict]:
    d, label = _load_data(args)
    obj = _objective(args)
    target = args.target
    base_meta = {
        "command": "nonsig", "dataset": label, "target": target,
        "objective": obj.label(), "alpha": args.alpha, "mode": args.mode,
        "noise": "gaussian", "sims": args.sims, "seed": args.seed,
    }
    meta = [("dataset", label), ("target", target),
            ("objective", obj.label()), ("alpha", args.alpha),
            ("mode", args.mode), ("noise", "gaussian"),
            ("sims", args.sims), ("seed", args.seed)]

    if target == "ellipsoid":
        names = ("intercept",) + d.names
        if obj.kind == "l1":
            region = nonsig_asymptotic_l1(d, args.alpha, args.f0)
        else:
            region = nonsig_m_regression(d, obj, args.alpha)
        return _ellipsoid_report(region, names, args.member, meta, base_meta)

    if target == "median":
        if args.mode == "asymptotic":
            ell = nonsig_asymptotic_l1(d.y, args.alpha, args.f0)
            half = float(np.sqrt(ell.radius2))
            interval = NonSigInterval(float(ell.center[0]) - half,
                                      float(ell.center[0]) + half,
                                      args.alpha, method=ell.method)
        else:
            interval = nonsig_median(d.y, args.alpha, args.sims, args.seed,
                                     args.discrete, args.threads)
    elif target == "mlocation":
        mode = "asymptotic" if args.mode == "asymptotic" else "simulated"
        interval = nonsig_mlocation(d.y, obj, args.alpha, mode, args.sims,
                                    args.seed, args.threads)
    elif target.startswith("l1-component:"):
        name = target.split(":", 1)[1]
        if args.mode == "asymptotic":
            raise UsageError("--mode asymptotic is not available for "
                             "l1-component; use --target ellipsoid")
        interval = nonsig_l1_component(d, name, args.alpha, args.sims,
                                       args.seed, args.fast_quantile,
                                       args.threads)
    else:
        raise UsageError(
            f"unknown target {target!r}: use median, mlocation, "
            "l1-component:<name>, or ellipsoid")

    text = _meta_line("nonsig", meta)
    text += (f"interval [{interval.lower:.4f}, {interval.upper:.4f}]  "
             f"length {interval.length:.4f}  method {interval.method}\n")
    payload = dict(base_meta)
    payload.update({
        "lower": interval.lower, "upper": interval.upper,
        "length": interval.length, "method": interval.method,
        "sims_per_quantile": interval.sims_per_quantile,
    })
    return text, payload


def _csv_text(headers: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(headers)
    writer.writerows(rows)
    return buf.getvalue()


def _cmd_cover(args) -> tuple[str, dict]:
    if args.study == "median":
        replicates = args.replicates if args.replicates else 1000
        gen = GeneratorSpec.for_family(args.family, args.n)
        results = coverage_median(gen, args.alpha, replicates, args.sims,
                                  args.seed, args.threads)
        headers = ["family", "n", "alpha", "method", "covering_frequency",
                   "mean_length", "replicates", "sims", "seed"]
        rows = [[gen.family, gen.n, args.alpha, method,
                 f"{res.covering_frequency:.4f}", f"{res.mean_length:.4f}",
                 res.replicates, args.sims, args.seed]
                for method, res in sorted(results.items())]
        payload_rows = [{"family": gen.family, "n": gen.n, "method": m,
                         "covering_frequency": r.covering_frequency,
                         "mean_length": r.mean_length,
                         "replicates": r.replicates}
                        for m, r in sorted(results.items())]
    else:
        replicates = args.replicates if args.replicates else 500
        results = coverage_regression(args.family, args.alpha, replicates,
                                      args.sims, args.seed, args.threads,
                                      args.fast_quantile, args.coefficients)
        headers = ["family", "coefficient", "alpha", "method",
                   "covering_frequency", "mean_length", "replicates",
                   "sims", "seed"]
        rows = [[args.family, name, args.alpha, res.method,
                 f"{res.covering_frequency:.4f}", f"{res.mean_length:.4f}",
                 res.replicates, args.sims, args.seed]
                for name, res in results.items()]
        payload_rows = [{"family": args.family, "coefficient": name,
                         "method": r.method,
                         "covering_frequency": r.covering_frequency,
                         "mean_length": r.mean_length,
                         "replicates": r.replicates}
                        for name, r in results.items()]
    payload = {
        "command": "cover", "study": args.study, "family": args.family,
        "alpha": args.alpha, "sims": args.sims, "seed": args.seed,
        "objective": "l1", "noise": "gaussian", "rows": payload_rows,
    }
    return _csv_text(headers, rows), payload


def _cmd_datasets(args) -> tuple[str, dict]:
    rows = []
    listing = []
    for name in sorted(builtin_names()):
        d = load_builtin(name)
        rows.append([name, str(d.n), str(d.k), ",".join(d.names)])
        listing.append({"name": name, "n": d.n, "k": d.k,
                        "covariates": list(d.names)})
    text = _table(["name", "n", "k", "covariates"], rows)
    return text, {"command": "datasets", "datasets": listing,
                  "objective": None, "noise": None, "seed": None,
                  "sims": None}


# -- parser -------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="noisesig",
                     description="Noise-substitution significance tests and "
                                 "non-significance regions for regression.")
    parser.add_argument("--version", action="version",
                        version=f"noisesig {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="stream seed (default 0)")
    common.add_argument("--threads", type=int, default=None,
                        help="cap worker count (results do not depend on it)")
    common.add_argument("--out", metavar="FILE", default=None,
                        help="write a JSON report (schema 1)")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", required=True,
                      help="built-in dataset name or CSV file path")
    data.add_argument("--response", default=None,
                      help="response column name (CSV input)")

    p = sub.add_parser("pvalues", parents=[common, data],
                       help="P-values of covariate subsets")
    p.add_argument("--objective", default="l1",
                   help="l1, l2 or huber:<c> (default l1)")
    p.add_argument("--method", default="raw",
                   choices=["raw", "gamma", "asymptotic", "all"])
    p.add_argument("--sims", type=int, default=1000)
    p.add_argument("--noise", default="gaussian", choices=list(NOISE_KINDS))
    p.add_argument("--subset", type=int, default=None,
                   help="report a single subset code")
    p.set_defaults(func=_cmd_pvalues)

    p = sub.add_parser("select", parents=[common, data],
                       help="two-step functional choice")
    p.add_argument("--objective", default="l1")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--cutoff", default="auto",
                   help="auto | chisq | <number> | <table.json>")
    p.add_argument("--cutoff-sims", type=int, default=100_000)
    p.add_argument("--method", default="gamma",
                   choices=["raw", "gamma", "asymptotic"])
    p.add_argument("--sims", type=int, default=1000)
    p.add_argument("--noise", default="gaussian", choices=list(NOISE_KINDS))
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("calibrate", parents=[common],
                       help="cut-off tables p0(n, k, alpha)")
    p.add_argument("--method", default="chisq", choices=["nested", "chisq"])
    p.add_argument("--k", type=int, nargs="+", required=True,
                   help="covariate counts to calibrate")
    p.add_argument("--alphas", type=float, nargs="+", default=None)
    p.add_argument("--sims", type=int, default=100_000,
                   help="replicates for the chi-squared approximation")
    p.add_argument("--outer-sims", type=int, default=1000)
    p.add_argument("--inner-sims", type=int, default=500)
    p.add_argument("--data", default=None,
                   help="dataset whose response calibrates --method nested")
    p.add_argument("--response", default=None)
    p.add_argument("--objective", default="l1")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("nonsig", parents=[common, data],
                       help="non-significance regions")
    p.add_argument("--target", required=True,
                   help="median | mlocation | l1-component:<name> | ellipsoid")
    p.add_argument("--alpha", type=float, default=0.95)
    p.add_argument("--sims", type=int, default=1000)
    p.add_argument("--mode", default="sim", choices=["sim", "asymptotic"])
    p.add_argument("--objective", default="l1",
                   help="criterion for mlocation/ellipsoid targets")
    p.add_argument("--fast-quantile", action="store_true",
                   help="freeze the noise quantile at the point estimate")
    p.add_argument("--discrete", action="store_true",
                   help="snap median endpoints to integers")
    p.add_argument("--f0", type=float, default=None,
                   help="residual density at zero (asymptotic L1)")
    p.add_argument("--member", default=None,
                   help="comma-separated coefficients to test for membership")
    p.set_defaults(func=_cmd_nonsig)

    p = sub.add_parser("cover", parents=[common],
                       help="covering-frequency studies (CSV output)")
    p.add_argument("--study", default="median",
                   choices=["median", "regression"])
    p.add_argument("--family", required=True,
                   help=f"median: {', '.join(MEDIAN_FAMILIES)}; "
                        f"regression: {', '.join(ERROR_FAMILIES)}")
    p.add_argument("--n", type=int, default=50,
                   help="sample size (median study)")
    p.add_argument("--alpha", type=float, default=0.95)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--sims", type=int, default=500)
    p.add_argument("--coefficients", nargs="+", default=None,
                   help="restrict the regression study to these slopes")
    p.add_argument("--fast-quantile", action="store_true")
    p.set_defaults(func=_cmd_cover)

    p = sub.add_parser("datasets", parents=[common],
                       help="list built-in datasets")
    p.set_defaults(func=_cmd_datasets)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        text, payload = args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    sys.stdout.write(text)
    if args.out:
        _write_report(args.out, payload)
    return 0
