"""Command-line interface.

Subcommands: simulate, fit, sweep (alias: sweep-k), classify, verify-process,
tci-ratio.  Every stochastic subcommand refuses to run without --seed, and a
given (flags, config, seed) combination produces byte-identical output files;
no timestamps enter any payload.

A JSON config file may supply any flag of the chosen subcommand by its
destination name (e.g. {"method": "tirex1", "k_grid": "100:10000:30"});
explicit flags override config values, and unknown config keys are errors.

Exit codes: 0 success, 1 user error (bad flags, missing or malformed files),
2 numerical failure (rank deficiency, non-convergence).
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import load_csv, write_csv
from .errors import InvalidInputError, NumericalError, TirexError
from .estimators import METHODS, fit
from .evaluation import (
    classify_experiment,
    geometric_k_grid,
    sweep,
)
from .process_verify import (
    IndependentNormalModel,
    ProcessCheckConfig,
    covariance_check,
)
from .synthetic import (
    MixtureSpec,
    expected_abs_R,
    model_preset,
    sample,
    tci_ratios,
)


def _write_text(path, text):
    Path(path).write_text(text, encoding="utf-8")


def _dump_json(obj, path=None):
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path:
        _write_text(path, text)
    else:
        sys.stdout.write(text)


def _matrix_csv_text(m):
    return "\n".join(",".join(repr(float(v)) for v in row) for row in np.atleast_2d(m)) + "\n"


def load_config(path):
    """Read a JSON config file into a flat key -> value mapping."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise InvalidInputError(f"{path}: config must be a JSON object")
    return cfg


def _merge_config(args, parser):
    """Fill unset flags from --config; flags always win over config values."""
    if not getattr(args, "config", None):
        return args
    cfg = load_config(args.config)
    known = {a.dest for a in parser._actions} - {"help", "config"}
    for key, value in cfg.items():
        if key not in known:
            raise InvalidInputError(f"unknown config key {key!r}")
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    return args


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise InvalidInputError(f"missing required option --{name.replace('_', '-')}")


def _parse_k_grid(text, n):
    """k-grid syntax: 'lo:hi:count' (geometric), a comma list, or one int."""
    text = str(text)
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise InvalidInputError(f"bad k-grid {text!r}; expected lo:hi:count")
        lo, hi, count = (int(p) for p in parts)
        return geometric_k_grid(lo, hi, count)
    if "," in text:
        return [int(p) for p in text.split(",") if p]
    return [int(text)]


def _parse_float_list(text):
    return [float(p) for p in str(text).split(",") if p]


def _resolve_spec(args):
    """MixtureSpec and sample size from --model preset or --spec file."""
    model = getattr(args, "model", None)
    spec_path = getattr(args, "spec", None)
    if (model is None) == (spec_path is None):
        raise InvalidInputError("exactly one of --model or --spec is required")
    if model is not None:
        spec, preset_n = model_preset(model)
    else:
        try:
            with open(spec_path, "r", encoding="utf-8") as fh:
                spec = MixtureSpec.from_dict(json.load(fh))
        except FileNotFoundError:
            raise InvalidInputError(f"spec file not found: {spec_path}") from None
        except (KeyError, json.JSONDecodeError) as exc:
            raise InvalidInputError(f"{spec_path}: bad spec file ({exc})") from None
        preset_n = None
    n = getattr(args, "n", None)
    if n is None:
        n = preset_n
    if n is None:
        raise InvalidInputError("--n is required with --spec")
    return spec, int(n)


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_simulate(args):
    _require(args, "seed", "out")
    spec, n = _resolve_spec(args)
    ds = sample(spec, n, int(args.seed), stream=int(args.stream or 0))
    write_csv(ds, args.out)
    sidecar = {
        "artifact_version": __version__,
        "n": n,
        "seed": int(args.seed),
        "stream": int(args.stream or 0),
        "spec": spec.to_dict(),
    }
    _dump_json(sidecar, Path(args.out).with_suffix(".json"))
    return 0


def _cmd_fit(args):
    _require(args, "infile", "method", "out")
    ds = load_csv(args.infile, target=args.target or "y")
    f = fit(
        ds,
        args.method,
        k=None if args.k is None else int(args.k),
        d=None if args.d is None else int(args.d),
        eig_floor=None if args.eig_floor is None else float(args.eig_floor),
        ridge=float(args.ridge or 0.0),
    )
    _dump_json(f.to_json_dict(), args.out)
    if args.basis_out:
        _write_text(args.basis_out, _matrix_csv_text(f.basis_raw))
    if args.projector_out:
        _write_text(args.projector_out, _matrix_csv_text(f.projector_whitened.matrix))
    return 0


def _cmd_sweep(args):
    _require(args, "method", "d", "k_grid", "reps", "seed", "out")
    spec, n = _resolve_spec(args)
    k_grid = _parse_k_grid(args.k_grid, n)
    report = sweep(
        spec, n, args.method, int(args.d), k_grid,
        reps=int(args.reps), seed=int(args.seed), jobs=int(args.jobs or 1),
    )
    _write_text(args.out, report.to_csv_text())
    if args.json_out:
        _dump_json(report.to_json_dict(), args.json_out)
    return 0


def _cmd_classify(args):
    _require(args, "d", "seed", "out")
    if getattr(args, "infile", None):
        ds = load_csv(args.infile, target=args.target or "y")
    else:
        spec, n = _resolve_spec(args)
        ds = sample(spec, n, int(args.seed), stream=0)
    methods = [m.strip() for m in (args.methods or ",".join(METHODS)).split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise InvalidInputError(f"unknown method {m!r} in --methods")
    k_grid = None if args.k_grid is None else _parse_k_grid(args.k_grid, ds.n)
    report = classify_experiment(
        ds, methods, d=int(args.d),
        quantile_level=float(args.quantile_level or 0.98),
        folds=int(args.folds or 5),
        seed=int(args.seed),
        k_grid=k_grid,
        n_neighbors=int(args.neighbors or 5),
    )
    _write_text(args.out, report.to_csv_text())
    if args.json_out:
        _dump_json(report.to_json_dict(), args.json_out)
    return 0


def _cmd_verify_process(args):
    _require(args, "n", "k", "reps", "seed", "out")
    u_grid = _parse_float_list(args.u_grid or "0.1,0.3,0.5,0.7,1.0")
    cfg = ProcessCheckConfig(
        generator=IndependentNormalModel(p=int(args.p or 3)),
        n=int(args.n),
        k=int(args.k),
        n_reps=int(args.reps),
        u_grid=tuple(u_grid),
        order=int(args.order or 1),
        seed=int(args.seed),
    )
    report = covariance_check(cfg)
    _write_text(args.out, report.to_csv_text())
    if args.json_out:
        _dump_json(report.to_json_dict(), args.json_out)
    sys.stdout.write(
        f"process check {'PASSED' if report.passed else 'FAILED'} "
        f"({len(report.cov_entries)} covariance entries, "
        f"{len(report.mean_entries)} mean entries, gate 4*SE)\n"
    )
    return 0


def _cmd_tci_ratio(args):
    spec, _n = _resolve_spec(args)
    out = {}
    if args.expected_abs_r:
        _require(args, "seed", "y_grid")
        y_grid = _parse_float_list(args.y_grid)
        values = [
            expected_abs_R(spec, y, int(args.n_mc or 100_000), int(args.seed))
            for y in y_grid
        ]
        out["y_grid"] = y_grid
        out["expected_abs_r"] = values
    else:
        _require(args, "y", "v", "w")
        ratios = tci_ratios(
            spec, float(args.y),
            np.array(_parse_float_list(args.v)),
            np.array(_parse_float_list(args.w)),
        )
        out["y"] = float(args.y)
        out["r"] = ratios.r
        out["r_tilde"] = ratios.r_tilde
    _dump_json(out, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_common(sub):
    sub.add_argument("--config", help="JSON config file; flags override its values")


def _add_model_args(sub, with_n=True):
    sub.add_argument("--model", help="built-in model preset: A, B or C")
    sub.add_argument("--spec", help="JSON mixture-spec file (alternative to --model)")
    if with_n:
        sub.add_argument("--n", type=int, help="sample size (defaults to the preset's)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tirex",
        description="Tail inverse regression toolkit: synthetic models, "
        "subspace estimators, benchmarks and diagnostics.",
    )
    parser.add_argument("--version", action="version", version=f"tirex {__version__}")
    subs = parser.add_subparsers(dest="command", metavar="{simulate,fit,sweep,classify,verify-process,tci-ratio}")

    s = subs.add_parser("simulate", help="draw a synthetic dataset to CSV (+ JSON sidecar)")
    _add_common(s)
    _add_model_args(s)
    s.add_argument("--seed", type=int)
    s.add_argument("--stream", type=int, help="replication stream index (default 0)")
    s.add_argument("--out", help="output CSV path")
    s.set_defaults(handler=_cmd_simulate)

    s = subs.add_parser("fit", help="fit a dimension-reduction subspace on a CSV dataset")
    _add_common(s)
    s.add_argument("--in", dest="infile", help="input CSV path")
    s.add_argument("--target", help="target column name (default y)")
    s.add_argument("--method", choices=METHODS)
    s.add_argument("--k", type=int, help="number of top order statistics (tirex1/tirex2)")
    s.add_argument("--d", type=int, help="subspace dimension (default 1 for tirex1/cume)")
    s.add_argument("--eig-floor", type=float, help="rank floor for the covariance eigenvalues")
    s.add_argument("--ridge", type=float, help="add ridge*I to the covariance before whitening")
    s.add_argument("--out", help="output JSON path (method, k, d, eigenvalues)")
    s.add_argument("--basis-out", help="optional CSV of the raw-coordinate basis")
    s.add_argument("--projector-out", help="optional CSV of the whitened projector")
    s.set_defaults(handler=_cmd_fit)

    s = subs.add_parser(
        "sweep", aliases=["sweep-k"],
        help="bias^2/variance/MSE of the projector over a k grid",
    )
    _add_common(s)
    _add_model_args(s)
    s.add_argument("--method", choices=METHODS)
    s.add_argument("--d", type=int)
    s.add_argument("--k-grid", help="lo:hi:count (geometric), comma list, or single k")
    s.add_argument("--reps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--jobs", type=int, help="parallel replication workers (default 1)")
    s.add_argument("--out", help="output CSV path (k,bias_sq,variance,mse)")
    s.add_argument("--json-out", help="optional JSON report path")
    s.set_defaults(handler=_cmd_sweep)

    s = subs.add_parser("classify", help="tail-event classification benchmark")
    _add_common(s)
    _add_model_args(s)
    s.add_argument("--in", dest="infile", help="input CSV (alternative to --model/--spec)")
    s.add_argument("--target", help="target column name (default y)")
    s.add_argument("--methods", help="comma list of methods (default: all)")
    s.add_argument("--d", type=int)
    s.add_argument("--quantile-level", type=float, help="exceedance quantile (default 0.98)")
    s.add_argument("--folds", type=int, help="CV folds for choosing k (default 5)")
    s.add_argument("--k-grid", help="candidate k values (default 30 geometric in [n/100, n])")
    s.add_argument("--neighbors", type=int, help="k-NN vote size (default 5)")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output CSV path (method,am_risk,auc,chosen_k)")
    s.add_argument("--json-out", help="optional JSON report path")
    s.set_defaults(handler=_cmd_classify)

    s = subs.add_parser(
        "verify-process",
        help="Monte-Carlo check of the tail process covariance limit",
    )
    _add_common(s)
    s.add_argument("--p", type=int, help="covariate dimension of the check model (default 3)")
    s.add_argument("--n", type=int)
    s.add_argument("--k", type=int)
    s.add_argument("--reps", type=int)
    s.add_argument("--u-grid", help="comma list of u values (default 0.1,0.3,0.5,0.7,1.0)")
    s.add_argument("--order", type=int, choices=(1, 2), help="process order (default 1)")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output CSV path")
    s.add_argument("--json-out", help="optional JSON report path")
    s.set_defaults(handler=_cmd_verify_process)

    s = subs.add_parser("tci-ratio", help="analytic tail-dependence ratios / E|R| diagnostics")
    _add_common(s)
    _add_model_args(s, with_n=False)
    s.add_argument("--n", type=int, help=argparse.SUPPRESS)
    s.add_argument("--y", type=float, help="threshold for a pointwise ratio")
    s.add_argument("--v", help="comma list: light-block covariate values")
    s.add_argument("--w", help="comma list: heavy-block covariate values")
    s.add_argument("--expected-abs-r", action="store_true", default=None,
                   help="Monte-Carlo E|R| over a y grid instead of a pointwise ratio")
    s.add_argument("--y-grid", help="comma list of thresholds for --expected-abs-r")
    s.add_argument("--n-mc", type=int, help="Monte-Carlo draws (default 100000)")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="output JSON path (default: stdout)")
    s.set_defaults(handler=_cmd_tci_ratio)

    return parser, {name: sp for name, sp in subs.choices.items()}


def run(argv):
    """Entry point returning an exit code (0 ok, 1 user error, 2 numerical)."""
    parser, subparsers = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if getattr(args, "command", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        _merge_config(args, subparsers[args.command])
        return args.handler(args)
    except NumericalError as exc:
        print(f"tirex: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (InvalidInputError, TirexError) as exc:
        print(f"tirex: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"tirex: i/o error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
