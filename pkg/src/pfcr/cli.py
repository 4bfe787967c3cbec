"""Command-line front door.

Subcommands: fit, select-dim, predict, compare, simulate, diagnose.
Exit codes: 0 success, 2 usage/input problem, 3 numerical failure (the
offending matrix is named in the message). Set PFCR_LOG=DEBUG|INFO|... for
logging verbosity. All outputs are plain CSV or JSON; nothing is plotted.
"""

import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import studylab
from .baselines import ols_coeffs, pls_coeffs, projected_ols
from .errors import PfcrError, InvalidInputError, SingularMatrixError
from .estimation import (
    GrassmannOptions,
    fit_extended_from_moments,
    lrt_from_fit,
    select_dimension,
)
from .model_core import BasisSpec, Dataset, build_basis, moments
from .model_io import load_model, save_model
from .prediction import build_predictor, forward_mean
from .studylab import (
    BiasVarianceConfig,
    ForwardSim,
    InverseSim,
    bias_variance_experiment,
    hetero_diag,
    method_comparison,
    simulate_forward,
    simulate_inverse,
    write_report_csv,
)

log = logging.getLogger("pfcr")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def parse_basis(text):
    """'poly:3' or 'slices:8' -> BasisSpec."""
    try:
        kind, _, num = text.partition(":")
        if kind in ("poly", "polynomial"):
            return BasisSpec.polynomial(int(num))
        if kind == "slices":
            return BasisSpec.sliced(int(num))
    except ValueError:
        pass
    raise InvalidInputError(f"bad --basis {text!r}, expected poly:<degree> or slices:<h>")


def parse_screen(text):
    """'top:k' or 'thr:t' -> screening rule tuple."""
    kind, _, num = text.partition(":")
    try:
        if kind == "top":
            return ("top", int(num))
        if kind == "thr":
            return ("threshold", float(num))
    except ValueError:
        pass
    raise InvalidInputError(f"bad --screen {text!r}, expected top:<k> or thr:<t>")


def read_dataset(path, response=None):
    """Load a headered CSV into a Dataset; response defaults to the last column."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}")
    if not rows:
        raise InvalidInputError(f"{path}: no rows")
    header, body = rows[0], rows[1:]
    if not body:
        raise InvalidInputError(f"{path}: no data rows")
    if response is None:
        y_idx = len(header) - 1
    elif response in header:
        y_idx = header.index(response)
    else:
        try:
            y_idx = int(response)
        except ValueError:
            raise InvalidInputError(f"response column {response!r} not in header {header}")
        if not 0 <= y_idx < len(header):
            raise InvalidInputError(f"response index {y_idx} out of range")
    try:
        M = np.array([[float(v) for v in row] for row in body])
    except ValueError as exc:
        raise InvalidInputError(f"{path}: non-numeric cell ({exc})")
    if M.shape[1] != len(header):
        raise InvalidInputError(f"{path}: ragged rows")
    x_idx = [j for j in range(len(header)) if j != y_idx]
    return Dataset(X=M[:, x_idx], y=M[:, y_idx]), [header[j] for j in x_idx]


def write_csv(path, header, rows):
    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])

    if path in (None, "-"):
        _write(sys.stdout)
    else:
        with open(path, "w", newline="") as fh:
            _write(fh)


def _opts(args):
    return GrassmannOptions(seed=args.seed)


def cmd_fit(args):
    data, _ = read_dataset(args.input, args.response)
    spec = parse_basis(args.basis)
    opts = _opts(args)
    basis = build_basis(data.y, spec)
    m = moments(data, basis)
    if args.d is not None:
        d = args.d
        trail = []
        if d < data.p:
            trail = [lrt_from_fit(fit_extended_from_moments(m, spec, d, opts), m)]
    else:
        d, trail = select_dimension(data, spec, args.alpha, opts)
    fit = fit_extended_from_moments(m, spec, d, opts)
    save_model(args.out, fit, basis=basis, train_y=data.y, seed=args.seed)
    print(f"fitted {fit.kind} model: d = {fit.d}, log-likelihood = {fit.loglik:.4f}")
    print(f"{'d':>4} {'Lambda':>12} {'df':>6} {'p-value':>10}")
    for t in trail:
        print(f"{t.d:>4} {t.Lambda:>12.4f} {t.df:>6} {t.pvalue:>10.4f}")
    print(f"model written to {args.out}")
    return EXIT_OK


def cmd_select_dim(args):
    data, _ = read_dataset(args.input, args.response)
    spec = parse_basis(args.basis)
    d, trail = select_dimension(data, spec, args.alpha, _opts(args))
    write_csv(args.out, ["d", "lambda", "df", "pvalue"],
              [[t.d, float(t.Lambda), t.df, float(t.pvalue)] for t in trail])
    print(f"selected d = {d}", file=sys.stderr)
    return EXIT_OK


def cmd_predict(args):
    fit, basis, train_y, _ = load_model(args.model)
    if basis is None or train_y is None:
        raise InvalidInputError("model file lacks training data; refit with `pfcr fit`")
    pred = build_predictor(fit, basis, train_y)
    with open(args.input, newline="") as fh:
        header = next(csv.reader(fh))
    has_response = args.response in header if args.response else len(header) == fit.p + 1
    if has_response:
        data, _ = read_dataset(args.input, args.response)
        X, y = data.X, data.y
    else:
        rows = list(csv.reader(open(args.input, newline="")))
        X = np.array([[float(v) for v in row] for row in rows[1:]])
        y = None
    if X.shape[1] != fit.p:
        raise InvalidInputError(f"query has {X.shape[1]} predictors, model expects {fit.p}")
    reduced = (X - fit.mu) @ fit.Gamma
    header_out = ["row", "yhat"]
    if y is not None:
        header_out.append("residual")
    header_out += [f"reduced_{k + 1}" for k in range(fit.d)]
    out_rows = []
    for i in range(X.shape[0]):
        yhat = forward_mean(pred, X[i])
        row = [i, yhat]
        if y is not None:
            row.append(float(y[i] - yhat))
        row += [float(v) for v in reduced[i]]
        out_rows.append(row)
    write_csv(args.out, header_out, out_rows)
    return EXIT_OK


def cmd_compare(args):
    if args.experiment == "bias_variance":
        cfg = BiasVarianceConfig(
            p=args.p, r=args.r,
            n_grid=tuple(int(v) for v in args.n_grid.split(",")),
            d_fit_grid=tuple(int(v) for v in args.d_grid.split(",")),
            replications=args.reps, seed=args.seed,
        )
        rows = bias_variance_experiment(cfg, threads=args.threads)
    else:
        data, _ = read_dataset(args.input, args.response)
        spec = parse_basis(args.basis)
        methods = [m.strip().upper() for m in args.methods.split(",")]
        rule = parse_screen(args.screen) if args.screen else None
        rows = method_comparison(
            data, methods, spec=spec, d=args.d or 1, q=args.q, rule=rule,
            seed=args.seed,
        )
    out = args.out
    if out in (None, "-"):
        write_report_csv(rows, sys.stdout)
    else:
        write_report_csv(rows, out)
    return EXIT_OK


def _forward_preset(name, seed):
    if name == "threevar":
        lam = np.diag([4.0, 2.0, 1.0])
        beta = np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)
        return ForwardSim(beta=beta, Sigma=lam, sigma_eps2=1.0)
    if name == "random":
        rng = np.random.default_rng(seed)
        p = 4
        Q = np.linalg.qr(rng.standard_normal((p, p)))[0]
        lam = np.sort(rng.uniform(0.5, 5.0, p))[::-1]
        lam += np.linspace(0.2, 0.0, p)  # enforce strict descent
        beta = rng.standard_normal(p)
        beta /= np.linalg.norm(beta)
        return ForwardSim(beta=beta, Sigma=Q * lam @ Q.T, sigma_eps2=1.0)
    raise InvalidInputError(f"unknown forward preset {name!r}")


def _inverse_preset(name, seed):
    if name == "lowdim":
        p, d, r = 6, 2, 3
        rng = np.random.default_rng(seed + 1)
        Gamma = np.linalg.qr(rng.standard_normal((p, d)))[0]
        beta_mat = 2.0 * rng.standard_normal((d, r))
        Omega2 = np.diag([1.0, 0.5])
        Omega0_2 = np.diag([4.0, 2.0, 1.0, 0.25])
        return InverseSim(mu=np.zeros(p), Gamma=Gamma, beta_mat=beta_mat,
                          Omega2=Omega2, Omega0_2=Omega0_2,
                          spec=BasisSpec.polynomial(r))
    raise InvalidInputError(f"unknown inverse preset {name!r}")


def cmd_simulate(args):
    if args.kind == "forward":
        sim = _forward_preset(args.preset or "threevar", args.seed)
        data = simulate_forward(sim, args.n, args.seed)
        log.info("forward sim rho1^2 = %.4f", studylab.rho1_squared(sim))
    else:
        sim = _inverse_preset(args.preset or "lowdim", args.seed)
        data = simulate_inverse(sim, args.n, args.seed)
    header = [f"x{j + 1}" for j in range(data.p)] + ["y"]
    rows = [[float(v) for v in data.X[i]] + [float(data.y[i])] for i in range(data.n)]
    write_csv(args.out, header, rows)
    return EXIT_OK


def cmd_diagnose(args):
    data, names = read_dataset(args.input, args.response)
    rows = hetero_diag(data, alpha=args.alpha)
    write_csv(args.out,
              ["predictor", "name", "slope", "slope_t", "score_stat",
               "score_pvalue", "flagged"],
              [[r.predictor, names[r.predictor], float(r.slope), float(r.slope_t),
                float(r.score_stat), float(r.score_pvalue), int(r.flagged)]
               for r in rows])
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pfcr",
        description="Likelihood-based sufficient dimension reduction for regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp, need_input=True):
        if need_input:
            sp.add_argument("--input", required=True, help="input CSV (header row required)")
            sp.add_argument("--response", default=None,
                            help="response column name or index (default: last column)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        sp.add_argument("--out", default=None, help="output path (default: stdout)")

    sp = sub.add_parser("fit", help="fit the structured inverse model")
    add_common(sp)
    sp.add_argument("--basis", default="poly:3")
    group = sp.add_mutually_exclusive_group()
    group.add_argument("--d", type=int, default=None)
    group.add_argument("--alpha", type=float, default=None)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("select-dim", help="sequential likelihood-ratio dimension tests")
    add_common(sp)
    sp.add_argument("--basis", default="poly:3")
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.set_defaults(func=cmd_select_dim)

    sp = sub.add_parser("predict", help="forward-mean prediction from a model file")
    add_common(sp)
    sp.add_argument("--model", required=True)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("compare", help="compare methods or run the bias-variance experiment")
    add_common(sp, need_input=False)
    sp.add_argument("--input", default=None, help="input CSV (required unless --experiment bias_variance)")
    sp.add_argument("--response", default=None)
    sp.add_argument("--basis", default="poly:3")
    sp.add_argument("--methods", default="pc,extended")
    sp.add_argument("--d", type=int, default=None)
    sp.add_argument("--q", type=int, default=None)
    sp.add_argument("--screen", default=None, help="top:<k> or thr:<t>")
    sp.add_argument("--experiment", choices=["methods", "bias_variance"], default="methods")
    sp.add_argument("--p", type=int, default=4)
    sp.add_argument("--r", type=int, default=1)
    sp.add_argument("--n-grid", default="100")
    sp.add_argument("--d-grid", default="1,4")
    sp.add_argument("--reps", type=int, default=50)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("simulate", help="generate data from a forward or inverse model")
    sp.add_argument("kind", choices=["forward", "inverse"])
    add_common(sp, need_input=False)
    sp.add_argument("--preset", default=None)
    sp.add_argument("--n", type=int, default=1000)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("diagnose", help="per-predictor heteroscedasticity diagnostic")
    add_common(sp)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None):
    logging.basicConfig(level=os.environ.get("PFCR_LOG", "WARNING").upper())
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    # compare in 'methods' mode needs an input file; bias_variance does not
    if args.command == "compare" and args.experiment == "methods" and args.input is None:
        parser.error("compare --experiment methods requires --input")
    if args.command == "fit" and args.d is None and args.alpha is None:
        args.alpha = 0.05
    try:
        return args.func(args)
    except SingularMatrixError as exc:
        log.error("numerical failure: %s", exc)
        print(f"pfcr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PfcrError as exc:
        log.error("input error: %s", exc)
        print(f"pfcr: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
