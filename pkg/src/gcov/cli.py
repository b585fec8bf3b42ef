"""Command-line interface: ``gcov {estimate,test,simulate,montecarlo}``.

Exit codes: 0 success, 1 input or identification error, 2 optimizer
non-convergence (the report is still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import warnings

import numpy as np

from . import __version__
from .diagnostics import acf, residual_based_test, sur_xi, weak_wn_test
from .errors import EmptyInput, GcovError, IdentificationError, NoConvergence, ParseError
from .estimator import GcovOptions, check_order_condition, gcov_estimate
from .models import Transform, ar_arch_model, mar_model, var_model
from .simulation import (
    expand_grid,
    parse_grid_axis,
    rng_stream,
    run_monte_carlo,
    simulate_ar_arch,
    simulate_mar,
)

log = logging.getLogger("gcov")

EXIT_OK, EXIT_INPUT, EXIT_NOCONV = 0, 1, 2

PARAM_ALIASES = {"a": "a1", "alpha": "alpha1"}


# data ingestion ------------------------------------------------------------------


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_csv(path, columns=None) -> np.ndarray:
    """Read numeric columns from a CSV file into a (K, T) array.

    A header row is detected when any cell of the first row is non-numeric.
    ``columns`` selects by header name or zero-based index.  Any missing or
    non-numeric cell raises :class:`ParseError` naming its 1-based line.
    """
    with open(path, newline="") as fh:
        rows = [(i, row) for i, row in enumerate(csv.reader(fh), 1)
                if row and any(c.strip() for c in row)]
    if not rows:
        raise EmptyInput(f"{path} has no data")
    header = None
    first_line, first = rows[0]
    if not all(_is_number(c) for c in first):
        header = [c.strip() for c in first]
        rows = rows[1:]
    if not rows:
        raise EmptyInput(f"{path} has a header but no data rows")
    width = len(header) if header is not None else len(rows[0][1])
    if columns is None:
        idx = list(range(width))
    else:
        idx = []
        for c in columns:
            c = str(c).strip()
            if header is not None and c in header:
                idx.append(header.index(c))
            elif c.isdigit() and int(c) < width:
                idx.append(int(c))
            else:
                raise ParseError(f"unknown column {c!r}", line=first_line)
    data = np.empty((len(idx), len(rows)))
    for t, (line, row) in enumerate(rows):
        if len(row) < width:
            raise ParseError(f"line {line}: expected {width} fields, got {len(row)}", line=line)
        for k, j in enumerate(idx):
            cell = row[j].strip()
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(f"line {line}, column {j + 1}: non-numeric value {cell!r}",
                                 line=line, column=j + 1) from None
            if not math.isfinite(value):
                raise ParseError(f"line {line}, column {j + 1}: missing value {cell!r}",
                                 line=line, column=j + 1)
            data[k, t] = value
    return data


def write_series_csv(path, series, names=None):
    series = np.atleast_2d(series)
    names = names or (["y"] if series.shape[0] == 1 else [f"y{k + 1}" for k in range(series.shape[0])])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in series.T:
            w.writerow([repr(float(v)) for v in row])


def center(data, how: str):
    """Subtract a per-component location; returns (data, offsets or None)."""
    how = (how or "none").strip().lower()
    if how == "none":
        return data, None
    if how == "mean":
        loc = data.mean(axis=1, keepdims=True)
    elif how == "median":
        loc = np.median(data, axis=1, keepdims=True)
    else:
        try:
            value = float(how)
        except ValueError:
            raise ValueError(f"bad centering {how!r}") from None
        if not math.isfinite(value):
            raise ValueError("centering value must be finite")
        loc = np.full((data.shape[0], 1), value)
    return data - loc, loc[:, 0].tolist()


# report rendering -----------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def render_text(report: dict, indent: int = 0) -> str:
    """Plain-text view derived from the JSON report."""
    pad = "  " * indent
    lines = []
    for key, value in report.items():
        if isinstance(value, dict):
            lines.append(f"{pad}{key}:")
            lines.append(render_text(value, indent + 1))
        elif isinstance(value, list) and value and isinstance(value[0], (list, dict)):
            lines.append(f"{pad}{key}: [{len(value)} entries]")
        elif isinstance(value, float):
            lines.append(f"{pad}{key}: {value:.6g}")
        else:
            lines.append(f"{pad}{key}: {value}")
    return "\n".join(lines)


def emit(report: dict, out: str | None, fmt: str):
    report = _jsonable(report)
    text = render_text(report) if fmt == "text" else json.dumps(report, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    return report


# commands ------------------------------------------------------------------------


def _transforms(text, default):
    if not text:
        return default
    return tuple(Transform.parse(t) for t in text.split(","))


def build_model_from_args(args, K: int):
    name = args.model
    if name == "var":
        return var_model(K, args.var_order, _transforms(args.transforms, (Transform("identity"),)))
    if K != 1:
        raise GcovError(f"model {name!r} needs a single data column, got {K}")
    if name == "mar":
        tf = _transforms(args.transforms, (Transform("identity"),))
        return mar_model(args.phi_order, args.psi_order, tf)
    if name == "ar_arch":
        tf = _transforms(args.transforms, (Transform("identity"), Transform("abs")))
        return ar_arch_model(tf)
    raise GcovError(f"unknown model {name!r}")


def cmd_estimate(args) -> int:
    data = load_csv(args.data, args.columns)
    data, loc = center(data, args.center)
    model = build_model_from_args(args, data.shape[0])
    check_order_condition(model, args.H)
    opts = GcovOptions(H=args.H, multistart=args.multistart, max_iter=args.max_iter, seed=args.seed)
    code = EXIT_OK
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result = gcov_estimate(model, data, opts)
    except NoConvergence as exc:
        if exc.result is None:
            raise
        result, code = exc.result, EXIT_NOCONV
        log.warning("%s", exc)
    resid = model.evaluate(result.theta_hat.values, data)[0]
    max_lag = min(args.max_lag, resid.shape[1] - 2)
    if result.converged:
        test = residual_based_test(result).to_dict()
    else:
        df = result.K * result.K * result.H - result.jacobian_rank
        test = {"statistic": result.statistic, "df": max(df, 0), "p_value": result.p_value,
                "H": result.H, "K": result.K, "kind": "residual_based", "extra": {}}
    report = {
        "command": "estimate",
        "model": model.describe(),
        "names": list(result.theta_hat.names),
        "theta": result.theta_hat.values,
        "se_corollary1": result.se_corollary1,
        "se_hessian": result.se_hessian,
        "objective": result.objective,
        "statistic": result.statistic,
        "df": result.df,
        "p_value": result.p_value,
        "H": result.H,
        "K": result.K,
        "n_obs_used": result.n_obs_used,
        "converged": result.converged,
        "jacobian_rank": result.jacobian_rank,
        "iterations": result.iterations,
        "flags": result.flags,
        "centering": loc[0] if loc and len(loc) == 1 else None,
        "residual_test": test,
        "residual_acf": acf(resid, max_lag),
    }
    emit(report, args.out, args.format)
    return code


def cmd_test(args) -> int:
    data = load_csv(args.data, args.columns)
    data, _ = center(data, args.center)
    report = {
        "command": "test",
        "K": data.shape[0],
        "T": data.shape[1],
        "H": args.H,
        "weak_wn": weak_wn_test(data, args.H).to_dict(),
        "sur": sur_xi(data, args.H).to_dict(),
    }
    emit(report, args.out, args.format)
    return EXIT_OK


def _parse_params(items):
    params = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"bad --param {item!r}, expected name=value")
        name = PARAM_ALIASES.get(name.strip(), name.strip())
        params[name] = [float(v) for v in value.split(",")]
    return params


def cmd_simulate(args) -> int:
    params = _parse_params(args.param)
    rng = rng_stream(args.seed, 0)
    if args.model == "ar_arch":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            y = simulate_ar_arch(params.get("a1", [0.0])[0], params.get("alpha1", [0.0])[0],
                                 args.T, rng)
    elif args.model == "mar":
        y = simulate_mar(params.get("phi", [0.0]), params.get("psi", [0.0]), args.T, args.nu, rng)
    else:
        raise GcovError(f"no simulator for model {args.model!r}")
    if args.out:
        write_series_csv(args.out, y)
    else:
        w = csv.writer(sys.stdout)
        w.writerow(["y"])
        for v in y[0]:
            w.writerow([repr(float(v))])
    return EXIT_OK


MC_DEFAULT_GRIDS = {"ar_arch": ["a1=0.5", "alpha1=0.5"], "mar": ["phi=0.3", "psi=0.3"]}


def write_table_csv(path, table):
    rows = table.rows()
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def cmd_montecarlo(args) -> int:
    if args.model not in MC_DEFAULT_GRIDS:
        raise GcovError(f"no Monte Carlo design for model {args.model!r}")
    axes = []
    for spec in args.grid or MC_DEFAULT_GRIDS[args.model]:
        name, values = parse_grid_axis(spec)
        axes.append((PARAM_ALIASES.get(name, name), values))
    grid = expand_grid(axes)
    opts = GcovOptions(H=args.H, multistart=args.multistart, seed=args.seed)
    tf = _transforms(args.transforms, None)
    table = run_monte_carlo(args.model, grid, args.T, args.replications, opts, seed=args.seed,
                            nu_dof=args.nu, transforms=tf, workers=args.workers)
    if args.out:
        stem = args.out[:-4] if args.out.endswith((".csv", ".json")) else args.out
        write_table_csv(stem + ".csv", table)
        with open(stem + ".json", "w") as fh:
            json.dump(_jsonable(table.to_dict()), fh, indent=2)
    elif args.format == "csv":
        rows = table.rows()
        w = csv.DictWriter(sys.stdout, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    else:
        emit(table.to_dict(), None, args.format)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gcov", description="Generalized covariance estimation")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def model_flags(sp, default="mar"):
        sp.add_argument("--model", default=default, choices=["var", "mar", "ar_arch"])
        sp.add_argument("--phi-order", type=int, default=1)
        sp.add_argument("--psi-order", type=int, default=1)
        sp.add_argument("--var-order", type=int, default=1)
        sp.add_argument("--transforms", default=None,
                        help="comma list: identity,abs,square,cube,sign,power:L,indicator:e1/e2")

    def common(sp, fmt_choices=("json", "text")):
        sp.add_argument("--H", type=int, default=3)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None)
        sp.add_argument("--format", default="json", choices=fmt_choices)

    sp = sub.add_parser("estimate", help="GCov estimation with residual diagnostics")
    sp.add_argument("data")
    sp.add_argument("--columns", nargs="+", default=None)
    sp.add_argument("--center", default="mean", help="none, mean, median or a number")
    sp.add_argument("--multistart", type=int, default=5)
    sp.add_argument("--max-iter", type=int, default=GcovOptions.max_iter)
    sp.add_argument("--max-lag", type=int, default=20)
    model_flags(sp)
    common(sp)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("test", help="white-noise portmanteau tests")
    sp.add_argument("data")
    sp.add_argument("--columns", nargs="+", default=None)
    sp.add_argument("--center", default="none")
    common(sp)
    sp.set_defaults(func=cmd_test)

    sp = sub.add_parser("simulate", help="simulate one series to CSV")
    model_flags(sp)
    sp.add_argument("--param", action="append", help="name=v1[,v2,...], repeatable")
    sp.add_argument("--T", type=int, default=400)
    sp.add_argument("--nu", type=float, default=6.0)
    common(sp, ("csv",))
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("montecarlo", help="Monte Carlo grid of GCov estimates")
    model_flags(sp, default="ar_arch")
    sp.add_argument("--grid", action="append", help="name=start:step:stop or name=v1,v2")
    sp.add_argument("--T", type=int, default=400)
    sp.add_argument("--replications", type=int, default=100)
    sp.add_argument("--nu", type=float, default=6.0)
    sp.add_argument("--multistart", type=int, default=5)
    sp.add_argument("--workers", type=int, default=None,
                    help="worker processes (default: $GCOV_THREADS or 1)")
    common(sp, ("csv", "json", "text"))
    sp.set_defaults(func=cmd_montecarlo)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except IdentificationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (GcovError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
