"""Command-line driver: each subcommand reads CSV/JSON and writes CSV/JSON.

Exit codes: 0 success, 1 analysis error, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import catastrophe as cat
from . import ews, mst, scalingdist, spectral, synthetic, trend
from .errors import CatewsError, InputError, ParseError
from .timeseries import Signal, WindowSpec, detrend, increments, ingest_csv

GLOBAL_DEFAULTS = {"output_dir": ".", "seed": 0, "window": 20, "step": 20}


# --- small I/O helpers ------------------------------------------------------

def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "" if not math.isfinite(v) else repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2) + "\n", encoding="utf-8")


def read_signal_csv(path, column: str = "x") -> Signal:
    """Numeric column of a CSV as a signal; ``t`` is taken from a ``t`` column when present."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"input not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise ParseError(f"column {column!r} not in header", line=1)
        has_t = "t" in reader.fieldnames
        ts, xs = [], []
        for row in reader:
            try:
                x = float(row[column])
                t = int(row["t"]) if has_t else len(xs)
            except (TypeError, ValueError):
                raise ParseError(f"invalid number in column {column!r}", line=reader.line_num) from None
            if not math.isfinite(x):
                raise ParseError(f"non-finite value in column {column!r}", line=reader.line_num)
            ts.append(t)
            xs.append(x)
    if len(xs) < 2:
        raise InputError(f"{path}: fewer than 2 values")
    return Signal(np.array(ts), np.array(xs), label=column)


def _floats(text: str):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from None


def _need(args, name):
    if getattr(args, name) is None:
        raise InputError(f"--{name.replace('_', '-')} is required")
    return getattr(args, name)


# --- subcommands -----------------------------------------------------------

def cmd_fit_trend(args, out: Path):
    series = ingest_csv(_need(args, "input"), args.column, args.date_column)
    rep = trend.fit_trend(series, args.side)
    write_json(out / "trend.json", rep.to_dict())
    sl = trend.side_slice(series.values, args.side)
    t = np.arange(len(series))[sl]
    tr = trend.trend_values(rep.params, t)
    x = series.values[sl] - tr
    dates = series.timestamps[sl]
    write_csv(out / "detrended.csv", ["t", "date", "x", "trend"],
              [(int(ti), str(d), xi, tri) for ti, d, xi, tri in zip(t, dates, x, tr)])


def cmd_detrend(args, out: Path):
    series = ingest_csv(_need(args, "input"), args.column, args.date_column)
    path = Path(_need(args, "trend"))
    if not path.exists():
        raise InputError(f"input not found: {path}")
    try:
        rep = trend.FitReport.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"{path}: not a trend report ({exc})") from None
    sig = detrend(series, rep.params, args.side, slack=args.slack)
    write_csv(out / "detrended.csv", ["t", "date", "x", "trend"],
              [(int(ti), str(d), xi, tri) for ti, d, xi, tri in zip(sig.t, series.timestamps, sig.x, sig.trend)])


def cmd_ews(args, out: Path):
    sig = read_signal_csv(_need(args, "input"), args.column)
    spec = WindowSpec(args.window, args.step)
    reps = ews.ews_scan(sig, spec)
    write_csv(out / "ews.csv", ews.WindowReport.CSV_COLUMNS, [r.row() for r in reps])
    pg_rows, pgs = [], []
    from .timeseries import windows
    for k, w in enumerate(windows(sig, spec)):
        pg = spectral.periodogram(w.values)
        pgs.append(pg)
        for j, om, p in zip(*pg.reported()):
            pg_rows.append((k, int(sig.t[w.center]), int(j), om, p))
    write_csv(out / "periodograms.csv", ["window", "center_t", "j", "omega", "power"], pg_rows)
    red = spectral.reddening_index(pgs) if len(pgs) >= 2 else [(0, None)]
    write_csv(out / "reddening.csv", ["window", "center_t", "ratio"],
              [(i, reps[i].center_t, r) for i, r in red])
    traj = [(r.center_t, r.x_star) for r in reps]
    if sum(r.x_star is not None for r in reps) >= 4:
        fr = ews.flicker_detect(traj)
        write_json(out / "flicker.json", {
            "threshold": fr.threshold, "upper_mean": fr.upper_mean, "lower_mean": fr.lower_mean,
            "single_branch": fr.single_branch, "alternations": fr.alternations,
            "bistable_span": fr.bistable_span,
            "windows": [{"center_t": t, "label": lab} for t, lab in zip(fr.t, fr.branch_labels)]})


def cmd_spectrum(args, out: Path):
    sig = read_signal_csv(_need(args, "input"), args.column)
    pg = spectral.periodogram(sig.x)
    write_csv(out / "periodogram.csv", ["j", "omega", "power"], zip(*pg.reported()))
    npg = spectral.noise_periodogram(increments(sig))
    write_csv(out / "noise_periodogram.csv", ["j", "omega", "power"], zip(*npg.reported()))
    summary = {"T": pg.T}
    hi = args.j_max
    for key, p in (("signal", pg), ("noise", npg)):
        try:
            summary[f"{key}_low_frequency_slope"] = scalingdist.spectrum_slope_fit(p, (2, hi))
        except CatewsError as exc:
            summary[f"{key}_low_frequency_slope"] = None
            warnings.warn(f"{key} slope: {exc}")
    summary["j_range"] = [2, hi]
    write_json(out / "spectrum.json", summary)


def cmd_gph(args, out: Path):
    sig = read_signal_csv(_need(args, "input"), args.column)
    x = increments(sig).dx if args.increments else sig.x
    est = spectral.gph_estimate(x, args.k)
    lo, hi = spectral.gph_k_range(len(x))
    write_json(out / "gph.json", {**est.to_dict(), "L": len(x), "k_range": [lo, hi]})


def cmd_catastrophe(args, out: Path):
    result = {}
    if args.roots is not None:
        roots = _floats(args.roots)
        if len(roots) != 3:
            raise InputError("--roots needs exactly three values")
        rel = cat.coeffs_from_three_roots(*roots)
        result["mode"] = "three_roots"
    elif args.x1pp is not None:
        rel, diag = cat.coeffs_from_tipping(_need(args, "x1"), args.x1pp, args.ramp_rate)
        result["mode"] = "tipping"
        result["diagnostics"] = {"D": diag.D, "sqrt_D": diag.sqrt_D, "x_ip": diag.x_ip,
                                 "x_extremum": diag.x_extremum, "x_twofold": diag.x_twofold,
                                 "jump": diag.jump, "alpha_coef": diag.alpha_coef, "beta_coef": diag.beta_coef}
    elif args.x1 is not None:
        a2, a3 = _need(args, "a2"), _need(args, "a3")
        rel = (cat.constraint_one_root(args.x1, a2, a3), a2, a3)
        result["mode"] = "one_root"
    elif args.coeffs is not None:
        rel = tuple(_floats(args.coeffs))
        if len(rel) != 3:
            raise InputError("--coeffs needs a1/a0,a2/a0,a3/a0")
        result["mode"] = "coefficients"
    else:
        raise InputError("supply --roots, --x1 with --x1pp, --x1 with --a2 and --a3, or --coeffs")
    result["a0"] = args.a0
    result["a1_over_a0"], result["a2_over_a0"], result["a3_over_a0"] = rel
    force = cat.CubicForce.from_relative(*rel, a0=args.a0)
    rs = cat.cubic_roots(force)
    result["roots"] = {"kind": rs.kind, "real": list(rs.roots), "stability": list(rs.stability),
                       "lambda": list(rs.lambdas), "discrete_stable": list(rs.discrete_stable),
                       "complex_pair": list(rs.complex_pair) if rs.complex_pair else None}
    pot = cat.potential_from_force(force)
    result["potential"] = {"A0": pot.A0, "A1": pot.A1, "A2": pot.A2, "A3": pot.A3, "A4": pot.A4}
    if args.simulate:
        x0 = args.x0 if args.x0 is not None else rs.roots[-1]
        sig = cat.langevin_simulate(force, args.sigma, x0, args.simulate, args.seed)
        write_csv(out / "trajectory.csv", ["t", "x"], zip(sig.t, sig.x))
        result["trajectory"] = "trajectory.csv"
    write_json(out / "catastrophe.json", result)


def cmd_simulate(args, out: Path):
    if args.schedule is not None:
        drift = cat.Schedule.from_csv(args.schedule, a0=args.a0)
        x0 = _need(args, "x0")
    elif args.preset == "fold":
        drift = synthetic.fold_ramp(args.T)
        x0 = 1.879 if args.x0 is None else args.x0
    elif args.preset == "double-well":
        drift = synthetic.double_well_schedule(args.T, (args.T // 6, 5 * args.T // 6))
        x0 = 2.1 if args.x0 is None else args.x0
    else:
        raise InputError("supply --schedule or --preset")
    if args.paths == 1:
        x = cat.langevin_simulate(drift, args.sigma, x0, args.T, args.seed).x[None, :]
    else:
        x = cat.simulate_ensemble(drift, args.sigma, x0, args.T, args.paths, args.seed)
    if args.paths == 1:
        write_csv(out / "trajectory.csv", ["t", "x"], zip(range(args.T), x[0]))
    else:
        write_csv(out / "trajectories.csv", ["t"] + [f"x{i}" for i in range(args.paths)],
                  ([t, *x[:, t]] for t in range(args.T)))


def cmd_mst(args, out: Path):
    panel = mst.Panel.from_csv(_need(args, "input"))
    center = None
    if args.center_static is not None:
        if args.center_static not in panel.labels:
            raise InputError(f"static center {args.center_static!r} is not a panel column")
        center = panel.labels.index(args.center_static)
    rows = mst.structure_timeline(panel, WindowSpec(args.window, args.step), center, args.algorithm)
    write_csv(out / "timeline.csv", mst.TimelineRow.CSV_COLUMNS, [r.row() for r in rows])
    width = max(3, len(str(len(rows) - 1)))
    for r in rows:
        if r.snapshot is None:
            continue
        lab = r.snapshot.labels
        write_csv(out / "edges" / f"window_{r.index:0{width}d}.csv", ["u", "v", "weight"],
                  [(lab[i], lab[j], w) for i, j, w in r.snapshot.edges])
    minima = mst.timeline_minima(rows)
    write_json(out / "mst_summary.json", {"windows": len(rows), "minima": minima,
                                          "labels": list(panel.labels)})


def cmd_scaling(args, out: Path):
    law = scalingdist.ScalingLaw(_need(args, "eta"), args.D)
    rep = scalingdist.exponent_web(law.eta)
    rep.update({"nu": law.nu, "nu_bar": law.nu_bar, "D_bar": law.D_bar, "B": law.B, "B_closed": law.B_closed,
                "paper_prefactors_valid": law.paper_prefactors_valid, "D": law.D_coef})
    if args.input is not None:
        sig = read_signal_csv(args.input, args.column)
        hf = scalingdist.histogram_fit(increments(sig), args.bins)
        rep["histogram"] = {"gauss_mu": hf.gauss_mu, "gauss_sigma": hf.gauss_sigma,
                            "tail_exponent_left": hf.tail_exponent_left, "tail_se": hf.tail_se,
                            "tail_range": hf.tail_range, "tail_is_power_law": hf.tail_is_power_law,
                            "right_model": hf.right_model, "right_rate": hf.right_rate}
        write_csv(out / "histogram.csv", ["left_edge", "right_edge", "count"],
                  zip(hf.bin_edges[:-1], hf.bin_edges[1:], hf.counts))
    write_json(out / "scaling.json", rep)


COMMANDS = {
    "fit-trend": cmd_fit_trend, "detrend": cmd_detrend, "ews": cmd_ews, "spectrum": cmd_spectrum,
    "gph": cmd_gph, "catastrophe": cmd_catastrophe, "simulate": cmd_simulate, "mst": cmd_mst,
    "scaling": cmd_scaling,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--input", help="input CSV file")
    g.add_argument("--output-dir", help="directory for outputs (default: current)")
    g.add_argument("--seed", type=int, help="random seed (default 0)")
    g.add_argument("--window", type=int, help="window width (default 20)")
    g.add_argument("--step", type=int, help="window step (default 20)")
    g.add_argument("--config", help="key = value file; command-line flags override it")

    parser = argparse.ArgumentParser(prog="catews", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_)

    p = add("fit-trend", "fit the Mittag-Leffler trend to one side of the peak")
    p.add_argument("--column", default="close")
    p.add_argument("--date-column")
    p.add_argument("--side", choices=("bull", "bear"), default="bull")

    p = add("detrend", "subtract a fitted trend")
    p.add_argument("--trend", help="trend.json from fit-trend")
    p.add_argument("--column", default="close")
    p.add_argument("--date-column")
    p.add_argument("--side", choices=("bull", "bear"), default="bull")
    p.add_argument("--slack", type=float, default=0.0, help="trading days beyond t_c still accepted")

    p = add("ews", "windowed indicators, periodograms and reddening")
    p.add_argument("--column", default="x")

    p = add("spectrum", "periodograms of a signal and of its increments")
    p.add_argument("--column", default="x")
    p.add_argument("--j-max", type=int, default=15, help="last frequency number in the slope fit")

    p = add("gph", "log-periodogram Hurst estimate")
    p.add_argument("--column", default="x")
    p.add_argument("--k", type=int)
    p.add_argument("--increments", action="store_true", help="analyse increments instead of levels")

    p = add("catastrophe", "cubic force inversions, roots and tipping diagnostics")
    p.add_argument("--roots", help="three roots x1,x1',x1''")
    p.add_argument("--x1", type=float)
    p.add_argument("--x1pp", type=float, help="twofold root")
    p.add_argument("--a2", type=float, help="a2/a0 for the one-root constraint")
    p.add_argument("--a3", type=float, help="a3/a0 for the one-root constraint")
    p.add_argument("--coeffs", help="a1/a0,a2/a0,a3/a0")
    p.add_argument("--a0", type=float, default=-1.0)
    p.add_argument("--ramp-rate", type=float, default=1.0)
    p.add_argument("--simulate", type=int, default=0, help="also simulate this many samples")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--x0", type=float)

    p = add("simulate", "Langevin simulation from a schedule or preset")
    p.add_argument("--schedule", help="CSV with t,a1_over_a0,a2_over_a0,a3_over_a0,sigma")
    p.add_argument("--preset", choices=("fold", "double-well"))
    p.add_argument("--a0", type=float, default=-1.0)
    p.add_argument("--x0", type=float)
    p.add_argument("--T", type=int, default=6000)
    p.add_argument("--sigma", type=float, help="override the schedule noise")
    p.add_argument("--paths", type=int, default=1)

    p = add("mst", "MST structure timeline of a price panel")
    p.add_argument("--algorithm", choices=("prim", "kruskal"), default="prim")
    p.add_argument("--center-static", help="column label of the static center")

    p = add("scaling", "scaling-law exponents and increment histogram")
    p.add_argument("--eta", type=float)
    p.add_argument("--D", type=float, default=1.0)
    p.add_argument("--column", default="x")
    p.add_argument("--bins", type=int, default=50)
    return parser


def read_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise InputError(f"input not found: {path}")
    conf = {}
    for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError("expected key = value", line=n)
        k, v = (s.strip() for s in line.split("=", 1))
        conf[k.replace("-", "_")] = v
    return conf


def _apply_config(parser, argv, args):
    """Re-parse with config values as defaults so explicit flags still win."""
    conf = read_config(args.config)
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in subparser._actions}
    defaults = {}
    for k, v in conf.items():
        if k not in known or k in ("config", "help"):
            raise InputError(f"unknown config key {k!r}")
        action = known[k]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[k] = v.lower() in ("1", "true", "yes", "on")
        else:
            defaults[k] = action.type(v) if action.type else v
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    old = warnings.showwarning
    warnings.showwarning = _show_warning
    try:
        if args.config:
            args = _apply_config(parser, argv, args)
        for k, v in GLOBAL_DEFAULTS.items():
            if getattr(args, k) is None:
                setattr(args, k, v)
        out = Path(args.output_dir)
        COMMANDS[args.command](args, out)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CatewsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    finally:
        warnings.showwarning = old
    return 0


if __name__ == "__main__":
    sys.exit(main())
