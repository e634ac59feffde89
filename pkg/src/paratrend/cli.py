"""Command-line interface: ``paratrend {test,cluster,simulate,longrun,bandwidth}``.

Every command writes a JSON record (results plus the resolved configuration)
and CSV side files into ``--output-dir``. Exit codes: 0 success, 2 invalid
configuration, 3 input/output problem, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .bandwidth import DEFAULT_PILOT_B, default_bandwidth_grid, select_bandwidth
from .clustering import ClusterConfig, cluster_all
from .errors import ConfigError, InputError, ParatrendError
from .kernels import as_kernel, design_points
from .longrun import (
    DEFAULT_GRID_SIZE,
    DEFAULT_LRV_BANDWIDTH,
    DEFAULT_RHO,
    DEFAULT_TAU,
    LongRunVarianceFn,
    WindowParams,
    default_grid,
    longrun_from_residuals,
    longrun_g,
)
from .panel import PreprocessOptions, TimeSeriesPanel, load_panel, save_panel
from .parallel import resolve_workers
from .parallelism import TestConfig, estimate_trends, run_test
from .simulation import SimModel, StudySettings, acceptance_study, generate_panel, model_record, power_study

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL = 0, 2, 3, 4


# ------------------------------------------------------------------ helpers


def _fmt(x) -> str:
    return repr(float(x))


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])


def write_longrun(path: Path, g: LongRunVarianceFn) -> None:
    write_csv(path, ["u", "g"], zip(g.grid, g.values))


def read_longrun(path) -> LongRunVarianceFn:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    except ValueError:
        raise InputError(f"{path}: expected a header and two numeric columns u,g") from None
    if data.ndim != 2 or data.shape[0] < 2 or np.any(np.diff(data[:, 0]) <= 0):
        raise InputError(f"{path}: need at least two rows with increasing u")
    return LongRunVarianceFn.from_values(data[:, 0], data[:, 1], None)


def _outdir(args) -> Path:
    out = Path(args.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _load(args) -> TimeSeriesPanel:
    opts = PreprocessOptions(
        aggregate=args.aggregate, log10=args.log10, transpose=args.transpose, delimiter=args.delimiter
    )
    return load_panel(args.input, opts)


def _input_echo(args) -> dict:
    return {
        "input": str(args.input),
        "aggregate": args.aggregate,
        "log10": args.log10,
        "transpose": args.transpose,
        "delimiter": args.delimiter,
    }


def _select_members(panel: TimeSeriesPanel, members_arg: str | None) -> tuple[TimeSeriesPanel, list[int] | None]:
    if not members_arg:
        return panel, None
    names = panel.names()
    idx = []
    for tok in (t.strip() for t in members_arg.split(",") if t.strip()):
        if tok in names:
            idx.append(names.index(tok))
        else:
            try:
                i = int(tok)
            except ValueError:
                raise ConfigError(f"unknown series {tok!r}") from None
            if not 0 <= i < panel.N:
                raise ConfigError(f"series index {i} out of range")
            idx.append(i)
    if len(set(idx)) != len(idx):
        raise ConfigError("duplicate members")
    idx = sorted(idx)
    return panel.subset(idx), idx


def _test_config(args, workers: int) -> TestConfig:
    return TestConfig(
        bandwidth=None if args.auto_bandwidth else args.bandwidth,
        kernel=as_kernel(args.kernel).kind,
        alpha=args.alpha,
        tau=args.tau,
        rho=args.rho,
        n_sims=args.sims,
        seed=args.seed,
        engine=args.engine,
        surrogate_scale=args.surrogate_scale,
        lrv_bandwidth=args.lrv_bandwidth,
        lrv_center=args.center_windows,
        leakage_correction=not args.no_leakage_correction,
        demean=args.demean,
        normal_diag=args.normal_diag,
        grid_size=args.grid_size,
        pilot_b=args.pilot_b,
        bandwidth_grid=tuple(args.bandwidth_grid) if args.bandwidth_grid else None,
        band=args.band_override,
        workers=workers,
    ).validate()


def _trend_rows(panel: TimeSeriesPanel, trends):
    header = ["u", "mu_hat"] + panel.names()
    rows = [[u, m, *col] for u, m, col in zip(trends.grid, trends.mu_hat, trends.mu_i_hat.T)]
    return header, rows


# ----------------------------------------------------------------- commands


def cmd_test(args, workers: int) -> dict:
    panel, members = _select_members(_load(args), args.members)
    cfg = _test_config(args, workers)
    longrun = read_longrun(args.longrun_csv) if args.longrun_csv else None
    out = run_test(panel, cfg, longrun)
    d = _outdir(args)
    header, rows = _trend_rows(panel, out.trends)
    write_csv(d / "trends.csv", header, rows)
    write_longrun(d / "longrun.csv", out.longrun)
    write_csv(d / "null_samples.csv", ["delta_null"], ([v] for v in out.null_samples))
    rec = out.record()
    rec["members"] = members
    rec["config"] = {"command": "test", **_input_echo(args), "members": args.members, "longrun_csv": args.longrun_csv, "test": cfg.echo()}
    write_json(d / "test.json", rec)
    print(
        f"delta_hat={_fmt(out.delta_hat)} q_alpha={_fmt(out.q_alpha)} p_value={_fmt(out.p_value)} "
        f"reject={out.reject} b={_fmt(out.bandwidth)}"
    )
    if out.normal_diag is not None:
        print(f"normal diagnostic (slow asymptotics; prefer the simulated p-value): z={out.normal_diag.z:.4g}")
    return rec


def cmd_cluster(args, workers: int) -> dict:
    panel = _load(args)
    cfg = ClusterConfig(test=_test_config(args, workers), n_remove=args.n_remove, removal=args.removal)
    longrun = read_longrun(args.longrun_csv) if args.longrun_csv else None
    res = cluster_all(panel, cfg, longrun)
    d = _outdir(args)
    trends = estimate_trends(panel, cfg.test.kernel, res.bandwidth)
    header, rows = _trend_rows(panel, trends)
    write_csv(d / "trends.csv", header, rows)
    curves = [trends.mu_i_hat[list(c.members)].mean(axis=0) for c in res.clusters]
    write_csv(
        d / "cluster_trends.csv",
        ["u"] + [f"cluster_{j + 1}" for j in range(len(curves))],
        ([u, *vals] for u, vals in zip(trends.grid, np.array(curves).T if curves else [[]] * trends.grid.size)),
    )
    write_longrun(d / "longrun.csv", res.longrun)
    rec = res.record(panel.names())
    rec["history"] = res.history
    rec["config"] = {"command": "cluster", **_input_echo(args), "longrun_csv": args.longrun_csv, "cluster": cfg.echo()}
    write_json(d / "cluster.json", rec)
    for j, c in enumerate(res.clusters, 1):
        print(f"cluster {j}: size={c.size} p_value={_fmt(c.p_value)}")
    print(f"unclustered: {len(res.unclustered)}")
    return rec


def _model(args) -> SimModel:
    return SimModel(ma_truncation=args.ma_truncation, recursion=args.recursion)


def cmd_simulate(args, workers: int) -> dict:
    if args.seed is None:
        raise ConfigError("--seed is required")
    d = _outdir(args)
    model = _model(args)
    settings = StudySettings(
        alpha=args.alpha,
        g_mode=args.g_mode,
        engine=args.engine,
        kernel=as_kernel(args.kernel).kind,
        tau=args.tau,
        rho=args.rho,
        lrv_bandwidth=args.lrv_bandwidth,
        surrogate_scale=args.surrogate_scale,
    )
    echo = {
        "command": "simulate",
        "study": args.study,
        "T": args.T,
        "N": args.N,
        "b": args.b,
        "p": args.p,
        "a": args.a,
        "reps": args.reps,
        "sims": args.sims,
        "seed": args.seed,
        "model": model_record(model),
        "settings": asdict(settings),
    }
    if args.study == "generate":
        m = replace(model, p=args.p[0], a=args.a[0])
        panel = generate_panel(m, args.N[0], args.T[0], args.seed)
        save_panel(panel, d / "panel.csv")
        g = m.true_g(design_points(panel.T))
        write_csv(d / "true_longrun.csv", ["u", "g"], zip(design_points(panel.T), g))
        rec = {"N": panel.N, "T": panel.T, "config": echo}
        print(f"wrote {d / 'panel.csv'}")
    elif args.study == "acceptance":
        cells = list(itertools.product(args.T, args.N, args.b))
        table = acceptance_study(cells, args.reps, args.sims, args.alpha, args.seed, settings, model, workers)
        keys = list(table[0])
        write_csv(d / "acceptance.csv", keys, ([r[k] for k in keys] for r in table))
        rec = {"table": table, "config": echo}
        for r in table:
            print(f"T={r['T']} N={r['N']} b={r['b']}: acceptance={r['acceptance']:.3f} (MC se {r['mc_se']:.3f})")
    else:
        pairs = list(itertools.product(args.p, args.a))
        rows = power_study(
            args.T[0], args.N[0], pairs, args.b[0], args.reps, args.sims, args.alpha, args.seed, settings, model, workers
        )
        keys = list(rows[0])
        write_csv(d / "power.csv", keys, ([r[k] for k in keys] for r in rows))
        rec = {"table": rows, "config": echo}
        for r in rows:
            print(f"p={r['p']} a={r['a']}: rejection={r['rejection']:.3f} (MC se {r['mc_se']:.3f})")
    write_json(d / "simulate.json", rec)
    return rec


def cmd_longrun(args, workers: int) -> dict:
    panel = _load(args)
    params = WindowParams(args.tau, args.rho)
    grid = default_grid(args.grid_size)
    if args.errors:
        g = longrun_g(panel.values, params, grid, center=args.center_windows)
    else:
        g = longrun_from_residuals(
            panel,
            args.kernel,
            args.lrv_bandwidth,
            params,
            grid,
            center=args.center_windows,
            leakage_correction=not args.no_leakage_correction,
            demean=args.demean,
        )
    d = _outdir(args)
    write_longrun(d / "longrun.csv", g)
    rec = {
        "sigma2": g.sigma2,
        "floor_applied": g.floor_applied,
        "K_T": params.K_T(panel.T),
        "config": {
            "command": "longrun",
            **_input_echo(args),
            "kernel": as_kernel(args.kernel).kind,
            "tau": args.tau,
            "rho": args.rho,
            "grid_size": args.grid_size,
            "lrv_bandwidth": args.lrv_bandwidth,
            "errors": args.errors,
            "center_windows": args.center_windows,
            "leakage_correction": not args.no_leakage_correction,
            "demean": args.demean,
        },
    }
    write_json(d / "longrun.json", rec)
    print(f"sigma2={_fmt(g.sigma2)}")
    return rec


def cmd_bandwidth(args, workers: int) -> dict:
    panel = _load(args)
    grid = np.asarray(args.grid) if args.grid else None
    if grid is None and args.grid_size:
        grid = default_bandwidth_grid(panel.T, args.grid_size)
    sel = select_bandwidth(panel, args.kernel, grid, args.pilot_b, None, args.band_override)
    d = _outdir(args)
    write_csv(d / "gcv.csv", ["b", "gcv"], zip(sel.candidate_bandwidths, sel.scores))
    rec = {
        "chosen": sel.chosen,
        "candidates": sel.candidate_bandwidths,
        "scores": sel.scores,
        "ridge": sel.ridge,
        "band": sel.band,
        "config": {
            "command": "bandwidth",
            **_input_echo(args),
            "kernel": as_kernel(args.kernel).kind,
            "pilot_b": args.pilot_b,
            "band_override": args.band_override,
            "grid": args.grid,
            "grid_size": args.grid_size,
        },
    }
    write_json(d / "bandwidth.json", rec)
    print(f"{'b':>12}  {'GCV':>14}")
    for b, s in zip(sel.candidate_bandwidths, sel.scores):
        mark = "  <- argmin" if b == sel.chosen else ""
        print(f"{b:12.6g}  {s:14.8g}{mark}")
    return rec


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output-dir", default="paratrend-out", help="directory for JSON/CSV artifacts")
    common.add_argument("--workers", type=int, default=None, help="worker processes (default: $PARATREND_WORKERS or 1)")
    common.add_argument("--kernel", default="epanechnikov", help="epanechnikov | truncated_gaussian")

    inp = argparse.ArgumentParser(add_help=False)
    inp.add_argument("input", help="delimited file, one column per series (see --transpose)")
    inp.add_argument("--aggregate", type=int, default=None, metavar="K", help="sum blocks of K observations")
    inp.add_argument("--log10", action="store_true", help="log10-transform after aggregation")
    inp.add_argument("--transpose", action="store_true", help="rows of the file are series")
    inp.add_argument("--delimiter", default=None, help="field delimiter (default: sniffed)")

    window = argparse.ArgumentParser(add_help=False)
    window.add_argument("--tau", type=float, default=DEFAULT_TAU, help="window half-width")
    window.add_argument("--rho", type=float, default=DEFAULT_RHO, help="lag truncation factor")
    window.add_argument("--lrv-bandwidth", type=float, default=DEFAULT_LRV_BANDWIDTH, help="detrending bandwidth for residuals")
    window.add_argument("--center-windows", action="store_true", help="subtract window means before lag products")
    window.add_argument("--no-leakage-correction", action="store_true", help="skip the detrending leakage correction")
    window.add_argument("--demean", action="store_true", help="remove the cross-sectional mean before detrending")

    tst = argparse.ArgumentParser(add_help=False)
    tst.add_argument("--alpha", type=float, default=0.05)
    bw = tst.add_mutually_exclusive_group()
    bw.add_argument("--bandwidth", type=float, default=None, help="fixed trend bandwidth")
    bw.add_argument("--auto-bandwidth", action="store_true", help="choose the bandwidth by GCV (default)")
    tst.add_argument("--sims", type=int, default=2000, help="null simulations")
    tst.add_argument("--seed", type=int, required=True, help="master seed")
    tst.add_argument("--normal-diag", action="store_true", help="also report the asymptotic normal diagnostic")
    tst.add_argument("--engine", choices=("direct", "spectral"), default="direct")
    tst.add_argument("--surrogate-scale", choices=("sqrt", "literal"), default="sqrt")
    tst.add_argument("--grid-size", type=int, default=None, help="equispaced grid for the L2 integral (default: design points)")
    tst.add_argument("--pilot-b", type=float, default=DEFAULT_PILOT_B)
    tst.add_argument("--bandwidth-grid", type=_floats, default=None, help="GCV candidates, comma separated")
    tst.add_argument("--band-override", type=int, default=None)
    tst.add_argument("--longrun-csv", default=None, help="use this long-run variance (u,g) instead of estimating it")

    p = argparse.ArgumentParser(prog="paratrend", description="Tests and clustering for parallel nonparametric trends.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", parents=[common, inp, window, tst], help="test parallelism of all (or selected) series")
    t.add_argument("--members", default=None, help="comma-separated series indices or labels")

    c = sub.add_parser("cluster", parents=[common, inp, window, tst], help="find groups of parallel series")
    c.add_argument("--n-remove", type=int, default=None, help="removal batch size (default max(1, N//20))")
    c.add_argument("--removal", choices=("top", "bottom"), default="top")

    s = sub.add_parser("simulate", parents=[common, window], help="simulation model studies")
    s.add_argument("--study", choices=("acceptance", "power", "generate"), required=True)
    s.add_argument("--T", type=_ints, default=[300])
    s.add_argument("--N", type=_ints, default=[100])
    s.add_argument("--b", type=_floats, default=[0.4])
    s.add_argument("--p", type=_floats, default=[0.0])
    s.add_argument("--a", type=_floats, default=[0.0])
    s.add_argument("--reps", type=int, default=500, help="outer replicates")
    s.add_argument("--sims", type=int, default=1000, help="null simulations per replicate")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--g-mode", choices=("true", "estimated"), default="true")
    s.add_argument("--engine", choices=("direct", "spectral"), default="spectral")
    s.add_argument("--surrogate-scale", choices=("sqrt", "literal"), default="sqrt")
    s.add_argument("--ma-truncation", type=int, default=64)
    s.add_argument("--recursion", choices=("ma", "ar"), default="ma")

    lr = sub.add_parser("longrun", parents=[common, inp, window], help="estimate the long-run variance function")
    lr.add_argument("--grid-size", type=int, default=DEFAULT_GRID_SIZE)
    lr.add_argument("--errors", action="store_true", help="input holds errors; skip detrending")

    b = sub.add_parser("bandwidth", parents=[common, inp], help="GCV bandwidth selection")
    b.add_argument("--pilot-b", type=float, default=DEFAULT_PILOT_B)
    b.add_argument("--band-override", type=int, default=None)
    b.add_argument("--grid", type=_floats, default=None, help="candidate bandwidths, comma separated")
    b.add_argument("--grid-size", type=int, default=None, help="size of the default log-spaced grid")
    return p


COMMANDS = {
    "test": cmd_test,
    "cluster": cmd_cluster,
    "simulate": cmd_simulate,
    "longrun": cmd_longrun,
    "bandwidth": cmd_bandwidth,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        workers = resolve_workers(args.workers)
        COMMANDS[args.command](args, workers)
    except ParatrendError as exc:
        code = getattr(exc, "exit_code", EXIT_NUMERICAL)
        print(f"paratrend {args.command}: error: {exc}", file=sys.stderr)
        return code
    except OSError as exc:
        print(f"paratrend {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
