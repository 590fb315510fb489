"""Command-line interface: ``pideeponet <command> ...``.

Exit codes: 0 success, 2 usage or configuration error, 3 data error (missing
or malformed input files, bad checkpoints), 4 numerical abort (non-finite
loss during training), 1 anything else.
"""

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import kernels
from .checkpoint import load_checkpoint, save_checkpoint
from .config import MLP_BASELINE, SweepSpec, load_config, parse_assignments
from .dataio import (
    evaluate, extract_profile, load_grid_csv, load_pairs_csv, make_mask, render_heatmap,
    save_grid_csv,
)
from .deeponet import predict_field, sample_configuration_points
from .errors import (
    CalibrationError, CheckpointError, ConfigError, DomainError, GridParseError, NonFiniteError,
    ShapeError,
)
from .oracle import DEFAULT_RHO_M, DIRICHLET, PERIODIC, default_scenario, simulate
from .physics import (
    DEEPONET, DEFAULT_VF, calibrate_greenshields, pairs_from_grids, train, write_history_csv,
)
from .pipeline import fit, new_model, prepare, split_metrics

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

# Reference calibration on the NGSIM US-101 grid: v_f, fit RMSE, fit R^2.
REFERENCE_CALIBRATION = {"v_f": 19.965, "fit_rmse": 4.154, "fit_r2": 0.721}


def _echo(msg, quiet=False):
    if not quiet:
        print(msg, flush=True)


def cmd_generate(args):
    sc = default_scenario(M=args.M, T=args.T, length=args.length, v_f=args.v_f,
                          rho_m=args.rho_m, bc=args.bc, cfl=args.cfl, seed=args.seed)
    res = simulate(sc)
    out = save_grid_csv(res.speed, args.out)
    _echo(f"wrote speed grid {out} ({sc.M}x{sc.T}, dx={sc.dx:g} m, dt={sc.dt:.6g} s, "
          f"CFL={sc.v_f * sc.dt / sc.dx:.3f})")
    if args.density_out:
        _echo(f"wrote density grid {save_grid_csv(res.density, args.density_out)}")
    if sc.bc == PERIODIC:
        n = res.vehicle_counts()
        drift = float(np.max(np.abs(n - n[0])) / n[0])
        _echo(f"conservation: vehicles {n[0]:.12g}, max relative drift {drift:.3e}")
    return EXIT_OK


def cmd_calibrate(args):
    if args.pairs:
        pairs = load_pairs_csv(args.pairs)
    elif args.speed and args.density:
        pairs = pairs_from_grids(load_grid_csv(args.speed), load_grid_csv(args.density),
                                 min_density=args.min_density)
    else:
        raise ConfigError("give --pairs FILE or both --speed and --density grids")
    fd = calibrate_greenshields(pairs)
    report = {"v_f": fd.v_f, "rho_m": fd.rho_m, "fit_rmse": fd.fit_rmse, "fit_r2": fd.fit_r2,
              "n_pairs": int(len(pairs))}
    lines = [
        f"pairs      : {len(pairs)}",
        f"v_f  (m/s) : {fd.v_f:.6f}",
        f"rho_m (veh/m): {fd.rho_m:.6f}",
        f"fit RMSE   : {fd.fit_rmse:.6f}",
        f"fit R^2    : {fd.fit_r2:.6f}",
    ]
    if args.compare_reference:
        report["reference"] = {}
        lines.append("reference comparison (informational, +/-5%):")
        for key, ref in REFERENCE_CALIBRATION.items():
            val = report[key]
            ok = abs(val - ref) <= 0.05 * abs(ref)
            report["reference"][key] = {"reference": ref, "value": val, "within_5pct": ok}
            lines.append(f"  {key:9s} {val:10.4f} vs {ref:8.3f}  {'ok' if ok else 'differs'}")
    _echo("\n".join(lines))
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=2))
    return EXIT_OK


def _run_config(args):
    overrides = parse_assignments(getattr(args, "set", None))
    for key in ("mode", "epochs", "rate", "seed", "truth", "generator"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    return load_config(getattr(args, "config", None), overrides)


def _load_truth(cfg):
    if not cfg.truth:
        raise ConfigError("no truth grid: set 'truth' in the config or pass --truth")
    return load_grid_csv(cfg.truth)


def _grid_meta(truth):
    return {"M": truth.M, "T": truth.T, "dx": truth.dx, "dt": truth.dt,
            "x0": truth.x0, "t0": truth.t0}


def cmd_train(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start_epoch, adam = 0, None
    if args.resume:
        ck = load_checkpoint(args.resume)
        base = {k: v for k, v in ck.config.items()}
        base.update(parse_assignments(args.set))
        if args.epochs is not None:
            base["epochs"] = args.epochs
        cfg = load_config(None, base)
    else:
        cfg = _run_config(args)
    (out / "config.txt").write_text(cfg.to_text())
    _echo("effective config:\n" + cfg.to_text().rstrip(), args.quiet)
    truth = _load_truth(cfg)
    every = max(1, cfg.epochs // 20)

    def progress(row):
        if row["epoch"] % every == 0:
            _echo(f"epoch {row['epoch']:5d}  L_data {row['L_data']:.6f}  "
                  f"L_phys {row['L_phys']:.6f}  L_total {row['L_total']:.6f}", args.quiet)

    if cfg.mode == MLP_BASELINE:
        res = fit(cfg, truth)
        write_history_csv(res.history, out / "history.csv")
        save_grid_csv(res.prediction, out / "prediction.csv")
        _echo(f"wrote {out / 'prediction.csv'}", args.quiet)
        return EXIT_OK

    prep = prepare(cfg, truth)
    ts = prep.training_set
    theta = sample_configuration_points(cfg.m, cfg.seed)
    if args.resume:
        model = ck.model
        start_epoch, adam = ck.epoch, ck.adam
        if not np.array_equal(ck.branch_inputs, ts.branch_inputs):
            raise CheckpointError("checkpoint inputs do not match the regenerated training set")
    else:
        model = new_model(cfg, ts, theta)
    remaining = max(0, cfg.epochs - start_epoch)
    tcfg = cfg.train_config()
    # with no physics weight the run is plain DeepONet training; say so in the header
    mode = DEEPONET if cfg.lam_p == 0 else cfg.mode
    try:
        res = train(model, ts, tcfg, epochs=remaining, start_epoch=start_epoch, adam=adam,
                    callback=progress)
    except NonFiniteError as exc:
        partial = getattr(exc, "result", None)
        if partial is not None:
            save_checkpoint(out / "checkpoint.last-good", partial.model, ts.branch_inputs,
                            mode, partial.epoch, partial.adam, cfg.as_dict(),
                            _grid_meta(truth))
        raise
    ckpt = save_checkpoint(out / "checkpoint.ckpt", model, ts.branch_inputs, mode,
                           res.epoch, res.adam, cfg.as_dict(), _grid_meta(truth),
                           {"stop_reason": res.stop_reason})
    write_history_csv(res.history, out / "history.csv", append=bool(args.resume))
    _echo(f"mode {mode}: {len(res.history)} epochs ({res.stop_reason}); wrote {ckpt}",
          args.quiet)
    return EXIT_OK


def cmd_eval(args):
    config = {}
    if args.prediction:
        pred = load_grid_csv(args.prediction)
        truth = load_grid_csv(args.truth)
    else:
        ck = load_checkpoint(args.checkpoint)
        config = ck.config
        truth = load_grid_csv(args.truth or config.get("truth", ""))
        pred = truth.like(predict_field(ck.model, ck.branch_inputs, truth.M, truth.T))
    rate = args.rate if args.rate is not None else config.get("rate", 0.1)
    seed = args.mask_seed if args.mask_seed is not None else config.get("mask_seed", 0)
    if pred.shape != truth.shape:
        raise ShapeError(f"prediction {pred.shape} and truth {truth.shape} differ")
    mask = make_mask(truth.M, truth.T, rate, seed)
    report = evaluate(pred, truth, mask, config=config)
    _echo(report.to_text())
    if args.json:
        Path(args.json).write_text(report.to_json())
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_grid_csv(pred, out / "prediction.csv")
        lo = float(min(pred.values.min(), truth.values.min()))
        hi = float(max(pred.values.max(), truth.values.max()))
        render_heatmap(pred, out / f"prediction.{args.image_format}", lo, hi, args.scale)
        render_heatmap(truth, out / f"truth.{args.image_format}", lo, hi, args.scale)
        for axis, idx in _profiles(args):
            for name, grid in (("prediction", pred), ("truth", truth)):
                extract_profile(grid, axis, idx).save_csv(out / f"{name}_{axis}{idx}.csv")
    return EXIT_OK


def _profiles(args):
    out = [("location", i) for i in args.profile_location or ()]
    return out + [("time", j) for j in args.profile_time or ()]


SWEEP_COLUMNS = (
    "param", "value", "rep", "seed", "train_mse", "test_mse", "train_rmse", "test_rmse",
    "train_mae", "test_mae", "train_mape", "test_mape", "runtime_s",
)


def run_sweep_cell(cell):
    index, value, rep, cfg, param = cell
    truth = _load_truth(cfg)
    res = fit(cfg, truth)
    row = {"param": param, "value": value, "rep": rep, "seed": cfg.seed,
           "runtime_s": res.runtime_s}
    row.update(split_metrics(res.prediction, truth, res.mask))
    return index, row


def trend_summary(rows, param):
    values, medians = [], []
    for v in dict.fromkeys(r["value"] for r in rows):
        values.append(v)
        medians.append(float(np.median([r["test_rmse"] for r in rows if r["value"] == v])))
    lines = [f"median test RMSE by {param}:"]
    lines += [f"  {v!s:>8}: {m:.4f}" for v, m in zip(values, medians)]
    if len(values) > 1 and all(isinstance(v, (int, float)) for v in values):
        diffs = np.sign(np.diff(medians))
        if np.all(diffs < 0):
            trend = "decreasing"
        elif np.all(diffs > 0):
            trend = "increasing"
        else:
            r = np.corrcoef(np.argsort(np.argsort(values)), medians)[0, 1]
            trend = f"fluctuating (rank correlation {r:+.2f})"
        lines.append(f"trend: {trend}; first->last {medians[0]:.4f} -> {medians[-1]:.4f}")
    return "\n".join(lines)


def run_sweep(spec, jobs=1):
    cells = [(i, v, r, cfg, spec.param) for i, v, r, cfg in spec.cells()]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_sweep_cell, cells))
    else:
        results = [run_sweep_cell(c) for c in cells]
    return [row for _, row in sorted(results, key=lambda x: x[0])]


def write_sweep_csv(rows, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({k: ("%.10g" % row[k] if isinstance(row[k], float) else row[k])
                        for k in SWEEP_COLUMNS})
    return Path(path)


def cmd_sweep(args):
    base = _run_config(args)
    _load_truth(base)
    spec = SweepSpec.parse(args.param, args.values, args.reps, base)
    _echo(f"sweep {spec.param} over {list(spec.values)} x {spec.reps} rep(s)")
    rows = run_sweep(spec, args.jobs)
    out = write_sweep_csv(rows, args.out)
    _echo(trend_summary(rows, spec.param))
    _echo(f"wrote {out}")
    return EXIT_OK


def cmd_render(args):
    grid = load_grid_csv(args.grid)
    img, side = render_heatmap(grid, args.out, args.vmin, args.vmax, args.scale)
    _echo(f"wrote {img} and {side}")
    for axis, idx in _profiles(args):
        p = extract_profile(grid, axis, idx).save_csv(Path(args.out).with_name(
            f"{Path(args.out).stem}_{axis}{idx}.csv"))
        _echo(f"wrote {p}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="pideeponet", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version",
                    version=f"pideeponet 0.1.0 (kernels: {kernels.BACKEND})")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate a synthetic truth field with the Godunov oracle")
    g.add_argument("--out", required=True, help="speed grid CSV to write")
    g.add_argument("--density-out", help="also write the density grid")
    g.add_argument("--M", type=int, default=21, help="cells (default 21)")
    g.add_argument("--T", type=int, default=600, help="time columns (default 600)")
    g.add_argument("--length", type=float, default=630.0, help="road length, m")
    g.add_argument("--v-f", type=float, default=DEFAULT_VF, help="free-flow speed, m/s")
    g.add_argument("--rho-m", type=float, default=DEFAULT_RHO_M, help="jam density, veh/m")
    g.add_argument("--bc", choices=(DIRICHLET, PERIODIC), default=DIRICHLET)
    g.add_argument("--cfl", type=float, default=0.9)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("calibrate", help="fit the Greenshields diagram to density/speed data")
    c.add_argument("--pairs", help="CSV of density,speed rows")
    c.add_argument("--speed", help="speed grid CSV")
    c.add_argument("--density", help="density grid CSV matching --speed")
    c.add_argument("--min-density", type=float, default=0.0)
    c.add_argument("--compare-reference", action="store_true",
                   help="print the reference US-101 calibration alongside")
    c.add_argument("--json", help="write the report as JSON")
    c.set_defaults(func=cmd_calibrate)

    def run_opts(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--truth", help="truth speed grid CSV")
        p.add_argument("--mode", help="deeponet | pi-deeponet | mlp-baseline")
        p.add_argument("--epochs", type=int)
        p.add_argument("--rate", type=float, help="observed fraction of cells")
        p.add_argument("--seed", type=int)
        p.add_argument("--generator", help="grf | chebyshev")

    t = sub.add_parser("train", help="train a model on the observed cells of a truth grid")
    run_opts(t)
    t.add_argument("--out-dir", required=True)
    t.add_argument("--resume", help="continue from this checkpoint")
    t.add_argument("-q", "--quiet", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score a checkpoint or prediction grid on held-out cells")
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--checkpoint")
    src.add_argument("--prediction", help="prediction grid CSV instead of a checkpoint")
    e.add_argument("--truth", help="truth grid (defaults to the checkpoint's)")
    e.add_argument("--rate", type=float, help="mask rate (defaults to the checkpoint's)")
    e.add_argument("--mask-seed", type=int)
    e.add_argument("--json", help="write the report as JSON")
    e.add_argument("--out-dir", help="write prediction grid, heatmaps and profiles here")
    e.add_argument("--image-format", choices=("ppm", "png"), default="ppm")
    e.add_argument("--scale", type=int, default=1)
    e.add_argument("--profile-location", type=int, action="append")
    e.add_argument("--profile-time", type=int, action="append")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="sensitivity sweep over one parameter")
    run_opts(s)
    s.add_argument("--param", required=True, help="m | N | rate | lam_p | generator")
    s.add_argument("--values", help="comma-separated values (default: the standard grid)")
    s.add_argument("--reps", type=int, default=1)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", required=True, help="results CSV")
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("render", help="heatmap image and profiles of a grid")
    r.add_argument("--grid", required=True)
    r.add_argument("--out", required=True, help=".ppm or .png")
    r.add_argument("--vmin", type=float)
    r.add_argument("--vmax", type=float)
    r.add_argument("--scale", type=int, default=1)
    r.add_argument("--profile-location", type=int, action="append")
    r.add_argument("--profile-time", type=int, action="append")
    r.set_defaults(func=cmd_render)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GridParseError, CheckpointError, ShapeError, CalibrationError, DomainError,
            FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NonFiniteError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
