"""Command-line front end.

Every subcommand prints tab-separated ``key<TAB>value`` lines on stdout and
writes its artifacts to files. Experiment options come from an optional JSON
config file; flags given on the command line override it.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, detect, features, pipeline, plotting, report, subspace, synth, tracking
from .dataset import load_dataset, load_datasets, load_model, save_dataset, save_model, write_states
from .evaluate import rmse_xy
from .errors import ConfigError, DataError, FloorPrcError, NumericalError

# flag dest -> ExperimentConfig field
_OVERRIDES = {
    "datasets": "datasets", "train": "train", "test": "test", "sensors": "sensors",
    "t_w": "t_w", "components": "n_components", "eta_target": "eta_target",
    "ridge": "ridge", "free_bias": "free_bias", "normalize": "normalize", "center": "center",
    "kalman": "kalman", "kf_q": "kf_q", "kf_r": "kf_r", "alpha": "alpha",
    "smooth_window": "smooth_window", "min_separation": "min_separation_s",
    "detect_mode": "detect_mode", "match_tolerance": "match_tolerance_s", "seed": "seed",
    "synthetic": "synthetic", "noise": "noise",
}


def _csv_list(text: str) -> list:
    return [t for t in (s.strip() for s in text.split(",")) if t]


def _int_list(text: str) -> list:
    try:
        return [int(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_detection(p):
    g = p.add_argument_group("detection")
    g.add_argument("--alpha", type=float, help="threshold as a fraction of the signal maximum")
    g.add_argument("--smooth-window", type=int, help="moving-average length in samples")
    g.add_argument("--min-separation", type=float, help="minimum time between events (s)")
    g.add_argument("--detect-mode", choices=["offline", "streaming"])


def _add_experiment(p):
    p.add_argument("--config", type=Path, help="JSON experiment config")
    g = p.add_argument_group("data")
    g.add_argument("--datasets", nargs="+", help="manifests, dataset dirs or campaign.json files")
    g.add_argument("--synthetic", action="store_const", const=True, default=None,
                   help="use the seeded synthetic campaign instead of files")
    g.add_argument("--noise", type=float, help="synthetic noise as a fraction of the median peak")
    g.add_argument("--seed", type=int)
    g.add_argument("--train", nargs="+", help="train selectors, e.g. S1:Tr1-3")
    g.add_argument("--test", nargs="*", help="test selectors, e.g. S1:Tr6 S2:*")
    g.add_argument("--sensors", type=_csv_list, help="comma-separated sensor ids")
    g.add_argument("--match-tolerance", type=float, help="label matching tolerance (s)")
    m = p.add_argument_group("model")
    m.add_argument("--t-w", type=float, help="window length (s)")
    m.add_argument("--components", type=int, help="PCA dimension D")
    m.add_argument("--eta-target", type=float, help="choose D by retained variance instead")
    m.add_argument("--ridge", type=float, help="absolute ridge parameter")
    m.add_argument("--free-bias", action="store_const", const=True, default=None)
    m.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=None,
                   help="RMS-normalize windows (default on)")
    m.add_argument("--center", action="store_const", const=True, default=None,
                   help="mean-center before PCA")
    k = p.add_argument_group("tracking")
    k.add_argument("--kalman", action="store_const", const=True, default=None)
    k.add_argument("--kf-q", type=float)
    k.add_argument("--kf-r", type=float)
    _add_detection(p)


def experiment_config(args) -> pipeline.ExperimentConfig:
    d = pipeline.ExperimentConfig.from_json(args.config).to_dict() if args.config else {}
    for dest, name in _OVERRIDES.items():
        v = getattr(args, dest, None)
        if v is not None:
            d[name] = v
    if d.get("eta_target") is not None and getattr(args, "components", None) is None:
        d["n_components"] = None
    return pipeline.ExperimentConfig.from_dict(d)


def _emit(out, **pairs):
    for k, v in pairs.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        print(f"{k}\t{v}", file=out)


def _emit_files(out, files: dict):
    for name, path in files.items():
        print(f"file\t{path}", file=out)


# ---------------------------------------------------------------- commands

def cmd_simulate(args, out):
    camp_cfg = synth.CampaignConfig()
    if args.noise is not None:
        if args.noise < 0:
            raise ConfigError("noise fraction must be nonnegative")
        camp_cfg = synth.CampaignConfig(noise_fraction=args.noise)
    subjects = set(args.subjects) if args.subjects else None
    wanted = set(f"Tr{i}" for i in args.traversals) if args.traversals else None
    known = {p.subject for p in synth.campaign_plans(camp_cfg)}
    if subjects and not subjects <= known:
        raise ConfigError(f"unknown subjects {sorted(subjects - known)}; have {sorted(known)}")
    root = Path(args.out)
    names = []
    for ds in synth.default_campaign(args.seed, camp_cfg):
        subj, trav = ds.traversals[0]
        if (subjects and subj not in subjects) or (wanted and trav not in wanted):
            continue
        name = f"{subj}_{trav}"
        save_dataset(ds, root / name, args.format)
        names.append(f"{name}/manifest.json")
        _emit(out, dataset=f"{name}\t{len(ds.labels)}\t{ds.record.duration_s:.3f}")
    if not names:
        raise ConfigError("selection matched no traversal")
    index = root / "campaign.json"
    index.write_text(json.dumps({"datasets": names, "seed": args.seed,
                                 "noise_fraction": camp_cfg.noise_fraction}, indent=2) + "\n")
    _emit(out, campaign=index)


def cmd_detect(args, out):
    cfg = detect.DetectionConfig(
        args.smooth_window if args.smooth_window is not None else 31,
        args.alpha if args.alpha is not None else 0.2,
        args.min_separation if args.min_separation is not None else 0.2,
        args.detect_mode or "offline")
    ds = load_dataset(args.manifest) if Path(args.manifest).suffix == ".json" else \
        load_datasets([args.manifest])[0]
    ev = detect.detect_record(ds.record, cfg)
    t = ds.record.time_of(ev.timestamps)
    report.write_csv(args.out, ("s_k", "t_s", "peak"), zip(ev.timestamps, t, ev.peak_values))
    _emit(out, events=len(ev), labels=len(ds.labels), file=args.out)


def cmd_featurize(args, out):
    cfg = experiment_config(args)
    table = pipeline.prepare_steps(pipeline.load_experiment_data(cfg), cfg)
    R = table.states(None, cfg.sensors, cfg.normalize)
    meta = {
        "t_w": cfg.t_w, "normalize": cfg.normalize, "vectorization": features.VEC_ORDER,
        "sensors": list(cfg.sensors or table.sensor_ids),
        "steps": [{"subject": s, "traversal": t, "k": int(k), "s_k": int(e), "x": float(x),
                   "y": float(y)}
                  for s, t, k, e, (x, y) in zip(table.subject, table.traversal, table.k,
                                                table.events, table.truth)],
    }
    write_states(args.out, R, meta)
    _emit(out, steps=R.shape[0], dim=R.shape[1], file=args.out)


def cmd_train(args, out):
    cfg = experiment_config(args)
    table = pipeline.prepare_steps(pipeline.load_experiment_data(cfg), cfg)
    pairs = pipeline.expand_selectors(cfg.train, table.traversals)
    rows = np.nonzero(table.mask(pairs))[0]
    if len(rows) == 0:
        raise DataError("no detected steps in the training selection")
    bundle = pipeline.fit_model(table, rows, cfg)
    fit = pipeline.apply_model(bundle, table, rows)
    r = rmse_xy(table.truth[rows], fit)
    save_model(bundle, args.out)
    _emit(out, steps=len(rows), n_components=bundle.pca.n_components,
          ridge=bundle.readout.ridge, train_rmse_total=r.total, train_rmse_x=r.x,
          train_rmse_y=r.y, digest=pipeline.model_digest(bundle), file=args.out)


def cmd_predict(args, out):
    bundle = load_model(args.model)
    kalman = args.kalman if args.kalman is not None else \
        bundle.pipeline_config.get("kalman", {}).get("enabled", False)
    kcfg = bundle.pipeline_config.get("kalman", {})
    kf = tracking.KfConfig(args.kf_q if args.kf_q is not None else kcfg.get("q", 0.05),
                           args.kf_r if args.kf_r is not None else kcfg.get("r", 0.25))
    rows = []
    for ds in load_datasets(args.datasets):
        ev, pos = pipeline.predict_record(bundle, ds.record)
        filt = tracking.filter_track(pos, kf) if kalman else None
        subj, trav = ds.traversals[0] if ds.labels else ("", "")
        times = ds.record.time_of(ev.timestamps)
        pairs = dict(pipeline.match_events(times, ds.labels,
                                           bundle.pipeline_config.get("match_tolerance_s", 0.1)))
        for i, (s_k, t) in enumerate(zip(ev.timestamps, times)):
            lab = ds.labels[pairs[i]] if i in pairs else None
            rows.append((subj, trav, s_k, t,
                         None if lab is None else lab.k,
                         None if lab is None else lab.x, None if lab is None else lab.y,
                         pos[i, 0], pos[i, 1],
                         None if filt is None else filt[i, 0],
                         None if filt is None else filt[i, 1]))
    report.write_csv(args.out, ("subject", "traversal", "s_k", "t_s", "k", "x", "y",
                                "x_hat", "y_hat", "x_kf", "y_kf"), rows)
    _emit(out, events=len(rows), file=args.out)


def cmd_report(args, out):
    cfg = experiment_config(args)
    rep = pipeline.run_pipeline(cfg)
    files = report.write_report(rep, args.out, figures=not args.no_figures)
    _emit_metrics(out, rep)
    _emit_files(out, files)


def cmd_pipeline(args, out):
    cfg = experiment_config(args)
    rep = pipeline.run_pipeline(cfg)
    files = report.write_run(rep, args.out, figures=not args.no_figures)
    _emit_metrics(out, rep)
    _emit_files(out, files)


def _emit_metrics(out, rep):
    m = rep.metrics
    for split, entry in m["splits"].items():
        for which in ("raw", "filtered"):
            if which in entry:
                r = entry[which]
                _emit(out, **{f"{split}_{which}_rmse": f"{r['total']:.4f}\t{r['x']:.4f}\t{r['y']:.4f}"})
    _emit(out, n_components=m["n_components"], eta=m["eta"], ridge=m["ridge"],
          unmatched_detections=m["unmatched_detections"],
          confusion_diag_x=m["confusion_diagonal"]["x"],
          confusion_diag_y=m["confusion_diagonal"]["y"])


def _numbers(values, kind) -> list:
    try:
        return [kind(v) for v in values]
    except ValueError:
        raise ConfigError(f"bad sweep values {','.join(values)}") from None


def cmd_sweep(args, out):
    cfg = experiment_config(args)
    table = pipeline.prepare_steps(pipeline.load_experiment_data(cfg), cfg)
    seed = args.sweep_seed if args.sweep_seed is not None else cfg.seed
    if args.kind == "sensors":
        rows = pipeline.sweep_sensor_count(cfg, _numbers(args.values, int), args.repeats,
                                           seed, table)
        key = "n_sensors"
    elif args.kind == "training":
        rows = pipeline.sweep_training_size(cfg, _numbers(args.values, int), args.repeats,
                                            seed, table, complement=args.complement)
        key = "size"
    else:
        rows = pipeline.sweep_ridge(cfg, _numbers(args.values, float), table)
        key = "ridge"
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    files = {"sweep.csv": report.write_sweep(d / "sweep.csv", rows)}
    if not args.no_figures:
        files["sweep.svg"] = plotting.sweep(rows, key, d / "sweep.svg")
    for r in rows:
        _emit(out, **{f"{key}={r[key]}": (f"{r['test_raw_total_mean']:.4f}\t"
                                          f"{r['test_raw_total_std']:.4f}\t{r['n_runs']}")})
    _emit_files(out, files)


def cmd_pca_report(args, out):
    cfg = experiment_config(args)
    table = pipeline.prepare_steps(pipeline.load_experiment_data(cfg), cfg)
    rows = np.nonzero(table.mask(pipeline.expand_selectors(cfg.train, table.traversals)))[0]
    if len(rows) < 2:
        raise DataError("PCA needs at least two training steps")
    model = subspace.fit_pca(table.states(rows, cfg.sensors, cfg.normalize), cfg.center)
    eta = subspace.eta_curve(model)
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    files = {"eta_curve.csv": report.write_eta(d / "eta_curve.csv", eta)}
    if not args.no_figures:
        files["eta_curve.svg"] = plotting.eta_curve(eta, d / "eta_curve.svg", cfg.n_components)
    for D in (1, 5, 10, 20, 40):
        if D <= eta.size:
            _emit(out, **{f"eta({D})": float(eta[D - 1])})
    _emit(out, r_full=model.r_full)
    _emit_files(out, files)


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="floor-prc",
                                description="Footstep localization from floor vibrations.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write a synthetic campaign")
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--subjects", type=_csv_list, help="e.g. S1,S2")
    s.add_argument("--traversals", type=_int_list, help="traversal numbers, e.g. 1,2,6")
    s.add_argument("--noise", type=float, help="noise as a fraction of the median peak")
    s.add_argument("--format", choices=["bin", "csv"], default="bin")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("detect", help="detect foot strikes in one recording")
    s.add_argument("manifest", help="dataset manifest or directory")
    s.add_argument("--out", required=True, type=Path)
    _add_detection(s)
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("featurize", help="write reservoir states of matched steps")
    _add_experiment(s)
    s.add_argument("--out", required=True, type=Path)
    s.set_defaults(func=cmd_featurize)

    s = sub.add_parser("train", help="fit PCA and the readout on the training selection")
    _add_experiment(s)
    s.add_argument("--out", required=True, type=Path)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="localize detected strikes with a trained model")
    s.add_argument("--model", required=True, type=Path)
    s.add_argument("--datasets", nargs="+", required=True)
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--kalman", action=argparse.BooleanOptionalAction, default=None)
    s.add_argument("--kf-q", type=float)
    s.add_argument("--kf-r", type=float)
    s.set_defaults(func=cmd_predict)

    for name, func, text in (("report", cmd_report, "metrics, confusion, Fisher and scatter"),
                             ("pipeline", cmd_pipeline, "full run directory")):
        s = sub.add_parser(name, help=text)
        _add_experiment(s)
        s.add_argument("--out", required=True, type=Path)
        s.add_argument("--no-figures", action="store_true")
        s.set_defaults(func=func)

    s = sub.add_parser("sweep", help="sensor-count, training-size or ridge grid sweep")
    _add_experiment(s)
    s.add_argument("--kind", choices=["sensors", "training", "ridge"], required=True)
    s.add_argument("--values", type=_csv_list, required=True,
                   help="e.g. 1,3,6,11 (counts) or 1e-6,1e-3,1 (ridge)")
    s.add_argument("--repeats", type=int, default=10)
    s.add_argument("--sweep-seed", type=int, help="subset sampling seed (default: --seed)")
    s.add_argument("--complement", action="store_true",
                   help="test on every traversal left out of the training subset")
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("pca-report", help="retained-variance curve of the training states")
    _add_experiment(s)
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_pca_report)
    return p


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if getattr(args, "repeats", 1) < 1:
            raise ConfigError("repeats must be at least 1")
        args.func(args, out)
    except FloorPrcError as exc:
        print(f"error: {exc}", file=err)
        return exc.exit_code
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=err)
        return NumericalError.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=err)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
