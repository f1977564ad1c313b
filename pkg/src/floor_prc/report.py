"""Run-directory emission: metrics, predictions, curves, confusion and Fisher tables."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import plotting
from .dataset import save_model
from .pipeline import ExperimentReport

PREDICTION_FIELDS = ("k", "subject", "traversal", "split", "x", "y",
                     "x_hat", "y_hat", "x_kf", "y_kf")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def write_predictions(path, predictions: Sequence[dict]) -> Path:
    return write_csv(path, PREDICTION_FIELDS,
                     ([p[f] for f in PREDICTION_FIELDS] for p in predictions))


def write_eta(path, eta) -> Path:
    eta = np.asarray(eta, dtype=float)
    return write_csv(path, ("D", "eta"), zip(range(1, eta.size + 1), eta))


def write_confusion(path, counts, bins) -> Path:
    """Square count table; first column and header carry the bin lower edges."""
    e = bins.edges[:-1]
    header = ["true\\pred"] + [f"{v:.6g}" for v in e]
    return write_csv(path, header,
                     ([f"{v:.6g}"] + [int(c) for c in row] for v, row in zip(e, counts)))


def write_fisher(path, fisher) -> Path:
    return write_csv(path, ("sensor", "J_x", "J_y"), fisher)


def write_report(report: ExperimentReport, out_dir, figures: bool = True) -> dict:
    """Metrics, confusion, Fisher and the scatter figure. Returns name -> path."""
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    out = {
        "metrics.json": write_json(d / "metrics.json", report.metrics),
        "confusion_x.csv": write_confusion(d / "confusion_x.csv", report.confusion_x,
                                           report.bins_x),
        "confusion_y.csv": write_confusion(d / "confusion_y.csv", report.confusion_y,
                                           report.bins_y),
        "fisher.csv": write_fisher(d / "fisher.csv", report.fisher),
    }
    if figures:
        test = [p for p in report.predictions if p["split"] == "test"] or report.predictions
        truth = [(p["x"], p["y"]) for p in test]
        est = [(p["x_hat"], p["y_hat"]) for p in test]
        filt = None
        if all(p["x_kf"] is not None for p in test):
            filt = [(p["x_kf"], p["y_kf"]) for p in test]
        out["scatter.svg"] = plotting.scatter_xy(truth, est, d / "scatter.svg", filt)
        out["confusion_x.svg"] = plotting.confusion(report.confusion_x, report.bins_x.edges,
                                                    d / "confusion_x.svg", "x")
        out["confusion_y.svg"] = plotting.confusion(report.confusion_y, report.bins_y.edges,
                                                    d / "confusion_y.svg", "y")
    return out


def write_run(report: ExperimentReport, out_dir, figures: bool = True) -> dict:
    """Full run directory: report files plus config, predictions, eta curve and model."""
    d = Path(out_dir)
    out = write_report(report, d, figures)
    out["config.json"] = write_json(d / "config.json", report.config)
    out["predictions.csv"] = write_predictions(d / "predictions.csv", report.predictions)
    out["eta_curve.csv"] = write_eta(d / "eta_curve.csv", report.eta)
    model_path = d / "model.json"
    save_model(report.model, model_path)
    out["model.json"] = model_path
    if figures:
        out["eta_curve.svg"] = plotting.eta_curve(report.eta, d / "eta_curve.svg",
                                                  report.metrics["n_components"])
    return out


def write_sweep(path, rows: Sequence[dict]) -> Path:
    keys = list(dict.fromkeys(k for r in rows for k in r))
    return write_csv(path, keys, ([r.get(k) for k in keys] for r in rows))
