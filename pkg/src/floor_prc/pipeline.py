"""End-to-end experiments: detect, featurize, fit PCA and readout on training traversals, evaluate.

Traversals are selected with strings such as ``"S1:Tr1-3"`` (a range),
``"S1:Tr6"`` or ``"S2:*"`` (every traversal of a subject). PCA and the readout
only ever see the training selection.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import re
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np

from . import detect, evaluate, features, readout, subspace, tracking
from . import synth
from .dataset import LabeledDataset, ModelBundle, load_datasets
from .errors import ConfigError, DataError


@dataclass
class ExperimentConfig:
    datasets: list = field(default_factory=list)
    train: list = field(default_factory=lambda: ["S1:Tr1-3"])
    test: list = field(default_factory=lambda: ["S1:Tr6"])
    sensors: Optional[list] = None
    t_w: float = 0.12
    n_components: Optional[int] = 40
    eta_target: Optional[float] = None
    ridge: Optional[float] = None
    free_bias: bool = False
    normalize: bool = True
    center: bool = False
    kalman: bool = False
    kf_q: float = 0.05
    kf_r: float = 0.25
    alpha: float = 0.2
    smooth_window: int = 31
    min_separation_s: float = 0.2
    detect_mode: str = "offline"
    match_tolerance_s: float = 0.1
    seed: int = 42
    synthetic: bool = False
    noise: Optional[float] = None

    def __post_init__(self):
        self.train = list(self.train)
        self.test = list(self.test)
        if self.n_components is None and self.eta_target is None:
            raise ConfigError("set either n_components or eta_target")
        if self.n_components is not None and self.n_components < 1:
            raise ConfigError("n_components must be at least 1")
        if self.ridge is not None and self.ridge < 0:
            raise ConfigError("ridge must be nonnegative")
        if self.t_w <= 0:
            raise ConfigError("window length must be positive")
        if not self.match_tolerance_s > 0:
            raise ConfigError("match tolerance must be positive")
        if self.noise is not None and not self.noise >= 0:
            raise ConfigError("noise fraction must be nonnegative")
        self.detection_config()
        self.kf_config()

    def detection_config(self) -> detect.DetectionConfig:
        return detect.DetectionConfig(self.smooth_window, self.alpha, self.min_separation_s,
                                      self.detect_mode)

    def kf_config(self) -> tracking.KfConfig:
        return tracking.KfConfig(self.kf_q, self.kf_r)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc


_RANGE = re.compile(r"^(?P<prefix>\D*)(?P<a>\d+)-(?:(?P=prefix))?(?P<b>\d+)$")


def load_experiment_data(cfg: ExperimentConfig) -> list:
    """Datasets named by ``cfg``: the seeded synthetic campaign or manifest files."""
    if cfg.synthetic:
        camp = synth.CampaignConfig()
        if cfg.noise is not None:
            camp = replace(camp, noise_fraction=cfg.noise)
        return synth.default_campaign(cfg.seed, camp)
    if not cfg.datasets:
        raise ConfigError("no datasets configured (give manifests or use the synthetic campaign)")
    return load_datasets(cfg.datasets)


def parse_selector(text: str) -> tuple:
    """``"S1:Tr1-3"`` -> ``("S1", ["Tr1", "Tr2", "Tr3"])``; ``"S1"`` or ``"S1:*"`` -> ``("S1", None)``."""
    subject, _, trav = text.strip().partition(":")
    if not subject:
        raise ConfigError(f"bad selector {text!r}")
    if trav in ("", "*"):
        return subject, None
    out = []
    for part in trav.split(","):
        m = _RANGE.match(part)
        if m:
            a, b = int(m["a"]), int(m["b"])
            if b < a:
                raise ConfigError(f"empty traversal range in {text!r}")
            out.extend(f"{m['prefix']}{i}" for i in range(a, b + 1))
        else:
            out.append(part)
    return subject, out


def expand_selectors(selectors: Sequence[str], available: Sequence[tuple]) -> list:
    """Resolve selector strings to (subject, traversal) pairs present in ``available``."""
    out = []
    for sel in selectors:
        subject, travs = parse_selector(sel)
        if travs is None:
            hits = [p for p in available if p[0] == subject]
            if not hits:
                raise ConfigError(f"selector {sel!r} matches no traversal")
        else:
            hits = [(subject, t) for t in travs]
            missing = [h for h in hits if h not in available]
            if missing:
                raise ConfigError(f"selector {sel!r}: no data for {missing}")
        out.extend(h for h in hits if h not in out)
    return out


@dataclass(frozen=True)
class StepTable:
    """Detected and label-matched steps of a set of recordings.

    ``windows`` holds the full-sensor waveform window of each step
    (``N x l x N_s``); ``events`` is the matching sample index in its record.
    """

    sensor_ids: tuple
    windows: np.ndarray
    truth: np.ndarray
    subject: np.ndarray
    traversal: np.ndarray
    k: np.ndarray
    events: np.ndarray
    unmatched: dict

    def __len__(self):
        return len(self.k)

    @property
    def traversals(self) -> list:
        seen = []
        for p in zip(self.subject.tolist(), self.traversal.tolist()):
            if p not in seen:
                seen.append(p)
        return seen

    def mask(self, pairs: Sequence[tuple]) -> np.ndarray:
        wanted = set(pairs)
        return np.array([p in wanted for p in zip(self.subject, self.traversal)], dtype=bool)

    def states(self, rows=None, sensors: Optional[Sequence[str]] = None,
               normalize: bool = True) -> np.ndarray:
        """Reservoir states (column-major window stacking) for selected rows and sensors."""
        w = self.windows if rows is None else self.windows[rows]
        if sensors is not None:
            w = w[:, :, self.sensor_index(sensors)]
        R = w.transpose(0, 2, 1).reshape(len(w), -1)
        return features.normalize_rows(R) if normalize else R

    def sensor_index(self, sensors: Sequence[str]) -> list:
        lookup = {s: i for i, s in enumerate(self.sensor_ids)}
        missing = [s for s in sensors if s not in lookup]
        if missing:
            raise ConfigError(f"sensors {missing} not in layout")
        return [lookup[s] for s in sensors]

    def scaled(self, factor: float, rows=None) -> "StepTable":
        w = self.windows.copy()
        if rows is None:
            w *= factor
        else:
            w[rows] *= factor
        return StepTable(self.sensor_ids, w, self.truth, self.subject, self.traversal, self.k,
                         self.events, self.unmatched)


def match_events(event_times, labels, tolerance_s: float) -> list:
    """Pair each label with the nearest detection within ``tolerance_s`` (one-to-one).

    Returns ``(event_position, label_position)`` pairs; a label claimed by
    several detections keeps the closest one.
    """
    if len(labels) == 0 or len(event_times) == 0:
        return []
    lt = np.array([lab.timestamp_s for lab in labels])
    best = {}
    for i, t in enumerate(event_times):
        j = int(np.argmin(np.abs(lt - t)))
        gap = abs(lt[j] - t)
        if gap <= tolerance_s and (j not in best or gap < best[j][1]):
            best[j] = (i, gap)
    return sorted((i, j) for j, (i, _) in best.items())


def prepare_steps(datasets: Sequence[LabeledDataset], cfg: ExperimentConfig) -> StepTable:
    dcfg = cfg.detection_config()
    sensor_ids = None
    windows, truth, subj, trav, ks, evs = [], [], [], [], [], []
    unmatched = {}
    for ds in datasets:
        rec = ds.record
        if sensor_ids is None:
            sensor_ids = rec.layout.ids
        elif rec.layout.ids != sensor_ids:
            raise DataError("all recordings in one experiment must share a sensor layout")
        wcfg = features.WindowConfig.for_record(rec, cfg.t_w)
        ev = detect.detect_record(rec, dcfg)
        pairs = match_events(rec.time_of(ev.timestamps), ds.labels, cfg.match_tolerance_s)
        for i, j in pairs:
            lab = ds.labels[j]
            windows.append(features.extract_window(rec, ev.timestamps[i], wcfg, step=lab.key))
            truth.append(lab.position)
            subj.append(lab.subject)
            trav.append(lab.traversal)
            ks.append(lab.k)
            evs.append(int(ev.timestamps[i]))
        for pair in ds.traversals:
            unmatched.setdefault(pair, 0)
        key = ds.traversals[0] if ds.labels else ("", "")
        unmatched[key] = unmatched.get(key, 0) + len(ev) - len(pairs)
    if sensor_ids is None:
        raise DataError("no datasets given")
    l = features.WindowConfig(cfg.t_w, datasets[0].record.sample_rate_hz, len(sensor_ids)).length
    return StepTable(tuple(sensor_ids),
                     np.array(windows, dtype=float).reshape(-1, l, len(sensor_ids)),
                     np.array(truth, dtype=float).reshape(-1, 2), np.array(subj, dtype=object),
                     np.array(trav, dtype=object), np.array(ks, dtype=int),
                     np.array(evs, dtype=int), unmatched)


@dataclass
class ExperimentReport:
    config: dict
    metrics: dict
    predictions: list
    eta: np.ndarray
    confusion_x: np.ndarray
    confusion_y: np.ndarray
    bins_x: evaluate.BinSpec
    bins_y: evaluate.BinSpec
    fisher: list
    model: ModelBundle


def _kalman_by_traversal(table: StepTable, rows: np.ndarray, pred: np.ndarray,
                         kf_cfg: tracking.KfConfig) -> np.ndarray:
    out = np.empty_like(pred)
    pairs = list(zip(table.subject[rows], table.traversal[rows]))
    for pair in dict.fromkeys(pairs):
        sel = np.array([p == pair for p in pairs])
        order = np.argsort(table.k[rows][sel], kind="stable")
        idx = np.nonzero(sel)[0][order]
        out[idx] = tracking.filter_track(pred[idx], kf_cfg)
    return out


def fit_model(table: StepTable, train_rows: np.ndarray, cfg: ExperimentConfig) -> ModelBundle:
    """PCA + ridge readout trained on ``train_rows`` of ``table`` only."""
    R = table.states(train_rows, cfg.sensors, cfg.normalize)
    pca = subspace.fit_pca(R, centering=cfg.center)
    if cfg.eta_target is not None:
        D = subspace.choose_dimension(pca, cfg.eta_target)
    else:
        D = min(cfg.n_components, pca.r_full)
    Z = readout.augment(subspace.project(pca, R, D))
    ro = readout.train_ridge(Z, table.truth[train_rows], cfg.ridge, cfg.free_bias)
    snapshot = {
        "t_w": cfg.t_w,
        "n_components": D,
        "eta_target": cfg.eta_target,
        "ridge": ro.ridge,
        "free_bias": cfg.free_bias,
        "normalize": cfg.normalize,
        "center": cfg.center,
        "vectorization": features.VEC_ORDER,
        "sensors": list(cfg.sensors) if cfg.sensors is not None else list(table.sensor_ids),
        "detection": asdict(cfg.detection_config()),
        "match_tolerance_s": cfg.match_tolerance_s,
        "kalman": {"enabled": cfg.kalman, "q": cfg.kf_q, "r": cfg.kf_r},
    }
    return ModelBundle(pca.truncate(D), ro, snapshot)


def apply_model(bundle: ModelBundle, table: StepTable, rows=None) -> np.ndarray:
    """Readout predictions (``N x 2``) for the selected rows of ``table``."""
    c = bundle.pipeline_config
    R = table.states(rows, c.get("sensors"), c.get("normalize", True))
    return readout.predict(bundle.readout, subspace.project(bundle.pca, R))


def predict_record(bundle: ModelBundle, record) -> tuple:
    """Detect events in an unlabelled record and localize them with ``bundle``.

    Returns ``(events, positions)``. Events lacking a full window of history
    are skipped.
    """
    c = bundle.pipeline_config
    dcfg = detect.DetectionConfig(**c["detection"]) if "detection" in c else detect.DetectionConfig()
    events = detect.detect_record(record, dcfg)
    t_w = c.get("t_w", 0.12)
    sensors = c.get("sensors") or list(record.layout.ids)
    idx = record.layout.index(sensors)
    l = features.WindowConfig.for_record(record, t_w).length
    keep = events.timestamps >= l - 1
    events = detect.EventList(events.timestamps[keep], events.peak_values[keep])
    if len(events.timestamps) == 0:
        return events, np.empty((0, 2))
    R = features.state_matrix(record, events.timestamps, t_w, c.get("normalize", True), idx)
    if R.shape[1] != bundle.pca.d:
        raise DataError(f"state dimension {R.shape[1]} does not match model ({bundle.pca.d})")
    return events, readout.predict(bundle.readout, subspace.project(bundle.pca, R))


def model_digest(bundle: ModelBundle) -> str:
    h = hashlib.sha256()
    for a in (bundle.pca.directions, bundle.pca.eigenvalues, bundle.readout.weights):
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


def run_pipeline(cfg: ExperimentConfig, datasets: Optional[Sequence[LabeledDataset]] = None,
                 table: Optional[StepTable] = None) -> ExperimentReport:
    """Run one train/test experiment.

    ``table`` short-circuits detection and windowing (it must have been built
    with the same detection and window settings); otherwise ``datasets`` or the
    manifests in ``cfg.datasets`` are processed.
    """
    if table is None:
        if datasets is None:
            datasets = load_experiment_data(cfg)
        table = prepare_steps(datasets, cfg)
    available = table.traversals + [p for p in table.unmatched if p not in table.traversals]
    train_pairs = expand_selectors(cfg.train, available)
    test_pairs = expand_selectors(cfg.test, available)
    if not train_pairs:
        raise ConfigError("at least one training traversal is required")
    overlap = set(train_pairs) & set(test_pairs)
    if overlap:
        raise ConfigError(f"train and test selections overlap: {sorted(overlap)}")
    present = set(table.traversals)
    empty = [p for p in train_pairs + test_pairs if p not in present]
    if empty:
        raise DataError(f"no detected steps in traversal(s) {empty}")
    if cfg.sensors is not None:
        table.sensor_index(cfg.sensors)

    train_rows = np.nonzero(table.mask(train_pairs))[0]
    test_rows = np.nonzero(table.mask(test_pairs))[0]
    bundle = fit_model(table, train_rows, cfg)
    full_pca = subspace.fit_pca(table.states(train_rows, cfg.sensors, cfg.normalize), cfg.center)
    kf_cfg = cfg.kf_config()

    metrics = {"n_components": bundle.pca.n_components,
               "eta": subspace.variance_retained(full_pca, bundle.pca.n_components),
               "ridge": bundle.readout.ridge,
               "unmatched_detections": int(sum(table.unmatched.get(p, 0)
                                               for p in train_pairs + test_pairs)),
               "splits": {}}
    predictions = []
    split_preds = {}
    for split, rows in (("train", train_rows), ("test", test_rows)):
        if len(rows) == 0:
            continue
        pred = apply_model(bundle, table, rows)
        filt = _kalman_by_traversal(table, rows, pred, kf_cfg) if cfg.kalman else None
        truth = table.truth[rows]
        entry = {"n_steps": int(len(rows)), "raw": evaluate.rmse_xy(truth, pred)._asdict()}
        if filt is not None:
            entry["filtered"] = evaluate.rmse_xy(truth, filt)._asdict()
        metrics["splits"][split] = entry
        split_preds[split] = (rows, pred)
        for n, r in enumerate(rows):
            predictions.append({
                "k": int(table.k[r]), "subject": table.subject[r], "traversal": table.traversal[r],
                "split": split, "x": truth[n, 0], "y": truth[n, 1],
                "x_hat": pred[n, 0], "y_hat": pred[n, 1],
                "x_kf": None if filt is None else filt[n, 0],
                "y_kf": None if filt is None else filt[n, 1],
            })

    # confusion on held-out steps when there are any
    rows, pred = split_preds.get("test", split_preds["train"])
    bins_x, bins_y = evaluate.default_bins(table.truth)
    cx = evaluate.confusion_matrix(table.truth[rows, 0], pred[:, 0], bins_x)
    cy = evaluate.confusion_matrix(table.truth[rows, 1], pred[:, 1], bins_y)
    metrics["confusion_diagonal"] = {"x": evaluate.diagonal_mass(cx),
                                     "y": evaluate.diagonal_mass(cy)}

    all_rows = np.concatenate([train_rows, test_rows])
    fisher = fisher_table(table, all_rows, cfg.sensors, bins_x, bins_y)
    return ExperimentReport(cfg.to_dict(), metrics, predictions, subspace.eta_curve(full_pca),
                            cx, cy, bins_x, bins_y, fisher, bundle)


def fisher_table(table: StepTable, rows, sensors, bins_x, bins_y) -> list:
    """(sensor id, J_x, J_y) with the window RMS of each sensor as the feature."""
    ids = list(sensors) if sensors is not None else list(table.sensor_ids)
    idx = table.sensor_index(ids)
    feats = features.rms(table.windows[rows][:, :, idx].transpose(0, 2, 1))
    out = []
    jx = jy = np.zeros(len(ids))
    truth = table.truth[rows]
    if len(np.unique(bins_x.assign(truth[:, 0]))) >= 2:
        jx = evaluate.fisher_ratio(feats, bins_x.assign(truth[:, 0]))
    if len(np.unique(bins_y.assign(truth[:, 1]))) >= 2:
        jy = evaluate.fisher_ratio(feats, bins_y.assign(truth[:, 1]))
    for sid, a, b in zip(ids, jx, jy):
        out.append((sid, float(a), float(b)))
    return out


# ---------------------------------------------------------------- sweeps

def _subsets(pool: Sequence, size: int, repeats: int, rng: np.random.Generator) -> list:
    n = len(pool)
    if math.comb(n, size) <= repeats:
        return [list(c) for c in itertools.combinations(pool, size)]
    seen, out = set(), []
    while len(out) < repeats:
        idx = tuple(sorted(rng.choice(n, size, replace=False).tolist()))
        if idx not in seen:
            seen.add(idx)
            out.append([pool[i] for i in idx])
    return out


def _summarize(label: str, value, runs: list) -> dict:
    row = {label: value, "n_runs": len(runs)}
    for split in ("train", "test"):
        for which in ("raw", "filtered"):
            vals = [r["splits"][split][which] for r in runs
                    if split in r["splits"] and which in r["splits"][split]]
            if not vals:
                continue
            for axis in ("total", "x", "y"):
                a = np.array([v[axis] for v in vals])
                row[f"{split}_{which}_{axis}_mean"] = float(a.mean())
                row[f"{split}_{which}_{axis}_std"] = float(a.std())
    return row


def sweep_training_size(cfg: ExperimentConfig, sizes: Sequence[int], repeats: int = 10,
                        seed: int = 0, table: Optional[StepTable] = None,
                        complement: bool = False) -> list:
    """Mean and spread of RMSE over random training subsets of each size.

    The pool is the traversals named by ``cfg.train``. Test data is ``cfg.test``
    or, with ``complement``, every pool/test traversal left out of the subset.
    """
    if table is None:
        table = prepare_steps(load_experiment_data(cfg), cfg)
    pool = expand_selectors(cfg.train, table.traversals)
    fixed_test = expand_selectors(cfg.test, table.traversals)
    rng = np.random.default_rng(seed)
    rows = []
    for size in sizes:
        if not 1 <= size <= len(pool):
            raise ConfigError(f"training size {size} outside 1..{len(pool)}")
        runs = []
        for subset in _subsets(pool, size, repeats, rng):
            if complement:
                test = [p for p in pool + fixed_test if p not in subset]
            else:
                test = fixed_test
            run_cfg = _with(cfg, train=_as_selectors(subset), test=_as_selectors(test))
            runs.append(run_pipeline(run_cfg, table=table).metrics)
        rows.append(_summarize("size", size, runs))
    return rows


def sweep_sensor_count(cfg: ExperimentConfig, counts: Sequence[int], repeats: int = 10,
                       seed: int = 0, table: Optional[StepTable] = None) -> list:
    """Mean and spread of RMSE over random sensor subsets of each size."""
    if table is None:
        table = prepare_steps(load_experiment_data(cfg), cfg)
    pool = list(cfg.sensors) if cfg.sensors is not None else list(table.sensor_ids)
    rng = np.random.default_rng(seed)
    rows = []
    for count in counts:
        if not 1 <= count <= len(pool):
            raise ConfigError(f"sensor count {count} outside 1..{len(pool)}")
        runs = [run_pipeline(_with(cfg, sensors=subset), table=table).metrics
                for subset in _subsets(pool, count, repeats, rng)]
        rows.append(_summarize("n_sensors", count, runs))
    return rows


def sweep_ridge(cfg: ExperimentConfig, ridges: Sequence[float],
                table: Optional[StepTable] = None) -> list:
    """RMSE of the configured train/test split for each absolute ridge value."""
    if table is None:
        table = prepare_steps(load_experiment_data(cfg), cfg)
    rows = []
    for eps in ridges:
        if not eps >= 0:
            raise ConfigError(f"ridge value {eps} must be nonnegative")
        rows.append(_summarize("ridge", float(eps),
                               [run_pipeline(_with(cfg, ridge=float(eps)), table=table).metrics]))
    return rows


def _with(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    d = cfg.to_dict()
    d.update(changes)
    return ExperimentConfig.from_dict(d)


def _as_selectors(pairs: Sequence[tuple]) -> list:
    return [f"{s}:{t}" for s, t in pairs]
