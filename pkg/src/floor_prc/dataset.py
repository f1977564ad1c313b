"""Recordings, sensor layouts, footstep labels and trained models, plus their file formats.

A dataset on disk is a directory holding ``manifest.json``, ``layout.csv``,
``labels.csv`` and one waveform file, either CSV (column 0 is time in seconds,
one column per sensor) or a little-endian binary block. Units are fixed:
meters, seconds, m/s^2.
"""

from __future__ import annotations

import base64
import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataError
from .readout import ReadoutModel
from .subspace import PcaModel

MANIFEST_VERSION = 1
MODEL_VERSION = 1
MODEL_FORMAT = "floor-prc-model"

WAVEFORM_MAGIC = b"FPWF"
# magic, version, n_sensors, n_samples, sample_rate
WAVEFORM_HEADER = struct.Struct("<4sIIQd")

STATES_MAGIC = b"FPST"
# magic, version, n_rows, dim, metadata bytes; body then JSON metadata
STATES_HEADER = struct.Struct("<4sIQQQ")

LABEL_FIELDS = ["k", "t_s", "x_m", "y_m", "subject", "traversal"]
UNITS = {"length": "m", "time": "s", "acceleration": "m/s^2"}


@dataclass(frozen=True)
class SensorLayout:
    ids: tuple
    positions: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        if len(ids) < 1:
            raise DataError("layout needs at least one sensor")
        if len(set(ids)) != len(ids):
            raise DataError("sensor ids must be unique")
        if pos.shape[0] != len(ids):
            raise DataError("one position per sensor id required")
        if not np.all(np.isfinite(pos)):
            raise DataError("sensor positions must be finite")
        if not (np.isfinite(self.sample_rate_hz) and self.sample_rate_hz > 0):
            raise DataError("sample rate must be positive")
        pos.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    @property
    def n_sensors(self) -> int:
        return len(self.ids)

    def index(self, sensor_ids: Iterable[str]) -> list:
        lookup = {s: i for i, s in enumerate(self.ids)}
        try:
            return [lookup[str(s)] for s in sensor_ids]
        except KeyError as exc:
            raise DataError(f"unknown sensor id {exc.args[0]!r}") from None

    def subset(self, sensor_ids: Sequence[str]) -> "SensorLayout":
        idx = self.index(sensor_ids)
        return SensorLayout(tuple(self.ids[i] for i in idx), self.positions[idx],
                            self.sample_rate_hz)


@dataclass(frozen=True)
class WaveformRecord:
    """Synchronized multi-channel acceleration, ``T x N_s`` in m/s^2."""

    layout: SensorLayout
    samples: np.ndarray
    start_time_s: float = 0.0

    def __post_init__(self):
        a = np.array(self.samples, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        if a.ndim != 2 or a.shape[1] != self.layout.n_sensors:
            raise DataError(
                f"channel mismatch: {a.shape[-1]} columns for {self.layout.n_sensors} sensors")
        if not np.all(np.isfinite(a)):
            raise DataError("non-finite sample in waveform")
        a.setflags(write=False)
        object.__setattr__(self, "samples", a)
        object.__setattr__(self, "start_time_s", float(self.start_time_s))

    @property
    def sample_rate_hz(self) -> float:
        return self.layout.sample_rate_hz

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    def times(self) -> np.ndarray:
        return self.start_time_s + np.arange(self.n_samples) / self.sample_rate_hz

    def time_of(self, sample_index) -> np.ndarray:
        return self.start_time_s + np.asarray(sample_index) / self.sample_rate_hz

    def select(self, sensor_ids: Sequence[str]) -> "WaveformRecord":
        idx = self.layout.index(sensor_ids)
        return WaveformRecord(self.layout.subset(sensor_ids), self.samples[:, idx],
                              self.start_time_s)

    def scaled(self, factor: float) -> "WaveformRecord":
        return WaveformRecord(self.layout, self.samples * factor, self.start_time_s)


@dataclass(frozen=True)
class FootstepLabel:
    k: int
    timestamp_s: float
    x: float
    y: float
    subject: str
    traversal: str

    @property
    def key(self) -> tuple:
        return (self.subject, self.traversal, self.k)

    @property
    def position(self) -> tuple:
        return (self.x, self.y)


@dataclass(frozen=True)
class LabeledDataset:
    record: WaveformRecord
    labels: tuple = field(default_factory=tuple)

    def __post_init__(self):
        labels = tuple(self.labels)
        object.__setattr__(self, "labels", labels)
        t0 = self.record.start_time_s
        t1 = t0 + self.record.duration_s
        seen = set()
        prev = -np.inf
        for lab in labels:
            if not (np.isfinite(lab.x) and np.isfinite(lab.y) and np.isfinite(lab.timestamp_s)):
                raise DataError(f"non-finite label {lab.key}")
            if lab.timestamp_s < prev:
                raise DataError(f"labels not sorted by timestamp at {lab.key}")
            if not t0 <= lab.timestamp_s <= t1:
                raise DataError(f"label {lab.key} at {lab.timestamp_s} s outside record")
            if lab.key in seen:
                raise DataError(f"duplicate label {lab.key}")
            seen.add(lab.key)
            prev = lab.timestamp_s

    @property
    def traversals(self) -> list:
        """Distinct (subject, traversal) pairs in label order."""
        out = []
        for lab in self.labels:
            if (lab.subject, lab.traversal) not in out:
                out.append((lab.subject, lab.traversal))
        return out


@dataclass(frozen=True)
class ModelBundle:
    """A trained pipeline: PCA truncated to D directions, readout, config snapshot."""

    pca: PcaModel
    readout: ReadoutModel
    pipeline_config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.readout.weights.shape[0] != self.pca.n_components + 1:
            raise DataError(
                f"readout has {self.readout.weights.shape[0]} rows but PCA keeps "
                f"{self.pca.n_components} directions")


# ---------------------------------------------------------------- waveforms

def write_waveform_csv(record: WaveformRecord, path) -> None:
    header = "time_s," + ",".join(record.layout.ids)
    data = np.column_stack([record.times(), record.samples])
    # 17 significant digits round-trips float64 exactly
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")


def read_waveform_csv(path, layout: SensorLayout, start_time_s: float = 0.0) -> WaveformRecord:
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise DataError(f"unparseable waveform CSV {path}: {exc}") from exc
    if data.shape[0] and data.shape[1] - 1 != layout.n_sensors:
        raise DataError(
            f"channel mismatch: {data.shape[1] - 1} columns in {path} for {layout.n_sensors} sensors")
    if data.shape[0] == 0:
        data = np.zeros((0, layout.n_sensors + 1))
    if not np.all(np.isfinite(data)):
        raise DataError(f"non-finite sample in {path}")
    return WaveformRecord(layout, data[:, 1:], start_time_s)


def write_waveform_bin(record: WaveformRecord, path) -> None:
    with open(path, "wb") as fh:
        fh.write(WAVEFORM_HEADER.pack(WAVEFORM_MAGIC, MANIFEST_VERSION, record.layout.n_sensors,
                                      record.n_samples, record.sample_rate_hz))
        fh.write(np.ascontiguousarray(record.samples, dtype="<f8").tobytes())


def read_waveform_bin(path, layout: SensorLayout, start_time_s: float = 0.0) -> WaveformRecord:
    raw = Path(path).read_bytes()
    if len(raw) < WAVEFORM_HEADER.size:
        raise DataError(f"truncated waveform file {path}")
    magic, version, n_s, n_t, fs = WAVEFORM_HEADER.unpack_from(raw)
    if magic != WAVEFORM_MAGIC:
        raise DataError(f"{path} is not a waveform file")
    if version != MANIFEST_VERSION:
        raise DataError(f"waveform version {version} not supported")
    if n_s != layout.n_sensors:
        raise DataError(f"channel mismatch: {n_s} channels in {path} for {layout.n_sensors} sensors")
    if fs != layout.sample_rate_hz:
        raise DataError(f"sample rate {fs} in {path} disagrees with manifest {layout.sample_rate_hz}")
    body = raw[WAVEFORM_HEADER.size:]
    if len(body) != 8 * n_s * n_t:
        raise DataError(f"waveform body of {path} has wrong size")
    samples = np.frombuffer(body, dtype="<f8").reshape(n_t, n_s).astype(float)
    if not np.all(np.isfinite(samples)):
        raise DataError(f"non-finite sample in {path}")
    return WaveformRecord(layout, samples, start_time_s)


def write_states(path, states, meta: dict) -> None:
    """``N x d`` state matrix followed by JSON metadata (step refs, window settings)."""
    R = np.ascontiguousarray(states, dtype="<f8")
    if R.ndim != 2:
        raise DataError("state matrix must be 2-D")
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(STATES_HEADER.pack(STATES_MAGIC, MANIFEST_VERSION, R.shape[0], R.shape[1],
                                    len(blob)))
        fh.write(R.tobytes())
        fh.write(blob)


def read_states(path):
    """Inverse of :func:`write_states`; returns ``(matrix, meta)``."""
    raw = Path(path).read_bytes()
    if len(raw) < STATES_HEADER.size:
        raise DataError(f"truncated state file {path}")
    magic, version, n, d, n_meta = STATES_HEADER.unpack_from(raw)
    if magic != STATES_MAGIC:
        raise DataError(f"{path} is not a state file")
    if version != MANIFEST_VERSION:
        raise DataError(f"state file version {version} not supported")
    start = STATES_HEADER.size
    end = start + 8 * n * d
    if len(raw) != end + n_meta:
        raise DataError(f"state file {path} has wrong size")
    R = np.frombuffer(raw[start:end], dtype="<f8").reshape(n, d).astype(float)
    try:
        meta = json.loads(raw[end:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"corrupt metadata in {path}") from exc
    return R, meta


# ---------------------------------------------------------------- layout / labels

def write_layout_csv(layout: SensorLayout, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "x_m", "y_m"])
        for sid, (x, y) in zip(layout.ids, layout.positions):
            w.writerow([sid, repr(float(x)), repr(float(y))])


def read_layout_csv(path, sample_rate_hz: float) -> SensorLayout:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    try:
        ids = [r["id"] for r in rows]
        pos = [(float(r["x_m"]), float(r["y_m"])) for r in rows]
    except (KeyError, ValueError, TypeError) as exc:
        raise DataError(f"malformed layout file {path}") from exc
    return SensorLayout(tuple(ids), np.array(pos).reshape(-1, 2), sample_rate_hz)


def write_labels_csv(labels: Sequence[FootstepLabel], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LABEL_FIELDS)
        for lab in labels:
            w.writerow([lab.k, repr(float(lab.timestamp_s)), repr(float(lab.x)),
                        repr(float(lab.y)), lab.subject, lab.traversal])


def read_labels_csv(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    try:
        return [FootstepLabel(int(r["k"]), float(r["t_s"]), float(r["x_m"]), float(r["y_m"]),
                              r["subject"], r["traversal"]) for r in rows]
    except (KeyError, ValueError, TypeError) as exc:
        raise DataError(f"malformed label file {path}") from exc


# ---------------------------------------------------------------- manifests

def save_dataset(ds: LabeledDataset, directory, fmt: str = "bin") -> Path:
    """Write ``ds`` into ``directory`` and return the manifest path."""
    if fmt not in ("csv", "bin"):
        raise DataError(f"unknown waveform format {fmt!r}")
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    wave_name = "waveform.csv" if fmt == "csv" else "waveform.bin"
    if fmt == "csv":
        write_waveform_csv(ds.record, d / wave_name)
    else:
        write_waveform_bin(ds.record, d / wave_name)
    write_layout_csv(ds.record.layout, d / "layout.csv")
    write_labels_csv(ds.labels, d / "labels.csv")
    manifest = {
        "version": MANIFEST_VERSION,
        "format": fmt,
        "layout": "layout.csv",
        "waveform": wave_name,
        "labels": "labels.csv",
        "sample_rate_hz": ds.record.sample_rate_hz,
        "start_time_s": ds.record.start_time_s,
        "units": UNITS,
    }
    path = d / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def load_dataset(manifest_path) -> LabeledDataset:
    """Load and validate a dataset from its manifest; any violation raises DataError."""
    mpath = Path(manifest_path)
    if not mpath.is_file():
        raise DataError(f"missing manifest {mpath}")
    try:
        m = json.loads(mpath.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest {mpath} is not valid JSON") from exc
    if m.get("version") != MANIFEST_VERSION:
        raise DataError(f"manifest version {m.get('version')!r} not supported")
    if m.get("units", UNITS) != UNITS:
        raise DataError(f"unsupported units {m.get('units')}")
    base = mpath.parent
    try:
        files = {k: base / m[k] for k in ("layout", "waveform", "labels")}
        fs = float(m["sample_rate_hz"])
        fmt = m["format"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"manifest {mpath} missing key {exc}") from exc
    for p in files.values():
        if not p.is_file():
            raise DataError(f"missing file {p}")
    layout = read_layout_csv(files["layout"], fs)
    start = float(m.get("start_time_s", 0.0))
    if fmt == "csv":
        record = read_waveform_csv(files["waveform"], layout, start)
    elif fmt == "bin":
        record = read_waveform_bin(files["waveform"], layout, start)
    else:
        raise DataError(f"unknown waveform format {fmt!r}")
    return LabeledDataset(record, tuple(read_labels_csv(files["labels"])))


def load_datasets(paths: Iterable) -> list:
    """Load datasets from manifests or campaign index files (``{"datasets": [...]}``)."""
    out = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            p = p / ("campaign.json" if (p / "campaign.json").exists() else "manifest.json")
        if p.is_file() and p.name != "manifest.json":
            try:
                index = json.loads(p.read_text())
            except json.JSONDecodeError as exc:
                raise DataError(f"{p} is not valid JSON") from exc
            if isinstance(index, dict) and "datasets" in index:
                out.extend(load_datasets(p.parent / q for q in index["datasets"]))
                continue
        out.append(load_dataset(p))
    return out


# ---------------------------------------------------------------- models

def _encode(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode(obj: dict) -> np.ndarray:
    shape = tuple(int(s) for s in obj["shape"])
    buf = base64.b64decode(obj["data"], validate=True)
    if len(buf) != 8 * int(np.prod(shape)):
        raise DataError("corrupt model: matrix size does not match its shape")
    return np.frombuffer(buf, dtype="<f8").reshape(shape).astype(float)


def save_model(bundle: ModelBundle, path) -> None:
    pca = bundle.pca
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": bundle.pipeline_config,
        "pca": {
            "directions": _encode(pca.directions),
            "eigenvalues": _encode(pca.eigenvalues),
            "mean": None if pca.mean is None else _encode(pca.mean),
            "centering": pca.centering,
        },
        "readout": {
            "weights": _encode(bundle.readout.weights),
            "ridge": bundle.readout.ridge,
            "free_bias": bundle.readout.free_bias,
        },
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_model(path) -> ModelBundle:
    try:
        doc = json.loads(Path(path).read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataError(f"corrupt model file {path}") from exc
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise DataError(f"corrupt model file {path}: not a model document")
    if doc.get("version") != MODEL_VERSION:
        raise DataError(f"model version mismatch: {doc.get('version')!r} != {MODEL_VERSION}")
    try:
        p, r = doc["pca"], doc["readout"]
        pca = PcaModel(_decode(p["directions"]), _decode(p["eigenvalues"]),
                       None if p["mean"] is None else _decode(p["mean"]), bool(p["centering"]))
        readout = ReadoutModel(_decode(r["weights"]), float(r["ridge"]), bool(r["free_bias"]))
        config = doc["config"]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"corrupt model file {path}: {exc}") from exc
    return ModelBundle(pca, readout, config)
