import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from floor_prc import dataset as dsm
from floor_prc.dataset import (LabeledDataset, ModelBundle, WaveformRecord, load_dataset,
                               load_datasets, load_model, read_states, save_dataset, save_model,
                               write_states)
from floor_prc.errors import DataError
from floor_prc.readout import ReadoutModel, predict
from floor_prc.subspace import fit_pca, project

from conftest import make_labels, make_layout, make_record


@pytest.mark.parametrize("fmt", ["csv", "bin"])
def test_round_trip_11_channels_3_labels(tmp_path, small_dataset, fmt):
    m = save_dataset(small_dataset, tmp_path, fmt)
    back = load_dataset(m)
    assert back.record.samples.shape == small_dataset.record.samples.shape
    assert len(back.labels) == 3
    assert back.labels == small_dataset.labels
    assert back.record.layout.ids == small_dataset.record.layout.ids
    if fmt == "bin":
        assert np.array_equal(back.record.samples, small_dataset.record.samples)
    else:
        np.testing.assert_allclose(back.record.samples, small_dataset.record.samples,
                                   rtol=1e-9, atol=0)


def test_manifest_keys(tmp_path, small_dataset):
    m = json.loads(save_dataset(small_dataset, tmp_path).read_text())
    assert {"layout", "waveform", "labels", "format", "version", "sample_rate_hz"} <= set(m)
    assert m["version"] == 1
    assert (tmp_path / "layout.csv").read_text().splitlines()[0] == "id,x_m,y_m"
    assert (tmp_path / "labels.csv").read_text().splitlines()[0] == "k,t_s,x_m,y_m,subject,traversal"


def test_binary_round_trip_is_bit_exact(tmp_path):
    rec = make_record(1000, 11, seed=3)
    dsm.write_waveform_bin(rec, tmp_path / "w.bin")
    back = dsm.read_waveform_bin(tmp_path / "w.bin", rec.layout)
    assert back.samples.tobytes() == rec.samples.tobytes()


def test_channel_mismatch(tmp_path, small_dataset):
    m = save_dataset(small_dataset, tmp_path, "csv")
    lines = (tmp_path / "waveform.csv").read_text().splitlines()
    cut = [",".join(l.split(",")[:-1]) for l in lines]
    (tmp_path / "waveform.csv").write_text("\n".join(cut) + "\n")
    with pytest.raises(DataError, match="channel mismatch"):
        load_dataset(m)


def test_nan_cell_rejected(tmp_path, small_dataset):
    m = save_dataset(small_dataset, tmp_path, "csv")
    lines = (tmp_path / "waveform.csv").read_text().splitlines()
    cells = lines[5].split(",")
    cells[3] = "NaN"
    lines[5] = ",".join(cells)
    (tmp_path / "waveform.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError, match="non-finite sample"):
        load_dataset(m)


def test_missing_file(tmp_path, small_dataset):
    m = save_dataset(small_dataset, tmp_path)
    (tmp_path / "labels.csv").unlink()
    with pytest.raises(DataError, match="missing file"):
        load_dataset(m)


def test_unsorted_labels_rejected():
    labels = make_labels([0.5, 0.2])
    with pytest.raises(DataError):
        LabeledDataset(make_record(), labels)


def test_empty_labels_valid(tmp_path):
    ds = LabeledDataset(make_record(200), ())
    back = load_dataset(save_dataset(ds, tmp_path))
    assert back.labels == ()


def test_single_sensor_single_column(tmp_path):
    ds = LabeledDataset(make_record(100, 1), ())
    save_dataset(ds, tmp_path, "csv")
    header = (tmp_path / "waveform.csv").read_text().splitlines()[0].split(",")
    assert header == ["time_s", "A01"]
    assert load_dataset(tmp_path / "manifest.json").record.samples.shape == (100, 1)


def test_campaign_index(tmp_path, small_dataset):
    save_dataset(small_dataset, tmp_path / "a")
    save_dataset(small_dataset, tmp_path / "b")
    (tmp_path / "campaign.json").write_text(json.dumps(
        {"datasets": ["a/manifest.json", "b/manifest.json"]}))
    assert len(load_datasets([tmp_path])) == 2
    assert len(load_datasets([tmp_path / "a"])) == 1


@settings(max_examples=25, deadline=None)
@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 40), st.integers(1, 5)),
                  elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_csv_round_trip_property(tmp_path_factory, a):
    d = tmp_path_factory.mktemp("rt")
    rec = WaveformRecord(make_layout(a.shape[1]), a)
    dsm.write_waveform_csv(rec, d / "w.csv")
    back = dsm.read_waveform_csv(d / "w.csv", rec.layout)
    np.testing.assert_allclose(back.samples, a, rtol=1e-9, atol=0)


def _bundle(D=40, d=60, seed=0):
    rng = np.random.default_rng(seed)
    pca = fit_pca(rng.standard_normal((80, d))).truncate(D)
    ro = ReadoutModel(rng.standard_normal((D + 1, 2)), 1e-3, False)
    return ModelBundle(pca, ro, {"t_w": 0.12, "sensors": ["A01"]})


def test_model_round_trip(tmp_path):
    b = _bundle()
    save_model(b, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    r = np.random.default_rng(9).standard_normal(60)
    before = predict(b.readout, project(b.pca, r))
    after = predict(back.readout, project(back.pca, r))
    assert np.array_equal(before, after)
    assert back.pipeline_config == b.pipeline_config


def test_truncated_model(tmp_path):
    save_model(_bundle(), tmp_path / "m.json")
    raw = (tmp_path / "m.json").read_text()
    (tmp_path / "m.json").write_text(raw[: len(raw) // 2])
    with pytest.raises(DataError, match="corrupt model"):
        load_model(tmp_path / "m.json")


def test_model_dimension_inconsistency():
    rng = np.random.default_rng(1)
    pca = fit_pca(rng.standard_normal((80, 70))).truncate(60)
    with pytest.raises(DataError):
        ModelBundle(pca, ReadoutModel(np.zeros((41, 2)), 0.0, False), {})


def test_model_version_mismatch(tmp_path):
    save_model(_bundle(), tmp_path / "m.json")
    doc = json.loads((tmp_path / "m.json").read_text())
    doc["version"] = 99
    (tmp_path / "m.json").write_text(json.dumps(doc))
    with pytest.raises(DataError, match="version"):
        load_model(tmp_path / "m.json")


def test_states_round_trip(tmp_path):
    R = np.random.default_rng(2).standard_normal((7, 13))
    meta = {"steps": [{"k": i} for i in range(7)], "t_w": 0.12}
    write_states(tmp_path / "s.bin", R, meta)
    back, m = read_states(tmp_path / "s.bin")
    assert back.tobytes() == R.tobytes()
    assert m == meta
