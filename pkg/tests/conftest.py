import sys

import numpy as np
import pytest

from floor_prc import pipeline, synth
from floor_prc.dataset import FootstepLabel, LabeledDataset, SensorLayout, WaveformRecord


def make_layout(n=11, fs=1024.0):
    ids = tuple(f"A{j + 1:02d}" for j in range(n))
    pos = np.column_stack([np.linspace(1.0, 16.0, n), np.full(n, 1.5)])
    return SensorLayout(ids, pos, fs)


def make_record(n_samples=1000, n_sensors=11, seed=0, fs=1024.0):
    rng = np.random.default_rng(seed)
    return WaveformRecord(make_layout(n_sensors, fs), rng.standard_normal((n_samples, n_sensors)))


def make_labels(times, subject="S1", traversal="Tr1"):
    return tuple(FootstepLabel(k, float(t), 0.5 * k, 1.5, subject, traversal)
                 for k, t in enumerate(times))


@pytest.fixture
def record():
    return make_record()


@pytest.fixture
def small_dataset():
    return LabeledDataset(make_record(), make_labels([0.2, 0.5, 0.8]))


@pytest.fixture(scope="session")
def campaign():
    return synth.default_campaign(42)


@pytest.fixture(scope="session")
def step_table(campaign):
    return pipeline.prepare_steps(campaign, pipeline.ExperimentConfig())


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results, key=lambda k: int(k[1:])):
        ok, text = results[key]
        terminalreporter.write_line(f"{key:>3} {'PASS' if ok else 'FAIL'}  {text}")
