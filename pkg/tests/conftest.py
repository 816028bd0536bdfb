import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lidd.ingest import SensorFrame
from lidd.similarity import SimilarityMap


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def make_frame(values, mask=None, system_id="SYS00", step=3600, start=0):
    """SensorFrame from a (T, N) array; NaN cells become masked."""
    values = np.asarray(values, dtype=np.float64)
    if mask is None:
        mask = np.isfinite(values)
    else:
        mask = np.asarray(mask, dtype=bool)
    clean = np.where(mask, values, 0.0)
    T, N = clean.shape
    return SensorFrame(
        system_id=system_id,
        sensor_ids=tuple(f"s{i:02d}" for i in range(N)),
        grid=start + step * np.arange(T, dtype=np.int64),
        values=clean,
        mask=mask,
        step=step,
    )


def make_map(scores, valid=None, ids=None):
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    if valid is None:
        valid = np.ones((n, n), dtype=bool)
    if ids is None:
        ids = tuple(f"s{i:02d}" for i in range(n))
    return SimilarityMap(sensor_ids=tuple(ids), scores=scores, valid=np.asarray(valid, bool))


def random_valid_map(rng, n=12, ids=None):
    """Random symmetric fully valid similarity map with unit diagonal."""
    a = rng.uniform(-1.0, 1.0, size=(n, n))
    scores = (a + a.T) / 2
    np.fill_diagonal(scores, 1.0)
    return make_map(scores, ids=ids)
