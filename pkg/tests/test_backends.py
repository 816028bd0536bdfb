"""Equivalence of the compiled kernels and the numpy fallbacks."""

import importlib.util
import subprocess
import sys

import numpy as np
import pytest

from lidd._core import pykernels

HAVE_COMPILED = importlib.util.find_spec("lidd._core.ckernels") is not None
needs_compiled = pytest.mark.skipif(not HAVE_COMPILED, reason="extension not built")

if HAVE_COMPILED:
    from lidd._core import ckernels


def random_frame(rng, T=400, N=7, missing=0.25):
    values = np.ascontiguousarray(rng.normal(size=(T, N)))
    mask = np.ascontiguousarray(
        (rng.random((T, N)) >= missing).astype(np.uint8)
    )
    return values, mask


@needs_compiled
def test_pearson_pairs_agree(rng):
    for _ in range(10):
        values, mask = random_frame(rng)
        c1, n1, d1 = ckernels.pearson_pairs(values, mask, 5)
        c2, n2, d2 = pykernels.pearson_pairs(values, mask, 5)
        assert np.array_equal(n1, n2)
        assert np.array_equal(np.asarray(d1, bool), np.asarray(d2, bool))
        assert np.allclose(c1, c2, atol=1e-12)


@needs_compiled
def test_pearson_undefined_agreement_exact(rng):
    # constant columns and thin overlaps must agree exactly, not approximately
    values, mask = random_frame(rng, T=60, N=5, missing=0.6)
    values[:, 2] = 7.25
    c1, _, d1 = ckernels.pearson_pairs(values, mask, 10)
    c2, _, d2 = pykernels.pearson_pairs(values, mask, 10)
    assert np.array_equal(np.asarray(d1, bool), np.asarray(d2, bool))
    assert not np.asarray(d1, bool)[2, [0, 1, 3, 4]].any()


@needs_compiled
def test_rolling_median_bitwise_equal(rng):
    for window in (3, 5, 9):
        values, mask = random_frame(rng, T=300, N=4, missing=0.3)
        out1 = ckernels.rolling_median_masked(values, mask, window)
        out2 = pykernels.rolling_median_masked(values, mask, window)
        assert np.array_equal(out1, out2)


@needs_compiled
def test_nn_chain_identical_merges(rng):
    for n in (2, 5, 12, 40):
        a = rng.uniform(0.01, 1.0, size=(n, n))
        dist = np.ascontiguousarray((a + a.T) / 2)
        np.fill_diagonal(dist, 0.0)
        for code in (0, 1, 2):
            raw1 = ckernels.nn_chain(dist, code)
            raw2 = pykernels.nn_chain(dist, code)
            assert np.array_equal(raw1, raw2)


def test_backend_env_override_python():
    proc = subprocess.run(
        [sys.executable, "-c", "from lidd import _core; print(_core.BACKEND)"],
        capture_output=True,
        text=True,
        env={"PATH": "/usr/bin:/bin", "LIDD_BACKEND": "python"},
    )
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == "python"


@needs_compiled
def test_backend_env_override_compiled():
    proc = subprocess.run(
        [sys.executable, "-c", "from lidd import _core; print(_core.BACKEND)"],
        capture_output=True,
        text=True,
        env={"PATH": "/usr/bin:/bin", "LIDD_BACKEND": "compiled"},
    )
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == "compiled"


def test_pipeline_matches_across_backends(tmp_path, rng):
    """End-to-end clustering equal under both backends (tolerance path)."""
    from lidd.synth import SyntheticSpec, write_corpus

    spec = SyntheticSpec(n_systems=6, n_sensors=6, n_samples=360, n_groups=2,
                         noise=0.05, missing_rate=0.1, seed=7, pattern_weight=0.26)
    write_corpus(spec, tmp_path)
    outputs = {}
    for backend in ("python", "compiled") if HAVE_COMPILED else ("python",):
        out = tmp_path / backend
        proc = subprocess.run(
            [sys.executable, "-m", "lidd.cli", "analyze",
             "--input", str(tmp_path / "corpus.csv"), "--min-overlap", "12",
             "--alpha-system", "0.05", "--out", str(out)],
            capture_output=True, text=True,
            env={"PATH": "/usr/bin:/bin", "LIDD_BACKEND": backend,
                 "PYTHONPATH": ""},
        )
        assert proc.returncode == 0, proc.stderr
        import json

        outputs[backend] = json.loads((out / "report.json").read_text())
    if HAVE_COMPILED:
        a, b = outputs["python"], outputs["compiled"]
        assert a["system_partition"]["clusters"] == b["system_partition"]["clusters"]
        da = np.array(a["system_distances"]["dist"])
        db = np.array(b["system_distances"]["dist"])
        assert np.allclose(da, db, atol=1e-12)
