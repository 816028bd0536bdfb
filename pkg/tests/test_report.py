import hashlib
import json
import os

import numpy as np
import pytest

from conftest import make_frame
from lidd.errors import InputFormatError
from lidd.ingest import IngestConfig
from lidd.pipeline import RunConfig, run_analysis
from lidd.report import AnalysisReport, write_report
from lidd.similarity import SimilarityConfig


def small_frames(rng, n_systems=4, n_sensors=3, T=60):
    frames = []
    base = rng.normal(size=(T, n_sensors))
    for k in range(n_systems):
        values = base + 0.05 * rng.normal(size=(T, n_sensors))
        frames.append(make_frame(values, system_id=f"SYS{k:02d}"))
    return frames


def small_config():
    return RunConfig(
        ingest=IngestConfig(despike_window=3, max_gap_fill=2),
        similarity=SimilarityConfig(min_overlap=5),
        alpha_system=0.05,
        alpha_sensor=0.05,
        alpha_rca=0.15,
    )


def test_write_report_manifest(tmp_path, rng):
    result = run_analysis(small_frames(rng), small_config())
    manifest = write_report(result.report, tmp_path / "out")
    names = {m["name"] for m in manifest}
    assert "report.json" in names
    assert "system_distance_heatmap.svg" in names
    assert "system_dendrogram.svg" in names
    assert "overall_sensor_dendrogram.svg" in names
    assert "divergence_aggregate.svg" in names
    assert "divergence_flags.svg" in names
    assert "divergence_pairs.svg" in names
    assert len(names) >= 6
    for entry in manifest:
        data = (tmp_path / "out" / entry["name"]).read_bytes()
        assert len(data) == entry["bytes"]
        assert hashlib.sha256(data).hexdigest() == entry["sha256"]
    listed = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert listed["files"] == manifest


def test_write_report_deterministic(tmp_path, rng):
    frames = small_frames(rng)
    cfg = small_config()
    r1 = run_analysis(frames, cfg)
    r2 = run_analysis(frames, cfg)
    write_report(r1.report, tmp_path / "a")
    write_report(r2.report, tmp_path / "b")
    for name in [m["name"] for m in write_report(r1.report, tmp_path / "a")]:
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        assert a == b, name


def test_report_json_has_config_echo_and_digests(tmp_path, rng):
    result = run_analysis(
        small_frames(rng),
        small_config(),
        input_digests=[{"path": "x.csv", "bytes": 3, "sha256": "ab"}],
    )
    write_report(result.report, tmp_path)
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["schema_version"] == 1
    cfg = doc["config"]
    for key in ("alpha_system", "alpha_sensor", "alpha_rca", "linkage",
                "min_overlap", "despike_window", "max_gap_fill",
                "resample_interval_s", "aggregator", "min_coverage",
                "undefined_policy", "format"):
        assert key in cfg
    assert "jobs" not in cfg  # parallelism must not influence report bytes
    assert doc["inputs"][0]["sha256"] == "ab"


def test_empty_report_writes_json_without_svgs(tmp_path):
    report = AnalysisReport(
        config={}, inputs=[], warnings={}, system_ids=[], sensor_ids=[]
    )
    manifest = write_report(report, tmp_path)
    names = {m["name"] for m in manifest}
    assert names == {"report.json"}
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["system_partition"] is None
    assert doc["cluster_sensor_maps"] == []


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_write_report_unwritable_dir(tmp_path, rng):
    result = run_analysis(small_frames(rng), small_config())
    blocked = tmp_path / "blocked"
    blocked.mkdir()
    blocked.chmod(0o500)
    try:
        with pytest.raises(InputFormatError):
            write_report(result.report, blocked)
    finally:
        blocked.chmod(0o700)
