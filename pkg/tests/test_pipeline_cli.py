import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import make_frame
from lidd.cli import parse_duration
from lidd.errors import InputFormatError
from lidd.ingest import IngestConfig
from lidd.pipeline import RunConfig, run_analysis, run_from_inputs
from lidd.similarity import SimilarityConfig
from lidd.synth import SyntheticSpec, write_corpus


def cli(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "lidd.cli", *args], capture_output=True, text=True
    )
    return proc.returncode, proc.stdout, proc.stderr


def small_corpus(tmp_path, **kwargs):
    defaults = dict(n_systems=6, n_sensors=5, n_samples=240, n_groups=2,
                    noise=0.05, missing_rate=0.0, seed=11)
    defaults.update(kwargs)
    spec = SyntheticSpec(**defaults)
    truth = write_corpus(spec, tmp_path)
    return spec, truth


def test_parse_duration_units():
    assert parse_duration("3600") == 3600
    assert parse_duration("60m") == 3600
    assert parse_duration("1h") == 3600
    assert parse_duration("1d") == 86400
    assert parse_duration("45s") == 45


def test_two_identical_systems_one_cluster_no_flags(rng):
    values = rng.normal(size=(200, 4))
    frames = [make_frame(values, system_id=f"S{k}") for k in range(2)]
    cfg = RunConfig(
        ingest=IngestConfig(despike_window=3, max_gap_fill=2),
        similarity=SimilarityConfig(min_overlap=5),
        alpha_system=0.01,
    )
    result = run_analysis(frames, cfg)
    assert result.system_partition.n_clusters == 1
    assert np.all(result.report.divergence.aggregate == 0)
    assert not result.report.divergence.flags.any()


def test_insufficient_systems_fatal(rng):
    frames = [make_frame(rng.normal(size=(50, 3)))]
    with pytest.raises(InputFormatError, match="insufficient systems"):
        run_analysis(frames, RunConfig())


def test_planted_groups_recovered_in_process(tmp_path):
    spec, truth = small_corpus(tmp_path, n_samples=1440, n_sensors=8,
                               pattern_weight=0.26)
    cfg = RunConfig(
        inputs=(str(tmp_path / "corpus.csv"),),
        similarity=SimilarityConfig(min_overlap=12),
        alpha_system=0.01,
        out_dir=str(tmp_path / "out"),
    )
    result = run_from_inputs(cfg)
    heights = [m.height for m in result.system_tree.merges]
    mid_gap = 0.5 * (heights[-2] + heights[-1])  # 2 planted groups
    from lidd.clustering import cut

    partition = cut(result.system_tree, mid_gap)
    groups = truth["group_of_system"]
    clusters = {frozenset(c) for c in partition.clusters}
    want = {}
    for sid, g in groups.items():
        want.setdefault(g, set()).add(sid)
    assert clusters == {frozenset(v) for v in want.values()}


def test_cli_analyze_generate_inspect(tmp_path):
    code, out, err = cli(
        "generate", "--systems", "6", "--sensors", "5", "--samples", "240",
        "--groups", "2", "--noise", "0.05", "--seed", "11",
        "--out", str(tmp_path / "corpus"),
    )
    assert code == 0, err
    truth = json.loads((tmp_path / "corpus" / "truth.json").read_text())
    code, out, err = cli(
        "analyze", "--input", str(tmp_path / "corpus" / "corpus.csv"),
        "--min-overlap", "12",
        "--alpha-system", str(truth["suggested_alpha_system"]),
        "--out", str(tmp_path / "out"),
    )
    assert code == 0, err
    assert "clusters at alpha_system" in out
    report_path = tmp_path / "out" / "report.json"
    assert report_path.exists()
    assert (tmp_path / "out" / "run_meta.json").exists()
    assert (tmp_path / "out" / "manifest.json").exists()

    code, out, err = cli("inspect", str(report_path), "clusters")
    assert code == 0
    assert "cluster" in out and "members" in out
    code, out, err = cli("inspect", str(report_path), "sensors")
    assert code == 0
    code, out, err = cli("inspect", str(report_path), "rca")
    assert code == 0


def test_cli_exit_codes(tmp_path):
    code, _, _ = cli("analyze")  # missing --input
    assert code == 2
    code, _, _ = cli("inspect", str(tmp_path / "nope.json"), "bogus")
    assert code == 2  # usage: bad query choice
    code, _, err = cli("analyze", "--input", str(tmp_path / "missing.csv"),
                       "--out", str(tmp_path / "out"))
    assert code == 3
    code, _, err = cli("inspect", str(tmp_path / "nope.json"), "clusters")
    assert code == 3
    bad = tmp_path / "corrupt.json"
    bad.write_text("{not json")
    code, _, err = cli("inspect", str(bad), "clusters")
    assert code == 3
    # config violation caught with the field named
    code, _, err = cli("analyze", "--input", str(bad), "--despike-window", "4",
                       "--out", str(tmp_path / "out"))
    assert code == 2
    assert "despike_window" in err


def test_cli_contract_violation_exit_code(tmp_path):
    # a single-sensor corpus reaches similarity and violates its contract
    lines = ["timestamp,system,sensor,value"]
    for system in ("A", "B"):
        for t in range(30):
            lines.append(f"2024-01-01T{t % 24:02d}:{t // 24:02d}:00Z,{system},only,1.{t}")
    (tmp_path / "one_sensor.csv").write_text("\n".join(lines) + "\n")
    code, _, err = cli("analyze", "--input", str(tmp_path / "one_sensor.csv"),
                       "--out", str(tmp_path / "out"))
    assert code == 4
    assert "pipeline error" in err


def test_cli_single_system_insufficient(tmp_path):
    spec = SyntheticSpec(n_systems=1, n_sensors=3, n_samples=48, n_groups=1, seed=0)
    write_corpus(spec, tmp_path / "one")
    code, _, err = cli("analyze", "--input", str(tmp_path / "one" / "corpus.csv"),
                       "--out", str(tmp_path / "out"))
    assert code == 3
    assert "insufficient systems" in err


def test_cli_wide_format(tmp_path):
    sensors = ["a", "b", "c"]
    rng = np.random.default_rng(4)
    for system in ("alpha", "beta"):
        lines = ["timestamp," + ",".join(sensors)]
        base = rng.normal(size=(120, 3))
        for t in range(120):
            ts = f"2024-01-{1 + t // 24:02d}T{t % 24:02d}:00:00Z"
            lines.append(ts + "," + ",".join(f"{v:.5f}" for v in base[t]))
        (tmp_path / f"{system}.csv").write_text("\n".join(lines) + "\n")
    code, out, err = cli(
        "analyze", "--input", str(tmp_path), "--format", "wide",
        "--min-overlap", "12", "--alpha-system", "0.02",
        "--out", str(tmp_path / "out"),
    )
    assert code == 0, err
    doc = json.loads((tmp_path / "out" / "report.json").read_text())
    assert doc["system_ids"] == ["alpha", "beta"]
    assert doc["sensor_ids"] == sensors


def test_jobs_parallelism_identical_output(tmp_path):
    spec, truth = small_corpus(tmp_path)
    base_args = [
        "analyze", "--input", str(tmp_path / "corpus.csv"),
        "--min-overlap", "12",
        "--alpha-system", str(truth["suggested_alpha_system"]),
    ]
    code1, _, err1 = cli(*base_args, "--jobs", "1", "--out", str(tmp_path / "j1"))
    code2, _, err2 = cli(*base_args, "--jobs", "4", "--out", str(tmp_path / "j4"))
    assert code1 == 0 and code2 == 0, err1 + err2
    for name in ("report.json", "system_dendrogram.svg", "manifest.json"):
        a = (tmp_path / "j1" / name).read_bytes()
        b = (tmp_path / "j4" / name).read_bytes()
        assert a == b, name


def test_report_schema_sections(tmp_path):
    spec, truth = small_corpus(tmp_path)
    code, _, err = cli(
        "analyze", "--input", str(tmp_path / "corpus.csv"),
        "--min-overlap", "12",
        "--alpha-system", str(truth["suggested_alpha_system"]),
        "--out", str(tmp_path / "out"),
    )
    assert code == 0, err
    doc = json.loads((tmp_path / "out" / "report.json").read_text())
    for key in (
        "schema_version", "config", "inputs", "warnings", "system_ids",
        "sensor_ids", "system_distances", "system_linkage", "system_partition",
        "cluster_sensor_maps", "cluster_sensor_linkages",
        "cluster_sensor_partitions", "overall_sensor_map",
        "overall_sensor_linkage", "overall_sensor_partition", "divergence",
    ):
        assert key in doc, key
    assert doc["inputs"][0]["path"] == "corpus.csv"
    assert len(doc["inputs"][0]["sha256"]) == 64
