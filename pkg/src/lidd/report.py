"""Consolidated analysis report and deterministic artifact writing.

report.json carries every analysis result plus a config echo and input
digests; wall-clock metadata lives in run_meta.json so that report.json
and all SVG/CSV artifacts are byte-identical across reruns on identical
inputs. The schema is documented in the README and versioned via the
schema_version field.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from lidd.clustering import ClusterPartition, ClusterSensorMap, LinkageTree
from lidd.divergence import DivergenceReport
from lidd.errors import InputFormatError
from lidd.render import RenderSpec, render_dendrogram, render_divergence, \
    render_divergence_pairs, render_heatmap
from lidd.similarity import DistanceMatrix, SimilarityMap

SCHEMA_VERSION = 1


@dataclass
class AnalysisReport:
    """Everything one analysis run produced, ready for serialization."""

    config: dict
    inputs: list[dict]
    warnings: dict
    system_ids: list[str]
    sensor_ids: list[str]
    system_distances: DistanceMatrix | None = None
    system_tree: LinkageTree | None = None
    system_partition: ClusterPartition | None = None
    cluster_maps: list[ClusterSensorMap] = field(default_factory=list)
    cluster_sensor_trees: list[LinkageTree] = field(default_factory=list)
    cluster_sensor_partitions: list[ClusterPartition] = field(default_factory=list)
    overall_map: SimilarityMap | None = None
    overall_tree: LinkageTree | None = None
    overall_partition: ClusterPartition | None = None
    divergence: DivergenceReport | None = None

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "inputs": self.inputs,
            "warnings": self.warnings,
            "system_ids": self.system_ids,
            "sensor_ids": self.sensor_ids,
            "system_distances": _opt(self.system_distances),
            "system_linkage": _opt(self.system_tree),
            "system_partition": _opt(self.system_partition),
            "cluster_sensor_maps": [
                {
                    "cluster": cm.cluster_label,
                    "member_count": cm.member_count,
                    "map": cm.map.to_json_dict(),
                }
                for cm in self.cluster_maps
            ],
            "cluster_sensor_linkages": [t.to_json_dict() for t in self.cluster_sensor_trees],
            "cluster_sensor_partitions": [p.to_json_dict() for p in self.cluster_sensor_partitions],
            "overall_sensor_map": _opt(self.overall_map),
            "overall_sensor_linkage": _opt(self.overall_tree),
            "overall_sensor_partition": _opt(self.overall_partition),
            "divergence": _opt(self.divergence),
        }


def _opt(obj):
    return None if obj is None else obj.to_json_dict()


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_file(path) -> dict:
    p = Path(path)
    data = p.read_bytes()
    return {"path": p.name, "bytes": len(data), "sha256": sha256_hex(data)}


def _divergence_pair_csv(rep: DivergenceReport) -> str:
    lines = ["cluster_a,cluster_b,sensor,psi"]
    for a, b, sensor, psi in rep.pair_rows():
        lines.append(f"{a},{b},{sensor},{psi!r}")
    return "\n".join(lines) + "\n"


def _divergence_aggregate_csv(rep: DivergenceReport) -> str:
    lines = ["cluster,sensor,psi_bar,flagged"]
    for label, sensor, psi_bar, flagged in rep.aggregate_rows():
        lines.append(f"{label},{sensor},{psi_bar!r},{str(flagged).lower()}")
    return "\n".join(lines) + "\n"


def write_report(report: AnalysisReport, out_dir) -> list[dict]:
    """Write report.json and all CSV/SVG artifacts; return the manifest.

    File names are fixed; contents are deterministic functions of the
    report. The manifest (name, bytes, sha256 per file) is also written
    as manifest.json, which is not listed inside itself.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise InputFormatError(f"output directory not writable: {exc}") from exc

    artifacts: dict[str, bytes] = {}

    def add(name: str, content: str) -> None:
        artifacts[name] = content.encode("utf-8")

    add("report.json", dumps_json(report.to_json_dict()))

    heat_spec = RenderSpec(colormap="sequential")
    map_spec = RenderSpec(colormap="diverging")

    if report.system_distances is not None:
        add("system_distances.csv", report.system_distances.to_csv())
        add(
            "system_distance_heatmap.svg",
            render_heatmap(report.system_distances, heat_spec,
                           title="system dissimilarity"),
        )
    if report.system_tree is not None and report.system_partition is not None:
        add("system_linkage.csv", report.system_tree.to_csv())
        add(
            "system_dendrogram.svg",
            render_dendrogram(
                report.system_tree,
                report.system_partition.threshold,
                RenderSpec(),
                title="system clustering",
            ),
        )
        add("system_partition.json", dumps_json(report.system_partition.to_json_dict()))
    for cm, tree, part in zip(
        report.cluster_maps, report.cluster_sensor_trees, report.cluster_sensor_partitions
    ):
        label = cm.cluster_label
        add(f"cluster_{label}_sensor_map.csv", cm.map.to_csv())
        add(
            f"cluster_{label}_sensor_map.svg",
            render_heatmap(cm.map, map_spec,
                           title=f"cluster {label} sensor interconnection"),
        )
        add(
            f"cluster_{label}_sensor_dendrogram.svg",
            render_dendrogram(tree, part.threshold, RenderSpec(),
                              title=f"cluster {label} sensor clustering"),
        )
    if report.overall_map is not None:
        add("overall_sensor_map.csv", report.overall_map.to_csv())
    if report.overall_tree is not None and report.overall_partition is not None:
        add("overall_sensor_linkage.csv", report.overall_tree.to_csv())
        add(
            "overall_sensor_dendrogram.svg",
            render_dendrogram(
                report.overall_tree,
                report.overall_partition.threshold,
                RenderSpec(),
                title="overall sensor clustering",
            ),
        )
        add(
            "overall_sensor_partition.json",
            dumps_json(report.overall_partition.to_json_dict()),
        )
    if report.divergence is not None:
        add("divergence_pairs.csv", _divergence_pair_csv(report.divergence))
        add("divergence_aggregate.csv", _divergence_aggregate_csv(report.divergence))
        agg_svg, flag_svg = render_divergence(report.divergence, RenderSpec())
        add("divergence_aggregate.svg", agg_svg)
        add("divergence_flags.svg", flag_svg)
        add("divergence_pairs.svg", render_divergence_pairs(report.divergence, RenderSpec()))

    manifest = []
    for name in sorted(artifacts):
        data = artifacts[name]
        (out / name).write_bytes(data)
        manifest.append({"name": name, "bytes": len(data), "sha256": sha256_hex(data)})
    (out / "manifest.json").write_text(dumps_json({"files": manifest}), encoding="utf-8")
    return manifest
