"""End-to-end analysis pipeline.

Stage order: per-system sensor similarity maps, inter-system distances,
system clustering, per-cluster and overall sensor clustering, divergence
scoring. All reductions run in a fixed order (systems sorted by id), so
results are identical at any parallelism level; worker fan-out only
covers the per-system similarity maps, which are independent.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from lidd.clustering import (
    ClusterPartition,
    ClusterSensorMap,
    LinkageTree,
    agglomerate,
    cluster_sensor_maps,
    cut,
    overall_sensor_clustering,
    sensor_linkage_per_cluster,
)
from lidd.divergence import build_report
from lidd.errors import ConfigError, InputFormatError
from lidd.ingest import (
    IngestConfig,
    ParseStats,
    SensorFrame,
    build_frames,
    clean_frame,
    coverage_check,
    merge_columns,
    parse_columns,
)
from lidd.report import AnalysisReport, digest_file
from lidd.similarity import (
    SimilarityConfig,
    SimilarityMap,
    sensor_similarity_map,
    system_distance_matrix,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    inputs: tuple[str, ...] = ()
    fmt: str = "long"
    ingest: IngestConfig = field(default_factory=IngestConfig)
    similarity: SimilarityConfig = field(default_factory=SimilarityConfig)
    linkage: str = "average"
    alpha_system: float = 0.007
    alpha_sensor: float = 0.05
    alpha_rca: float = 0.15
    out_dir: str = "lidd-out"
    jobs: int = 1
    seed: int = 0  # used by the generator path only

    def validate(self) -> None:
        self.ingest.validate()
        self.similarity.validate()
        if self.fmt not in ("long", "wide"):
            raise ConfigError(f"format: unknown value {self.fmt!r}")
        if self.linkage not in ("average", "single", "complete"):
            raise ConfigError(f"linkage: unknown value {self.linkage!r}")
        for name in ("alpha_system", "alpha_sensor", "alpha_rca"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name}: must be >= 0")
        if self.jobs < 1:
            raise ConfigError("jobs: must be >= 1")

    def echo(self) -> dict:
        """Everything that influences results (excludes jobs and paths)."""
        return {
            "format": self.fmt,
            "resample_interval_s": self.ingest.resample_interval,
            "aggregator": self.ingest.aggregator,
            "despike_window": self.ingest.despike_window,
            "max_gap_fill": self.ingest.max_gap_fill,
            "min_coverage": self.ingest.min_coverage,
            "min_overlap": self.similarity.min_overlap,
            "undefined_policy": self.similarity.undefined_policy,
            "linkage": self.linkage,
            "alpha_system": self.alpha_system,
            "alpha_sensor": self.alpha_sensor,
            "alpha_rca": self.alpha_rca,
        }


@dataclass
class PipelineResult:
    report: AnalysisReport
    frames: list[SensorFrame]
    maps: dict[str, SimilarityMap]
    system_tree: LinkageTree | None
    system_partition: ClusterPartition | None
    cluster_maps: list[ClusterSensorMap]


def ingest_inputs(cfg: RunConfig) -> tuple[list[SensorFrame], dict, list[dict]]:
    """Parse all inputs, grid them, and report warnings plus input digests."""
    if not cfg.inputs:
        raise InputFormatError("no input files given")
    paths = []
    for item in cfg.inputs:
        p = Path(item)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.csv")))
        elif p.exists():
            paths.append(p)
        else:
            raise InputFormatError(f"input not found: {p}")
    if not paths:
        raise InputFormatError("no csv files found under the given inputs")
    stats = ParseStats()
    parts = []
    for p in paths:
        cols = parse_columns(p, cfg.fmt, system_id=p.stem, stats=ParseStats())
        stats.merge(cols.stats)
        parts.append(cols)
    merged = parts[0] if len(parts) == 1 else merge_columns(parts, stats)
    frames = build_frames(merged, cfg.ingest)
    digests = [digest_file(p) for p in paths]
    warnings = {
        "parse": {
            "rows": stats.rows,
            "malformed": stats.malformed,
            "nonfinite": stats.nonfinite,
            "missing": stats.missing,
        }
    }
    if stats.malformed or stats.nonfinite:
        logger.warning(
            "ingest: skipped %d malformed and %d non-finite entries",
            stats.malformed,
            stats.nonfinite,
        )
    return frames, warnings, digests


def _map_worker(args) -> tuple[str, SimilarityMap]:
    frame, simcfg = args
    return frame.system_id, sensor_similarity_map(frame, simcfg)


def compute_maps(
    frames: list[SensorFrame], simcfg: SimilarityConfig, jobs: int = 1
) -> dict[str, SimilarityMap]:
    """Per-system similarity maps keyed by system id, in sorted id order."""
    ordered = sorted(frames, key=lambda f: f.system_id)
    if jobs > 1 and len(ordered) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            pairs = list(pool.map(_map_worker, [(f, simcfg) for f in ordered]))
    else:
        pairs = [_map_worker((f, simcfg)) for f in ordered]
    return dict(pairs)


def run_analysis(
    frames: list[SensorFrame],
    cfg: RunConfig,
    warnings: dict | None = None,
    input_digests: list[dict] | None = None,
) -> PipelineResult:
    """Analyze cleaned-or-raw frames end to end (cleaning applied here)."""
    cfg.validate()
    if len(frames) < 2:
        raise InputFormatError("insufficient systems: need at least 2 after ingestion")
    warnings = dict(warnings or {})
    frames = sorted(frames, key=lambda f: f.system_id)
    frames = [clean_frame(f, cfg.ingest) for f in frames]

    coverage_warnings = []
    for f in frames:
        for sensor, fraction in coverage_check(f, cfg.ingest.min_coverage):
            if fraction < cfg.ingest.min_coverage:
                coverage_warnings.append(
                    {"system": f.system_id, "sensor": sensor, "coverage": fraction}
                )
    warnings["coverage"] = coverage_warnings

    maps = compute_maps(frames, cfg.similarity, cfg.jobs)
    undefined = []
    for sid in sorted(maps):
        m = maps[sid]
        n_undefined = int((~m.valid).sum()) // 2
        if n_undefined:
            undefined.append({"system": sid, "undefined_pairs": n_undefined})
    warnings["undefined_correlations"] = undefined

    dist = system_distance_matrix(maps)
    tree = agglomerate(dist, cfg.linkage)
    partition = cut(tree, cfg.alpha_system)
    cmaps = cluster_sensor_maps(partition, maps)
    sensor_trees = [sensor_linkage_per_cluster(cm, cfg.linkage) for cm in cmaps]
    sensor_partitions = [cut(t, cfg.alpha_sensor) for t in sensor_trees]
    overall_map, overall_tree, overall_partition = overall_sensor_clustering(
        cmaps, cfg.alpha_sensor, cfg.linkage
    )
    divergence = build_report(cmaps, cfg.alpha_rca)

    report = AnalysisReport(
        config=cfg.echo(),
        inputs=input_digests or [],
        warnings=warnings,
        system_ids=[f.system_id for f in frames],
        sensor_ids=list(frames[0].sensor_ids),
        system_distances=dist,
        system_tree=tree,
        system_partition=partition,
        cluster_maps=cmaps,
        cluster_sensor_trees=sensor_trees,
        cluster_sensor_partitions=sensor_partitions,
        overall_map=overall_map,
        overall_tree=overall_tree,
        overall_partition=overall_partition,
        divergence=divergence,
    )
    return PipelineResult(
        report=report,
        frames=frames,
        maps=maps,
        system_tree=tree,
        system_partition=partition,
        cluster_maps=cmaps,
    )


def run_from_inputs(cfg: RunConfig) -> PipelineResult:
    frames, warnings, digests = ingest_inputs(cfg)
    return run_analysis(frames, cfg, warnings=warnings, input_digests=digests)
