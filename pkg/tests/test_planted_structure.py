"""Corpus-level structure recovery on role-based synthetic data.

These mirror the qualitative outcomes the pipeline is meant to surface:
sensors with the same role cluster together across system clusters, and a
sensor whose couplings diverge everywhere is flagged in every cluster.
"""

import numpy as np

from lidd.clustering import (
    agglomerate,
    cluster_sensor_maps,
    cut,
    overall_sensor_clustering,
)
from lidd.divergence import build_report
from lidd.ingest import IngestConfig, clean_frame
from lidd.pipeline import compute_maps
from lidd.similarity import SimilarityConfig, system_distance_matrix
from lidd.synth import (
    SyntheticSpec,
    frames_from_arrays,
    generate_arrays,
    role_templates,
    sensor_roles,
)

ROLES = sensor_roles(12)
HUB = ROLES.hub[0]


def analyze(spec, k):
    arrays, truth = generate_arrays(spec)
    frames = [clean_frame(f, IngestConfig()) for f in frames_from_arrays(spec, arrays)]
    maps = compute_maps(frames, SimilarityConfig())
    tree = agglomerate(system_distance_matrix(maps))
    heights = [m.height for m in tree.merges]
    partition = cut(tree, 0.5 * (heights[-k] + heights[-(k - 1)]))
    return truth, maps, partition


def labels_of(partition, ids):
    index = {item: i for i, item in enumerate(partition.item_ids)}
    return [int(partition.labels[index[i]]) for i in ids]


def test_sensor_roles_cluster_together():
    # sensors measuring the same kind of quantity group in the overall
    # sensor dendrogram; the tightly coupled pair stays paired
    spec = SyntheticSpec(
        n_systems=8, n_sensors=12, n_samples=2880, n_groups=2,
        templates=tuple(role_templates(12, 2)), noise=0.1,
        missing_rate=0.05, seed=5,
    )
    truth, maps, partition = analyze(spec, 2)
    assert partition.n_clusters == 2
    cmaps = cluster_sensor_maps(partition, maps)
    overall, tree, _ = overall_sensor_clustering(cmaps, alpha_sensor=0.08)
    sensor_partition = cut(tree, 0.08)  # this corpus's structure scale
    ids = overall.sensor_ids
    block_a_labels = set(labels_of(sensor_partition, [ids[i] for i in ROLES.block_a]))
    block_b_labels = set(labels_of(sensor_partition, [ids[i] for i in ROLES.block_b]))
    pair_labels = set(labels_of(sensor_partition, [ids[i] for i in ROLES.pair]))
    assert len(block_a_labels) == 1
    assert len(block_b_labels) == 1
    assert len(pair_labels) == 1
    # the three groups are distinct structures, not one blob
    assert len(block_a_labels | block_b_labels | pair_labels) == 3
    iso_label = labels_of(sensor_partition, [ids[ROLES.isolated[0]]])[0]
    assert iso_label not in (block_a_labels | block_b_labels | pair_labels)


def test_globally_divergent_sensor_flags_in_all_clusters():
    # couplings of one shared sensor inverted in half the groups: its
    # aggregate divergence crosses the threshold in every cluster
    spec = SyntheticSpec(
        n_systems=24, n_sensors=12, n_samples=2880, n_groups=4,
        group_sizes=(6, 6, 6, 6), noise=0.1, missing_rate=0.05,
        pattern_weight=0.10, seed=1,
        injections=((0, HUB, 1.0), (1, HUB, 1.0)),
    )
    truth, maps, partition = analyze(spec, 4)
    assert partition.n_clusters == 4
    report = build_report(cluster_sensor_maps(partition, maps), alpha_phi=0.15)
    assert report.flags[:, HUB].all()
    assert np.all(report.aggregate[:, HUB] > 0.15)
