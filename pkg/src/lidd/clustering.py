"""Hierarchical agglomerative clustering of systems and sensors.

The merge tree is computed with the nearest-neighbor-chain algorithm
(O(n^2)), which is exact for the reducible linkages offered here
(average, single, complete). Raw merges are discovered out of height
order, so they are stably sorted by height and relabeled before being
exposed; the resulting tree is monotone.

Determinism: when several neighbors tie, the chain predecessor is
preferred (required for termination), then the lowest node index.

Flat partitions come from cutting the tree: items merged strictly below
the threshold share a cluster. Sensor-level clustering converts a
similarity map to distances by applying the normalized row distance to
every sensor pair of the map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lidd import _core
from lidd.errors import ContractViolation
from lidd.similarity import DistanceMatrix, SimilarityMap

LINKAGES = ("average", "single", "complete")


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class LinkageTree:
    """Agglomerative merge events; leaf i is node i, merge j creates node n+j."""

    item_ids: tuple[str, ...]
    merges: tuple[Merge, ...]

    def __post_init__(self):
        n = len(self.item_ids)
        if len(self.merges) != max(n - 1, 0):
            raise ContractViolation("linkage tree must contain n-1 merges")
        seen = set()
        prev = 0.0
        for j, m in enumerate(self.merges):
            if m.height < prev:
                raise ContractViolation("merge heights must be non-decreasing")
            prev = m.height
            for child in (m.left, m.right):
                if child in seen or not 0 <= child < n + j:
                    raise ContractViolation("invalid merge child index")
                seen.add(child)
        if self.merges and self.merges[-1].size != n:
            raise ContractViolation("final merge must contain all items")

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    def to_rows(self) -> list[tuple[int, int, float, int]]:
        return [(m.left, m.right, m.height, m.size) for m in self.merges]

    def to_csv(self) -> str:
        lines = ["left,right,height,size"]
        for m in self.merges:
            lines.append(f"{m.left},{m.right},{float(m.height)!r},{m.size}")
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "item_ids": list(self.item_ids),
            "merges": [
                {
                    "left": m.left,
                    "right": m.right,
                    "height": float(m.height),
                    "size": m.size,
                }
                for m in self.merges
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "LinkageTree":
        return cls(
            item_ids=tuple(d["item_ids"]),
            merges=tuple(
                Merge(m["left"], m["right"], float(m["height"]), m["size"])
                for m in d["merges"]
            ),
        )


@dataclass(frozen=True)
class ClusterPartition:
    """Flat clustering from a threshold cut; label i indexes clusters[i]."""

    item_ids: tuple[str, ...]
    labels: np.ndarray
    threshold: float
    clusters: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        if self.labels.shape != (len(self.item_ids),):
            raise ContractViolation("labels length mismatch")
        for label, members in enumerate(self.clusters):
            for m in members:
                if self.labels[self.item_ids.index(m)] != label:
                    raise ContractViolation("labels and clusters disagree")

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    def to_json_dict(self) -> dict:
        return {
            "threshold": float(self.threshold),
            "clusters": [list(members) for members in self.clusters],
        }


@dataclass(frozen=True)
class ClusterSensorMap:
    """Average sensor similarity map over one cluster's member systems."""

    cluster_label: int
    member_count: int
    map: SimilarityMap

    def __post_init__(self):
        if self.member_count < 1:
            raise ContractViolation("cluster must have at least one member")


def agglomerate(dist: DistanceMatrix, linkage: str = "average") -> LinkageTree:
    """Nearest-neighbor-chain merge tree over a distance matrix."""
    if linkage not in LINKAGES:
        raise ContractViolation(f"agglomerate: unknown linkage {linkage!r}")
    n = dist.n_items
    if n < 2:
        raise ContractViolation("agglomerate: need at least 2 items")
    raw = _core.nn_chain_merges(dist.dist, linkage)
    order = np.argsort(raw[:, 2], kind="stable")
    parent = list(range(n))
    node_id = list(range(n))
    sizes = [1] * n

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    merges = []
    for k, idx in enumerate(order):
        sa, sb, h = int(raw[idx, 0]), int(raw[idx, 1]), float(raw[idx, 2])
        ra, rb = find(sa), find(sb)
        ia, ib = node_id[ra], node_id[rb]
        left, right = (ia, ib) if ia < ib else (ib, ia)
        size = sizes[ra] + sizes[rb]
        merges.append(Merge(left=left, right=right, height=h, size=size))
        parent[rb] = ra
        node_id[ra] = n + k
        sizes[ra] = size
    return LinkageTree(item_ids=dist.item_ids, merges=tuple(merges))


def cut(tree: LinkageTree, threshold: float) -> ClusterPartition:
    """Partition items by merges strictly below the threshold.

    Clusters are ordered by descending size, then by their
    lexicographically smallest member; members are sorted within each
    cluster. Labels index that ordering.
    """
    if threshold < 0:
        raise ContractViolation("cut: threshold must be >= 0")
    n = tree.n_items
    parent = list(range(n))

    def find(x: int) -> int:
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    rep = {}
    for j, m in enumerate(tree.merges):
        if m.height >= threshold:
            break  # heights are monotone
        rl = rep.get(m.left, m.left)
        rr = rep.get(m.right, m.right)
        parent[find(rl)] = find(rr)
        rep[n + j] = find(rr)
    groups: dict[int, list[str]] = {}
    for i, item in enumerate(tree.item_ids):
        groups.setdefault(find(i), []).append(item)
    ordered = sorted(
        (sorted(members) for members in groups.values()),
        key=lambda ms: (-len(ms), ms[0]),
    )
    labels = np.empty(n, dtype=np.int64)
    index = {item: i for i, item in enumerate(tree.item_ids)}
    for label, members in enumerate(ordered):
        for m in members:
            labels[index[m]] = label
    return ClusterPartition(
        item_ids=tree.item_ids,
        labels=labels,
        threshold=float(threshold),
        clusters=tuple(tuple(ms) for ms in ordered),
    )


def cluster_sensor_maps(
    partition: ClusterPartition, maps: dict[str, SimilarityMap]
) -> list[ClusterSensorMap]:
    """Average member maps per cluster, cell-wise over valid entries."""
    missing = [i for i in partition.item_ids if i not in maps]
    if missing:
        raise ContractViolation(f"cluster_sensor_maps: no map for {missing}")
    out = []
    for label, members in enumerate(partition.clusters):
        member_maps = [maps[m] for m in members]
        ids = member_maps[0].sensor_ids
        for mm in member_maps[1:]:
            if mm.sensor_ids != ids:
                raise ContractViolation("cluster_sensor_maps: sensor orderings differ")
        n = len(ids)
        total = np.zeros((n, n))
        count = np.zeros((n, n), dtype=np.int64)
        for mm in member_maps:
            total += np.where(mm.valid, mm.scores, 0.0)
            count += mm.valid
        valid = count > 0
        scores = np.divide(total, count, out=np.zeros((n, n)), where=valid)
        np.clip(scores, -1.0, 1.0, out=scores)  # guard ulp overshoot of the mean
        scores[~valid] = np.nan
        np.fill_diagonal(scores, 1.0)
        out.append(
            ClusterSensorMap(
                cluster_label=label,
                member_count=len(members),
                map=SimilarityMap(sensor_ids=ids, scores=scores, valid=valid),
            )
        )
    return out


def map_row_distance_matrix(smap: SimilarityMap) -> DistanceMatrix:
    """Sensor-pair distances: normalized row distance within one map."""
    n = smap.n_sensors
    both = smap.valid[:, None, :] & smap.valid[None, :, :]
    diff = np.where(both, smap.scores[:, None, :] - smap.scores[None, :, :], 0.0)
    dist = np.sqrt(np.sum(diff * diff, axis=2)) / n
    np.fill_diagonal(dist, 0.0)
    return DistanceMatrix(item_ids=smap.sensor_ids, dist=dist)


def sensor_linkage_per_cluster(cmap: ClusterSensorMap, linkage: str = "average") -> LinkageTree:
    """Merge tree over one cluster's sensors via row distances of its map."""
    if cmap.map.n_sensors < 2:
        raise ContractViolation("sensor_linkage_per_cluster: need >= 2 sensors")
    return agglomerate(map_row_distance_matrix(cmap.map), linkage)


def overall_sensor_clustering(
    cmaps: list[ClusterSensorMap],
    alpha_sensor: float,
    linkage: str = "average",
) -> tuple[SimilarityMap, LinkageTree, ClusterPartition]:
    """Unweighted mean of cluster maps, then sensor linkage and cut.

    Every cluster counts once regardless of its member count.
    """
    if not cmaps:
        raise ContractViolation("overall_sensor_clustering: no cluster maps")
    ids = cmaps[0].map.sensor_ids
    for cm in cmaps[1:]:
        if cm.map.sensor_ids != ids:
            raise ContractViolation("overall_sensor_clustering: sensor orderings differ")
    n = len(ids)
    total = np.zeros((n, n))
    count = np.zeros((n, n), dtype=np.int64)
    for cm in cmaps:
        total += np.where(cm.map.valid, cm.map.scores, 0.0)
        count += cm.map.valid
    valid = count > 0
    scores = np.divide(total, count, out=np.zeros((n, n)), where=valid)
    np.clip(scores, -1.0, 1.0, out=scores)
    scores[~valid] = np.nan
    np.fill_diagonal(scores, 1.0)
    overall = SimilarityMap(sensor_ids=ids, scores=scores, valid=valid)
    tree = agglomerate(map_row_distance_matrix(overall), linkage)
    partition = cut(tree, alpha_sensor)
    return overall, tree, partition
