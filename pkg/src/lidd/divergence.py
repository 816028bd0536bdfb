"""Root-cause scoring of inter-cluster divergence.

For every ordered cluster pair and every sensor, the divergence score is
the normalized row distance between the two cluster maps at that sensor's
row. Scores are summed over all other clusters into a per-cluster
aggregate, and sensors whose aggregate exceeds the threshold are flagged
as root-cause candidates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lidd.clustering import ClusterSensorMap
from lidd.errors import ContractViolation


@dataclass(frozen=True)
class DivergenceReport:
    """Per-pair scores, per-cluster aggregates and threshold flags."""

    cluster_labels: tuple[int, ...]
    sensor_ids: tuple[str, ...]
    pair_scores: np.ndarray  # (C, C, S), symmetric in the cluster axes
    aggregate: np.ndarray  # (C, S)
    flags: np.ndarray  # (C, S) bool
    alpha_phi: float

    def __post_init__(self):
        C = len(self.cluster_labels)
        S = len(self.sensor_ids)
        if self.pair_scores.shape != (C, C, S):
            raise ContractViolation("pair_scores shape mismatch")
        if self.aggregate.shape != (C, S) or self.flags.shape != (C, S):
            raise ContractViolation("aggregate/flags shape mismatch")
        if np.any(self.pair_scores < 0):
            raise ContractViolation("divergence scores must be nonnegative")
        for c in range(C):
            if np.any(self.pair_scores[c, c] != 0.0):
                raise ContractViolation("self divergence must be zero")
        if not np.array_equal(self.aggregate, self.pair_scores.sum(axis=1)):
            raise ContractViolation("aggregate must equal the pair-score row sums")
        if not np.array_equal(self.flags, self.aggregate > self.alpha_phi):
            raise ContractViolation("flags must equal aggregate > alpha_phi")

    def to_json_dict(self) -> dict:
        return {
            "cluster_labels": list(self.cluster_labels),
            "sensor_ids": list(self.sensor_ids),
            "pair_scores": [float(v) for v in self.pair_scores.flatten()],
            "aggregate": [float(v) for v in self.aggregate.flatten()],
            "flags": self.flags.flatten().tolist(),
            "alpha_phi": float(self.alpha_phi),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "DivergenceReport":
        labels = tuple(d["cluster_labels"])
        sensors = tuple(d["sensor_ids"])
        C, S = len(labels), len(sensors)
        return cls(
            cluster_labels=labels,
            sensor_ids=sensors,
            pair_scores=np.array(d["pair_scores"], dtype=np.float64).reshape(C, C, S),
            aggregate=np.array(d["aggregate"], dtype=np.float64).reshape(C, S),
            flags=np.array(d["flags"], dtype=bool).reshape(C, S),
            alpha_phi=float(d["alpha_phi"]),
        )

    def pair_rows(self) -> list[tuple[int, int, str, float]]:
        rows = []
        for a, la in enumerate(self.cluster_labels):
            for b, lb in enumerate(self.cluster_labels):
                if a == b:
                    continue
                for s, sid in enumerate(self.sensor_ids):
                    rows.append((la, lb, sid, float(self.pair_scores[a, b, s])))
        return rows

    def aggregate_rows(self) -> list[tuple[int, str, float, bool]]:
        rows = []
        for a, la in enumerate(self.cluster_labels):
            for s, sid in enumerate(self.sensor_ids):
                rows.append(
                    (la, sid, float(self.aggregate[a, s]), bool(self.flags[a, s]))
                )
        return rows


def pairwise_divergence(cmaps: list[ClusterSensorMap]) -> np.ndarray:
    """(C, C, S) row distances between cluster maps, zero on the diagonal."""
    if len(cmaps) < 2:
        raise ContractViolation("pairwise_divergence: need at least 2 cluster maps")
    ids = cmaps[0].map.sensor_ids
    for cm in cmaps[1:]:
        if cm.map.sensor_ids != ids:
            raise ContractViolation("pairwise_divergence: sensor orderings differ")
    C = len(cmaps)
    S = len(ids)
    out = np.zeros((C, C, S), dtype=np.float64)
    for a in range(C):
        ma = cmaps[a].map
        for b in range(a + 1, C):
            mb = cmaps[b].map
            both = ma.valid & mb.valid
            diff = np.where(both, ma.scores - mb.scores, 0.0)
            psi = np.sqrt(np.sum(diff * diff, axis=1)) / S
            out[a, b] = psi
            out[b, a] = psi
    return out


def aggregate_divergence(pair_scores: np.ndarray) -> np.ndarray:
    """Sum each cluster's scores over all other clusters (self term is zero)."""
    if pair_scores.ndim != 3 or pair_scores.shape[0] != pair_scores.shape[1]:
        raise ContractViolation("aggregate_divergence: expected (C, C, S) scores")
    return pair_scores.sum(axis=1)


def flag_root_causes(aggregate: np.ndarray, alpha_phi: float) -> np.ndarray:
    """Strictly-greater-than threshold flags per cluster and sensor."""
    if alpha_phi < 0:
        raise ContractViolation("flag_root_causes: alpha_phi must be >= 0")
    return aggregate > alpha_phi


def build_report(
    cmaps: list[ClusterSensorMap], alpha_phi: float
) -> DivergenceReport:
    """Full divergence report; a single cluster yields all-zero scores."""
    ids = cmaps[0].map.sensor_ids
    if len(cmaps) == 1:
        C, S = 1, len(ids)
        pair = np.zeros((C, C, S))
    else:
        pair = pairwise_divergence(cmaps)
    agg = aggregate_divergence(pair)
    flags = flag_root_causes(agg, alpha_phi)
    return DivergenceReport(
        cluster_labels=tuple(cm.cluster_label for cm in cmaps),
        sensor_ids=ids,
        pair_scores=pair,
        aggregate=agg,
        flags=flags,
        alpha_phi=float(alpha_phi),
    )
