"""Sensor similarity maps and the inter-system distance matrix.

Per system, the map holds pairwise-complete Pearson correlations between
every sensor pair. Systems are then compared by the normalized Euclidean
distance between their maps: dist = sqrt(sum of squared elementwise
differences) / n_sensors, summed over cells valid in both maps.

The diagonal of every map is fixed to 1 and always valid, so identical
diagonals cancel in distances exactly as if they were excluded. Pairs
with too little joint coverage or zero variance are undefined; the
configured policy decides whether they carry a flagged zero score or an
unset score, and distances skip them either way.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from lidd import _core
from lidd.errors import ConfigError, ContractViolation
from lidd.ingest import SensorFrame

POLICY_ZERO_WITH_FLAG = "zero_with_flag"
POLICY_INVALIDATE = "invalidate"


@dataclass(frozen=True)
class SimilarityConfig:
    min_overlap: int = 24
    undefined_policy: str = POLICY_ZERO_WITH_FLAG

    def validate(self) -> None:
        if self.min_overlap < 3:
            raise ConfigError("min_overlap: must be >= 3")
        if self.undefined_policy not in (POLICY_ZERO_WITH_FLAG, POLICY_INVALIDATE):
            raise ConfigError(
                f"undefined_policy: unknown value {self.undefined_policy!r}"
            )


@dataclass(frozen=True)
class SimilarityMap:
    """Symmetric per-pair similarity scores with a validity mask."""

    sensor_ids: tuple[str, ...]
    scores: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        n = len(self.sensor_ids)
        if self.scores.shape != (n, n) or self.valid.shape != (n, n):
            raise ContractViolation("similarity map shape mismatch")
        if not np.array_equal(self.valid, self.valid.T):
            raise ContractViolation("validity mask must be symmetric")
        s_valid = self.scores[self.valid]
        sT_valid = self.scores.T[self.valid]
        if not np.array_equal(s_valid, sT_valid):
            raise ContractViolation("scores must be symmetric where valid")
        if not (np.all(np.diag(self.scores) == 1.0) and np.all(np.diag(self.valid))):
            raise ContractViolation("diagonal must be 1 and valid")
        if s_valid.size and (s_valid.min() < -1.0 or s_valid.max() > 1.0):
            raise ContractViolation("valid scores must lie in [-1, 1]")

    @property
    def n_sensors(self) -> int:
        return len(self.sensor_ids)

    def to_csv(self) -> str:
        lines = ["," + ",".join(self.sensor_ids)]
        for i, sid in enumerate(self.sensor_ids):
            cells = [
                repr(float(self.scores[i, j])) if self.valid[i, j] else ""
                for j in range(self.n_sensors)
            ]
            lines.append(sid + "," + ",".join(cells))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "SimilarityMap":
        # invalid cells come back as NaN; valid cells round-trip bit-exactly
        rows = [line.split(",") for line in text.strip().splitlines()]
        ids = tuple(rows[0][1:])
        n = len(ids)
        scores = np.full((n, n), np.nan)
        valid = np.zeros((n, n), dtype=bool)
        for i, row in enumerate(rows[1:]):
            for j, cell in enumerate(row[1:]):
                if cell != "":
                    scores[i, j] = float(cell)
                    valid[i, j] = True
        return cls(sensor_ids=ids, scores=scores, valid=valid)

    def to_json_dict(self) -> dict:
        vals = [
            float(self.scores[i, j]) if np.isfinite(self.scores[i, j]) else None
            for i in range(self.n_sensors)
            for j in range(self.n_sensors)
        ]
        return {
            "sensor_ids": list(self.sensor_ids),
            "scores": vals,
            "valid": self.valid.flatten().tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SimilarityMap":
        ids = tuple(d["sensor_ids"])
        n = len(ids)
        scores = np.array(
            [np.nan if v is None else float(v) for v in d["scores"]], dtype=np.float64
        ).reshape(n, n)
        valid = np.array(d["valid"], dtype=bool).reshape(n, n)
        return cls(sensor_ids=ids, scores=scores, valid=valid)


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric nonnegative distances with a zero diagonal."""

    item_ids: tuple[str, ...]
    dist: np.ndarray

    def __post_init__(self):
        n = len(self.item_ids)
        if self.dist.shape != (n, n):
            raise ContractViolation("distance matrix shape mismatch")
        if not np.array_equal(self.dist, self.dist.T):
            raise ContractViolation("distance matrix must be symmetric")
        if np.any(np.diag(self.dist) != 0.0):
            raise ContractViolation("distance matrix diagonal must be zero")
        if self.dist.min() < 0.0:
            raise ContractViolation("distances must be nonnegative")

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    def to_csv(self) -> str:
        lines = ["," + ",".join(self.item_ids)]
        for i, iid in enumerate(self.item_ids):
            cells = [repr(float(v)) for v in self.dist[i]]
            lines.append(iid + "," + ",".join(cells))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "DistanceMatrix":
        rows = [line.split(",") for line in text.strip().splitlines()]
        ids = tuple(rows[0][1:])
        dist = np.array([[float(c) for c in row[1:]] for row in rows[1:]])
        return cls(item_ids=ids, dist=dist)

    def to_json_dict(self) -> dict:
        return {
            "item_ids": list(self.item_ids),
            "dist": [float(v) for v in self.dist.flatten()],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "DistanceMatrix":
        ids = tuple(d["item_ids"])
        n = len(ids)
        dist = np.array(d["dist"], dtype=np.float64).reshape(n, n)
        return cls(item_ids=ids, dist=dist)


def pearson(x1, x2, pair_mask=None, min_overlap: int = 3) -> float | None:
    """Pearson correlation over jointly observed indices, or None.

    None (undefined) when fewer than min_overlap joint observations exist
    or either masked subvector is constant. min_overlap defaults to the
    statistical floor of 3; map construction passes the configured value.
    """
    a = np.asarray(x1, dtype=np.float64)
    b = np.asarray(x2, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ContractViolation("pearson: input vectors must share one length")
    if pair_mask is None:
        joint = np.ones(len(a), dtype=bool)
    else:
        joint = np.asarray(pair_mask, dtype=bool)
        if joint.shape != a.shape:
            raise ContractViolation("pearson: pair_mask length mismatch")
    values = np.column_stack([a, b])
    mask = np.column_stack([joint, joint])
    corr, _, defined = _core.pearson_pairs(values, mask, min_overlap)
    if not defined[0, 1]:
        return None
    return float(corr[0, 1])


def sensor_similarity_map(frame: SensorFrame, cfg: SimilarityConfig) -> SimilarityMap:
    """Pairwise-complete correlation map of one system's sensors."""
    cfg.validate()
    if frame.n_sensors < 2:
        raise ContractViolation("sensor_similarity_map: need at least 2 sensors")
    corr, _, defined = _core.pearson_pairs(frame.values, frame.mask, cfg.min_overlap)
    if cfg.undefined_policy == POLICY_INVALIDATE:
        corr = corr.copy()
        corr[~defined] = np.nan
    return SimilarityMap(sensor_ids=frame.sensor_ids, scores=corr, valid=defined)


def map_distance(a: SimilarityMap, b: SimilarityMap) -> float:
    """Normalized Euclidean distance between two maps.

    Cells invalid in either operand contribute zero; the normalization
    stays 1/n_sensors regardless, preserving the documented score scale.
    """
    if a.sensor_ids != b.sensor_ids:
        raise ContractViolation("map_distance: sensor orderings differ")
    both = a.valid & b.valid
    diff = np.where(both, a.scores - b.scores, 0.0)
    return float(np.sqrt(np.sum(diff * diff)) / a.n_sensors)


def row_distance(a: SimilarityMap, b: SimilarityMap, i: int) -> float:
    """map_distance restricted to row i of each map (same normalization)."""
    if a.sensor_ids != b.sensor_ids:
        raise ContractViolation("row_distance: sensor orderings differ")
    both = a.valid[i] & b.valid[i]
    diff = np.where(both, a.scores[i] - b.scores[i], 0.0)
    return float(np.sqrt(np.sum(diff * diff)) / a.n_sensors)


def system_distance_matrix(maps: Mapping[str, SimilarityMap]) -> DistanceMatrix:
    """All-pairs map distances between systems, in the given key order."""
    ids = tuple(maps.keys())
    if len(ids) < 2:
        raise ContractViolation("system_distance_matrix: need at least 2 systems")
    n = len(ids)
    dist = np.zeros((n, n), dtype=np.float64)
    seq = [maps[k] for k in ids]
    for i in range(n):
        for j in range(i + 1, n):
            d = map_distance(seq[i], seq[j])
            dist[i, j] = d
            dist[j, i] = d
    return DistanceMatrix(item_ids=ids, dist=dist)
