"""Synthetic multi-system corpora with planted cluster structure.

Each group of systems shares a correlation template built as a convex
combination of correlation matrices (each PSD, so the combination is):

* a broad component over every sensor except a designated weakly coupled
  hub sensor, which keeps most correlations strong (strong correlations
  estimate with little variance, so within-group map distances stay low);
* an instrument block strengthening one subset plus its hub coupling,
  giving the hub a moderate coupling level that divergence injections
  can target;
* a group-specific sign-pattern component (1-b) I + b v v^T with a
  deterministic per-group sign vector v. Two groups' patterns disagree on
  roughly half of all cells, so the groups sit near-equidistant from each
  other, and the per-row share of the separation stays small, which keeps
  divergence baselines in unperturbed clusters low.

role_templates builds an alternative, more legible scheme with named
sensor roles (a tight pair, two instrument blocks, a hub, an isolated
sensor) for structure-oriented demos and tests.

Divergence injections flip a chosen sensor's couplings inside one group
via the congruence R -> (1-m) R + m D R D with D = diag(1,..,-1,..,1),
which preserves positive semidefiniteness for any magnitude in [0, 1].

Sampling draws correlated Gaussian series per system (independent across
systems, shared template within a group), adds white noise, applies a
per-sensor affine scale/offset, and drops cells at the missing rate. The
whole corpus is a deterministic function of the seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from lidd.errors import ConfigError
from lidd.ingest import SensorFrame, format_timestamp

DEFAULT_START_EPOCH = 1704067200  # 2024-01-01T00:00:00Z

# convex weights of the default (pattern) template components
W_HUB_TIER = 0.10  # all-sensor component: the hub's only broad coupling
W_BROAD = 0.42  # every sensor except the hub
W_HUB_BLOCK = 0.22  # instrument block + hub
W_PATTERN = 0.16  # group-specific sign pattern
PATTERN_BETA = 0.5

# role-template scheme (structure-oriented corpora)
ROLE_W_STRUCT = 0.40
ROLE_W_COUPLE = 0.20
ROLE_W_GLOBAL = 0.12
ROLE_W_WINDOW = 0.18
ROLE_R_PAIR = 0.97
ROLE_R_BLOCK = 0.93
ROLE_R_PAIR_COUPLE = 0.72
ROLE_R_HUB_COUPLE = 0.62
ROLE_R_GLOBAL = 0.5
ROLE_R_WINDOW = 0.8

_PATTERN_ENTROPY = 987654321  # fixed: templates are design constants
_MAX_PATTERN_WEIGHT = 1.0 - (W_HUB_TIER + W_BROAD + W_HUB_BLOCK)  # 0.26


@dataclass(frozen=True)
class SensorRoles:
    pair: tuple[int, ...]
    isolated: tuple[int, ...]
    hub: tuple[int, ...]
    block_a: tuple[int, ...]
    block_b: tuple[int, ...]


@dataclass(frozen=True)
class SyntheticSpec:
    n_systems: int = 36
    n_sensors: int = 12
    n_samples: int = 2880
    n_groups: int = 5
    group_sizes: tuple[int, ...] | None = None
    templates: tuple | None = None  # explicit per-group correlation matrices
    injections: tuple[tuple[int, int, float], ...] = ()  # (group, sensor, magnitude)
    noise: float = 0.1
    missing_rate: float = 0.0
    pattern_weight: float = W_PATTERN  # group-separation strength
    seed: int = 0
    start_epoch: int = DEFAULT_START_EPOCH
    step: int = 3600

    def validate(self) -> None:
        for name in ("n_systems", "n_sensors", "n_samples", "n_groups"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be a positive integer")
        if self.n_groups > self.n_systems:
            raise ConfigError("n_groups: must not exceed n_systems")
        if not 0.0 <= self.missing_rate <= 1.0:
            raise ConfigError("missing_rate: must lie in [0, 1]")
        if self.noise < 0.0:
            raise ConfigError("noise: must be >= 0")
        if not 0.0 < self.pattern_weight <= _MAX_PATTERN_WEIGHT:
            raise ConfigError(
                f"pattern_weight: must lie in (0, {_MAX_PATTERN_WEIGHT}]"
            )
        if self.group_sizes is not None:
            if len(self.group_sizes) != self.n_groups:
                raise ConfigError("group_sizes: need one size per group")
            if any(s < 1 for s in self.group_sizes):
                raise ConfigError("group_sizes: sizes must be positive")
            if sum(self.group_sizes) != self.n_systems:
                raise ConfigError("group_sizes: sizes must sum to n_systems")
        for g, s, m in self.injections:
            if not 0 <= g < self.n_groups:
                raise ConfigError(f"injections: group {g} out of range")
            if not 0 <= s < self.n_sensors:
                raise ConfigError(f"injections: sensor {s} out of range")
            if not 0.0 <= m <= 1.0:
                raise ConfigError("injections: magnitude must lie in [0, 1]")
        if self.step < 1:
            raise ConfigError("step: must be a positive duration")

    def sizes(self) -> tuple[int, ...]:
        if self.group_sizes is not None:
            return tuple(self.group_sizes)
        base = self.n_systems // self.n_groups
        extra = self.n_systems % self.n_groups
        return tuple(base + (1 if g < extra else 0) for g in range(self.n_groups))

    def system_ids(self) -> list[str]:
        return [f"SYS{k:02d}" for k in range(self.n_systems)]

    def sensor_ids(self) -> list[str]:
        return [f"s{i + 1:02d}" for i in range(self.n_sensors)]

    def group_of(self) -> list[int]:
        out = []
        for g, size in enumerate(self.sizes()):
            out.extend([g] * size)
        return out


def sensor_roles(n_sensors: int) -> SensorRoles:
    pair = tuple(i for i in (0, 1) if i < n_sensors)
    isolated = (2,) if n_sensors > 2 else ()
    hub = (3,) if n_sensors > 3 else ()
    rest = list(range(4, n_sensors))
    half = (len(rest) + 1) // 2
    return SensorRoles(
        pair=pair,
        isolated=isolated,
        hub=hub,
        block_a=tuple(rest[:half]),
        block_b=tuple(rest[half:]),
    )


def _block_matrix(n: int, blocks: list[tuple[tuple[int, ...], float]]) -> np.ndarray:
    out = np.eye(n)
    for members, r in blocks:
        for i in members:
            for j in members:
                if i != j:
                    out[i, j] = r
    return out


def _window(n: int, g: int) -> tuple[int, ...]:
    width = max(2, (5 * n) // 12)
    stride = max(1, n // 6)
    start = (g * stride) % n
    return tuple((start + k) % n for k in range(min(width, n)))


def _pattern_vectors(n_sensors: int, n_groups: int) -> list[np.ndarray]:
    """Deterministic per-group sign vectors, pairwise distinct patterns."""
    out: list[np.ndarray] = []
    attempt = 0
    while len(out) < n_groups:
        if attempt > 1000:
            raise ConfigError(
                "n_groups: too many groups for distinct sign patterns "
                f"over {n_sensors} sensors"
            )
        seq = np.random.SeedSequence(_PATTERN_ENTROPY, spawn_key=(len(out), attempt))
        v = np.where(np.random.default_rng(seq).random(n_sensors) < 0.5, -1.0, 1.0)
        # the pattern matrix is v v^T, so v and -v collide; compare canonically
        canon = v * v[0]
        if any(np.array_equal(canon, prev * prev[0]) for prev in out):
            attempt += 1
            continue
        out.append(v)
        attempt = 0
    return out


def default_templates(
    n_sensors: int, n_groups: int, pattern_weight: float = W_PATTERN
) -> list[np.ndarray]:
    """Per-group correlation templates; see the module docstring.

    Convex combination: hub-tier global + broad non-hub + instrument
    block with hub coupling + per-group sign pattern + identity.
    pattern_weight sets the group separation (higher survives more
    missing data but raises divergence baselines between clusters).
    """
    roles = sensor_roles(n_sensors)
    hub = roles.hub
    non_hub = tuple(i for i in range(n_sensors) if i not in hub)
    j_all = _block_matrix(n_sensors, [(tuple(range(n_sensors)), 1.0)])
    j_broad = _block_matrix(n_sensors, [(non_hub, 1.0)])
    j_hub_block = _block_matrix(n_sensors, [(hub + roles.block_a, 1.0)])
    w_rest = 1.0 - (W_HUB_TIER + W_BROAD + W_HUB_BLOCK + pattern_weight)
    base = (
        W_HUB_TIER * j_all
        + W_BROAD * j_broad
        + W_HUB_BLOCK * j_hub_block
        + w_rest * np.eye(n_sensors)
    )
    out = []
    for v in _pattern_vectors(n_sensors, n_groups):
        pattern = PATTERN_BETA * np.outer(v, v) + (1.0 - PATTERN_BETA) * np.eye(n_sensors)
        out.append(base + pattern_weight * pattern)
    return out


def role_templates(n_sensors: int, n_groups: int) -> list[np.ndarray]:
    """Templates with pronounced sensor roles (pair, blocks, hub, isolated).

    Groups differ by a rotating strengthened window of sensors. Less
    separation headroom than default_templates, but the sensor-level
    cluster structure is legible: the pair merges first, each instrument
    block clusters together, the isolated sensor joins last.
    """
    roles = sensor_roles(n_sensors)
    struct_blocks = [
        (roles.pair, ROLE_R_PAIR),
        (roles.block_a, ROLE_R_BLOCK),
        (roles.block_b, ROLE_R_BLOCK),
    ]
    couple_blocks = [
        (roles.pair + roles.block_b, ROLE_R_PAIR_COUPLE),
        (roles.hub + roles.block_a, ROLE_R_HUB_COUPLE),
    ]
    r_struct = _block_matrix(n_sensors, struct_blocks)
    r_couple = _block_matrix(n_sensors, couple_blocks)
    r_global = _block_matrix(
        n_sensors, [(tuple(range(n_sensors)), ROLE_R_GLOBAL)]
    )
    w_rest = 1.0 - (ROLE_W_STRUCT + ROLE_W_COUPLE + ROLE_W_GLOBAL + ROLE_W_WINDOW)
    base = (
        ROLE_W_STRUCT * r_struct
        + ROLE_W_COUPLE * r_couple
        + ROLE_W_GLOBAL * r_global
        + w_rest * np.eye(n_sensors)
    )
    out = []
    for g in range(n_groups):
        r_win = _block_matrix(n_sensors, [(_window(n_sensors, g), ROLE_R_WINDOW)])
        out.append(base + ROLE_W_WINDOW * r_win)
    return out


def check_psd(template: np.ndarray, label: str) -> None:
    eigs = np.linalg.eigvalsh(template)
    if eigs.min() < -1e-8:
        raise ConfigError(
            f"templates: {label} is not positive semidefinite "
            f"(smallest eigenvalue {eigs.min():.3e})"
        )


def apply_injection(template: np.ndarray, sensor: int, magnitude: float) -> np.ndarray:
    d = np.ones(template.shape[0])
    d[sensor] = -1.0
    flipped = template * np.outer(d, d)
    return (1.0 - magnitude) * template + magnitude * flipped


def build_templates(spec: SyntheticSpec) -> list[np.ndarray]:
    spec.validate()
    if spec.templates is not None:
        if len(spec.templates) != spec.n_groups:
            raise ConfigError("templates: need one template per group")
        templates = [np.array(t, dtype=np.float64) for t in spec.templates]
        for g, t in enumerate(templates):
            if t.shape != (spec.n_sensors, spec.n_sensors):
                raise ConfigError(f"templates: template {g} has wrong shape")
    else:
        templates = default_templates(
            spec.n_sensors, spec.n_groups, spec.pattern_weight
        )
    for g, s, m in spec.injections:
        templates[g] = apply_injection(templates[g], s, m)
    for g, t in enumerate(templates):
        check_psd(t, f"group {g} template")
    return templates


def template_distances(templates: list[np.ndarray]) -> np.ndarray:
    """Normalized Euclidean distances between templates (all cells)."""
    G = len(templates)
    n = templates[0].shape[0]
    out = np.zeros((G, G))
    for a in range(G):
        for b in range(a + 1, G):
            diff = templates[a] - templates[b]
            d = math.sqrt(float(np.sum(diff * diff))) / n
            out[a, b] = out[b, a] = d
    return out


def ground_truth(spec: SyntheticSpec, templates: list[np.ndarray]) -> dict:
    phi = template_distances(templates)
    inter = phi[np.triu_indices(len(templates), 1)]
    min_inter = float(inter.min()) if inter.size else 0.0
    sensor_ids = spec.sensor_ids()
    return {
        "schema_version": 1,
        "seed": spec.seed,
        "n_systems": spec.n_systems,
        "n_sensors": spec.n_sensors,
        "n_samples": spec.n_samples,
        "n_groups": spec.n_groups,
        "group_sizes": list(spec.sizes()),
        "group_of_system": {
            sid: g for sid, g in zip(spec.system_ids(), spec.group_of())
        },
        "injections": [
            {"group": g, "sensor": sensor_ids[s], "magnitude": m}
            for g, s, m in spec.injections
        ],
        "noise": spec.noise,
        "missing_rate": spec.missing_rate,
        "template_phi": [[float(v) for v in row] for row in phi],
        "min_inter_template_phi": min_inter,
        "suggested_alpha_system": round(0.6 * min_inter, 9),
    }


def generate_arrays(spec: SyntheticSpec):
    """Per-system (system_id, values, mask) plus the ground-truth dict.

    values are (n_samples, n_sensors) float64 on the regular grid; mask
    marks cells that survived the missing-rate drop.
    """
    templates = build_templates(spec)
    truth = ground_truth(spec, templates)
    chols = [np.linalg.cholesky(t + 1e-8 * np.eye(spec.n_sensors)) for t in templates]
    offsets = 10.0 * (1.0 + np.arange(spec.n_sensors))
    scales = 1.0 + 0.25 * (np.arange(spec.n_sensors) % 4)
    groups = spec.group_of()
    children = np.random.SeedSequence(spec.seed).spawn(spec.n_systems)
    out = []
    for k, sid in enumerate(spec.system_ids()):
        rng = np.random.default_rng(children[k])
        z = rng.standard_normal((spec.n_samples, spec.n_sensors))
        signal = z @ chols[groups[k]].T
        if spec.noise > 0:
            signal = signal + spec.noise * rng.standard_normal(signal.shape)
        values = offsets + scales * signal
        if spec.missing_rate > 0:
            mask = rng.random((spec.n_samples, spec.n_sensors)) >= spec.missing_rate
        else:
            mask = np.ones((spec.n_samples, spec.n_sensors), dtype=bool)
        values = np.where(mask, values, 0.0)
        out.append((sid, values, mask))
    return out, truth


def frames_from_arrays(spec: SyntheticSpec, arrays) -> list[SensorFrame]:
    """SensorFrames equivalent to ingesting the written corpus at full precision."""
    sensor_ids = tuple(spec.sensor_ids())
    grid = spec.start_epoch + spec.step * np.arange(spec.n_samples, dtype=np.int64)
    return [
        SensorFrame(
            system_id=sid,
            sensor_ids=sensor_ids,
            grid=grid.copy(),
            values=values,
            mask=mask,
            step=spec.step,
        )
        for sid, values, mask in arrays
    ]


def write_corpus(spec: SyntheticSpec, out_dir) -> dict:
    """Write corpus.csv (long format) and truth.json; returns the truth dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    arrays, truth = generate_arrays(spec)
    sensor_ids = spec.sensor_ids()
    ts_strings = [
        format_timestamp(spec.start_epoch + spec.step * t)
        for t in range(spec.n_samples)
    ]
    with open(out / "corpus.csv", "w", encoding="utf-8", newline="") as f:
        f.write("timestamp,system,sensor,value\n")
        for sid, values, mask in arrays:
            chunks = []
            for t in range(spec.n_samples):
                ts = ts_strings[t]
                row_mask = mask[t]
                row_vals = values[t]
                for i in range(spec.n_sensors):
                    if row_mask[i]:
                        chunks.append(f"{ts},{sid},{sensor_ids[i]},{row_vals[i]:.6f}\n")
            f.write("".join(chunks))
    with open(out / "truth.json", "w", encoding="utf-8") as f:
        json.dump(truth, f, indent=2, sort_keys=True)
        f.write("\n")
    return truth
