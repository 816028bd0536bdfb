import math

import numpy as np
import pytest

from conftest import make_map, random_valid_map
from lidd.clustering import ClusterSensorMap
from lidd.divergence import (
    DivergenceReport,
    aggregate_divergence,
    build_report,
    flag_root_causes,
    pairwise_divergence,
)
from lidd.errors import ContractViolation


def cm(label, smap, members=1):
    return ClusterSensorMap(cluster_label=label, member_count=members, map=smap)


def invert_sensor(smap, i):
    d = np.ones(smap.n_sensors)
    d[i] = -1.0
    scores = smap.scores * np.outer(d, d)
    np.fill_diagonal(scores, 1.0)
    return make_map(scores, ids=smap.sensor_ids)


def test_identical_maps_zero(rng):
    smap = random_valid_map(rng, 5)
    psi = pairwise_divergence([cm(0, smap), cm(1, smap)])
    assert np.all(psi == 0.0)


def test_two_sensor_half_example():
    a = make_map([[1.0, 0.5], [0.5, 1.0]])
    b = make_map([[1.0, -0.5], [-0.5, 1.0]])
    psi = pairwise_divergence([cm(0, a), cm(1, b)])
    assert psi[0, 1, 0] == pytest.approx(0.5, abs=1e-12)
    assert psi[0, 1, 1] == pytest.approx(0.5, abs=1e-12)


def test_single_sensor_perturbation_structure(rng):
    # maps differing only in sensor i0's row/column: psi maximal at i0,
    # other sensors carry only the single cross-term with i0
    n = 4
    i0 = 2
    base = random_valid_map(rng, n)
    other = invert_sensor(base, i0)
    psi = pairwise_divergence([cm(0, base), cm(1, other)])[0, 1]
    deltas = 2.0 * np.abs(base.scores[i0])
    deltas[i0] = 0.0
    expected_i0 = math.sqrt(float(np.sum(deltas**2))) / n
    assert psi[i0] == pytest.approx(expected_i0, abs=1e-12)
    for j in range(n):
        if j == i0:
            continue
        assert psi[j] == pytest.approx(deltas[j] / n, abs=1e-12)
    assert psi.argmax() == i0


def test_pair_symmetry_nonneg_self_zero(rng):
    maps = [cm(k, random_valid_map(rng, 6)) for k in range(4)]
    psi = pairwise_divergence(maps)
    assert np.all(psi >= 0)
    for a in range(4):
        assert np.all(psi[a, a] == 0)
        for b in range(4):
            assert np.array_equal(psi[a, b], psi[b, a])


def test_aggregate_two_clusters_equals_pair(rng):
    maps = [cm(0, random_valid_map(rng, 5)), cm(1, random_valid_map(rng, 5))]
    psi = pairwise_divergence(maps)
    agg = aggregate_divergence(psi)
    assert np.array_equal(agg[0], psi[0, 1])
    assert np.array_equal(agg[1], psi[1, 0])


def test_aggregate_sums_rows():
    psi = np.zeros((3, 3, 2))
    psi[0, 1] = [0.1, 0.0]
    psi[1, 0] = [0.1, 0.0]
    psi[0, 2] = [0.3, 0.0]
    psi[2, 0] = [0.3, 0.0]
    agg = aggregate_divergence(psi)
    assert agg[0, 0] == pytest.approx(0.4, abs=1e-15)
    assert agg[0, 1] == 0.0


def test_aggregate_identical_clusters_zero(rng):
    smap = random_valid_map(rng, 4)
    maps = [cm(k, smap) for k in range(3)]
    agg = aggregate_divergence(pairwise_divergence(maps))
    assert np.all(agg == 0)


def test_flags_strict_comparison():
    agg = np.array([[0.16, 0.15]])
    flags = flag_root_causes(agg, 0.15)
    assert flags[0, 0] and not flags[0, 1]


def test_flags_monotone_in_threshold(rng):
    agg = rng.uniform(0, 0.5, size=(4, 6))
    prev = None
    for alpha in (0.05, 0.1, 0.2, 0.4):
        flags = flag_root_causes(agg, alpha)
        if prev is not None:
            assert np.all(flags <= prev)
        prev = flags


def test_scaling_property(rng):
    # scaling the map differences by c scales every psi by c
    n = 5
    base = random_valid_map(rng, n)
    direction = rng.uniform(-0.1, 0.1, size=(n, n))
    direction = (direction + direction.T) / 2
    np.fill_diagonal(direction, 0.0)
    for c in (1.0, 2.0, 3.5):
        other = make_map(np.clip(base.scores + c * direction, -1, 1))
        # keep within range so clipping never engages
        assert np.all(np.abs(base.scores + c * direction) <= 1.0 + 1e-12)
        psi = pairwise_divergence([cm(0, base), cm(1, other)])[0, 1]
        if c == 1.0:
            unit = psi
        else:
            assert np.allclose(psi, c * unit, rtol=1e-12, atol=1e-15)


def test_planted_root_cause_argmax(rng):
    for _ in range(10):
        n = 8
        base = random_valid_map(rng, n)
        i0 = int(rng.integers(0, n))
        maps = [cm(0, base), cm(1, invert_sensor(base, i0)), cm(2, base)]
        agg = aggregate_divergence(pairwise_divergence(maps))
        assert int(agg[1].argmax()) == i0


def test_report_invariants_and_round_trip(rng):
    maps = [cm(k, random_valid_map(rng, 4)) for k in range(3)]
    report = build_report(maps, alpha_phi=0.15)
    again = DivergenceReport.from_json_dict(report.to_json_dict())
    assert np.array_equal(again.pair_scores, report.pair_scores)
    assert np.array_equal(again.flags, report.flags)
    assert again.alpha_phi == report.alpha_phi


def test_single_cluster_report_zero(rng):
    report = build_report([cm(0, random_valid_map(rng, 4))], alpha_phi=0.15)
    assert np.all(report.aggregate == 0)
    assert not report.flags.any()


def test_requires_shared_sensor_order(rng):
    a = random_valid_map(rng, 3)
    b = random_valid_map(rng, 3, ids=("x", "y", "z"))
    with pytest.raises(ContractViolation):
        pairwise_divergence([cm(0, a), cm(1, b)])


def test_invalid_cells_skipped():
    valid = np.ones((3, 3), dtype=bool)
    valid[0, 2] = valid[2, 0] = False
    a = make_map(np.where(valid, [[1, 0.5, 0.5], [0.5, 1, 0.5], [0.5, 0.5, 1]], 0.0), valid)
    b = make_map([[1.0, 0.5, -0.9], [0.5, 1.0, 0.5], [-0.9, 0.5, 1.0]])
    psi = pairwise_divergence([cm(0, a), cm(1, b)])[0, 1]
    assert psi[0] == 0.0  # the only differing cell is invalid in a
    assert psi[1] == 0.0
