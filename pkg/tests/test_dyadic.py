"""Dyadic cell systems: net oracle, partition and nesting invariants,
sandwich constants, serialization, adjacency of independent systems."""

import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bergtents.dyadic import (
    AdjacentFamily,
    build_adjacent_family,
    build_net,
    build_system,
    system_from_dict,
    system_to_json,
    verify_adjacency,
)
from bergtents.errors import ResolutionExceeded
from bergtents.geometry import sample


def _net_oracle(D, seed, r):
    # same seeded permutation, independent set-based greedy
    order = np.random.default_rng(
        np.random.SeedSequence(seed)).permutation(D.shape[0])
    kept = []
    for i in order:
        if all(D[i, j] > r for j in kept):
            kept.append(int(i))
    return sorted(kept)


def test_net_matches_independent_greedy(cloud_ball1):
    D = cloud_ball1.boundary_metric_matrix()
    for k, seed in [(0, 5), (2, 1), (3, 17)]:
        net = build_net(cloud_ball1, k, 8.0, 0.4, seed)
        assert net.tolist() == _net_oracle(D, seed, 0.4 * 8.0 ** (-k))


def test_net_separated_and_covering(cloud_ball1, cloud_egg2):
    for cloud, s, delta, k in [(cloud_ball1, 8.0, 0.4, 1),
                               (cloud_egg2, 4.0, 0.4, 1)]:
        D = cloud.boundary_metric_matrix()
        r = delta * s ** (-k)
        net = build_net(cloud, k, s, delta, seed=3)
        sub = D[np.ix_(net, net)]
        assert sub[~np.eye(len(net), dtype=bool)].min() > r
        assert D[:, net].min(axis=1).max() <= r


@given(seed=st.integers(0, 10_000), k=st.integers(0, 3))
@settings(max_examples=15, deadline=None)
def test_net_property_any_seed(cloud_ball1, seed, k):
    D = cloud_ball1.boundary_metric_matrix()
    r = 0.4 * 6.0 ** (-k)
    net = build_net(cloud_ball1, k, 6.0, 0.4, seed)
    sub = D[np.ix_(net, net)]
    assert sub[~np.eye(len(net), dtype=bool)].min() > r
    assert D[:, net].min(axis=1).max() <= r


def test_partition_and_nesting(family_ball1, cloud_ball1):
    B = cloud_ball1.n_boundary
    for syst in family_ball1.systems:
        for k in range(syst.k_max + 1):
            ids = syst.level_ids[k]
            counts = np.bincount(ids, minlength=len(syst.levels[k]))
            assert counts.sum() == B
            for cell in syst.levels[k]:
                assert (ids[cell.members] == cell.index).all()
                assert counts[cell.index] == len(cell.members)
                assert ids[cell.ref_point] == cell.index
        for k in range(1, syst.k_max + 1):
            parents = np.array([c.parent for c in syst.levels[k]])
            assert (parents[syst.level_ids[k]] == syst.level_ids[k - 1]).all()
            assert np.isin(syst.nets[k - 1], syst.nets[k]).all()


def test_children_mirror_parents(family_ball1):
    syst = family_ball1.systems[0]
    for k in range(1, syst.k_max + 1):
        seen = []
        for cell in syst.levels[k - 1]:
            for ch in cell.children:
                assert syst.levels[k][ch].parent == cell.index
                seen.append(ch)
        assert sorted(seen) == list(range(len(syst.levels[k])))
    widest = max(len(c.children)
                 for lvl in syst.levels[:-1] for c in lvl)
    assert syst.max_children == widest


def test_surface_measure_additive(family_ball1, cloud_ball1):
    total = cloud_ball1.boundary_weights.sum()
    syst = family_ball1.systems[0]
    for k in range(syst.k_max + 1):
        level_mass = sum(c.surface_measure for c in syst.levels[k])
        assert level_mass == pytest.approx(total, rel=1e-12)
    for cell in syst.levels[0]:
        child_mass = sum(syst.levels[1][ch].surface_measure
                         for ch in cell.children)
        assert child_mass == pytest.approx(cell.surface_measure, rel=1e-12)


def test_sandwich_constants_recomputed(family_ball1, cloud_ball1):
    D = cloud_ball1.boundary_metric_matrix()
    syst = family_ball1.systems[0]
    c_best, C_best = np.inf, 0.0
    for k in range(syst.k_max + 1):
        r_k = syst.radius(k)
        for cell in syst.levels[k]:
            dref = D[cell.ref_point]
            member = np.zeros(len(dref), dtype=bool)
            member[cell.members] = True
            if len(cell.members) > 1:
                C_best = max(C_best, dref[member].max() / r_k)
            if (~member).any():
                c_best = min(c_best, dref[~member].min() / r_k)
    assert syst.c_sandwich == pytest.approx(c_best, rel=1e-12)
    assert syst.C_sandwich == pytest.approx(C_best, rel=1e-12)
    assert syst.c_sandwich > 0
    assert syst.C_sandwich > 0


def test_cell_of_and_radius(family_ball1):
    syst = family_ball1.systems[0]
    assert syst.radius(2) == pytest.approx(0.4 * 8.0 ** (-2), rel=1e-15)
    for i in (0, 17, 512):
        cell = syst.cell_of(3, i)
        assert i in cell.members
        assert cell.level == 3


def test_serialization_roundtrip(family_ball1, cloud_ball1):
    syst = family_ball1.systems[0]
    blob = system_to_json(syst)
    back = system_from_dict(cloud_ball1, json.loads(blob))
    assert system_to_json(back) == blob
    assert (back.level_ids == syst.level_ids).all()
    assert all((a == b).all() for a, b in zip(back.nets, syst.nets))
    assert back.c_sandwich == syst.c_sandwich


def test_adjacency_improves_with_more_systems(cloud_ball1):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ResolutionExceeded)
        fam5 = build_adjacent_family(cloud_ball1, 2.0, 1.5, 5, N=5,
                                     base_seed=21)
    single = AdjacentFamily(fam5.systems[:1])
    r5 = verify_adjacency(cloud_ball1, fam5, trials=300, seed=77)
    r1 = verify_adjacency(cloud_ball1, single, trials=300, seed=77)
    assert r5.success_rate >= r1.success_rate
    assert r5.success_rate > 0.95
    assert 0 < r5.worst_factor <= r5.factor_threshold


def test_resolution_warning_and_strict(ball1):
    cl = sample(ball1, 80, 60, seed=1)
    with pytest.warns(ResolutionExceeded):
        build_system(cl, 8.0, 0.4, 6, seed=0)
    with pytest.raises(ResolutionExceeded):
        build_system(cl, 8.0, 0.4, 6, seed=0, strict=True)


def test_parameter_validation(cloud_ball1, family_ball1):
    with pytest.raises(ValueError):
        build_net(cloud_ball1, 0, 1.0, 0.4, 0)
    with pytest.raises(ValueError):
        build_net(cloud_ball1, 0, 8.0, 0.0, 0)
    with pytest.raises(ValueError):
        build_system(cloud_ball1, 8.0, 0.4, -1, 0)
    with pytest.raises(ValueError):
        build_adjacent_family(cloud_ball1, 8.0, 0.4, 2, N=0, base_seed=0)
    with pytest.raises(ValueError):
        verify_adjacency(cloud_ball1, family_ball1, trials=0, seed=0)
