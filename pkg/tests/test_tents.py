"""Tents over dyadic cells and the kube partition of the interior."""

import numpy as np
import pytest

from bergtents.dyadic import build_system
from bergtents.geometry import (
    ModelDomain,
    defining_function,
    pairwise_quasi_metric,
    sample,
)
from bergtents.tents import (
    build_kubes,
    build_tent_systems,
    build_tents,
    level_heights,
    nearest_boundary_sample,
    tents_to_dict,
)


def test_level_heights_closed_form(ball1, egg2, cloud_ball1, cloud_egg2):
    sys_ball = build_system(cloud_ball1, 2.0, 1.5, 2, seed=4)
    h = level_heights(ball1, sys_ball)
    scales = 1.5 * 2.0 ** (-np.arange(3.0))
    assert h == pytest.approx(np.minimum(scales ** 2, ball1.eps0), rel=1e-14)
    assert h[0] == ball1.eps0          # 1.5^2 hits the tubular cap

    sys_egg = build_system(cloud_egg2, 4.0, 0.4, 2, seed=4)
    h = level_heights(egg2, sys_egg)
    scales = 0.4 * 4.0 ** (-np.arange(3.0))
    assert h == pytest.approx(np.minimum(scales, egg2.eps0), rel=1e-14)
    assert h[0] == egg2.eps0           # 0.4 > eps0 = 0.2


def test_tent_union_is_depth_cut(tents_ball1, cloud_ball1):
    depth = cloud_ball1.interior_depth
    for ts in tents_ball1:
        for k in range(ts.system.k_max + 1):
            in_any = ts.tent_ids[k] >= 0
            assert (in_any == (depth < ts.heights[k])).all()


def test_tent_nesting(tents_ball1):
    for ts in tents_ball1:
        syst = ts.system
        for k in range(syst.k_max):
            fine = ts.tent_ids[k + 1]
            inside = fine >= 0
            assert (ts.tent_ids[k][inside] >= 0).all()
            parents = np.array([c.parent for c in syst.levels[k + 1]])
            assert (ts.tent_ids[k][inside] == parents[fine[inside]]).all()


def test_kube_partition_exact(tents_ball1, cloud_ball1):
    n = cloud_ball1.n_interior
    for ts in tents_ball1:
        claimed = [ts.residual_members]
        for lvl in ts.kubes:
            claimed.extend(q.members for q in lvl)
        allidx = np.concatenate(claimed)
        assert len(allidx) == n
        assert (np.sort(allidx) == np.arange(n)).all()
        for k, lvl in enumerate(ts.kubes):
            for q in lvl:
                assert (ts.kube_level[q.members] == k).all()
        assert (ts.kube_level[ts.residual_members] == -1).all()


def test_volumes_additive(tents_ball1, cloud_ball1):
    iw = cloud_ball1.interior_weights
    total = iw.sum()
    for ts in tents_ball1:
        syst = ts.system
        kube_mass = sum(q.volume for lvl in ts.kubes for q in lvl)
        assert kube_mass + ts.residual_volume == pytest.approx(
            total, rel=1e-12)
        # each tent splits into its kube plus the child tents
        for k in range(syst.k_max):
            for j, cell in enumerate(syst.levels[k]):
                child = sum(ts.tents[k + 1][ch].volume
                            for ch in cell.children)
                assert ts.kubes[k][j].volume + child == pytest.approx(
                    ts.tents[k][j].volume, abs=1e-12 * max(total, 1.0))
        for t in ts.iter_tents():
            assert t.volume == pytest.approx(iw[t.members].sum(), rel=1e-12)


def test_residual_is_deep_remainder(tents_ball1, cloud_ball1):
    depth = cloud_ball1.interior_depth
    for ts in tents_ball1:
        assert (depth[ts.residual_members] >= ts.heights[0]).all()
        assert len(ts.residual_members) + int(
            (ts.tent_ids[0] >= 0).sum()) == cloud_ball1.n_interior


def test_kube_centers_ball(tents_ball1, cloud_ball1):
    ts = tents_ball1[0]
    for k, lvl in enumerate(ts.kubes):
        h = ts.heights[k]
        for q in lvl[:5]:
            ref = cloud_ball1.boundary[ts.system.levels[k][q.index].ref_point]
            assert q.center == pytest.approx(ref * (1 - h / 2), rel=1e-14)


def test_kube_centers_egg(egg2, cloud_egg2):
    syst = build_system(cloud_egg2, 4.0, 0.4, 2, seed=4)
    ts = build_kubes(build_tents(syst, cloud_egg2), cloud_egg2)
    for k, lvl in enumerate(ts.kubes):
        h = ts.heights[k]
        for q in lvl[:5]:
            ref = cloud_egg2.boundary[syst.levels[k][q.index].ref_point]
            assert np.linalg.norm(q.center - ref) == pytest.approx(
                h / 2, rel=1e-12)
            assert defining_function(egg2, q.center.reshape(1, 2))[0] < 0


def test_snap_cache_and_oracle(ball1):
    cloud = sample(ball1, 300, 200, seed=6)
    snap = nearest_boundary_sample(cloud)
    assert nearest_boundary_sample(cloud) is snap
    proj = cloud.interior_projection[:25]
    D = pairwise_quasi_metric(ball1, proj, cloud.boundary)
    direct = D.argmin(axis=1)
    assert (snap[:25] == direct).all()


def test_tents_to_dict_shape(tents_ball1):
    d = tents_to_dict(tents_ball1[0])
    syst = tents_ball1[0].system
    assert len(d["levels"]) == syst.k_max + 1
    assert len(d["kubes"]) == syst.k_max + 1
    for k, lvl in enumerate(d["levels"]):
        assert len(lvl) == len(syst.levels[k])
    import json
    json.dumps(d)


def test_iter_kubes_requires_build(cloud_ball1, family_ball1):
    ts = build_tents(family_ball1.systems[0], cloud_ball1)
    with pytest.raises(ValueError):
        list(ts.iter_kubes())
    ts = build_kubes(ts, cloud_ball1)
    assert sum(1 for _ in ts.iter_kubes()) == sum(
        len(lvl) for lvl in ts.kubes)
