"""Interior tents over dyadic boundary cells, and the kube partition.

A tent at level k collects the interior samples whose boundary projection
falls in the cell (nearest boundary sample, then that sample's cell) and
whose depth is below the level's height: (s^(-k) delta)^2 on the ball,
s^(-k) delta on the egg, both clipped at eps0.  A kube is its tent minus the
next level's tents, so kubes plus the residual (everything below every
level-0 tent) partition the interior samples exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dyadic import DyadicSystem
from .geometry import ModelDomain, SampleCloud, _egg_frame


@dataclass
class Tent:
    level: int
    index: int                 # cell index within the level
    members: np.ndarray        # sorted interior-sample indices
    volume: float


@dataclass
class Kube:
    level: int
    index: int
    members: np.ndarray
    volume: float
    center: np.ndarray         # interior point over the cell's ref point


@dataclass
class TentSystem:
    domain: ModelDomain
    system: DyadicSystem
    heights: np.ndarray        # effective depth cutoff per level
    tent_ids: np.ndarray       # (k_max+1, n_interior); -1 = not in any tent
    tents: list[list[Tent]]
    kubes: Optional[list[list[Kube]]]
    kube_level: Optional[np.ndarray]   # owning kube level per sample, -1 = residual
    residual_members: np.ndarray
    residual_volume: float

    def tent_volume(self, k: int, j: int) -> float:
        return self.tents[k][j].volume

    def iter_tents(self):
        for lvl in self.tents:
            yield from lvl

    def iter_kubes(self):
        if self.kubes is None:
            raise ValueError("kubes not built; call build_kubes first")
        for lvl in self.kubes:
            yield from lvl


def projection_cells(cloud: SampleCloud, system: DyadicSystem) -> np.ndarray:
    """Cell index of each interior sample's boundary projection, per level.

    The continuum projection is snapped to the nearest boundary sample in the
    quasi-metric; that sample's cell ids apply.
    """
    snap = nearest_boundary_sample(cloud)
    return system.level_ids[:, snap]


def nearest_boundary_sample(cloud: SampleCloud) -> np.ndarray:
    """Index of the boundary sample metrically nearest each interior
    sample's projection (cached on the cloud)."""
    if cloud._snap is None:
        from .geometry import pairwise_quasi_metric
        proj = cloud.interior_projection
        out = np.empty(cloud.n_interior, dtype=int)
        step = max(1, 10_000_000 // max(cloud.n_boundary, 1))
        for i0 in range(0, cloud.n_interior, step):
            i1 = min(i0 + step, cloud.n_interior)
            D = pairwise_quasi_metric(cloud.domain, proj[i0:i1], cloud.boundary)
            out[i0:i1] = np.argmin(D, axis=1)
        cloud._snap = out
    return cloud._snap


def level_heights(dom: ModelDomain, system: DyadicSystem) -> np.ndarray:
    """Effective tent depth per level: Lambda (ball) or delta (egg), capped
    at the tubular width eps0."""
    scales = system.delta * system.s ** (-np.arange(system.k_max + 1.0))
    heights = scales ** 2 if dom.kind == "ball" else scales
    return np.minimum(heights, dom.eps0)


def build_tents(system: DyadicSystem, cloud: SampleCloud) -> TentSystem:
    dom = cloud.domain
    heights = level_heights(dom, system)
    depth = cloud.interior_depth
    proj_ids = projection_cells(cloud, system)

    tent_ids = np.where(depth[None, :] < heights[:, None], proj_ids, -1)
    iw = cloud.interior_weights
    tents: list[list[Tent]] = []
    order = np.arange(cloud.n_interior)
    for k in range(system.k_max + 1):
        ncell = len(system.levels[k])
        vols = np.bincount(tent_ids[k][tent_ids[k] >= 0],
                           weights=iw[tent_ids[k] >= 0], minlength=ncell)
        lvl = []
        for j in range(ncell):
            members = order[tent_ids[k] == j]
            lvl.append(Tent(level=k, index=j, members=members,
                            volume=float(vols[j])))
        tents.append(lvl)
    residual = order[tent_ids[0] == -1]
    return TentSystem(domain=dom, system=system, heights=heights,
                      tent_ids=tent_ids, tents=tents, kubes=None,
                      kube_level=None, residual_members=residual,
                      residual_volume=float(iw[residual].sum()))


def kube_center(dom: ModelDomain, cloud: SampleCloud, ref_sample: int,
                height: float) -> np.ndarray:
    """Interior point halfway down the tent fiber over the cell's ref point."""
    p = cloud.boundary[ref_sample]
    if dom.kind == "ball":
        return p * (1.0 - height / 2.0)
    norm, _ = _egg_frame(dom, p.reshape(1, 2))
    return (p - (height / 2.0) * norm[0]).reshape(2)


def build_kubes(ts: TentSystem, cloud: SampleCloud) -> TentSystem:
    """Fill in kubes: tent minus next-level tents; deepest kube = tent."""
    system = ts.system
    iw = cloud.interior_weights
    k_max = system.k_max
    order = np.arange(cloud.n_interior)

    kube_level = np.full(cloud.n_interior, -1, dtype=int)
    kubes: list[list[Kube]] = []
    for k in range(k_max + 1):
        in_tent = ts.tent_ids[k] >= 0
        if k < k_max:
            mine = in_tent & (ts.tent_ids[k + 1] < 0)
        else:
            mine = in_tent
        kube_level[mine] = k
        ncell = len(system.levels[k])
        vols = np.bincount(ts.tent_ids[k][mine], weights=iw[mine],
                           minlength=ncell)
        lvl = []
        for j, cell in enumerate(system.levels[k]):
            members = order[mine & (ts.tent_ids[k] == j)]
            center = kube_center(ts.domain, cloud, cell.ref_point,
                                 ts.heights[k])
            lvl.append(Kube(level=k, index=j, members=members,
                            volume=float(vols[j]), center=center))
        kubes.append(lvl)
    ts.kubes = kubes
    ts.kube_level = kube_level
    return ts


def build_tent_systems(systems, cloud: SampleCloud,
                       with_kubes: bool = True) -> list[TentSystem]:
    out = []
    for syst in systems:
        ts = build_tents(syst, cloud)
        if with_kubes:
            ts = build_kubes(ts, cloud)
        out.append(ts)
    return out


def tents_to_dict(ts: TentSystem) -> dict:
    d = {
        "heights": ts.heights.tolist(),
        "residual": ts.residual_members.tolist(),
        "levels": [
            [{"j": t.index, "members": t.members.tolist()} for t in lvl]
            for lvl in ts.tents],
    }
    if ts.kubes is not None:
        d["kubes"] = [
            [{"j": q.index, "members": q.members.tolist(),
              "center": [q.center.real.tolist(), q.center.imag.tolist()]}
             for q in lvl]
            for lvl in ts.kubes]
    return d
