"""Dyadic systems on the sampled boundary.

A system is a hierarchy of cells over the boundary samples: at each level k
a maximal separated net at radius s^(-k) * delta is chosen greedily (the
permutation fixed by the seed; coarser net points are re-used so nets nest),
each sample is assigned at the deepest level to its nearest net point, and
coarser memberships are unions over descendants.  Partition and nesting are
then exact by construction; the comparability constants of the cells to
metric balls are measured, not assumed.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ResolutionExceeded
from .geometry import SampleCloud, pairwise_quasi_metric


@dataclass
class DyadicCell:
    level: int
    index: int                 # position within the level
    ref_point: int             # boundary-sample index of the net point
    parent: Optional[int]      # parent's index within level-1, None at level 0
    children: list[int]
    members: np.ndarray        # sorted boundary-sample indices
    surface_measure: float


@dataclass
class DyadicSystem:
    s: float
    delta: float
    k_max: int
    seed: int
    levels: list[list[DyadicCell]]
    level_ids: np.ndarray      # (k_max+1, n_boundary) cell index per sample
    nets: list[np.ndarray]     # sorted net sample indices per level
    c_sandwich: float
    C_sandwich: float
    max_children: int

    def radius(self, k: int) -> float:
        return self.delta * self.s ** (-k)

    def cell_of(self, k: int, sample: int) -> DyadicCell:
        return self.levels[k][int(self.level_ids[k, sample])]


@dataclass
class AdjacentFamily:
    systems: list[DyadicSystem]

    @property
    def n_systems(self) -> int:
        return len(self.systems)


@dataclass
class AdjacencyReport:
    trials: int
    successes: int
    success_rate: float
    worst_factor: float        # max comparability factor among successes
    factor_threshold: float


def _greedy_net(D: np.ndarray, order: np.ndarray, r: float) -> np.ndarray:
    """Maximal r-separated subset scanning `order`; kept points are pairwise
    > r apart and every point is within <= r of a kept one."""
    alive = np.ones(D.shape[0], dtype=bool)
    kept = []
    for i in order:
        if alive[i]:
            kept.append(i)
            alive &= D[i] > r
    return np.sort(np.asarray(kept, dtype=int))


def build_net(cloud: SampleCloud, k: int, s: float, delta: float,
              seed: int) -> np.ndarray:
    """Greedy maximal s^(-k)*delta-separated subset of the boundary samples."""
    if s <= 1:
        raise ValueError("s must exceed 1")
    if delta <= 0:
        raise ValueError("delta must be positive")
    D = cloud.boundary_metric_matrix()
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    order = rng.permutation(cloud.n_boundary)
    return _greedy_net(D, order, delta * s ** (-k))


def _resolution_estimate(D: np.ndarray) -> float:
    off = D + np.diag(np.full(D.shape[0], np.inf))
    return float(np.median(off.min(axis=1)))


def build_system(cloud: SampleCloud, s: float, delta: float, k_max: int,
                 seed: int, strict: bool = False) -> DyadicSystem:
    """Build one dyadic system (nets, nested cells, sandwich constants)."""
    if s <= 1 or delta <= 0 or k_max < 0:
        raise ValueError("need s > 1, delta > 0, k_max >= 0")
    D = cloud.boundary_metric_matrix()
    B = cloud.n_boundary
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    perm = rng.permutation(B)

    r_deep = delta * s ** (-k_max)
    res = _resolution_estimate(D)
    if r_deep < res:
        msg = (f"deepest net radius {r_deep:.3g} is below the sample "
               f"resolution {res:.3g}; deep cells saturate into singletons")
        if strict:
            raise ResolutionExceeded(msg)
        warnings.warn(msg, ResolutionExceeded)

    # nested nets: previous net points scan first, so net_k subset net_{k+1}
    nets: list[np.ndarray] = []
    prev = np.empty(0, dtype=int)
    for k in range(k_max + 1):
        in_prev = np.zeros(B, dtype=bool)
        in_prev[prev] = True
        order = np.concatenate([prev, perm[~in_prev[perm]]])
        net = _greedy_net(D, order, delta * s ** (-k))
        nets.append(net)
        prev = net

    # parents: nearest coarser net point, ties to the smaller sample index
    # (nets are sorted, so argmin already picks the smaller index on ties)
    parent_pos: list[Optional[np.ndarray]] = [None]
    for k in range(1, k_max + 1):
        sub = D[np.ix_(nets[k], nets[k - 1])]
        parent_pos.append(np.argmin(sub, axis=1))

    # deepest-level assignment, then ancestors
    deep = np.argmin(D[:, nets[k_max]], axis=1)        # position in deepest net
    level_ids = np.empty((k_max + 1, B), dtype=int)
    level_ids[k_max] = deep
    pos = deep
    for k in range(k_max, 0, -1):
        pos = parent_pos[k][pos]
        level_ids[k - 1] = pos

    bw = cloud.boundary_weights
    levels: list[list[DyadicCell]] = []
    for k in range(k_max + 1):
        cells = []
        for j, ref in enumerate(nets[k]):
            members = np.flatnonzero(level_ids[k] == j)
            par = int(parent_pos[k][j]) if k > 0 else None
            cells.append(DyadicCell(
                level=k, index=j, ref_point=int(ref), parent=par,
                children=[], members=members,
                surface_measure=float(bw[members].sum())))
        levels.append(cells)
    for k in range(1, k_max + 1):
        for cell in levels[k]:
            levels[k - 1][cell.parent].children.append(cell.index)
    max_children = max((len(c.children) for lvl in levels[:-1] for c in lvl),
                       default=0)

    c_sw, C_sw = _sandwich_constants(D, nets, levels, level_ids, s, delta)
    return DyadicSystem(s=s, delta=delta, k_max=k_max, seed=seed,
                        levels=levels, level_ids=level_ids, nets=nets,
                        c_sandwich=c_sw, C_sandwich=C_sw,
                        max_children=max_children)


def _sandwich_constants(D, nets, levels, level_ids, s, delta):
    """Measured sandwich constants: every member within C*r_k of the ref
    point, and the ball of radius c*r_k around the ref point inside the
    cell.  C ignores singleton cells (their member distance is zero)."""
    c_best = np.inf
    C_best = 0.0
    for k, cells in enumerate(levels):
        r_k = delta * s ** (-k)
        sub = D[nets[k]]                      # (n_net, B)
        ids = level_ids[k]
        for cell in cells:
            row = sub[cell.index]
            member = ids == cell.index
            if member.sum() > 1:
                C_best = max(C_best, row[member].max() / r_k)
            if (~member).any():
                c_best = min(c_best, row[~member].min() / r_k)
    if not np.isfinite(c_best):
        c_best = 1.0
    return float(c_best), float(C_best)


def build_adjacent_family(cloud: SampleCloud, s: float, delta: float,
                          k_max: int, N: int, base_seed: int,
                          strict: bool = False) -> AdjacentFamily:
    """N independently seeded systems (seeds base_seed .. base_seed+N-1)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return AdjacentFamily([
        build_system(cloud, s, delta, k_max, base_seed + i, strict=strict)
        for i in range(N)])


def verify_adjacency(cloud: SampleCloud, family: AdjacentFamily, trials: int,
                     seed: int, factor_threshold: float = 64.0,
                     r_range: Optional[tuple[float, float]] = None
                     ) -> AdjacencyReport:
    """Sample metric balls and check some system sandwiches each one.

    A trial draws a boundary sample z and a log-uniform radius r, then looks
    across all systems for a cell inside B(z, r) and a cell containing it,
    both with surface measure within `factor_threshold` of the ball's.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    D = cloud.boundary_metric_matrix()
    bw = cloud.boundary_weights
    sys0 = family.systems[0]
    if r_range is None:
        r_range = (sys0.delta * sys0.s ** (-sys0.k_max), sys0.delta)
    lo, hi = r_range

    counts = []   # per system, per level: surface measure of each cell
    for syst in family.systems:
        counts.append([np.bincount(syst.level_ids[k], weights=bw,
                                   minlength=len(syst.levels[k]))
                       for k in range(syst.k_max + 1)])

    successes = 0
    worst = 0.0
    for _ in range(trials):
        z = int(rng.integers(cloud.n_boundary))
        r = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        ball = D[z] <= r
        mu_ball = float(bw[ball].sum())
        best_inner = 0.0       # largest measure of a cell inside the ball
        best_outer = np.inf    # smallest measure of a cell containing it
        for syst, sys_counts in zip(family.systems, counts):
            for k in range(syst.k_max + 1):
                ids = syst.level_ids[k]
                in_ids = ids[ball]
                inside_w = np.bincount(in_ids, weights=bw[ball],
                                       minlength=len(sys_counts[k]))
                full = sys_counts[k]
                contained = inside_w >= full - 1e-12 * (1 + full)
                contained &= inside_w > 0
                if contained.any():
                    best_inner = max(best_inner, full[contained].max())
                uniq = np.unique(in_ids)
                if len(uniq) == 1:
                    best_outer = min(best_outer, full[uniq[0]])
        if best_inner <= 0 or not np.isfinite(best_outer):
            continue
        factor = max(mu_ball / best_inner, best_outer / mu_ball)
        if factor <= factor_threshold:
            successes += 1
            worst = max(worst, factor)
    return AdjacencyReport(trials=trials, successes=successes,
                           success_rate=successes / trials,
                           worst_factor=worst,
                           factor_threshold=factor_threshold)


# ---------------------------------------------------------------------------
# serialization


def system_to_dict(syst: DyadicSystem) -> dict:
    return {
        "s": syst.s,
        "delta": syst.delta,
        "k_max": syst.k_max,
        "seed": syst.seed,
        "c_sandwich": syst.c_sandwich,
        "C_sandwich": syst.C_sandwich,
        "max_children": syst.max_children,
        "levels": [
            [{"j": c.index, "ref": c.ref_point, "parent": c.parent,
              "members": c.members.tolist()} for c in lvl]
            for lvl in syst.levels],
    }


def system_to_json(syst: DyadicSystem) -> str:
    return json.dumps(system_to_dict(syst), sort_keys=True,
                      separators=(",", ":"))


def system_from_dict(cloud: SampleCloud, obj: dict) -> DyadicSystem:
    k_max = int(obj["k_max"])
    B = cloud.n_boundary
    bw = cloud.boundary_weights
    levels = []
    level_ids = np.empty((k_max + 1, B), dtype=int)
    nets = []
    for k, lvl in enumerate(obj["levels"]):
        cells = []
        refs = []
        for c in lvl:
            members = np.asarray(c["members"], dtype=int)
            level_ids[k, members] = c["j"]
            refs.append(c["ref"])
            cells.append(DyadicCell(
                level=k, index=int(c["j"]), ref_point=int(c["ref"]),
                parent=None if c["parent"] is None else int(c["parent"]),
                children=[], members=members,
                surface_measure=float(bw[members].sum())))
        levels.append(cells)
        nets.append(np.asarray(refs, dtype=int))
    for k in range(1, k_max + 1):
        for cell in levels[k]:
            levels[k - 1][cell.parent].children.append(cell.index)
    return DyadicSystem(
        s=float(obj["s"]), delta=float(obj["delta"]), k_max=k_max,
        seed=int(obj["seed"]), levels=levels, level_ids=level_ids, nets=nets,
        c_sandwich=float(obj["c_sandwich"]),
        C_sandwich=float(obj["C_sandwich"]),
        max_children=int(obj["max_children"]))
