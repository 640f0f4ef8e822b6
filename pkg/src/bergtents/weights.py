"""Weights on the interior cloud, averages, and weighted characteristics.

A weight is a positive value per interior sample.  The two characteristics
both combine the global product <sigma>_Omega <nu>_Omega^(p-1) with a
supremum of the same product over dyadic tents of every system of a family;
they differ in how the two terms are merged.  The tent supremum is restricted
to levels whose metric scale is below eps0: coarser tents are effectively the
whole domain and belong to the global term.
"""

from __future__ import annotations

import io
import json
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyRegion, NonIntegrable, SingularSample
from .geometry import ModelDomain, SampleCloud, boundary_distance
from .tents import TentSystem


@dataclass
class Weight:
    values: np.ndarray         # positive, per interior sample
    description: str
    alpha: Optional[float] = None   # boundary power, when known

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("weight values must be strictly positive finite")
        self.values = v


@dataclass
class WeightPair:
    p: float
    sigma: Weight
    nu: Weight

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)

    def dual(self) -> "WeightPair":
        """The dual pair (nu, p'): its own dual is (sigma, p) again."""
        return WeightPair(p=self.p_conj, sigma=self.nu, nu=self.sigma)


def make_pair(sigma: Weight, p: float) -> WeightPair:
    if not 1.0 < p < math.inf:
        raise ValueError("p must lie in (1, inf)")
    nu_vals = sigma.values ** (1.0 / (1.0 - p))
    nu = Weight(nu_vals, f"dual(p={p:g}) of {sigma.description}",
                alpha=None if sigma.alpha is None
                else -sigma.alpha / (p - 1.0))
    if sigma.alpha is not None and sigma.alpha >= p - 1.0:
        warnings.warn(
            f"alpha={sigma.alpha:g} >= p-1={p - 1:g}: the dual weight is "
            "non-integrable in the continuum and the characteristic is "
            "expected infinite", NonIntegrable)
    return WeightPair(p=p, sigma=sigma, nu=nu)


def one_weight(cloud: SampleCloud) -> Weight:
    return Weight(np.ones(cloud.n_interior), "one:")


def power_weight(cloud: SampleCloud, alpha: float) -> Weight:
    """sigma(z) = (1 - |z|^2)^alpha on the ball."""
    dom = cloud.domain
    if dom.kind != "ball":
        raise ValueError("power weight is defined on the ball")
    if alpha <= -1.0:
        raise ValueError("alpha must exceed -1 for local integrability")
    r2 = np.sum(np.abs(cloud.interior) ** 2, axis=1)
    return Weight((1.0 - r2) ** alpha, f"power:alpha={alpha:g}", alpha=alpha)


_EXPR_NAMES = {
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "abs": np.abs,
    "minimum": np.minimum, "maximum": np.maximum, "pi": math.pi,
}


def custom_weight(cloud: SampleCloud, expression: str) -> Weight:
    """Weight from an expression in r = |z| and d = dist(z, boundary)."""
    r = np.sqrt(np.sum(np.abs(cloud.interior) ** 2, axis=1))
    d = cloud.interior_depth
    env = dict(_EXPR_NAMES, r=r, d=d)
    values = np.broadcast_to(
        np.asarray(eval(expression, {"__builtins__": {}}, env), dtype=float),
        (cloud.n_interior,)).copy()
    return Weight(values, f"custom:{expression}")


def average(cloud: SampleCloud, f: np.ndarray, region: np.ndarray,
            weight: Optional[Weight] = None) -> float:
    """Mean of |f| over the region against (sigma) dV."""
    region = np.asarray(region, dtype=int)
    if region.size == 0:
        raise EmptyRegion("average over an empty region")
    w = cloud.interior_weights[region]
    if weight is not None:
        w = w * weight.values[region]
    total = w.sum()
    if total <= 0:
        raise EmptyRegion("region has zero measure")
    return float(np.sum(np.abs(np.asarray(f)[region]) * w) / total)


@dataclass
class CharacteristicReport:
    p: float
    value: float
    global_term: float         # <sigma><nu>^(p-1) over the whole domain
    tent_sup: float            # sup of the product over admissible tents
    witness: Optional[tuple[int, int, int]]   # (system, level, cell)
    skipped_empty: int
    bracket: float             # the two-term characteristic
    bp: float                  # max-form constant

    def to_json(self) -> str:
        return json.dumps({
            "p": self.p, "value": self.value,
            "global_term": self.global_term, "tent_sup": self.tent_sup,
            "witness": list(self.witness) if self.witness else None,
            "skipped_empty": self.skipped_empty,
            "bracket": self.bracket, "bp": self.bp,
        }, sort_keys=True, separators=(",", ":"))


def _tent_products(cloud: SampleCloud, pair: WeightPair,
                   tent_systems: Sequence[TentSystem]):
    """Product <sigma><nu>^(p-1) per tent, over admissible levels of every
    system; yields (value, (system, level, cell)) and counts empties."""
    iw = cloud.interior_weights
    sv = pair.sigma.values * iw
    nv = pair.nu.values * iw
    pm1 = pair.p - 1.0
    eps0 = cloud.domain.eps0
    skipped = 0
    best = -np.inf
    witness = None
    for si, ts in enumerate(tent_systems):
        scales = ts.system.delta * ts.system.s ** (-np.arange(ts.system.k_max + 1.0))
        for k in range(ts.system.k_max + 1):
            if scales[k] >= eps0:
                continue
            ids = ts.tent_ids[k]
            ok = ids >= 0
            ncell = len(ts.system.levels[k])
            vol = np.bincount(ids[ok], weights=iw[ok], minlength=ncell)
            ssum = np.bincount(ids[ok], weights=sv[ok], minlength=ncell)
            nsum = np.bincount(ids[ok], weights=nv[ok], minlength=ncell)
            empty = vol <= 0
            skipped += int(empty.sum())
            good = ~empty
            if not good.any():
                continue
            prod = (ssum[good] / vol[good]) * (nsum[good] / vol[good]) ** pm1
            j_rel = int(np.argmax(prod))
            if prod[j_rel] > best:
                best = float(prod[j_rel])
                witness = (si, k, int(np.flatnonzero(good)[j_rel]))
    return best, witness, skipped


def characteristic_bracket(cloud: SampleCloud, pair: WeightPair,
                           tent_systems: Sequence[TentSystem]
                           ) -> CharacteristicReport:
    """Two-term characteristic: global^(1/p) + p p' * tent_sup^max(1, 1/(p-1))."""
    iw = cloud.interior_weights
    vol = iw.sum()
    s_avg = float(np.sum(pair.sigma.values * iw) / vol)
    n_avg = float(np.sum(pair.nu.values * iw) / vol)
    global_term = s_avg * n_avg ** (pair.p - 1.0)
    sup, witness, skipped = _tent_products(cloud, pair, tent_systems)
    if skipped:
        warnings.warn(f"skipped {skipped} empty tents in the characteristic "
                      "supremum", stacklevel=2)
    if not np.isfinite(sup) or sup < 0:
        sup = 0.0
    expo = max(1.0, 1.0 / (pair.p - 1.0))
    bracket = global_term ** (1.0 / pair.p) \
        + pair.p * pair.p_conj * sup ** expo
    bp = max(global_term, sup)
    return CharacteristicReport(
        p=pair.p, value=bracket, global_term=global_term, tent_sup=sup,
        witness=witness, skipped_empty=skipped, bracket=bracket, bp=bp)


def characteristic_Bp(cloud: SampleCloud, pair: WeightPair,
                      tent_systems: Sequence[TentSystem]) -> float:
    """Max-form constant: max(global product, tent supremum)."""
    rep = characteristic_bracket(cloud, pair, tent_systems)
    return rep.bp


# ---------------------------------------------------------------------------
# sharp example family


def tent_scale_of(cloud: SampleCloud, anchor: np.ndarray,
                  lo: float, hi: float, iters: int = 48) -> np.ndarray:
    """Per-sample smallest tent scale over `anchor` containing the sample.

    Bisection of the tent membership predicate in delta, vectorized over
    samples; values clamp to [lo, hi].
    """
    from .geometry import pairwise_quasi_metric, boundary_projection
    dom = cloud.domain
    depth = cloud.interior_depth
    proj = cloud.interior_projection
    cap = pairwise_quasi_metric(dom, proj, anchor.reshape(1, -1)).ravel()
    lo_v = np.full(cloud.n_interior, lo)
    hi_v = np.full(cloud.n_interior, hi)

    def member(delta: np.ndarray) -> np.ndarray:
        height = np.minimum(delta ** 2 if dom.kind == "ball" else delta,
                            dom.eps0)
        full = delta >= dom.delta_global
        return full | ((depth < height) & (cap < delta))

    inside_lo = member(lo_v)
    for _ in range(iters):
        mid = np.sqrt(lo_v * hi_v)
        good = member(mid)
        hi_v = np.where(good, mid, hi_v)
        lo_v = np.where(good, lo_v, mid)
    out = np.where(inside_lo, lo, hi_v)
    return np.minimum(np.maximum(out, lo), hi)


def sharp_example_weight(cloud: SampleCloud, p: float, s: float,
                         anchor: np.ndarray,
                         interior_point: np.ndarray) -> WeightPair:
    """The extremal weight family concentrated at a boundary anchor.

    sigma(w) = h(w)^((p-1)(2+2n-2s)) / l(w)^(2n-2s) with h the smallest tent
    scale over the anchor containing w and l the distance to the marked
    interior point.
    """
    dom = cloud.domain
    if dom.kind != "ball":
        raise ValueError("sharp example weight is defined on the ball")
    if not 0.0 < s <= 0.5:
        raise ValueError("s must lie in (0, 1/2]")
    if not 1.0 < p <= 2.0:
        raise ValueError("sharp example targets 1 < p <= 2")
    if boundary_distance(dom, interior_point) <= dom.eps0:
        raise ValueError("interior point must sit below the tubular shell")
    n = dom.n
    anchor = np.asarray(anchor, dtype=complex).reshape(n)
    interior_point = np.asarray(interior_point, dtype=complex).reshape(n)
    l = np.sqrt(np.sum(np.abs(cloud.interior - interior_point) ** 2, axis=1))
    if np.any(l == 0.0):
        raise SingularSample("a sample coincides with the marked interior point")
    h = tent_scale_of(cloud, anchor, lo=cloud.h_floor, hi=dom.delta_global)
    sigma = h ** ((p - 1.0) * (2.0 + 2 * n - 2 * s)) / l ** (2 * n - 2 * s)
    w = Weight(sigma, f"sharp:s={s:g},p={p:g}")
    return make_pair(w, p)


# ---------------------------------------------------------------------------
# grid-scan oracle and serialization


def bp_grid_scan(cloud: SampleCloud, pair: WeightPair,
                 centers: np.ndarray, deltas: Sequence[float]) -> float:
    """Brute-force sup of <sigma><nu>^(p-1) over analytic tents on a
    (center, delta) grid; slow cross-check for the dyadic scan."""
    from .geometry import tent_membership
    iw = cloud.interior_weights
    best = 0.0
    for zeta in centers:
        for d in deltas:
            mem = tent_membership(cloud.domain, cloud.interior, zeta, d)
            vol = iw[mem].sum()
            if vol <= 0:
                continue
            s_avg = np.sum(pair.sigma.values[mem] * iw[mem]) / vol
            n_avg = np.sum(pair.nu.values[mem] * iw[mem]) / vol
            best = max(best, float(s_avg * n_avg ** (pair.p - 1.0)))
    return best


def weight_to_csv(weight: Weight) -> str:
    buf = io.StringIO()
    buf.write("index,value\n")
    for i, v in enumerate(weight.values):
        buf.write(f"{i},{float(v)!r}\n")
    return buf.getvalue()


def weight_from_csv(text: str, description: str = "csv") -> Weight:
    import csv
    rows = list(csv.DictReader(io.StringIO(text)))
    values = np.empty(len(rows))
    for row in rows:
        values[int(row["index"])] = float(row["value"])
    return Weight(values, description)
