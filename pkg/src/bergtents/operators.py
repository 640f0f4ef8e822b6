"""Discretized Bergman projection, sparse dyadic operators, maximal function.

The ball kernel is closed-form; applying the projection is a quadrature sum
over the interior cloud.  Matrices up to ``max_dense`` samples are cached
dense; larger clouds stream row chunks and never materialize the matrix.
The sparse operator and the maximal function are pure tent-sum algebra.
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainKindUnsupported
from .geometry import ModelDomain, SampleCloud
from .tents import TentSystem
from .weights import Weight, WeightPair

_DUMP_MAGIC = b"BTKERN01"


def kernel_factor(dom: ModelDomain) -> float:
    return math.factorial(dom.n) / math.pi ** dom.n


def bergman_kernel(dom: ModelDomain, z, w):
    """K(z, conj(w)) = n!/pi^n (1 - <z, conj(w)>)^(-(n+1)) on the ball."""
    if dom.kind != "ball":
        raise DomainKindUnsupported("no closed-form kernel off the ball")
    z = np.asarray(z, dtype=complex).reshape(-1, dom.n)
    w = np.asarray(w, dtype=complex).reshape(-1, dom.n)
    ip = np.sum(z * np.conj(w), axis=-1)
    out = kernel_factor(dom) * (1.0 - ip) ** (-(dom.n + 1))
    return out[0] if out.size == 1 else out


def kernel_block(dom: ModelDomain, Z: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Kernel matrix block K(Z_i, conj(W_j))."""
    if dom.kind != "ball":
        raise DomainKindUnsupported("no closed-form kernel off the ball")
    ip = Z @ np.conj(W).T
    return kernel_factor(dom) * (1.0 - ip) ** (-(dom.n + 1))


class KernelOperator:
    """Quadrature realization of P and P+ on an interior cloud."""

    def __init__(self, cloud: SampleCloud, max_dense: int = 4000,
                 threads: Optional[int] = None):
        if cloud.domain.kind != "ball":
            raise DomainKindUnsupported("kernel operator requires the ball")
        self.cloud = cloud
        self.dom = cloud.domain
        self.threads = max(1, threads) if threads is not None else 1
        self.max_dense = max_dense
        self._K: Optional[np.ndarray] = None
        if cloud.n_interior <= max_dense:
            self._K = kernel_block(self.dom, cloud.interior, cloud.interior)

    def _stream(self, weighted: np.ndarray, absval: bool) -> np.ndarray:
        Z = self.cloud.interior
        M = len(Z)
        out = np.empty(M, dtype=float if absval else complex)
        chunk = max(1, 40_000_000 // max(M, 1))
        spans = [(i, min(i + chunk, M)) for i in range(0, M, chunk)]

        def work(span):
            i0, i1 = span
            blk = kernel_block(self.dom, Z[i0:i1], Z)
            if absval:
                out[i0:i1] = np.abs(blk) @ weighted
            else:
                out[i0:i1] = blk @ weighted
        if self.threads == 1 or len(spans) == 1:
            for sp in spans:
                work(sp)
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as ex:
                list(ex.map(work, spans))
        return out

    def apply(self, f: np.ndarray) -> np.ndarray:
        """P f by quadrature."""
        weighted = np.asarray(f) * self.cloud.interior_weights
        if self._K is not None:
            return self._K @ weighted
        return self._stream(weighted.astype(complex), absval=False)

    def apply_abs(self, f: np.ndarray) -> np.ndarray:
        """P+ f: the same sum against |K|; f is taken nonnegative as given."""
        weighted = np.asarray(f) * self.cloud.interior_weights
        if self._K is not None:
            return np.abs(self._K) @ weighted.real
        return self._stream(weighted.real, absval=True)

    def hermitian_defect(self) -> float:
        if self._K is None:
            raise ValueError("dense matrix not materialized")
        return float(np.max(np.abs(self._K - np.conj(self._K.T))))

    def dump(self, path: str):
        """Binary dump: magic 'BTKERN01', uint64 M, row-major complex128."""
        if self._K is None:
            raise ValueError("dense matrix not materialized")
        with open(path, "wb") as fh:
            fh.write(_DUMP_MAGIC)
            fh.write(struct.pack("<Q", self._K.shape[0]))
            fh.write(np.ascontiguousarray(self._K, dtype=complex).tobytes())

    @staticmethod
    def load_matrix(path: str) -> np.ndarray:
        with open(path, "rb") as fh:
            if fh.read(8) != _DUMP_MAGIC:
                raise ValueError("not a kernel dump")
            (m,) = struct.unpack("<Q", fh.read(8))
            data = np.frombuffer(fh.read(16 * m * m), dtype=complex)
        return data.reshape(m, m)


def apply_P(op: KernelOperator, f: np.ndarray) -> np.ndarray:
    return op.apply(f)


def apply_Pplus(op: KernelOperator, f: np.ndarray) -> np.ndarray:
    return op.apply_abs(f)


def apply_Q_sparse(cloud: SampleCloud, pair: WeightPair, f: np.ndarray,
                   tent_systems: Sequence[TentSystem],
                   include_global: bool = True) -> np.ndarray:
    """Sparse positive operator: the global average of f nu plus, for every
    tent of every system, its indicator times the tent average of f nu."""
    iw = cloud.interior_weights
    fv = np.asarray(f, dtype=float) * pair.nu.values
    out = np.zeros(cloud.n_interior)
    if include_global:
        out += float(np.sum(fv * iw) / iw.sum())
    for ts in tent_systems:
        for k in range(ts.system.k_max + 1):
            ids = ts.tent_ids[k]
            ok = ids >= 0
            ncell = len(ts.system.levels[k])
            vol = np.bincount(ids[ok], weights=iw[ok], minlength=ncell)
            num = np.bincount(ids[ok], weights=(fv * iw)[ok], minlength=ncell)
            avg = np.divide(num, vol, out=np.zeros(ncell), where=vol > 0)
            out[ok] += avg[ids[ok]]
    return out


def maximal(cloud: SampleCloud, ts: TentSystem, sigma: Weight,
            f: np.ndarray) -> np.ndarray:
    """Weighted maximal function: sup over containing tents of the
    sigma-average of |f|; zero off the union of tents."""
    sw = sigma.values * cloud.interior_weights
    fv = np.abs(np.asarray(f))
    out = np.zeros(cloud.n_interior)
    for k in range(ts.system.k_max + 1):
        ids = ts.tent_ids[k]
        ok = ids >= 0
        ncell = len(ts.system.levels[k])
        den = np.bincount(ids[ok], weights=sw[ok], minlength=ncell)
        num = np.bincount(ids[ok], weights=(fv * sw)[ok], minlength=ncell)
        avg = np.divide(num, den, out=np.zeros(ncell), where=den > 0)
        np.maximum(out, np.where(ok, avg[np.maximum(ids, 0)], 0.0), out=out)
    return out


# ---------------------------------------------------------------------------
# sparse domination of the kernel


@dataclass
class DominationReport:
    n_pairs: int
    max_ratio: float
    mean_ratio: float
    q99: float
    share_global_only: float    # pairs sharing no tent at all

    def constant(self) -> float:
        return self.max_ratio


def _fiber_volumes(dom: ModelDomain, ts: TentSystem) -> list[np.ndarray]:
    """Per level: exact volume of the radial cylinder over each cell.

    Ball: mu(Q) * (1-(1-h)^(2n))/(2n) for fiber height h; the tent is exactly
    this cylinder, so the only quadrature input is the cell surface measure.
    """
    out = []
    for k, lvl in enumerate(ts.system.levels):
        h = min(ts.heights[k], 1.0)
        mu = np.array([c.surface_measure for c in lvl])
        if dom.kind == "ball":
            out.append(mu * (1.0 - (1.0 - h) ** (2 * dom.n)) / (2 * dom.n))
        else:
            out.append(mu * h)
    return out


def sample_pair_points(dom: ModelDomain, n_pairs: int, seed: int):
    """Fixed seeded continuum pairs, uniform in the ball."""
    if dom.kind != "ball":
        raise DomainKindUnsupported("domination pairs require the ball")
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    def draw(n):
        g = rng.normal(size=(n, dom.n)) + 1j * rng.normal(size=(n, dom.n))
        g /= np.linalg.norm(g, axis=1)[:, None]
        r = rng.uniform(size=n) ** (1.0 / (2 * dom.n))
        return g * r[:, None]
    return draw(n_pairs), draw(n_pairs)


def _point_tent_ids(cloud: SampleCloud, ts: TentSystem, pts: np.ndarray,
                    snap: np.ndarray, depth: np.ndarray) -> np.ndarray:
    ids = ts.system.level_ids[:, snap]
    return np.where(depth[None, :] < ts.heights[:, None], ids, -1)


def _snap_points(cloud: SampleCloud, pts: np.ndarray) -> np.ndarray:
    from .geometry import boundary_projection, pairwise_quasi_metric
    proj = boundary_projection(cloud.domain, pts, check=False)
    out = np.empty(len(pts), dtype=int)
    step = max(1, 10_000_000 // max(cloud.n_boundary, 1))
    for i0 in range(0, len(pts), step):
        i1 = min(i0 + step, len(pts))
        D = pairwise_quasi_metric(cloud.domain, proj[i0:i1], cloud.boundary)
        out[i0:i1] = np.argmin(D, axis=1)
    return out


def check_domination(cloud: SampleCloud, tent_systems: Sequence[TentSystem],
                     n_pairs: int, seed: int) -> DominationReport:
    """Ratio of |K(z, conj(w))| to the sparse form over random pairs.

    The sparse form is V(Omega)^-1 plus, over every tent containing both
    points, the inverse tent volume (exact cylinder volumes, so refining the
    interior cloud does not starve deep tents).
    """
    dom = cloud.domain
    Z, W = sample_pair_points(dom, n_pairs, seed)
    from .geometry import boundary_distance
    dz = boundary_distance(dom, Z)
    dw = boundary_distance(dom, W)
    sz = _snap_points(cloud, Z)
    sw = _snap_points(cloud, W)

    denom = np.full(n_pairs, 1.0 / dom.volume)
    shared = np.zeros(n_pairs, dtype=bool)
    for ts in tent_systems:
        vols = _fiber_volumes(dom, ts)
        ids_z = _point_tent_ids(cloud, ts, Z, sz, dz)
        ids_w = _point_tent_ids(cloud, ts, W, sw, dw)
        for k in range(ts.system.k_max + 1):
            both = (ids_z[k] >= 0) & (ids_z[k] == ids_w[k])
            if not both.any():
                continue
            shared |= both
            denom[both] += 1.0 / vols[k][ids_z[k][both]]

    num = np.abs(kernel_factor(dom)
                 * (1.0 - np.sum(Z * np.conj(W), axis=1)) ** (-(dom.n + 1)))
    ratio = num / denom
    return DominationReport(
        n_pairs=n_pairs,
        max_ratio=float(ratio.max()),
        mean_ratio=float(ratio.mean()),
        q99=float(np.quantile(ratio, 0.99)),
        share_global_only=float(1.0 - shared.mean()))
