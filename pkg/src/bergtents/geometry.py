"""Model domains, boundary geometry, quasi-metrics, and sample clouds.

Two domain kinds:

* ``ball``: the unit ball of C^n (n = 1 or 2 in practice), defining function
  rho(z) = |z| - 1, boundary metric d(a, b) = |1 - <a, conj(b)>|^(1/2),
  tent height Lambda(q, delta) = delta^2.
* ``egg``: {|z1|^2 + |z2|^(2m) < 1} in C^2, anisotropic polydisc metric with
  tau_1(q, delta) = delta and tau_2 found by bisection; tent height delta.

Points are complex arrays of shape (N, n); a single point may be passed as
shape (n,) or, for n = 1, as a bare complex scalar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    BisectionFailure,
    DomainKindUnsupported,
    NoConvergence,
    NotOnBoundary,
    OutsideTubularNeighborhood,
    WrongDomainKind,
)

_BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class ModelDomain:
    """A model domain: the unit ball of C^n or an egg in C^2."""

    kind: str                 # "ball" | "egg"
    n: int                    # complex dimension (egg: always 2)
    m: int = 1                # egg exponent (ball: unused)
    eps0: float = 0.5         # tubular neighborhood width
    delta_global: float = 0.4 # tent scale at (and beyond) which tents fill Omega

    @classmethod
    def ball(cls, n: int = 1, eps0: float = 0.5, delta_global: float = 0.4):
        if n < 1:
            raise ValueError("ball dimension must be >= 1")
        return cls("ball", n=n, eps0=eps0, delta_global=delta_global)

    @classmethod
    def egg(cls, m: int = 2, eps0: float = 0.2, delta_global: float = 0.4):
        if m < 1:
            raise ValueError("egg exponent must be >= 1")
        return cls("egg", n=2, m=m, eps0=eps0, delta_global=delta_global)

    @property
    def volume(self) -> float:
        """Exact Lebesgue volume of the domain in R^(2n)."""
        if self.kind == "ball":
            # V(B^{2n}) = pi^n / n!
            return math.pi ** self.n / math.factorial(self.n)
        return math.pi ** 2 * self.m / (self.m + 1)

    @property
    def boundary_measure(self) -> float:
        """Surface measure of the boundary (ball: exact; egg: quadrature)."""
        if self.kind == "ball":
            # |S^{2n-1}| = 2 pi^n / (n-1)!
            return 2 * math.pi ** self.n / math.factorial(self.n - 1)
        return _egg_boundary_measure(self.m)

    def label(self) -> str:
        return f"ball:n={self.n}" if self.kind == "ball" else f"egg:m={self.m}"


def _egg_boundary_measure(m: int, nodes: int = 256) -> float:
    x, w = np.polynomial.legendre.leggauss(nodes)
    r = 0.5 * (x + 1.0)
    w = 0.5 * w
    jac = r * np.sqrt(1.0 - r ** (2 * m) + m * m * r ** (4 * m - 2))
    return float(4 * math.pi ** 2 * np.sum(w * jac))


def _as_points(dom: ModelDomain, z) -> tuple[np.ndarray, bool]:
    """Normalize input to complex shape (N, n); report whether input was single."""
    a = np.asarray(z, dtype=complex)
    if a.ndim == 0:
        if dom.n != 1:
            raise ValueError("scalar point only valid for n = 1")
        return a.reshape(1, 1), True
    if a.ndim == 1:
        if a.shape[0] == dom.n:
            return a.reshape(1, dom.n), True
        if dom.n == 1:
            return a.reshape(-1, 1), False
        raise ValueError(f"point shape {a.shape} does not match n={dom.n}")
    if a.shape[-1] != dom.n:
        raise ValueError(f"point shape {a.shape} does not match n={dom.n}")
    return a.reshape(-1, dom.n), False


def _unpack(values: np.ndarray, single: bool):
    return values[0] if single else values


def defining_function(dom: ModelDomain, z):
    """rho(z): negative inside, zero on the boundary, positive outside."""
    a, single = _as_points(dom, z)
    if dom.kind == "ball":
        rho = np.sqrt(np.sum(np.abs(a) ** 2, axis=1)) - 1.0
    else:
        rho = np.abs(a[:, 0]) ** 2 + np.abs(a[:, 1]) ** (2 * dom.m) - 1.0
    return _unpack(rho, single)


def boundary_distance(dom: ModelDomain, z):
    """Euclidean distance to the boundary for interior points.

    Ball: exact 1 - |z|.  Egg: |z - pi(z)| via the projection solve.
    """
    a, single = _as_points(dom, z)
    if dom.kind == "ball":
        d = 1.0 - np.sqrt(np.sum(np.abs(a) ** 2, axis=1))
    else:
        q = _egg_project(dom, a)
        d = np.sqrt(np.sum(np.abs(a - q) ** 2, axis=1))
    return _unpack(d, single)


def boundary_projection(dom: ModelDomain, z, check: bool = True):
    """Nearest boundary point pi(z).

    Raises OutsideTubularNeighborhood when dist(z, bOmega) >= eps0 (and, for
    the ball, at the center where the projection is undefined).
    """
    a, single = _as_points(dom, z)
    if dom.kind == "ball":
        r = np.sqrt(np.sum(np.abs(a) ** 2, axis=1))
        if np.any(r == 0.0):
            raise OutsideTubularNeighborhood("projection undefined at the center")
        if check and np.any(1.0 - r >= dom.eps0):
            raise OutsideTubularNeighborhood(
                f"point at depth >= eps0 = {dom.eps0}")
        q = a / r[:, None]
    else:
        q = _egg_project(dom, a)
        if check:
            d = np.sqrt(np.sum(np.abs(a - q) ** 2, axis=1))
            if np.any(d >= dom.eps0):
                raise OutsideTubularNeighborhood(
                    f"point at depth >= eps0 = {dom.eps0}")
    return _unpack(q, single)


def _egg_radial_rescale(dom: ModelDomain, a: np.ndarray) -> np.ndarray:
    """Scale each point onto the boundary along its ray from the origin."""
    m = dom.m
    r1 = np.abs(a[:, 0]) ** 2
    r2 = np.abs(a[:, 1]) ** (2 * m)
    t = np.ones(len(a))
    # Newton on f(t) = t^2 r1 + t^(2m) r2 - 1 (increasing, convex for t>0)
    for _ in range(80):
        f = t ** 2 * r1 + t ** (2 * m) * r2 - 1.0
        df = 2 * t * r1 + 2 * m * t ** (2 * m - 1) * r2
        step = f / np.where(df > 0, df, 1.0)
        t = np.maximum(t - step, 1e-12)
        if np.max(np.abs(f)) < 1e-14:
            break
    return a * t[:, None]


def _egg_gradient(dom: ModelDomain, q: np.ndarray) -> np.ndarray:
    """Real gradient of rho as a complex 2-vector (g = 2 conj(d rho))."""
    m = dom.m
    g1 = 2.0 * q[:, 0]
    g2 = 2.0 * m * np.abs(q[:, 1]) ** (2 * m - 2) * q[:, 1]
    return np.stack([g1, g2], axis=1)


def _egg_project(dom: ModelDomain, a: np.ndarray, tol: float = 1e-9,
                 maxit: int = 200) -> np.ndarray:
    """Nearest-point projection onto the egg boundary (tangential descent)."""
    if np.any(np.all(a == 0, axis=1)):
        raise OutsideTubularNeighborhood("projection undefined at the center")
    q = _egg_radial_rescale(dom, a)
    for _ in range(maxit):
        g = _egg_gradient(dom, q)
        gn = np.sqrt(np.sum(np.abs(g) ** 2, axis=1))
        nhat = g / gn[:, None]
        r = q - a
        coef = np.sum((r * np.conj(nhat)).real, axis=1)
        rt = r - coef[:, None] * nhat
        res = np.sqrt(np.sum(np.abs(rt) ** 2, axis=1))
        if np.max(res) < tol:
            return q
        q = _egg_radial_rescale(dom, q - rt)
    raise NoConvergence(f"egg projection residual {np.max(res):.2e} after {maxit} steps")


def quasi_metric(dom: ModelDomain, a, b):
    """Boundary quasi-metric between boundary points.

    Ball: |1 - <a, conj(b)>|^(1/2), exact and symmetric.  Egg: polydisc
    membership bisected over the scale, symmetrized by the max of the two
    one-sided values.
    """
    pa, sa = _as_points(dom, a)
    pb, sb = _as_points(dom, b)
    if dom.kind == "ball":
        if len(pa) == len(pb):
            ip = np.sum(pa * np.conj(pb), axis=1)
            d = np.sqrt(np.abs(1.0 - ip))
            return _unpack(d, sa and sb)
        return pairwise_quasi_metric(dom, pa, pb)
    if not (sa and sb):
        return pairwise_quasi_metric(dom, pa, pb)
    d1 = _egg_one_sided(dom, pa[0], pb[0])
    d2 = _egg_one_sided(dom, pb[0], pa[0])
    return max(d1, d2)


def _egg_check_boundary(dom: ModelDomain, q: np.ndarray):
    rho = defining_function(dom, q)
    if np.max(np.abs(np.atleast_1d(rho))) > _BOUNDARY_TOL:
        raise NotOnBoundary("egg quasi-metric expects boundary points")


def _egg_frame(dom: ModelDomain, q: np.ndarray):
    """Unit complex normal and tangent directions at boundary points (N,2)."""
    dz1 = np.conj(q[:, 0])                                   # d rho / d z1
    dz2 = dom.m * np.abs(q[:, 1]) ** (2 * dom.m - 2) * np.conj(q[:, 1])
    # kernel of the covector (dz1, dz2) is spanned by (dz2, -dz1)
    tang = np.stack([dz2, -dz1], axis=1)
    tn = np.sqrt(np.sum(np.abs(tang) ** 2, axis=1))
    tang = tang / tn[:, None]
    norm = np.stack([np.conj(dz1), np.conj(dz2)], axis=1)
    nn = np.sqrt(np.sum(np.abs(norm) ** 2, axis=1))
    norm = norm / nn[:, None]
    return norm, tang

_G_RADII = np.linspace(0.25, 1.0, 4)
_G_PHASES = np.exp(2j * np.pi * np.arange(16) / 16)
_G_GRID = (_G_RADII[:, None] * _G_PHASES[None, :]).ravel()   # disc sample, |s|<=1


def _egg_tangential_sup(dom: ModelDomain, q: np.ndarray, tang: np.ndarray,
                        t) -> np.ndarray:
    """G_q(t) = sup over the tangential disc of radius t of |rho(q+s e)-rho(q)|.

    Evaluated on a fixed radius x phase grid; nondecreasing in t by nesting.
    """
    t = np.asarray(t, dtype=float)
    s = t[..., None] * _G_GRID                                # (..., G)
    z1 = q[..., 0:1] + s * tang[..., 0:1]
    z2 = q[..., 1:2] + s * tang[..., 1:2]
    m = dom.m
    rho0 = np.abs(q[..., 0]) ** 2 + np.abs(q[..., 1]) ** (2 * m) - 1.0
    rho = np.abs(z1) ** 2 + np.abs(z2) ** (2 * m) - 1.0
    return np.max(np.abs(rho - rho0[..., None]), axis=-1)


def tau_scaling(dom: ModelDomain, q, delta: float, j: int):
    """Polydisc radius tau_j(q, delta) for the egg.

    tau_1 = delta exactly; tau_2 is the largest tangential radius over which
    the defining function moves by at most delta (bisection, rel. tol 1e-8).
    """
    if dom.kind != "egg":
        raise WrongDomainKind("tau_scaling is defined for the egg")
    if delta <= 0:
        raise ValueError("delta must be positive")
    if j == 1:
        return delta
    if j != 2:
        raise ValueError("j must be 1 or 2")
    pq, single = _as_points(dom, q)
    _egg_check_boundary(dom, pq)
    _, tang = _egg_frame(dom, pq)
    out = _tau2_bisect(dom, pq, tang, np.full(len(pq), float(delta)))
    return _unpack(out, single)


def _tau2_bisect(dom: ModelDomain, q: np.ndarray, tang: np.ndarray,
                 delta: np.ndarray) -> np.ndarray:
    lo = np.zeros(len(q))
    hi = np.full(len(q), 0.05)
    for _ in range(12):
        need = _egg_tangential_sup(dom, q, tang, hi) <= delta
        if not need.any():
            break
        hi[need] *= 2.0
    if np.any(hi > 16.0):
        raise BisectionFailure("tau_2 bracket exceeded domain scale")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        ok = _egg_tangential_sup(dom, q, tang, mid) <= delta
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return 0.5 * (lo + hi)


def _egg_one_sided(dom: ModelDomain, zeta: np.ndarray, eta: np.ndarray,
                   iters: int = 60) -> float:
    """inf{delta : eta in D(zeta, delta)} by bisection on delta."""
    q = zeta.reshape(1, 2)
    _egg_check_boundary(dom, q)
    norm, tang = _egg_frame(dom, q)
    u = (eta - zeta).reshape(1, 2)
    w1 = abs(np.sum(u * np.conj(norm)))
    w2 = abs(np.sum(u * np.conj(tang)))
    def member(delta: float) -> bool:
        if w1 >= delta:
            return False
        tau2 = _tau2_bisect(dom, q, tang, np.array([delta]))[0]
        return w2 < tau2
    lo, hi = 0.0, 1e-3
    while not member(hi):
        hi *= 2.0
        if hi > 64.0:
            raise BisectionFailure("egg quasi-metric bracket failed")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if member(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def pairwise_quasi_metric(dom: ModelDomain, A, B) -> np.ndarray:
    """Matrix of quasi-metric values between boundary point sets A and B.

    Egg values use the closed-form inverse max(|w1|, G_zeta(|w2|)) of the
    bisection definition, symmetrized by the max over both orders.
    """
    pa, _ = _as_points(dom, A)
    pb, _ = _as_points(dom, B)
    if dom.kind == "ball":
        ip = pa @ np.conj(pb).T
        return np.sqrt(np.abs(1.0 - ip))
    d_ab = _egg_one_sided_matrix(dom, pa, pb)
    d_ba = _egg_one_sided_matrix(dom, pb, pa).T
    return np.maximum(d_ab, d_ba)


def _egg_one_sided_matrix(dom: ModelDomain, zetas: np.ndarray,
                          etas: np.ndarray, chunk: int = 256) -> np.ndarray:
    norm, tang = _egg_frame(dom, zetas)
    out = np.empty((len(zetas), len(etas)))
    for i0 in range(0, len(zetas), chunk):
        i1 = min(i0 + chunk, len(zetas))
        u = etas[None, :, :] - zetas[i0:i1, None, :]          # (c, E, 2)
        w1 = np.abs(np.sum(u * np.conj(norm[i0:i1, None, :]), axis=2))
        w2 = np.abs(np.sum(u * np.conj(tang[i0:i1, None, :]), axis=2))
        q = np.broadcast_to(zetas[i0:i1, None, :], u.shape)
        tg = np.broadcast_to(tang[i0:i1, None, :], u.shape)
        g = _egg_tangential_sup(dom, q, tg, w2)
        out[i0:i1] = np.maximum(w1, g)
    return out


def lambda_scaling(dom: ModelDomain, q, delta: float):
    """Tent height Lambda(q, delta) = delta^2 on the ball."""
    if dom.kind != "ball":
        raise WrongDomainKind("lambda_scaling is defined for the ball")
    if delta <= 0:
        raise ValueError("delta must be positive")
    return delta ** 2


def tent_height(dom: ModelDomain, delta: float) -> float:
    """Depth of a tent of scale delta: delta^2 (ball) or delta (egg)."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return delta ** 2 if dom.kind == "ball" else delta


def tent_membership(dom: ModelDomain, z, zeta, delta: float):
    """Indicator of the tent over B(zeta, delta): cap condition on pi(z) and
    depth at most the tent height.  For delta >= delta_global the tent is the
    whole domain."""
    pz, single = _as_points(dom, z)
    if delta <= 0:
        raise ValueError("delta must be positive")
    if delta >= dom.delta_global:
        return _unpack(np.ones(len(pz), dtype=bool), single)
    pzeta, _ = _as_points(dom, zeta)
    if np.max(np.abs(np.atleast_1d(defining_function(dom, pzeta)))) > 1e-7:
        raise NotOnBoundary("tent apex must lie on the boundary")
    depth = boundary_distance(dom, pz)
    height = min(tent_height(dom, delta), dom.eps0)
    out = np.zeros(len(pz), dtype=bool)
    shallow = depth < height
    if shallow.any():
        proj = boundary_projection(dom, pz[shallow], check=False)
        if dom.kind == "ball":
            cap = quasi_metric(dom, proj, np.broadcast_to(pzeta, proj.shape)) < delta
        else:
            cap = pairwise_quasi_metric(dom, proj, pzeta).ravel() < delta
        out[shallow] = cap
    return _unpack(out, single)


# ---------------------------------------------------------------------------
# sample clouds


@dataclass(frozen=True)
class CloudGrading:
    """Optional log-graded refinement of a ball(n=1) cloud.

    ``boundary_anchor`` adds a (depth x angle) log-log patch hugging that
    boundary point; ``interior_anchor`` adds log-radial rings around that
    interior point (the origin in practice).  Weights stay exact cell areas.
    """

    boundary_anchor: Optional[complex] = None
    interior_anchor: Optional[complex] = None
    depth_min: float = 1e-13
    theta_min: float = 1e-13
    radius_min: float = 1e-12
    cells_per_decade: int = 3
    aperture: float = 0.4        # half-angle of the refined sector
    shell_depth: float = 0.02    # where the graded shell takes over from the bulk
    origin_radius: float = 0.08  # disc replaced by log-radial rings


@dataclass
class SampleCloud:
    """Quadrature point clouds for the interior and the boundary.

    ``interior_weights`` sums to the domain volume (exactly for the ball,
    to quadrature tolerance for the egg); ``boundary_weights`` to the surface
    measure.  ``resolution`` is the coarse interior spacing; ``h_floor`` the
    finest boundary-distance scale the cloud resolves (graded clouds push it
    far below ``resolution``).
    """

    domain: ModelDomain
    interior: np.ndarray
    interior_weights: np.ndarray
    boundary: np.ndarray
    boundary_weights: np.ndarray
    seed: int
    boundary_tol: float
    resolution: float
    h_floor: float
    grading: Optional[CloudGrading] = None
    _depth: Optional[np.ndarray] = field(default=None, repr=False)
    _proj: Optional[np.ndarray] = field(default=None, repr=False)
    _bdry_metric: Optional[np.ndarray] = field(default=None, repr=False)
    _snap: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_interior(self) -> int:
        return len(self.interior)

    @property
    def n_boundary(self) -> int:
        return len(self.boundary)

    @property
    def interior_depth(self) -> np.ndarray:
        if self._depth is None:
            self._depth = boundary_distance(self.domain, self.interior)
        return self._depth

    @property
    def interior_projection(self) -> np.ndarray:
        """pi(z) for every interior sample (ball: exact; egg: solver)."""
        if self._proj is None:
            self._proj = boundary_projection(self.domain, self.interior,
                                             check=False)
        return self._proj

    def boundary_metric_matrix(self) -> np.ndarray:
        """Cached pairwise quasi-metric matrix of the boundary samples."""
        if self._bdry_metric is None:
            self._bdry_metric = pairwise_quasi_metric(
                self.domain, self.boundary, self.boundary)
        return self._bdry_metric


def sample(dom: ModelDomain, n_interior: int, n_boundary: int, seed: int,
           grading: Optional[CloudGrading] = None) -> SampleCloud:
    """Build a deterministic sample cloud for the domain.

    Ball(n=1): geometric depth layers whose angular count tracks 1/depth so
    the Bergman kernel's near-diagonal peak stays resolved at every sample's
    own depth.  Ball(n=2): depth layers times Hopf-coordinate sphere grids.
    Egg: rejection sampling (interior) and a surface product rule (boundary).
    """
    if n_interior < 16 or n_boundary < 8:
        raise ValueError("cloud sizes too small")
    if grading is not None and not (dom.kind == "ball" and dom.n == 1):
        raise DomainKindUnsupported("grading implemented for ball n=1 only")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    if dom.kind == "ball" and dom.n == 1:
        return _sample_disc(dom, n_interior, n_boundary, seed, rng, grading)
    if dom.kind == "ball" and dom.n == 2:
        return _sample_ball2(dom, n_interior, n_boundary, seed, rng)
    return _sample_egg(dom, n_interior, n_boundary, seed, rng)


def _disc_layer_edges(growth: float, d_min: float) -> list[float]:
    edges = [1.0]
    while edges[-1] / growth > d_min:
        edges.append(edges[-1] / growth)
    edges.append(d_min)
    edges.append(0.0)
    return edges


def _disc_layer_counts(edges, beta: float) -> list[int]:
    counts = []
    for a, b in zip(edges[:-1], edges[1:]):       # depths, a > b
        t = 0.5 * ((1.0 - a) ** 2 + (1.0 - b) ** 2)
        r = math.sqrt(t)
        d = 1.0 - r
        counts.append(max(6, int(round(2 * math.pi * max(r, 0.05) / (beta * d)))))
    return counts


def _disc_layers(n_target: int, growth: float = 1.3,
                 d_min: Optional[float] = None):
    """Calibrate the angular-density knob so the total count lands near
    n_target; returns (edges, counts)."""
    if d_min is None:
        d_min = 38.0 / n_target
    edges = _disc_layer_edges(growth, d_min)
    lo, hi = 0.05, 16.0
    for _ in range(48):
        beta = math.sqrt(lo * hi)
        total = sum(_disc_layer_counts(edges, beta))
        if total > n_target:
            lo = beta
        else:
            hi = beta
    beta = math.sqrt(lo * hi)
    return edges, _disc_layer_counts(edges, beta)


def _sample_disc(dom, n_interior, n_boundary, seed, rng,
                 grading: Optional[CloudGrading]) -> SampleCloud:
    d_cut = grading.shell_depth if grading is not None else None
    pts, wts = [], []
    # bulk: geometric layers from the center down to d_cut (or the full disc)
    if grading is None:
        edges, counts = _disc_layers(n_interior)
    else:
        edges, counts = _disc_layers(n_interior, d_min=max(d_cut, 38.0 / n_interior))
        # drop the final slab: the graded shell takes over below d_cut
        edges = [e for e in edges if e >= d_cut] + [d_cut]
        counts = counts[:len(edges) - 1]
        if grading.interior_anchor is not None:
            if complex(grading.interior_anchor) != 0j:
                raise ValueError("interior grading rings support the origin only")
            # the ring patch replaces the disc r <= origin_radius
            edges[0] = 1.0 - grading.origin_radius
    for (a, b), mcount in zip(zip(edges[:-1], edges[1:]), counts):
        t_lo, t_hi = (1.0 - a) ** 2, (1.0 - b) ** 2
        t = 0.5 * (t_lo + t_hi)
        r = math.sqrt(t)
        phi = rng.uniform(0, 2 * math.pi)
        th = phi + 2 * math.pi * np.arange(mcount) / mcount
        pts.append(r * np.exp(1j * th))
        wts.append(np.full(mcount, math.pi * (t_hi - t_lo) / mcount))
    h_floor = math.sqrt(38.0 / n_interior) / 2
    if grading is not None:
        gpts, gwts = _disc_graded_patches(dom, grading, rng)
        pts += gpts
        wts += gwts
        h_floor = math.sqrt(grading.depth_min) / 2
    interior = np.concatenate(pts).reshape(-1, 1)
    iw = np.concatenate(wts)

    bpts, bw = _disc_boundary(n_boundary, rng, grading)
    resolution = math.sqrt(dom.volume / max(len(interior), 1))
    return SampleCloud(dom, interior, iw, bpts.reshape(-1, 1), bw, seed,
                       boundary_tol=1e-12, resolution=resolution,
                       h_floor=h_floor, grading=grading)


def _log_edges(lo: float, hi: float, per_decade: int) -> np.ndarray:
    decades = math.log10(hi / lo)
    k = max(1, int(math.ceil(decades * per_decade)))
    return np.geomspace(lo, hi, k + 1)


def _shell_angle_cells(grading: CloudGrading) -> tuple[np.ndarray, np.ndarray]:
    """Angular cell (node, width) pairs for one graded shell layer."""
    ap = grading.aperture
    eg = _log_edges(grading.theta_min, ap, grading.cells_per_decade)
    nodes, widths = [], []
    for s in (+1.0, -1.0):
        for a, b in zip(eg[:-1], eg[1:]):
            nodes.append(s * math.sqrt(a * b))   # geometric mean: power-law-true
            # innermost cell stretches to 0 so the angular cover is exact
            widths.append(b if a == eg[0] else b - a)
    n_u = max(4, int(round((math.pi - ap) / ap * 2)))
    step = (math.pi - ap) / n_u
    for s in (+1.0, -1.0):
        for j in range(n_u):
            nodes.append(s * (ap + (j + 0.5) * step))
            widths.append(step)
    return np.asarray(nodes), np.asarray(widths)


def _disc_graded_patches(dom, grading: CloudGrading, rng):
    pts, wts = [], []
    # shell: log depth layers x (log-refined + uniform) angles near the anchor
    anchor = grading.boundary_anchor
    theta0 = float(np.angle(anchor)) if anchor is not None else 0.0
    d_edges = _log_edges(grading.depth_min, grading.shell_depth,
                         grading.cells_per_decade)
    nodes, widths = _shell_angle_cells(grading)
    for d_lo, d_hi in zip(d_edges[:-1], d_edges[1:]):
        d_node = math.sqrt(d_lo * d_hi)
        r = 1.0 - d_node
        # shallowest layer stretches to the boundary: exact depth cover
        t_hi_edge = 1.0 if d_lo == d_edges[0] else (1.0 - d_lo) ** 2
        t_w = t_hi_edge - (1.0 - d_hi) ** 2          # |d t| across the layer
        z = r * np.exp(1j * (theta0 + nodes))
        w = 0.5 * t_w * widths                       # dV = (1/2) dt dtheta
        pts.append(z)
        wts.append(w)
    # origin patch: log-radial rings replacing the disc r <= origin_radius
    if grading.interior_anchor is not None:
        r_edges = _log_edges(grading.radius_min, grading.origin_radius,
                             grading.cells_per_decade)
        n_phi = 12
        for r_lo, r_hi in zip(r_edges[:-1], r_edges[1:]):
            r_node = math.sqrt(r_lo * r_hi)
            area_lo = 0.0 if r_lo == r_edges[0] else r_lo ** 2
            phi = rng.uniform(0, 2 * math.pi)
            th = phi + 2 * math.pi * np.arange(n_phi) / n_phi
            pts.append(r_node * np.exp(1j * th))
            wts.append(np.full(n_phi, math.pi * (r_hi ** 2 - area_lo) / n_phi))
    return pts, wts


def _disc_boundary(n_boundary, rng, grading: Optional[CloudGrading]):
    if grading is None or grading.boundary_anchor is None:
        phi = rng.uniform(0, 2 * math.pi)
        th = phi + 2 * math.pi * np.arange(n_boundary) / n_boundary
        return np.exp(1j * th), np.full(n_boundary, 2 * math.pi / n_boundary)
    # refined: log angular cells near the anchor + uniform elsewhere
    theta0 = float(np.angle(grading.boundary_anchor))
    eg = _log_edges(grading.theta_min, grading.aperture,
                    2 * grading.cells_per_decade)
    nodes, widths = [], []
    for s in (+1.0, -1.0):
        for a, b in zip(eg[:-1], eg[1:]):
            nodes.append(s * math.sqrt(a * b))
            widths.append(b if a == eg[0] else b - a)
    n_rest = max(8, n_boundary - len(nodes))
    step = 2 * (math.pi - grading.aperture) / n_rest
    for j in range(n_rest):
        nodes.append(grading.aperture + (j + 0.5) * step)
        widths.append(step)
    nodes = np.asarray(nodes)
    widths = np.asarray(widths)
    nodes = np.mod(nodes + math.pi, 2 * math.pi) - math.pi
    return np.exp(1j * (theta0 + nodes)), widths


def _hopf_grid(count: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Quasi-uniform S^3 points (Hopf coordinates) with exact-sum weights."""
    n_u = max(2, int(round(count ** (1.0 / 3.0) / 1.2)))
    n_xi = max(3, int(round(math.sqrt(count / n_u))))
    x, w = np.polynomial.legendre.leggauss(n_u)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * w
    phi1 = rng.uniform(0, 2 * math.pi)
    phi2 = rng.uniform(0, 2 * math.pi)
    xi1 = phi1 + 2 * math.pi * np.arange(n_xi) / n_xi
    xi2 = phi2 + 2 * math.pi * np.arange(n_xi) / n_xi
    U, X1, X2 = np.meshgrid(u, xi1, xi2, indexing="ij")
    WU = np.broadcast_to(wu[:, None, None], U.shape)
    z = np.stack([np.sqrt(1 - U) * np.exp(1j * X1),
                  np.sqrt(U) * np.exp(1j * X2)], axis=-1).reshape(-1, 2)
    wts = (0.5 * WU * (2 * math.pi / n_xi) ** 2).ravel()
    # random unitary rotation keeps the measure and decorrelates the grids
    g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, _ = np.linalg.qr(g)
    return z @ q.T, wts


def _sample_ball2(dom, n_interior, n_boundary, seed, rng) -> SampleCloud:
    growth = 1.45
    d_min = max(0.01, 1.2 * (dom.volume / n_interior) ** 0.25)
    edges = _disc_layer_edges(growth, d_min)
    vol = dom.volume
    pts, wts = [], []
    fracs = []
    for a, b in zip(edges[:-1], edges[1:]):
        fracs.append(((1.0 - b) ** 4 - (1.0 - a) ** 4))
    for (a, b), frac in zip(zip(edges[:-1], edges[1:]), fracs):
        count = max(8, int(round(n_interior * frac)))
        sphere, sw = _hopf_grid(count, rng)
        t = 0.5 * ((1.0 - a) ** 4 + (1.0 - b) ** 4)   # centroid in t = r^4
        r = t ** 0.25
        layer_vol = (math.pi ** 2 / 2) * frac
        pts.append(r * sphere)
        wts.append(sw * (layer_vol / (2 * math.pi ** 2)))
    interior = np.concatenate(pts)
    iw = np.concatenate(wts)
    boundary, bw = _hopf_grid(n_boundary, rng)
    resolution = (vol / max(len(interior), 1)) ** 0.25
    return SampleCloud(dom, interior, iw, boundary, bw, seed,
                       boundary_tol=1e-12, resolution=resolution,
                       h_floor=math.sqrt(d_min) / 2)


def _sample_egg(dom, n_interior, n_boundary, seed, rng) -> SampleCloud:
    m = dom.m
    pts = []
    need = n_interior
    while need > 0:
        k = max(2 * need, 256)
        z1 = np.sqrt(rng.uniform(size=k)) * np.exp(2j * np.pi * rng.uniform(size=k))
        z2 = np.sqrt(rng.uniform(size=k)) * np.exp(2j * np.pi * rng.uniform(size=k))
        acc = np.abs(z1) ** 2 + np.abs(z2) ** (2 * m) < 1.0
        got = np.stack([z1[acc], z2[acc]], axis=1)
        pts.append(got[:need])
        need -= len(got[:need])
    interior = np.concatenate(pts)
    iw = np.full(len(interior), dom.volume / len(interior))

    n_r = max(8, int(round((n_boundary / 4.0) ** (1.0 / 3.0) * 2)))
    n_xi = max(6, int(round(math.sqrt(n_boundary / n_r))))
    x, w = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * (x + 1.0)
    wr = 0.5 * w
    jac = r * np.sqrt(1.0 - r ** (2 * m) + m * m * r ** (4 * m - 2))
    phi1 = rng.uniform(0, 2 * math.pi)
    phi2 = rng.uniform(0, 2 * math.pi)
    th1 = phi1 + 2 * math.pi * np.arange(n_xi) / n_xi
    th2 = phi2 + 2 * math.pi * np.arange(n_xi) / n_xi
    R, T1, T2 = np.meshgrid(r, th1, th2, indexing="ij")
    J = np.broadcast_to((wr * jac)[:, None, None], R.shape)
    boundary = np.stack([np.sqrt(1.0 - R ** (2 * m)) * np.exp(1j * T1),
                         R * np.exp(1j * T2)], axis=-1).reshape(-1, 2)
    bw = (J * (2 * math.pi / n_xi) ** 2).ravel()
    resolution = (dom.volume / n_interior) ** 0.25
    return SampleCloud(dom, interior, iw, boundary, bw, seed,
                       boundary_tol=1e-6, resolution=resolution,
                       h_floor=resolution ** 2 / 2)
