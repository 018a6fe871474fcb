"""Circle-quotient metric geometry: orbit distances, strata, orbifold test.

Distances on the quotient are computed upstairs: d([x],[y]) is the infimum
over the circle of a local first-order approximation of the deformed-metric
distance between x and a rotated representative of y.  The approximation
projects the ambient chord onto the tangent space at the normalized midpoint
and measures it with g_kappa there; a chord-to-arc correction (exact for the
round metric) removes the second-order bias.  This is accurate exactly in the
regime the spectral module needs (graph edges shorter than the kernel
bandwidth) and makes no global-geodesic claims.

The sphere path is heavily used (millions of pairs per graph), so the
(pair, theta) objective is reduced to scalar arithmetic on a handful of
precomputed complex inner products; the generic Stiefel path evaluates the
same definition point by point.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .geometry import Sphere, Stiefel

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# points of the quotient and strata
# ---------------------------------------------------------------------------

def orbit_chord(p, q):
    """Minimum ambient (chordal) distance between the circle orbits of p and
    q.  Closed form: the rotation only affects the top-block cross term, so
    the best angle aligns its phase."""
    p = np.asarray(p, dtype=complex)
    q = np.asarray(q, dtype=complex)
    k = p.shape[0] - 2
    cross = abs(np.vdot(p[:k], q[:k])) + np.real(np.vdot(p[k:], q[k:]))
    c2 = np.real(np.vdot(p, p)) + np.real(np.vdot(q, q)) - 2.0 * cross
    return math.sqrt(max(c2, 0.0))


def same_orbit(p, q, tol=1e-9):
    return orbit_chord(p, q) < tol


@dataclass(frozen=True, eq=False)
class QuotientPoint:
    """A point of the quotient, stored through one upstairs representative.

    Equality is orbit equality; the class is deliberately unhashable because
    a tolerance-based equivalence cannot hash consistently.
    """

    representative: np.ndarray

    def same_orbit(self, other, tol=1e-9):
        o = other.representative if isinstance(other, QuotientPoint) else other
        return same_orbit(self.representative, o, tol)

    def __eq__(self, other):
        if not isinstance(other, QuotientPoint):
            return NotImplemented
        return self.same_orbit(other)

    __hash__ = None


@dataclass(frozen=True)
class StratumLabel:
    stabilizer_dim: int
    is_regular: bool


def stabilizer_dim(p, tol=1e-8):
    """Dimension (0 or 1) of the circle stabilizer at p.

    The whole circle fixes p exactly when the rotated block vanishes: on the
    sphere that is the u part, on frames the top block.  Frames of width >= 3
    cannot have a vanishing top block (the bottom two rows would have to
    carry rank 3), so there the action is free.
    """
    arr = np.asarray(p)
    if arr.ndim == 2 and arr.shape[1] >= 3:
        return 0
    m = arr.shape[0] - 2
    return 1 if float(np.abs(arr[:m]).max()) < tol else 0


def stratum(p, tol=1e-8):
    d = stabilizer_dim(p, tol)
    return StratumLabel(d, d == 0)


def in_m_hat(p, tol=1e-8):
    """Whether a sphere point lies in the open dense set where u, v1, v2 are
    all nonzero (free circle action and free torus directions)."""
    arr = np.asarray(p)
    if arr.ndim != 1:
        raise ValueError("the u/v1/v2 decomposition applies to sphere points only")
    m = arr.shape[0] - 2
    return bool(np.linalg.norm(arr[:m]) > tol
                and abs(arr[m]) > tol and abs(arr[m + 1]) > tol)


@dataclass(frozen=True)
class OrbifoldReport:
    manifold: str
    m: int
    r: int | None
    quotient_dim: int
    singular_dim: int | None
    codim: int | None
    is_orbifold: bool
    is_manifold: bool
    singular_geometry: str

    def to_dict(self):
        return {
            "manifold": self.manifold,
            "m": self.m,
            "r": self.r,
            "quotient_dim": self.quotient_dim,
            "singular_dim": self.singular_dim,
            "codim": self.codim,
            "is_orbifold": self.is_orbifold,
            "is_manifold": self.is_manifold,
            "singular_geometry": self.singular_geometry,
        }


def orbifold_report(manifold):
    """Stratification bookkeeping for the circle quotient.

    Sphere (and width-1 frames, which are the same space): the fixed set is
    the round 3-sphere of points with vanishing u block.  Width-2 frames: the
    fixed set is the group of unitary 2x2 bottom blocks.  Width >= 3: free
    action, so the quotient is a manifold.  The quotient is an orbifold iff
    the fixed set is empty or has codimension at most 2.
    """
    if isinstance(manifold, Sphere) or (isinstance(manifold, Stiefel) and manifold.r == 1):
        m = manifold.m
        r = manifold.r if isinstance(manifold, Stiefel) else None
        qdim, sdim, geom = 2 * m + 2, 3, "round S^3"
        kind = "stiefel" if r else "sphere"
    elif isinstance(manifold, Stiefel):
        m, r = manifold.m, manifold.r
        kind = "stiefel"
        qdim = 2 * r * (m + 2 - r) - 1
        if r == 2:
            sdim, geom = 4, "bi-invariant U(2)"
        else:
            sdim, geom = None, "empty"
    else:
        raise TypeError("expected a Sphere or Stiefel manifold")
    codim = None if sdim is None else qdim - sdim
    is_orbifold = sdim is None or codim <= 2
    return OrbifoldReport(kind, m, r if isinstance(manifold, Stiefel) else None,
                          qdim, sdim, codim, is_orbifold, sdim is None, geom)


# ---------------------------------------------------------------------------
# local distances
# ---------------------------------------------------------------------------

def local_distance(p, q, form):
    """First-order deformed distance between nearby points: the chord q - p
    projected onto the tangent space at the normalized midpoint, measured
    with g_kappa there.  Symmetric by the midpoint rule; error is third order
    in the separation (second order relative)."""
    M = form.manifold
    p = np.asarray(p, dtype=complex)
    q = np.asarray(q, dtype=complex)
    s = (p + q) / 2.0
    if np.linalg.norm(s) < 1e-9:
        # antipodal degenerate midpoint: fall back to the raw chord length
        return float(np.linalg.norm(q - p))
    mid = M.project_point(s)
    X = M.project_tangent(mid, q - p)
    return math.sqrt(max(form.metric(mid, X, X), 0.0))


def _chord_to_arc(c, radius=1.0):
    """Invert chord = 2 R sin(arc / 2R); exact on the round sphere of radius
    R, second-order-consistent otherwise.  Monotone linear extension past the
    diameter so out-of-regime inputs stay ordered."""
    c = np.asarray(c, dtype=float)
    x = np.minimum(c / (2.0 * radius), 1.0)
    out = np.where(c < 2.0 * radius,
                   2.0 * radius * np.arcsin(x),
                   math.pi * radius + (c - 2.0 * radius))
    return out if out.ndim else float(out)


def _manifold_radius(manifold):
    return math.sqrt(manifold.r) if isinstance(manifold, Stiefel) else 1.0


# ---------------------------------------------------------------------------
# the scalar sphere kernel
# ---------------------------------------------------------------------------

class _SphereOrbitKernel:
    """Scalar engine for theta -> local_distance(p_i, e^{i theta} p_j)^2 on a
    deformed sphere.

    Everything reduces to per-pair complex constants because the normalized
    midpoint, the chord, and the form evaluation are all rational in
    z = e^{i theta} through five inner products: <u_i, u_j>, <J_k u_i, u_j>
    and the two v-products.  Skew-Hermitian symmetry removes the remaining
    products (<J u, u> is purely imaginary, <J w, u> = -conj(<J u, w>)).
    """

    def __init__(self, points, j):
        P = np.asarray(points, dtype=complex)
        m = P.shape[1] - 2
        self.m = m
        self.U = P[:, :m]
        self.v1 = P[:, m]
        self.v2 = P[:, m + 1]
        if j is None:
            J1 = J2 = np.zeros((m, m))
        else:
            J1, J2 = j.J1, j.J2
        self.A1 = self.U @ J1.T
        self.A2 = self.U @ J2.T
        self.quu1 = np.einsum("ij,ij->i", self.A1.conj(), self.U).imag
        self.quu2 = np.einsum("ij,ij->i", self.A2.conj(), self.U).imag
        self.nu = np.einsum("ij,ij->i", self.U.conj(), self.U).real
        self.w1 = np.abs(self.v1) ** 2
        self.w2 = np.abs(self.v2) ** 2

    def pair_data(self, ii, jj):
        gv1 = self.v1[ii].conj() * self.v1[jj]
        gv2 = self.v2[ii].conj() * self.v2[jj]
        return {
            "gu": np.einsum("ij,ij->i", self.U[ii].conj(), self.U[jj]),
            "t1": np.einsum("ij,ij->i", self.A1[ii].conj(), self.U[jj]),
            "t2": np.einsum("ij,ij->i", self.A2[ii].conj(), self.U[jj]),
            "rv": gv1.real + gv2.real,
            "nsum": self.nu[ii] + self.nu[jj],
            "q1": self.quu1[ii] + self.quu1[jj],
            "q2": self.quu2[ii] + self.quu2[jj],
            "dv": (self.w1[ii] + self.w1[jj] - 2 * gv1.real
                   + self.w2[ii] + self.w2[jj] - 2 * gv2.real),
            "m1": self.w1[ii] + self.w1[jj] + 2 * gv1.real,
            "m2": self.w2[ii] + self.w2[jj] + 2 * gv2.real,
            "iv1": 2 * gv1.imag,
            "iv2": 2 * gv2.imag,
        }

    @staticmethod
    def dist2(d, theta):
        z = np.exp(1j * np.asarray(theta, dtype=float))
        zeta = z * d["gu"]
        xi1 = z * d["t1"]
        xi2 = z * d["t2"]
        rez = zeta.real
        S = np.maximum(2.0 + 2.0 * (rez + d["rv"]), 1e-300)  # |p + q_theta|^2
        inv = 1.0 / S
        sig = np.sqrt(inv)
        sig3 = sig * inv
        nu = d["nsum"] + 2.0 * rez  # |u + z w|^2
        k1 = sig3 * (2.0 * nu * xi1.real + 2.0 * zeta.imag * (d["q1"] + 2.0 * xi1.imag))
        k2 = sig3 * (2.0 * nu * xi2.real + 2.0 * zeta.imag * (d["q2"] + 2.0 * xi2.imag))
        x2 = d["nsum"] - 2.0 * rez + d["dv"]  # squared chord length
        return np.maximum(
            x2
            + 2.0 * sig * (k1 * d["iv1"] + k2 * d["iv2"])
            + inv * (k1 * k1 * d["m1"] + k2 * k2 * d["m2"]),
            0.0,
        )


def _golden_refine(f, lo, hi, tol=1e-10, max_iter=80):
    """Vectorized golden-section minimization of a smooth objective on
    per-element brackets [lo, hi]; returns (argmin, min)."""
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)
    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if float((b - a).max()) < tol:
            break
        left = f1 < f2
        b = np.where(left, x2, b)
        a = np.where(left, a, x1)
        xn = np.where(left, b - _INVPHI * (b - a), a + _INVPHI * (b - a))
        fn = f(xn)
        x1, x2, f1, f2 = (np.where(left, xn, x2), np.where(left, x1, xn),
                          np.where(left, fn, f2), np.where(left, f1, fn))
    pick = f1 < f2
    return np.where(pick, x1, x2), np.minimum(f1, f2)


def _prefilter_shrink(form):
    """Provable factor with quotient_distance >= shrink * orbit_chord on the
    sphere, enabling sound pair pruning.

    The metric displaces a tangent chord X by kappa(X)#, which lands in the
    span of the torus orbit directions while kappa vanishes on that span; so
    splitting X into orbit/complement parts (fractions a, sqrt(1-a^2)) and
    bounding the displacement by beta * |complement| gives

        |X + kappa(X)#|^2 / |X|^2  >=  min_a (1 - a^2) + max(0, a - beta sqrt(1-a^2))^2

    with beta = (3 sqrt 3 / 8) * max_k |J_k|_2 (the extremal value of
    |u|^3 |v| on the unit sphere times the 2 from the two form terms).  The
    minimum is taken on a grid with a subtracted safety margin; a value too
    close to zero disables pruning instead of risking unsoundness.
    """
    if form.j is None:
        return 1.0
    beta = (3.0 ** 1.5 / 8.0) * max(np.linalg.norm(form.j.J1, 2),
                                    np.linalg.norm(form.j.J2, 2))
    a = np.linspace(0.0, 1.0, 4097)
    g = 1.0 - a**2 + np.clip(a - beta * np.sqrt(np.clip(1.0 - a**2, 0.0, None)), 0.0, None) ** 2
    val = float(g.min()) - 0.01
    return math.sqrt(val) if val > 0.01 else 0.0


# ---------------------------------------------------------------------------
# quotient distances
# ---------------------------------------------------------------------------

def quotient_distance(x, y, form, resolution=64):
    """Distance in the quotient between the orbits of x and y: minimize the
    local deformed distance over the circle (grid of `resolution` angles,
    then golden-section refinement to 1e-10), then apply the chord-to-arc
    correction."""
    p = np.asarray(x.representative if isinstance(x, QuotientPoint) else x, dtype=complex)
    q = np.asarray(y.representative if isinstance(y, QuotientPoint) else y, dtype=complex)
    M = form.manifold
    thetas = np.linspace(0.0, 2.0 * math.pi, resolution, endpoint=False)
    if isinstance(M, Sphere):
        kern = _SphereOrbitKernel(np.stack([p, q]), form.j)
        data = kern.pair_data(np.array([0]), np.array([1]))

        def f(th):
            return kern.dist2(data, th)

        vals = kern.dist2({k: v[:, None] for k, v in data.items()}, thetas[None, :])[0]
    else:
        def f(th):
            return np.array([local_distance(p, M.act_G(q, float(t)), form) ** 2
                             for t in np.atleast_1d(th)])

        vals = f(thetas)
    i0 = int(np.argmin(vals))
    step = 2.0 * math.pi / resolution
    _, fmin = _golden_refine(f, np.array([thetas[i0] - step]), np.array([thetas[i0] + step]))
    return float(_chord_to_arc(math.sqrt(max(float(fmin[0]), 0.0)),
                               _manifold_radius(M)))


def _sphere_block(kern, ii, jj, epsilon, shrink, resolution, grid_chunk=32768):
    thetas = np.linspace(0.0, 2.0 * math.pi, resolution, endpoint=False)
    step = 2.0 * math.pi / resolution
    data = kern.pair_data(ii, jj)
    if shrink > 0.0 and epsilon is not None:
        cmin = np.sqrt(np.clip(2.0 - 2.0 * (np.abs(data["gu"]) + data["rv"]), 0.0, None))
        keep = shrink * cmin < epsilon
        if not keep.any():
            return ii[:0], jj[:0], np.empty(0)
        ii, jj = ii[keep], jj[keep]
        data = {k: v[keep] for k, v in data.items()}
    out = np.empty(len(ii))
    for s in range(0, len(ii), grid_chunk):
        sub = {k: v[s:s + grid_chunk] for k, v in data.items()}
        grid = kern.dist2({k: v[:, None] for k, v in sub.items()}, thetas[None, :])
        th0 = thetas[np.argmin(grid, axis=1)]

        def f(th, _sub=sub):
            return kern.dist2(_sub, th)

        _, fmin = _golden_refine(f, th0 - step, th0 + step)
        out[s:s + grid_chunk] = np.sqrt(fmin)
    d = _chord_to_arc(out, 1.0)
    if epsilon is not None:
        keep = d < epsilon
        return ii[keep], jj[keep], d[keep]
    return ii, jj, d


def pairwise_quotient_distances(points, form, epsilon=None, resolution=64,
                                block=1 << 20, workers=1):
    """Quotient distances for all index pairs i < j of a point list.

    Returns (ii, jj, d); when epsilon is given only pairs with d < epsilon
    are returned, and on the sphere a provable chordal lower bound prunes
    pairs before any angle search (see _prefilter_shrink).  The Stiefel path
    evaluates pairs one by one and is meant for small clouds.  Output is
    deterministic and independent of the worker count (blocks are assembled
    in index order).
    """
    pts = np.asarray(points)
    n = len(pts)
    iu, ju = np.triu_indices(n, k=1)
    M = form.manifold
    if isinstance(M, Sphere):
        kern = _SphereOrbitKernel(pts, form.j)
        shrink = _prefilter_shrink(form) if epsilon is not None else 0.0
        blocks = [(iu[s:s + block], ju[s:s + block]) for s in range(0, len(iu), block)]

        def work(args):
            bi, bj = args
            return _sphere_block(kern, bi, bj, epsilon, shrink, resolution)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(work, blocks))
        else:
            parts = [work(b) for b in blocks]
        ii = np.concatenate([p[0] for p in parts]) if parts else np.empty(0, dtype=int)
        jj = np.concatenate([p[1] for p in parts]) if parts else np.empty(0, dtype=int)
        dd = np.concatenate([p[2] for p in parts]) if parts else np.empty(0)
        return ii, jj, dd
    out_i, out_j, out_d = [], [], []
    for a, b in zip(iu, ju):
        d = quotient_distance(pts[a], pts[b], form, resolution)
        if epsilon is None or d < epsilon:
            out_i.append(a)
            out_j.append(b)
            out_d.append(d)
    return np.array(out_i, dtype=int), np.array(out_j, dtype=int), np.array(out_d)
