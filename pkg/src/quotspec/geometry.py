"""Sphere and Stiefel geometry behind the deformed quotient metrics.

Two ambient homogeneous spaces are supported: the unit sphere S^{2m+3} inside
C^m x C^2, with points stored as complex vectors (u, v1, v2), and the complex
Stiefel manifold V_r(C^s), s = m+2, with points stored as s x r complex
matrices Q with Q*Q = I.  Both carry a circle action G (scalar rotation of
the u block / of the top m rows) and a torus action T (componentwise rotation
of the last two complex coordinates / rows), which commute.

A j-map j induces a T-valued 1-form kappa on either space; the sphere form is

    kappa^k(X) = ||u||^2 <j_{Z_k} u, U> - <U, iu> <j_{Z_k} u, iu>,

with U the u-block of X and <,> the real part of the Hermitian product, while
the Stiefel form is kappa^k(X) = g0(X, (j_{Z_k})# Q) for g0 = Re tr(X* Y),
optionally G-horizontalized.  The deformed metric is

    g_kappa(X, Y) = g0(X + kappa(X)#, Y + kappa(Y)#),

where # turns a T-value into the corresponding fundamental field.  g_kappa
has the same volume element as g0, which is what makes spectra comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .jmaps import JMap, align_conjugator, eval_jmap, is_isospectral

_GENERATORS = ("Z1", "Z2", "iG")


def rdot(a, b):
    """Real part of the Hermitian inner product (flattens matrices)."""
    return float(np.real(np.vdot(a, b)))


def _unit(x):
    return x / np.linalg.norm(x)


def sphere_volume(n):
    """Riemannian volume of the unit n-sphere."""
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)


# ---------------------------------------------------------------------------
# Manifolds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sphere:
    """Unit sphere in C^m x C^2; points are complex vectors (u, v1, v2)."""

    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be positive")

    @property
    def dim(self):
        return 2 * self.m + 3

    @property
    def volume(self):
        return sphere_volume(self.dim)

    def random_point(self, rng):
        z = rng.standard_normal(self.m + 2) + 1j * rng.standard_normal(self.m + 2)
        return _unit(z)

    def random_tangent(self, p, rng, unit=True):
        z = rng.standard_normal(self.m + 2) + 1j * rng.standard_normal(self.m + 2)
        X = self.project_tangent(p, z)
        return _unit(X) if unit else X

    def project_point(self, x):
        return _unit(x)

    def project_tangent(self, p, X):
        return X - rdot(p, X) * p

    def constraint_residual(self, p):
        return abs(np.linalg.norm(p) - 1.0)

    def tangency_residual(self, p, X):
        return abs(rdot(p, X))

    def g0(self, p, X, Y):
        return rdot(X, Y)

    # group actions (linear unitary maps; tangent pushforward is the same map)

    def act_G(self, p, theta):
        q = np.array(p, dtype=complex)
        q[: self.m] *= np.exp(1j * theta)
        return q

    def act_T(self, p, t1, t2):
        q = np.array(p, dtype=complex)
        q[self.m] *= np.exp(1j * t1)
        q[self.m + 1] *= np.exp(1j * t2)
        return q


@dataclass(frozen=True)
class Stiefel:
    """Complex Stiefel manifold V_r(C^{m+2}); points are (m+2) x r frames."""

    m: int
    r: int

    def __post_init__(self):
        if not 1 <= self.r <= self.m + 2:
            raise ValueError("need 1 <= r <= m + 2")

    @property
    def s(self):
        return self.m + 2

    @property
    def dim(self):
        # real dimension of {Q : Q*Q = I_r}: 2sr ambient reals minus r^2
        # Hermitian constraints
        return self.r * (2 * self.s - self.r)

    @property
    def volume(self):
        return math.prod(sphere_volume(2 * k - 1)
                         for k in range(self.s - self.r + 1, self.s + 1))

    def random_point(self, rng):
        A = rng.standard_normal((self.s, self.r)) + 1j * rng.standard_normal((self.s, self.r))
        return self.project_point(A)

    def random_tangent(self, Q, rng, unit=True):
        A = rng.standard_normal((self.s, self.r)) + 1j * rng.standard_normal((self.s, self.r))
        X = self.project_tangent(Q, A)
        return X / np.linalg.norm(X) if unit else X

    def project_point(self, M):
        # polar factor: closest frame in Frobenius norm
        U, _, Vh = np.linalg.svd(M, full_matrices=False)
        return U @ Vh

    def project_tangent(self, Q, X):
        S = Q.conj().T @ X
        return X - Q @ ((S + S.conj().T) / 2.0)

    def constraint_residual(self, Q):
        return float(np.abs(Q.conj().T @ Q - np.eye(self.r)).max())

    def tangency_residual(self, Q, X):
        S = Q.conj().T @ X
        return float(np.abs(S + S.conj().T).max())

    def g0(self, Q, X, Y):
        return rdot(X, Y)

    def act_G(self, Q, theta):
        P = np.array(Q, dtype=complex)
        P[: self.m] *= np.exp(1j * theta)
        return P

    def act_T(self, Q, t1, t2):
        P = np.array(Q, dtype=complex)
        P[self.m] *= np.exp(1j * t1)
        P[self.m + 1] *= np.exp(1j * t2)
        return P


@dataclass(frozen=True)
class RoundSphere:
    """Plain real unit sphere S^n in R^{n+1}; calibration target with exact
    geodesics and known Laplace spectrum, no group actions."""

    n: int

    @property
    def dim(self):
        return self.n

    @property
    def volume(self):
        return sphere_volume(self.n)

    def random_point(self, rng):
        return _unit(rng.standard_normal(self.n + 1))

    def distance(self, p, q):
        return float(np.arccos(np.clip(np.dot(p, q), -1.0, 1.0)))


# ---------------------------------------------------------------------------
# Fundamental fields and block actions
# ---------------------------------------------------------------------------

def fundamental_field(generator, p):
    """Fundamental vector field of a one-parameter subgroup at p.

    generator: "Z1" or "Z2" (the torus factors, rotating the last two complex
    coordinates/rows) or "iG" (the circle, rotating the first m).  Sphere
    points are vectors (u, v1, v2); Stiefel points are (m+2) x r matrices,
    where the field is left multiplication by the corresponding block
    generator.
    """
    if generator not in _GENERATORS:
        raise ValueError(f"unknown generator {generator!r}; expected one of {_GENERATORS}")
    out = np.zeros_like(np.asarray(p, dtype=complex))
    m = out.shape[0] - 2
    if generator == "Z1":
        out[m] = 1j * p[m]
    elif generator == "Z2":
        out[m + 1] = 1j * p[m + 1]
    else:
        out[:m] = 1j * np.asarray(p)[:m]
    return out


def jmap_field(j, Z, p):
    """Fundamental field of the su(m) direction j_Z: u block mapped through
    j_Z, everything else zero (padded block matrix action)."""
    out = np.zeros_like(np.asarray(p, dtype=complex))
    m = j.m
    out[:m] = eval_jmap(j, Z) @ np.asarray(p)[:m]
    return out


def apply_block_unitary(A, p):
    """Apply the block-diagonal map (A, Id_2): A on the u block / top m rows,
    identity on the rest.  Same formula pushes tangents forward."""
    q = np.array(p, dtype=complex)
    mA = A.shape[0]
    q[:mA] = A @ q[:mA]
    return q


# ---------------------------------------------------------------------------
# Admissible forms
# ---------------------------------------------------------------------------

def kappa_sphere(j, p, X):
    """T-value of the sphere deformation form at p applied to X.

    Component k is ||u||^2 <j_{Z_k} u, U> - <U, iu> <j_{Z_k} u, iu> with u, U
    the C^m blocks of p, X.  Vanishes when u = 0, on the T-orbit directions
    (U = 0), and on the G-orbit direction (U = iu, exact cancellation).
    """
    m = j.m
    u = np.asarray(p)[:m]
    U = np.asarray(X)[:m]
    uu = rdot(u, u)
    iu = 1j * u
    out = np.empty(2)
    for k, J in enumerate((j.J1, j.J2)):
        ju = J @ u
        out[k] = uu * rdot(ju, U) - rdot(U, iu) * rdot(ju, iu)
    return out


def kappa_stiefel(j, Q, X):
    """Raw Stiefel deformation form: component k is Re tr(X* (j_{Z_k})# Q),
    i.e. the g0-pairing of X with the padded j-map field.  T-horizontal and
    G/T-invariant, but not G-horizontal in general."""
    m = j.m
    Xt = np.asarray(X)[:m]
    Qt = np.asarray(Q)[:m]
    return np.array([rdot(Xt, j.J1 @ Qt), rdot(Xt, j.J2 @ Qt)])


@dataclass(frozen=True)
class FormSpec:
    """An admissible T-valued 1-form packaged with its manifold.

    Sphere forms always evaluate the closed sphere formula; Stiefel forms are
    either the raw pairing or its G-horizontalization (the default).  j=None
    means the zero form (round metric).
    """

    manifold: object
    j: JMap | None
    horizontalized: bool = True

    def __post_init__(self):
        if self.j is not None and not isinstance(self.manifold, (Sphere, Stiefel)):
            raise ValueError("deformation forms need a Sphere or Stiefel manifold")
        if self.j is not None and self.j.m != self.manifold.m:
            raise ValueError("j-map size and manifold m disagree")

    def raw_kappa(self, p, X):
        if self.j is None:
            return np.zeros(2)
        if isinstance(self.manifold, Sphere):
            return kappa_sphere(self.j, p, X)
        return kappa_stiefel(self.j, p, X)

    def kappa(self, p, X):
        if self.j is None:
            return np.zeros(2)
        if isinstance(self.manifold, Sphere) or not self.horizontalized:
            return self.raw_kappa(p, X)
        return horizontalize(self, p, X)

    def kappa_sharp(self, p, X):
        """Ambient representative of kappa(X)#, the T-fundamental field of
        the t-value."""
        c = self.kappa(p, X)
        out = np.zeros_like(np.asarray(p, dtype=complex))
        mm = out.shape[0] - 2
        out[mm] = 1j * c[0] * p[mm]
        out[mm + 1] = 1j * c[1] * p[mm + 1]
        return out

    def metric(self, p, X, Y):
        return metric_g_kappa(self, p, X, Y)


def sphere_form(j, m=None):
    return FormSpec(Sphere(m if m is not None else j.m), j)


def stiefel_form(j, r, m=None, horizontalized=True):
    return FormSpec(Stiefel(m if m is not None else j.m, r), j, horizontalized)


def horizontalize(form, p, X):
    """G-horizontalized value kappa_H(X) = ||i#||^2 kappa(X) - g0(X, i#) kappa(i#).

    Uses the raw form of `form`; at G-fixed points (i# = 0) both terms vanish
    and the formula needs no special casing.
    """
    e = fundamental_field("iG", p)
    ee = rdot(e, e)
    base = form.raw_kappa(p, X)
    return ee * base - rdot(X, e) * form.raw_kappa(p, e)


def metric_g_kappa(form, p, X, Y):
    """Deformed metric g_kappa(X, Y) = g0(X + kappa(X)#, Y + kappa(Y)#)."""
    return rdot(X + form.kappa_sharp(p, X), Y + form.kappa_sharp(p, Y))


# ---------------------------------------------------------------------------
# Tangent frames and volume distortion
# ---------------------------------------------------------------------------

def _realify(X):
    flat = np.asarray(X).ravel()
    return np.concatenate([flat.real, flat.imag])


def _unrealify(x, shape):
    half = x.size // 2
    return (x[:half] + 1j * x[half:]).reshape(shape)


def tangent_basis(manifold, p):
    """g0-orthonormal basis of the tangent space at p, as ambient arrays.

    Projects the ambient real coordinate axes and extracts an orthonormal
    frame by SVD; the frame size equals the manifold dimension.
    """
    shape = np.asarray(p).shape
    amb = int(np.prod(shape))
    cols = []
    for k in range(amb):
        for part in (1.0, 1j):
            E = np.zeros(shape, dtype=complex)
            E.ravel()[k] = part
            cols.append(_realify(manifold.project_tangent(p, E)))
    M = np.array(cols).T
    U, s, _ = np.linalg.svd(M)
    rank = int(np.sum(s > 1e-10))
    if rank != manifold.dim:
        raise RuntimeError(f"tangent rank {rank} != manifold dim {manifold.dim}")
    return [_unrealify(U[:, i], shape) for i in range(rank)]


def volume_distortion(form, p):
    """|det Gram(g_kappa) - det Gram(g0)| on an orthonormal tangent frame.

    Exactly zero in exact arithmetic: kappa(X)# lies in the span of the
    T-orbit directions and kappa kills that span, so the displacement map is
    2-step nilpotent and has unit determinant.
    """
    frame = tangent_basis(form.manifold, p)
    shifted = np.array([_realify(b + form.kappa_sharp(p, b)) for b in frame])
    plain = np.array([_realify(b) for b in frame])
    return abs(np.linalg.det(shifted @ shifted.T) - np.linalg.det(plain @ plain.T))


# ---------------------------------------------------------------------------
# Admissibility and intertwining verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdmissibilityReport:
    ok: bool
    residuals: dict
    failed: tuple
    n_points: int
    tol: float

    def __bool__(self):
        return self.ok


def check_admissible(form, n_points=50, seed=0, tol=1e-10):
    """Verify G/T-horizontality and G/T-invariance of a form numerically.

    Horizontality: kappa(Z1#), kappa(Z2#), kappa(iG#) at random points.
    Invariance: kappa at a moved point on the pushed-forward tangent equals
    kappa at the original pair, for random circle and torus elements (the
    actions are linear, so the pushforward is the same rotation).
    """
    M = form.manifold
    rng = np.random.default_rng(seed)
    res = {"t_horizontality": 0.0, "g_horizontality": 0.0,
           "g_invariance": 0.0, "t_invariance": 0.0}
    for _ in range(n_points):
        p = M.random_point(rng)
        X = M.random_tangent(p, rng)
        val = form.kappa(p, X)
        for gen in ("Z1", "Z2"):
            res["t_horizontality"] = max(res["t_horizontality"],
                                         float(np.abs(form.kappa(p, fundamental_field(gen, p))).max()))
        res["g_horizontality"] = max(res["g_horizontality"],
                                     float(np.abs(form.kappa(p, fundamental_field("iG", p))).max()))
        theta = rng.uniform(0, 2 * math.pi)
        moved = form.kappa(M.act_G(p, theta), M.act_G(X, theta))
        res["g_invariance"] = max(res["g_invariance"], float(np.abs(moved - val).max()))
        t1, t2 = rng.uniform(0, 2 * math.pi, size=2)
        moved = form.kappa(M.act_T(p, t1, t2), M.act_T(X, t1, t2))
        res["t_invariance"] = max(res["t_invariance"], float(np.abs(moved - val).max()))
    failed = tuple(name for name, r in res.items() if r > tol)
    return AdmissibilityReport(not failed, res, failed, n_points, tol)


@dataclass(frozen=True)
class IntertwiningReport:
    ok: bool
    max_residual: float
    conjugation_residual: float
    mu: tuple
    n_points: int
    tol: float
    isospectral_ok: bool

    def __bool__(self):
        return self.ok


def intertwiner(j, j2, mu):
    """The SU(m) block of the weight-mu intertwiner: the conjugator aligning
    j_Z with j2_Z for Z = (mu1, mu2).  Scale-invariant in mu; mu = (0, 0)
    yields the identity."""
    Z = (float(mu[0]), float(mu[1]))
    if Z == (0.0, 0.0):
        return np.eye(j.m, dtype=complex)
    return align_conjugator(eval_jmap(j, Z), eval_jmap(j2, Z))


def verify_intertwining(j, j2, mu, manifold, n_points=200, seed=0, tol=1e-8,
                        horizontalized=True):
    """Check mu . kappa = E_mu^* (mu . kappa') at random (point, tangent) pairs.

    E_mu = (A_Z, Id_2) acts block-diagonally with A_Z the eigenalignment
    conjugator for the direction Z picked out by the weight.  E_mu is exactly
    unitary and commutes with both group actions by its block structure;
    unitarity is asserted, the rest is structural.
    """
    M = manifold
    A = intertwiner(j, j2, mu)
    unit_res = float(np.abs(A.conj().T @ A - np.eye(j.m)).max())
    if unit_res > 1e-10:
        raise RuntimeError(f"intertwiner not unitary: residual {unit_res:.2e}")
    Z = (float(mu[0]), float(mu[1]))
    conj_res = float(np.abs(A @ eval_jmap(j, Z) @ A.conj().T - eval_jmap(j2, Z)).max())
    iso = bool(is_isospectral(j, j2))

    formA = FormSpec(M, j, horizontalized)
    formB = FormSpec(M, j2, horizontalized)
    mu_vec = np.array([float(mu[0]), float(mu[1])])
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_points):
        p = M.random_point(rng)
        X = M.random_tangent(p, rng)
        lhs = float(mu_vec @ formA.kappa(p, X))
        rhs = float(mu_vec @ formB.kappa(apply_block_unitary(A, p),
                                         apply_block_unitary(A, X)))
        worst = max(worst, abs(lhs - rhs))
    return IntertwiningReport(worst < tol, worst, conj_res, (mu[0], mu[1]),
                              n_points, tol, iso)
