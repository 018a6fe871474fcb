"""Connection forms on the torus bundle and the non-isometry certificate.

Over the dense stratum M_hat (all of u, v1, v2 nonzero) the circle quotient
of the deformed sphere fibers as a principal 2-torus bundle, and the
canonical connection form has the closed components

    omega_0(X)_k = <V_k, i v_k> / |v_k|^2,

the unique T-invariant dual of the fundamental fields whose kernel is the
round-orthogonal complement of the orbit.  The deformation shifts it by the
admissible form itself, omega_lambda = omega_0 + kappa.  This module
evaluates these objects upstairs on ambient representatives, provides the
level sets |v1| = |v2| = a on which omega_0 is closed, a finite-difference
exterior derivative to see that closedness numerically, and the composite
non-isometry verdict for a pair of deformation maps: trace-word separation
(no symmetry and conjugation carries one map to the other) combined with a
trivial joint commutant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Sphere, Stiefel, fundamental_field, rdot
from .jmaps import (
    EquivalenceWitness,
    all_symmetries,
    find_equivalence,
    invariant_separation,
    is_generic,
    is_isospectral,
)

_DOMAIN_TOL = 1e-10


# ---------------------------------------------------------------------------
# connection forms
# ---------------------------------------------------------------------------

def omega0(p, X):
    """Canonical connection form at a regular point, as a 2-vector.

    Component k is <V_k, i v_k>/|v_k|^2 for the scalar blocks v_k of p and
    V_k of X; it pairs to 1 with the k-th torus fundamental field and kills
    the round-orthogonal complement of the orbit.
    """
    p = np.asarray(p)
    X = np.asarray(X)
    if p.ndim != 1:
        raise ValueError("omega0 is defined on sphere points (vectors)")
    m = len(p) - 2
    out = np.empty(2)
    for k in range(2):
        v = p[m + k]
        if abs(v) < _DOMAIN_TOL:
            raise ValueError(f"point outside the regular stratum: |v{k + 1}| < {_DOMAIN_TOL}")
        out[k] = (np.conj(X[m + k]) * 1j * v).real / (v.real ** 2 + v.imag ** 2)
    return out


def omega_lambda(form, p, X):
    """Deformed connection form omega_0 + kappa (2-vector).

    The deformation term is the admissible form of `form` evaluated on the
    ambient representative; it vanishes on the torus orbit, so the dual-basis
    property of omega_0 survives the shift.
    """
    if not isinstance(form.manifold, Sphere):
        raise ValueError("omega_lambda is defined on sphere quotients")
    return omega0(p, X) + form.kappa(p, X)


@dataclass(frozen=True)
class OrbitGram:
    """Metric data of the 2-torus orbit: Gram matrix of the fundamental
    fields and the flat-orbit area 4 pi^2 sqrt(det)."""

    matrix: np.ndarray
    area: float


def orbit_gram(p, form=None):
    """Gram matrix of (Z1#, Z2#) at p under g_kappa (g_0 when form is None).

    Computed from the actual fundamental fields and the actual metric; the
    closed form diag(|v1|^2, |v2|^2) and the deformation independence are
    what the tests verify against.
    """
    z1 = fundamental_field("Z1", p)
    z2 = fundamental_field("Z2", p)
    if form is None:
        inner = lambda X, Y: rdot(X, Y)
    else:
        inner = lambda X, Y: form.metric(p, X, Y)
    G = np.array([[inner(z1, z1), inner(z1, z2)],
                  [inner(z2, z1), inner(z2, z2)]])
    area = 4.0 * math.pi ** 2 * math.sqrt(max(float(np.linalg.det(G)), 0.0))
    return OrbitGram(G, area)


def random_m_hat_point(m, rng, margin=0.05):
    """Uniform sphere point conditioned on all three blocks exceeding the
    margin in norm (rejection sampling; the complement is a null set)."""
    M = Sphere(m)
    while True:
        p = M.random_point(rng)
        if (np.linalg.norm(p[:m]) > margin and abs(p[m]) > margin
                and abs(p[m + 1]) > margin):
            return p


# ---------------------------------------------------------------------------
# level sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevelSet:
    """The locus |v1| = |v2| = a inside the unit sphere, 0 < a < 1/sqrt(2).

    The bound keeps |u|^2 = 1 - 2 a^2 positive, so the set lies in the
    regular stratum; it is a torus bundle over the rescaled u-sphere and the
    natural domain on which the canonical connection form is closed.
    """

    a: float
    m: int = 3

    def __post_init__(self):
        if not 0.0 < self.a < 1.0 / math.sqrt(2.0):
            raise ValueError("need 0 < a < 1/sqrt(2)")
        if self.m < 1:
            raise ValueError("need m >= 1")

    @property
    def dim(self):
        return 2 * self.m + 1

    @property
    def u_norm(self):
        return math.sqrt(1.0 - 2.0 * self.a ** 2)

    def project_point(self, x):
        x = np.asarray(x, dtype=complex)
        m = self.m
        nu = np.linalg.norm(x[:m])
        if nu < _DOMAIN_TOL or abs(x[m]) < _DOMAIN_TOL or abs(x[m + 1]) < _DOMAIN_TOL:
            raise ValueError("cannot project: a block is too close to zero")
        out = np.empty_like(x)
        out[:m] = x[:m] * (self.u_norm / nu)
        out[m] = x[m] * (self.a / abs(x[m]))
        out[m + 1] = x[m + 1] * (self.a / abs(x[m + 1]))
        return out

    def project_tangent(self, p, X):
        """Remove the three block-radial normal directions (they have
        disjoint supports, so no orthogonalization is needed)."""
        p = np.asarray(p)
        X = np.asarray(X, dtype=complex).copy()
        m = self.m
        u = p[:m]
        X[:m] -= u * (rdot(u, X[:m]) / rdot(u, u))
        for k in (m, m + 1):
            v = p[k]
            X[k] -= v * (np.conj(v) * X[k]).real / (v.real ** 2 + v.imag ** 2)
        return X

    def random_point(self, rng):
        raw = (rng.standard_normal(self.m + 2)
               + 1j * rng.standard_normal(self.m + 2))
        return self.project_point(raw)

    def random_tangent(self, p, rng, unit=True):
        raw = (rng.standard_normal(self.m + 2)
               + 1j * rng.standard_normal(self.m + 2))
        X = self.project_tangent(p, raw)
        return X / np.linalg.norm(X) if unit else X

    def contains(self, p, tol=1e-10):
        m = self.m
        return (abs(np.linalg.norm(p[:m]) - self.u_norm) < tol
                and abs(abs(p[m]) - self.a) < tol
                and abs(abs(p[m + 1]) - self.a) < tol)


# ---------------------------------------------------------------------------
# finite-difference exterior derivative
# ---------------------------------------------------------------------------

def finite_diff_d(evaluator, space, p, X, Y, h=1e-4):
    """d(omega)(X, Y) = X(omega(Y~)) - Y(omega(X~)) - omega([X~, Y~]).

    X and Y are extended near p as projected ambient constants: the extension
    of X at q is space.project_tangent(q, X), and motion along a field is
    space.project_point(q + s W).  Directional derivatives and the bracket
    use central differences with the same step, so all scheme errors are
    O(h^2).  `evaluator(q, W)` may return a scalar or a vector.
    """
    if not 1e-12 < h < 0.1:
        raise ValueError("step h out of range (underflow guard)")

    def move(W, s):
        return space.project_point(p + s * W)

    def along(W, direction):
        qp, qm = move(direction, h), move(direction, -h)
        fp = np.asarray(evaluator(qp, space.project_tangent(qp, W)), dtype=float)
        fm = np.asarray(evaluator(qm, space.project_tangent(qm, W)), dtype=float)
        return (fp - fm) / (2.0 * h)

    def field_derivative(W, direction):
        qp, qm = move(direction, h), move(direction, -h)
        return (space.project_tangent(qp, W) - space.project_tangent(qm, W)) / (2.0 * h)

    x_of_wy = along(Y, X)
    y_of_wx = along(X, Y)
    bracket = space.project_tangent(p, field_derivative(Y, X) - field_derivative(X, Y))
    return x_of_wy - y_of_wx - np.asarray(evaluator(p, bracket), dtype=float)


# ---------------------------------------------------------------------------
# the non-isometry verdict
# ---------------------------------------------------------------------------

VERDICT_NON_ISOMETRIC = "non-isometric"
VERDICT_IDENTICAL = "isometric (identical)"
VERDICT_EQUIVALENT = "equivalent — criterion inapplicable"
VERDICT_INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class NonisometryReport:
    verdict: str
    isospectral: object
    separation: float
    separation_tol: float
    genericity_a: object
    genericity_b: object
    witness: EquivalenceWitness | None
    failing_check: str | None

    @property
    def separation_ok(self):
        return self.separation > self.separation_tol

    def to_dict(self):
        wit = None
        if self.witness is not None:
            wit = {
                "residual": float(self.witness.residual),
                "symmetry": {
                    "swap": bool(self.witness.symmetry.swap),
                    "sign1": int(self.witness.symmetry.sign1),
                    "sign2": int(self.witness.symmetry.sign2),
                    "conjugate": bool(self.witness.symmetry.conjugate),
                },
                "A": [[[float(z.real), float(z.imag)] for z in row]
                      for row in self.witness.A],
            }
        return {
            "verdict": self.verdict,
            "isospectral": {
                "ok": bool(self.isospectral.ok),
                "max_discrepancy": float(self.isospectral.max_discrepancy),
            },
            "separation": float(self.separation),
            "separation_tol": float(self.separation_tol),
            "separation_ok": bool(self.separation_ok),
            "commutant_dim_a": int(self.genericity_a.commutant_dim),
            "commutant_dim_b": int(self.genericity_b.commutant_dim),
            "generic_b": bool(self.genericity_b.ok),
            "witness": wit,
            "failing_check": self.failing_check,
        }


def nonisometry_report(jA, jB, manifold=None, separation_tol=1e-6,
                       witness_tol=1e-8, seed=0):
    """Decide whether the quotients deformed by jA and jB can be certified
    non-isometric.

    The certificate has two legs: the trace-word invariants must separate jA
    from every symmetry image of jB (no conjugation equivalence exists), and
    jB must have trivial joint commutant.  Both hold -> "non-isometric".
    When the invariants fail to separate, a witness search decides between
    "equivalent" (explicit conjugation found) and "inconclusive".  Frame
    quotients are refused: no non-isometry criterion is known for them, the
    question is open.
    """
    if isinstance(manifold, Stiefel):
        raise NotImplementedError(
            "no non-isometry criterion is implemented for frame-manifold "
            "quotients; the question is open")
    if manifold is not None and not isinstance(manifold, Sphere):
        raise TypeError("expected a Sphere (or None) as the manifold context")

    iso = is_isospectral(jA, jB)
    sep = invariant_separation(jA, jB)
    gen_a = is_generic(jA)
    gen_b = is_generic(jB)

    identical = (np.array_equal(jA.J1, jB.J1) and np.array_equal(jA.J2, jB.J2))
    if identical:
        witness = EquivalenceWitness(np.eye(jA.m, dtype=complex),
                                     all_symmetries()[0], 0.0)
        return NonisometryReport(VERDICT_IDENTICAL, iso, sep, separation_tol,
                                 gen_a, gen_b, witness, None)

    if sep > separation_tol:
        if gen_b.ok:
            return NonisometryReport(VERDICT_NON_ISOMETRIC, iso, sep,
                                     separation_tol, gen_a, gen_b, None, None)
        return NonisometryReport(VERDICT_INCONCLUSIVE, iso, sep, separation_tol,
                                 gen_a, gen_b, None, "genericity")

    witness = find_equivalence(jA, jB, tol=witness_tol, seed=seed)
    if witness is not None:
        return NonisometryReport(VERDICT_EQUIVALENT, iso, sep, separation_tol,
                                 gen_a, gen_b, witness, None)
    return NonisometryReport(VERDICT_INCONCLUSIVE, iso, sep, separation_tol,
                             gen_a, gen_b, None, "separation")
