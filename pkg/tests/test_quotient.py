"""Tests for quotient distances, strata, and the orbifold report.

Oracles: the analytic round-quotient distance arccos(|<u,u'>| + Re<v,v'>)
for the undeformed sphere, exact orbit arithmetic (rotating a representative
must not move the quotient point), brute-force angle scans against the
scalar kernel, and hand-counted stratification dimensions.
"""

import math

import numpy as np
import pytest

from quotspec.geometry import Sphere, Stiefel, fundamental_field, sphere_form, stiefel_form
from quotspec.jmaps import JMap, random_su
from quotspec.quotient import (
    QuotientPoint,
    StratumLabel,
    _prefilter_shrink,
    _SphereOrbitKernel,
    in_m_hat,
    local_distance,
    orbifold_report,
    orbit_chord,
    pairwise_quotient_distances,
    quotient_distance,
    same_orbit,
    stabilizer_dim,
    stratum,
)


def random_jmap(m, rng, norm=1.0):
    return JMap(random_su(m, rng, norm), random_su(m, rng, norm))


def round_quotient_oracle(p, q):
    m = len(p) - 2
    val = abs(np.vdot(p[:m], q[:m])) + np.real(np.vdot(p[m:], q[m:]))
    return math.acos(min(max(val, -1.0), 1.0))


def nearby_point(M, p, scale, rng):
    X = M.random_tangent(p, rng)
    return M.project_point(p + scale * X)


# ---------------------------------------------------------------------------
# local distance
# ---------------------------------------------------------------------------

def test_local_distance_zero_and_symmetry():
    rng = np.random.default_rng(0)
    form = sphere_form(random_jmap(3, rng))
    M = form.manifold
    p = M.random_point(rng)
    q = nearby_point(M, p, 0.1, rng)
    assert local_distance(p, p, form) == 0.0
    assert local_distance(p, q, form) == local_distance(q, p, form)


def test_local_distance_round_sphere_is_projected_chord():
    rng = np.random.default_rng(1)
    M = Sphere(3)
    form = sphere_form(None, 3)
    for scale in (0.05, 0.1, 0.3, 0.6):
        p = M.random_point(rng)
        q = nearby_point(M, p, scale, rng)
        arc = math.acos(min(max(np.real(np.vdot(p, q)), -1.0), 1.0))
        ld = local_distance(p, q, form)
        # the projected chord of a unit sphere is exactly 2 sin(arc/2)
        assert abs(ld - 2.0 * math.sin(arc / 2.0)) < 1e-12
        assert abs(ld - arc) < arc**3 / 20.0


def test_local_distance_along_torus_orbit():
    rng = np.random.default_rng(2)
    M = Sphere(3)
    eps = 1e-3
    for form in (sphere_form(random_jmap(3, rng)),):
        p = M.random_point(rng)
        t = eps / abs(p[3])  # flow time for a g0-length-eps step along Z1#
        q = M.act_T(p, t, 0.0)
        assert abs(local_distance(p, q, form) - eps) < 0.01 * eps


def test_local_distance_antipodal_fallback():
    M = Sphere(3)
    form = sphere_form(None, 3)
    p = M.random_point(np.random.default_rng(3))
    assert abs(local_distance(p, -p, form) - 2.0) < 1e-12


# ---------------------------------------------------------------------------
# the scalar kernel is the same objective
# ---------------------------------------------------------------------------

def test_kernel_matches_direct_evaluation():
    rng = np.random.default_rng(4)
    j = random_jmap(3, rng)
    form = sphere_form(j)
    M = form.manifold
    pts = np.stack([M.random_point(rng) for _ in range(6)])
    kern = _SphereOrbitKernel(pts, j)
    worst = 0.0
    for _ in range(40):
        a, b = rng.integers(0, 6, size=2)
        if a == b:
            continue
        th = float(rng.uniform(0, 2 * math.pi))
        data = kern.pair_data(np.array([a]), np.array([b]))
        fast = math.sqrt(float(kern.dist2(data, np.array([th]))[0]))
        slow = local_distance(pts[a], M.act_G(pts[b], th), form)
        worst = max(worst, abs(fast - slow))
    assert worst < 1e-12


def test_kernel_handles_zero_form():
    rng = np.random.default_rng(5)
    M = Sphere(3)
    pts = np.stack([M.random_point(rng) for _ in range(4)])
    kern = _SphereOrbitKernel(pts, None)
    data = kern.pair_data(np.array([0]), np.array([1]))
    chord2 = np.linalg.norm(pts[1] - pts[0]) ** 2
    assert abs(float(kern.dist2(data, np.array([0.0]))[0]) - chord2) < 1e-12


# ---------------------------------------------------------------------------
# quotient distance
# ---------------------------------------------------------------------------

def test_quotient_distance_vanishes_on_orbits():
    rng = np.random.default_rng(6)
    j = random_jmap(3, rng)
    for form in (sphere_form(j), stiefel_form(j, r=2)):
        M = form.manifold
        p = M.random_point(rng)
        q = M.act_G(p, 2.2)
        assert quotient_distance(p, q, form) < 1e-9
        assert same_orbit(p, q)
        assert QuotientPoint(p) == QuotientPoint(q)


def test_quotient_points_distinguish_orbits():
    rng = np.random.default_rng(7)
    M = Sphere(3)
    p = M.random_point(rng)
    q = M.random_point(rng)
    assert QuotientPoint(p) != QuotientPoint(q)
    assert orbit_chord(p, q) > 0.1
    with pytest.raises(TypeError):
        hash(QuotientPoint(p))


def test_round_quotient_matches_analytic_oracle():
    rng = np.random.default_rng(8)
    M = Sphere(3)
    form = sphere_form(None, 3)
    for scale in (0.05, 0.15, 0.25):
        for _ in range(10):
            p = M.random_point(rng)
            q = nearby_point(M, p, scale, rng)
            oracle = round_quotient_oracle(p, q)
            if oracle < 1e-6:
                continue
            est = quotient_distance(p, q, form)
            assert abs(est - oracle) / oracle < 1e-3
            assert abs(est - oracle) < 1e-8  # arc correction is exact here


def test_singular_stratum_is_round_s3():
    # points with vanishing u block: the circle acts trivially, distances are
    # plain 3-sphere distances, deformed or not
    rng = np.random.default_rng(9)
    j = random_jmap(3, rng)
    M = Sphere(3)
    for form in (sphere_form(None, 3), sphere_form(j)):
        for _ in range(5):
            v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            v /= np.linalg.norm(v)
            w = v + 0.15 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
            w /= np.linalg.norm(w)
            p = np.concatenate([np.zeros(3), v])
            q = np.concatenate([np.zeros(3), w])
            d3 = math.acos(min(max(np.real(np.vdot(v, w)), -1.0), 1.0))
            assert abs(quotient_distance(p, q, form) - d3) < 1e-8


def test_quotient_distance_symmetry_and_translate_invariance():
    rng = np.random.default_rng(10)
    j = random_jmap(3, rng)
    form = sphere_form(j)
    M = form.manifold
    p = M.random_point(rng)
    q = nearby_point(M, p, 0.2, rng)
    d = quotient_distance(p, q, form)
    assert abs(d - quotient_distance(q, p, form)) < 1e-9
    for theta in (0.9, 3.7):
        assert abs(quotient_distance(p, M.act_G(q, theta), form) - d) < 1e-9
        assert abs(quotient_distance(M.act_G(p, theta), q, form) - d) < 1e-9


def test_quotient_distance_triangle_inequality_locally():
    rng = np.random.default_rng(11)
    j = random_jmap(3, rng)
    form = sphere_form(j)
    M = form.manifold
    for _ in range(15):
        p = M.random_point(rng)
        q = nearby_point(M, p, 0.15, rng)
        r = nearby_point(M, p, 0.15, rng)
        dpq = quotient_distance(p, q, form)
        dqr = quotient_distance(q, r, form)
        dpr = quotient_distance(p, r, form)
        slack = 0.02 * (dpq + dqr + dpr)
        assert dpr <= dpq + dqr + slack


def test_stiefel_r1_quotient_equals_sphere_quotient():
    rng = np.random.default_rng(12)
    j = random_jmap(3, rng)
    sph = sphere_form(j)
    sti = stiefel_form(j, r=1)
    M = sph.manifold
    for _ in range(5):
        p = M.random_point(rng)
        q = nearby_point(M, p, 0.2, rng)
        a = quotient_distance(p, q, sph)
        b = quotient_distance(p[:, None], q[:, None], sti)
        assert abs(a - b) < 1e-9


def test_stiefel_quotient_distance_basics():
    rng = np.random.default_rng(13)
    j = random_jmap(3, rng)
    form = stiefel_form(j, r=2)
    M = form.manifold
    Q = M.random_point(rng)
    P = M.project_point(Q + 0.1 * M.random_tangent(Q, rng))
    d = quotient_distance(Q, P, form)
    assert 0.0 < d < 0.5
    assert abs(d - quotient_distance(P, Q, form)) < 1e-9
    assert abs(quotient_distance(Q, M.act_G(P, 1.3), form) - d) < 1e-9


# ---------------------------------------------------------------------------
# bulk assembly
# ---------------------------------------------------------------------------

def test_pairwise_matches_single_pair_calls():
    rng = np.random.default_rng(14)
    j = random_jmap(3, rng)
    form = sphere_form(j)
    M = form.manifold
    pts = np.stack([M.random_point(rng) for _ in range(12)])
    ii, jj, dd = pairwise_quotient_distances(pts, form)
    assert len(dd) == 12 * 11 // 2
    for a, b, d in zip(ii[:20], jj[:20], dd[:20]):
        assert abs(d - quotient_distance(pts[a], pts[b], form)) < 1e-10


def test_pairwise_prefilter_is_sound():
    rng = np.random.default_rng(15)
    j = random_jmap(3, rng)
    form = sphere_form(j)
    M = form.manifold
    pts = np.stack([M.random_point(rng) for _ in range(40)])
    eps = 0.7
    ii, jj, dd = pairwise_quotient_distances(pts, form, epsilon=eps)
    fi, fj, fd = pairwise_quotient_distances(pts, form)
    expected = {(a, b): d for a, b, d in zip(fi, fj, fd) if d < eps}
    got = {(a, b): d for a, b, d in zip(ii, jj, dd)}
    assert set(got) == set(expected)
    for key, d in got.items():
        assert abs(d - expected[key]) < 1e-12
    assert _prefilter_shrink(form) > 0.3


def test_pairwise_worker_count_does_not_change_output():
    rng = np.random.default_rng(16)
    j = random_jmap(3, rng)
    form = sphere_form(j)
    M = form.manifold
    pts = np.stack([M.random_point(rng) for _ in range(30)])
    a = pairwise_quotient_distances(pts, form, epsilon=0.8, block=64)
    b = pairwise_quotient_distances(pts, form, epsilon=0.8, block=64, workers=4)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


def test_pairwise_stiefel_small_cloud():
    rng = np.random.default_rng(17)
    j = random_jmap(3, rng)
    form = stiefel_form(j, r=2)
    M = form.manifold
    pts = np.stack([M.random_point(rng) for _ in range(6)])
    ii, jj, dd = pairwise_quotient_distances(pts, form)
    assert len(dd) == 15
    k = 4
    assert abs(dd[k] - quotient_distance(pts[ii[k]], pts[jj[k]], form)) < 1e-12


# ---------------------------------------------------------------------------
# strata and the orbifold report
# ---------------------------------------------------------------------------

def test_stabilizer_dimensions():
    rng = np.random.default_rng(18)
    v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    v /= np.linalg.norm(v)
    fixed = np.concatenate([np.zeros(3), v])
    assert stabilizer_dim(fixed) == 1
    assert stratum(fixed) == StratumLabel(1, False)
    p = np.concatenate([np.full(3, 0.5 / math.sqrt(3)), math.sqrt(0.75) * v])
    assert stabilizer_dim(p) == 0
    assert stratum(p).is_regular
    # width-2 frames with vanishing top block are fixed
    Q = np.zeros((5, 2), dtype=complex)
    Q[3, 0] = Q[4, 1] = 1.0
    assert stabilizer_dim(Q) == 1
    # width-3 frames are never fixed, whatever the entries
    M = Stiefel(3, 3)
    assert stabilizer_dim(M.random_point(rng)) == 0
    Q3 = np.zeros((5, 3), dtype=complex)
    Q3[3, 0] = Q3[4, 1] = 1.0
    Q3[0, 2] = 1.0
    assert stabilizer_dim(Q3) == 0


def test_m_hat_detection_matches_componentwise_checks():
    rng = np.random.default_rng(19)
    M = Sphere(3)
    tol = 1e-8
    pts = [M.random_point(rng) for _ in range(10000 - 4)]
    v = np.array([1.0, 1j]) / math.sqrt(2)
    pts.append(np.concatenate([np.zeros(3), v]))                      # u = 0
    pts.append(np.concatenate([np.ones(3) / math.sqrt(3), [0, 0]]))   # v = 0
    pts.append(np.concatenate([np.ones(3) / math.sqrt(6), [1j / math.sqrt(2), 0]]))
    pts.append(np.concatenate([np.ones(3) / math.sqrt(6), [0, 1j / math.sqrt(2)]]))
    for p in pts:
        closed = in_m_hat(p, tol)
        componentwise = (stabilizer_dim(p, tol) == 0
                         and abs(p[3]) > tol and abs(p[4]) > tol)
        assert closed == componentwise
    with pytest.raises(ValueError):
        in_m_hat(np.zeros((5, 2), dtype=complex))


def test_orbifold_report_sphere():
    rep = orbifold_report(Sphere(3))
    assert rep.quotient_dim == 8
    assert rep.singular_dim == 3
    assert rep.codim == 5
    assert not rep.is_orbifold
    assert not rep.is_manifold
    d = rep.to_dict()
    assert d["singular_geometry"] == "round S^3"
    assert d["r"] is None


def test_orbifold_report_stiefel():
    rep2 = orbifold_report(Stiefel(3, 2))
    assert rep2.quotient_dim == 11
    assert rep2.singular_dim == 4
    assert rep2.codim == 7
    assert not rep2.is_orbifold
    rep3 = orbifold_report(Stiefel(3, 3))
    assert rep3.is_orbifold
    assert rep3.is_manifold
    assert rep3.singular_dim is None
    rep1 = orbifold_report(Stiefel(3, 1))
    sph = orbifold_report(Sphere(3))
    assert (rep1.quotient_dim, rep1.singular_dim, rep1.codim) == (
        sph.quotient_dim, sph.singular_dim, sph.codim)


def test_orbifold_report_rejects_other_manifolds():
    from quotspec.geometry import RoundSphere

    with pytest.raises(TypeError):
        orbifold_report(RoundSphere(4))
