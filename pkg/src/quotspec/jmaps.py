"""Linear maps from the torus algebra into su(m) and their isospectral families.

A j-map sends Z = (a, b) in R^2 (coordinates in the standard torus generators)
to the traceless skew-Hermitian matrix a*J1 + b*J2.  Three properties of a
pair of such maps drive everything downstream:

* isospectrality: a*J1 + b*J2 and a*J1' + b*J2' share spectra for every (a, b);
* equivalence: j'_Z = A j_{psi(Z)} A^{-1} for some A in SU(m), optionally
  composed with complex conjugation, and one of the eight signed swaps psi of
  the generators;
* genericity: no nonzero element of su(m) commutes with both J1 and J2.

The module provides exact finite certificates for isospectrality and
genericity, trace-word invariants whose separation certifies non-equivalence,
a deterministic conjugator builder for single directions, a random-restart
search for equivalence witnesses, and a numerical-continuation generator that
produces one-parameter isospectral families of pairwise non-equivalent
generic maps (possible for m >= 3).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

GENERATOR_VERSION = "quotspec-family-1"

_EPS_STRUCT = 1e-12  # structural tolerances: skew-Hermitian / traceless / unitary


class FamilyGenerationError(RuntimeError):
    """Continuation could not produce a valid family."""


# ---------------------------------------------------------------------------
# su(m) basics
# ---------------------------------------------------------------------------

def su_basis(m):
    """Orthonormal real basis of su(m) w.r.t. Re tr(A* B).

    Ordering: real antisymmetric pairs, then imaginary symmetric pairs, then
    imaginary traceless diagonals.  Deterministic; length m**2 - 1.
    """
    basis = []
    for k in range(m):
        for l in range(k + 1, m):
            B = np.zeros((m, m), dtype=complex)
            B[k, l] = 1.0
            B[l, k] = -1.0
            basis.append(B / math.sqrt(2.0))
    for k in range(m):
        for l in range(k + 1, m):
            B = np.zeros((m, m), dtype=complex)
            B[k, l] = 1j
            B[l, k] = 1j
            basis.append(B / math.sqrt(2.0))
    for d in range(1, m):
        diag = np.zeros(m)
        diag[:d] = 1.0
        diag[d] = -d
        basis.append(1j * np.diag(diag) / math.sqrt(d * (d + 1)))
    return basis


def random_su(m, rng, norm=1.0):
    """Random su(m) element with Frobenius norm `norm`, from the given rng."""
    basis = su_basis(m)
    x = rng.standard_normal(len(basis))
    x *= norm / np.linalg.norm(x)
    out = np.zeros((m, m), dtype=complex)
    for c, B in zip(x, basis):
        out += c * B
    return out


def haar_su(m, rng):
    """Haar-distributed SU(m) matrix (QR of a complex Gaussian, phases fixed)."""
    A = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    Q, R = np.linalg.qr(A)
    d = np.diagonal(R)
    Q = Q * (d / np.abs(d))
    det = np.linalg.det(Q)
    return Q * np.exp(-1j * np.angle(det) / m)


def skew_hermitian_residual(A):
    """Max-entry deviation of A from A* = -A."""
    return float(np.max(np.abs(A + A.conj().T))) if A.size else 0.0


def _exp_su(X):
    """Matrix exponential of a skew-Hermitian X via eigendecomposition.

    Exactly unitary up to roundoff, which keeps long descent runs on the
    group without re-projection.
    """
    w, V = np.linalg.eigh(-1j * X)
    return (V * np.exp(1j * w)) @ V.conj().T


def _rfrob(A):
    return float(np.linalg.norm(A))


# ---------------------------------------------------------------------------
# JMap and the 16-element symmetry group
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JMap:
    """Linear map R^2 -> su(m), stored by its values on the torus generators."""

    J1: np.ndarray
    J2: np.ndarray
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        J1 = np.array(self.J1, dtype=complex)
        J2 = np.array(self.J2, dtype=complex)
        if J1.ndim != 2 or J1.shape[0] != J1.shape[1] or J1.shape != J2.shape:
            raise ValueError("J1 and J2 must be square matrices of equal shape")
        scale = max(1.0, float(np.abs(J1).max()), float(np.abs(J2).max()))
        for name, J in (("J1", J1), ("J2", J2)):
            if skew_hermitian_residual(J) > _EPS_STRUCT * scale:
                raise ValueError(f"{name} is not skew-Hermitian")
            if abs(np.trace(J)) > _EPS_STRUCT * scale * J.shape[0]:
                raise ValueError(f"{name} is not traceless")
        J1.flags.writeable = False
        J2.flags.writeable = False
        object.__setattr__(self, "J1", J1)
        object.__setattr__(self, "J2", J2)

    @property
    def m(self):
        return self.J1.shape[0]

    def __call__(self, Z):
        return eval_jmap(self, Z)

    def scaled(self, c):
        """The map Z -> c * j_Z."""
        return JMap(c * self.J1, c * self.J2, dict(self.provenance))

    def conjugated(self, A):
        """Global conjugation Ad_A: Z -> A j_Z A*."""
        Ah = A.conj().T
        return JMap(A @ self.J1 @ Ah, A @ self.J2 @ Ah, dict(self.provenance))

    def transformed(self, sym):
        """Apply a symmetry-group element: Z -> j_{psi(Z)}, optionally conjugated."""
        K1, K2 = _apply_symmetry(self.J1, self.J2, sym)
        return JMap(K1, K2, dict(self.provenance))

    # -- serialization ------------------------------------------------------

    def to_dict(self):
        def enc(J):
            return [[[float(z.real), float(z.imag)] for z in row] for row in J]

        return {"m": self.m, "J1": enc(self.J1), "J2": enc(self.J2),
                "provenance": dict(self.provenance)}

    @classmethod
    def from_dict(cls, data):
        def dec(rows):
            return np.array([[complex(re, im) for re, im in row] for row in rows])

        return cls(dec(data["J1"]), dec(data["J2"]), dict(data.get("provenance", {})))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class EquivalenceSymmetry:
    """One of the 16 discrete symmetries: a signed swap of the torus
    generators, optionally composed with complex conjugation."""

    swap: bool
    sign1: int
    sign2: int
    conjugate: bool

    def apply_to_direction(self, Z):
        """psi(Z) for Z = (a, b): the signed-swap part only."""
        a, b = Z
        if self.swap:
            a, b = b, a
        return (self.sign1 * a, self.sign2 * b)


def all_symmetries():
    """The 16 group elements in a fixed deterministic order (identity first)."""
    out = []
    for conjugate in (False, True):
        for swap in (False, True):
            for sign1 in (1, -1):
                for sign2 in (1, -1):
                    out.append(EquivalenceSymmetry(swap, sign1, sign2, conjugate))
    return out


def _apply_symmetry(J1, J2, sym):
    A, B = (J2, J1) if sym.swap else (J1, J2)
    K1, K2 = sym.sign1 * A, sym.sign2 * B
    if sym.conjugate:
        K1, K2 = K1.conj(), K2.conj()
    return K1, K2


# ---------------------------------------------------------------------------
# Isospectrality and genericity
# ---------------------------------------------------------------------------

def eval_jmap(j, Z):
    """Value a*J1 + b*J2 of the map on the torus vector Z = (a, b)."""
    a, b = float(Z[0]), float(Z[1])
    return a * j.J1 + b * j.J2


def spectrum_directions(m):
    """m+1 pairwise non-proportional unit directions in R^2.

    The characteristic coefficients of the pencil a*J1 + b*J2 are homogeneous
    of degree <= m in (a, b); agreement of spectra on these directions pins
    them everywhere (a nonzero homogeneous polynomial of degree <= m has at
    most m projective roots).
    """
    return [(math.cos(i * math.pi / (m + 1)), math.sin(i * math.pi / (m + 1)))
            for i in range(m + 1)]


def direction_spectrum(j, Z):
    """Ascending eigenvalues of the Hermitian matrix -i * j_Z."""
    return np.linalg.eigvalsh(-1j * eval_jmap(j, Z))


@dataclass(frozen=True)
class IsospectralityCheck:
    ok: bool
    max_discrepancy: float
    per_direction: tuple
    directions: tuple
    tol: float

    def __bool__(self):
        return self.ok


def is_isospectral(j, j2, tol=1e-9):
    """Certify spectral agreement of the two pencils for every direction.

    Sorted spectra are compared on m+1 distinct projective directions, which
    is an exact finite certificate (see spectrum_directions).  The report
    carries per-direction max eigenvalue discrepancies.
    """
    if j.m != j2.m:
        raise ValueError(f"dimension mismatch: m={j.m} vs m={j2.m}")
    dirs = spectrum_directions(j.m)
    per = tuple(float(np.max(np.abs(direction_spectrum(j, Z) - direction_spectrum(j2, Z))))
                for Z in dirs)
    worst = max(per)
    return IsospectralityCheck(worst < tol, worst, per, tuple(dirs), tol)


@dataclass(frozen=True)
class GenericityCheck:
    ok: bool
    commutant_dim: int
    tol: float

    def __bool__(self):
        return self.ok


def commutant_dimension(j, tol=1e-9):
    """Real dimension of {X in su(m) : [X, J1] = [X, J2] = 0}.

    Nullity of the real-linear commutator system on su(m), counted by
    singular values below tol (relative to the largest, with an absolute
    floor so the zero map reports full dimension).
    """
    basis = su_basis(j.m)
    cols = []
    for B in basis:
        c1 = B @ j.J1 - j.J1 @ B
        c2 = B @ j.J2 - j.J2 @ B
        cols.append(np.concatenate([c1.ravel().real, c1.ravel().imag,
                                    c2.ravel().real, c2.ravel().imag]))
    A = np.array(cols).T
    s = np.linalg.svd(A, compute_uv=False)
    thresh = tol * max(float(s[0]) if len(s) else 0.0, 1.0)
    return int(np.sum(s < thresh))


def is_generic(j, tol=1e-9):
    """True iff the joint commutant of (J1, J2) inside su(m) is trivial."""
    dim = commutant_dimension(j, tol)
    return GenericityCheck(dim == 0, dim, tol)


# ---------------------------------------------------------------------------
# Trace-word invariants
# ---------------------------------------------------------------------------

# Cyclic-class representatives of all words in two letters up to length 4.
_WORDS = (
    (0,), (1,),
    (0, 0), (0, 1), (1, 1),
    (0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1),
    (0, 0, 0, 0), (0, 0, 0, 1), (0, 0, 1, 1), (0, 1, 0, 1), (0, 1, 1, 1),
    (1, 1, 1, 1),
)


def _word_traces(J1, J2):
    """Realified traces of the 15 cyclic words of length <= 4.

    Every such word is cyclically palindromic, so its trace is real for even
    length and purely imaginary for odd length; the realified vector keeps
    the informative part of each.
    """
    mats = (J1, J2)
    out = np.empty(len(_WORDS))
    for i, word in enumerate(_WORDS):
        P = mats[word[0]]
        for letter in word[1:]:
            P = P @ mats[letter]
        t = np.trace(P)
        out[i] = t.real if len(word) % 2 == 0 else t.imag
    return out


def _lex_less(a, b, tol):
    for x, y in zip(a, b):
        if x < y - tol:
            return True
        if x > y + tol:
            return False
    return False


def equivalence_invariants(j, tie_tol=1e-9):
    """Canonical conjugation-invariant vector of the pair (J1, J2).

    Traces of all 15 cyclic words of length <= 4 in (J1, J2), realified, and
    canonicalized by the lexicographically smallest vector over the
    16-element symmetry group (conjugation by A in SU(m) never changes a
    word trace; composing with complex conjugation conjugates every trace,
    i.e. flips the odd-length coordinates).  Equivalent maps yield equal
    vectors; a gap above the separation tolerance certifies non-equivalence.
    """
    best = None
    for sym in all_symmetries():
        v = _word_traces(*_apply_symmetry(j.J1, j.J2, sym))
        if best is None or _lex_less(v, best, tie_tol):
            best = v
    return best


def invariant_separation(j, j2):
    """min over the 16 symmetries of the sup-norm trace-word gap.

    A value above the separation tolerance certifies that no combination of
    SU(m) conjugation, signed generator swap, and complex conjugation maps j
    onto j2.  A small value is inconclusive, never a proof of equivalence.
    """
    if j.m != j2.m:
        raise ValueError(f"dimension mismatch: m={j.m} vs m={j2.m}")
    target = _word_traces(j2.J1, j2.J2)
    gaps = [float(np.max(np.abs(_word_traces(*_apply_symmetry(j.J1, j.J2, s)) - target)))
            for s in all_symmetries()]
    return min(gaps)


# ---------------------------------------------------------------------------
# Conjugators and equivalence witnesses
# ---------------------------------------------------------------------------

def align_conjugator(K, L):
    """SU(m) matrix A with A K A* = L for isospectral skew-Hermitian K, L.

    Aligns sorted eigendecompositions.  The residual equals the sorted
    eigenvalue mismatch regardless of basis choices inside repeated
    eigenspaces (A H A* = V_L Lambda_K V_L* for any such choice), and by the
    rearrangement bound no unitary does better, so there is nothing to
    refine; the determinant phase is folded into SU(m).
    """
    wK, VK = np.linalg.eigh(-1j * K)
    wL, VL = np.linalg.eigh(-1j * L)
    A = VL @ VK.conj().T
    m = K.shape[0]
    det = np.linalg.det(A)
    return A * np.exp(-1j * np.angle(det) / m)


@dataclass(frozen=True)
class EquivalenceWitness:
    """Certificate that j2_Z = A j_{psi(Z)} A^{-1} (conj applied if flagged)."""

    A: np.ndarray
    symmetry: EquivalenceSymmetry
    residual: float


def _witness_residual2(A, K1, K2, L1, L2):
    Ah = A.conj().T
    r1 = A @ K1 @ Ah - L1
    r2 = A @ K2 @ Ah - L2
    return _rfrob(r1) ** 2 + _rfrob(r2) ** 2


def _gauss_newton_polish(A, K1, K2, L1, L2, basis, max_iter=10):
    """Damped Gauss-Newton refinement of a conjugation witness.

    Residual r(x) = realified stack of A e^X K_i e^-X A* - L_i with X in
    su(m); first-order columns are A [B_alpha, K_i] A*.  Quadratic tail
    convergence where plain gradient descent crawls.
    """
    f = _witness_residual2(A, K1, K2, L1, L2)
    for _ in range(max_iter):
        Ah = A.conj().T
        R1 = A @ K1 @ Ah - L1
        R2 = A @ K2 @ Ah - L2
        r = np.concatenate([R1.ravel().real, R1.ravel().imag,
                            R2.ravel().real, R2.ravel().imag])
        cols = []
        for B in basis:
            D1 = A @ (B @ K1 - K1 @ B) @ Ah
            D2 = A @ (B @ K2 - K2 @ B) @ Ah
            cols.append(np.concatenate([D1.ravel().real, D1.ravel().imag,
                                        D2.ravel().real, D2.ravel().imag]))
        Jac = np.array(cols).T
        dx, *_ = np.linalg.lstsq(Jac, -r, rcond=1e-12)
        scale = 1.0
        improved = False
        for _ in range(20):
            X = np.zeros_like(K1)
            for c, B in zip(scale * dx, basis):
                X += c * B
            Anew = A @ _exp_su(X)
            fnew = _witness_residual2(Anew, K1, K2, L1, L2)
            if fnew < f:
                A, f = Anew, fnew
                improved = True
                break
            scale *= 0.5
        if not improved or f < 1e-28:
            break
    return A, f


def _descend_su(A, K1, K2, L1, L2, basis, max_iter=120, gtol=1e-10):
    """Gradient descent plus Gauss-Newton polish on SU(m).

    Right-perturbation gradient: for f(A e^{tX}), df/dt|_0 = <X, G> with
    G = 2 * sum_i [K_i, K_i - A* L_i A]; Armijo backtracking with a mildly
    growing step.  Returns the improved A and the squared residual.
    """
    f = _witness_residual2(A, K1, K2, L1, L2)
    step = 0.25
    for _ in range(max_iter):
        Ah = A.conj().T
        C1 = K1 - Ah @ L1 @ A
        C2 = K2 - Ah @ L2 @ A
        G = 2.0 * ((K1 @ C1 - C1 @ K1) + (K2 @ C2 - C2 @ K2))
        gn2 = _rfrob(G) ** 2
        if gn2 < gtol * gtol:
            break
        improved = False
        while step > 1e-14:
            Anew = A @ _exp_su(-step * G)
            fnew = _witness_residual2(Anew, K1, K2, L1, L2)
            if fnew <= f - 0.25 * step * gn2:
                A, f = Anew, fnew
                step = min(step * 1.5, 1.0)
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return _gauss_newton_polish(A, K1, K2, L1, L2, basis)


def find_equivalence(j, j2, budget=8, tol=1e-8, seed=0):
    """Search for an equivalence witness (A, symmetry) mapping j onto j2.

    For each of the 16 symmetries the search runs a deterministic
    eigen-alignment initializer (two generic directions) plus `budget`
    Haar-random restarts of gradient descent on SU(m).  Returns the best
    witness with residual < tol, or None.  Absence of a witness is never a
    certificate of non-equivalence; use invariant_separation for that.
    """
    if j.m != j2.m:
        raise ValueError(f"dimension mismatch: m={j.m} vs m={j2.m}")
    m = j.m
    rng = np.random.default_rng(seed)
    basis = su_basis(m)
    L1, L2 = j2.J1, j2.J2
    best = None
    for sym in all_symmetries():
        K1, K2 = _apply_symmetry(j.J1, j.J2, sym)
        inits = []
        for ang in (0.7, 1.9):
            Z = (math.cos(ang), math.sin(ang))
            inits.append(align_conjugator(Z[0] * K1 + Z[1] * K2,
                                          Z[0] * L1 + Z[1] * L2))
        inits.extend(haar_su(m, rng) for _ in range(budget))
        for A0 in inits:
            A, f2 = _descend_su(A0, K1, K2, L1, L2, basis)
            res = math.sqrt(max(f2, 0.0))
            if best is None or res < best.residual:
                best = EquivalenceWitness(A, sym, res)
            if best.residual < tol:
                return best
    return best if (best is not None and best.residual < tol) else None


# ---------------------------------------------------------------------------
# Family generation by numerical continuation
# ---------------------------------------------------------------------------

def _pack_pair(J1, J2, basis):
    return np.array([np.real(np.vdot(B, J1)) for B in basis]
                    + [np.real(np.vdot(B, J2)) for B in basis])


def _unpack_pair(x, basis, m):
    nb = len(basis)
    J1 = np.zeros((m, m), dtype=complex)
    J2 = np.zeros((m, m), dtype=complex)
    for c, B in zip(x[:nb], basis):
        J1 += c * B
    for c, B in zip(x[nb:], basis):
        J2 += c * B
    return J1, J2


def _power_sums(H, m):
    """tr(H^k) for k = 2..m of a Hermitian H (real numbers)."""
    out = []
    P = H @ H
    out.append(float(np.trace(P).real))
    for _ in range(3, m + 1):
        P = P @ H
        out.append(float(np.trace(P).real))
    return out


def _pencil_targets(J1, J2, dirs, m):
    return [_power_sums(-1j * (a * J1 + b * J2), m) for a, b in dirs]


def _constraints(x, basis, dirs, targets, m):
    J1, J2 = _unpack_pair(x, basis, m)
    F = []
    for (a, b), tgt in zip(dirs, targets):
        ps = _power_sums(-1j * (a * J1 + b * J2), m)
        F.extend(p - t for p, t in zip(ps, tgt))
    return np.array(F)


def _constraints_jacobian(x, basis, dirs, m):
    """d(power sums)/dx: d tr(H^k) = k tr(H^(k-1) dH), dH = -i (a or b) B."""
    J1, J2 = _unpack_pair(x, basis, m)
    nb = len(basis)
    dmats = [-1j * B for B in basis]
    rows = []
    for a, b in dirs:
        H = -1j * (a * J1 + b * J2)
        powers = [H]
        for _ in range(m - 2):
            powers.append(powers[-1] @ H)
        for k in range(2, m + 1):
            Hk1 = powers[k - 2]
            row = np.empty(2 * nb)
            for alpha, D in enumerate(dmats):
                g = k * float(np.einsum("ij,ji->", Hk1, D).real)
                row[alpha] = a * g
                row[nb + alpha] = b * g
            rows.append(row)
    return np.array(rows)


def _orbit_tangent(x, basis, m):
    """Tangent directions of the global-conjugation orbit at x."""
    J1, J2 = _unpack_pair(x, basis, m)
    cols = [_pack_pair(X @ J1 - J1 @ X, X @ J2 - J2 @ X, basis) for X in basis]
    return np.array(cols).T


def _transverse_direction(x, basis, dirs, m, prev=None):
    """Unit tangent to the isospectral variety orthogonal to the orbit.

    Returns None when the nullspace of the constraint Jacobian is exhausted
    by conjugation directions (no transverse freedom at x).
    """
    Jac = _constraints_jacobian(x, basis, dirs, m)
    _, s, Vt = np.linalg.svd(Jac)
    rank = int(np.sum(s > max(s[0], 1.0) * 1e-9))
    N = Vt[rank:].T
    if N.shape[1] == 0:
        return None
    O = _orbit_tangent(x, basis, m)
    Q, _ = np.linalg.qr(O)
    T = N - Q @ (Q.T @ N)
    U, st, _ = np.linalg.svd(T, full_matrices=False)
    keep = st > 0.5
    if not np.any(keep):
        return None
    basis_T = U[:, keep]
    if prev is not None:
        proj = basis_T @ (basis_T.T @ prev)
        if np.linalg.norm(proj) > 1e-8:
            return proj / np.linalg.norm(proj)
    v = basis_T[:, 0]
    lead = np.flatnonzero(np.abs(v) > 1e-12)
    if lead.size and v[lead[0]] < 0:
        v = -v
    return v


def _correct(x, basis, dirs, targets, m, tol=1e-12, max_iter=40):
    """Gauss-Newton pullback to the isospectral variety.

    Minimum-norm steps (lstsq) are orthogonal to the constraint nullspace,
    so the correction neither slides along the conjugation orbit nor along
    the transverse direction.  The sampled residual vector is rank-deficient
    by construction; that is expected, not an error.
    """
    for _ in range(max_iter):
        F = _constraints(x, basis, dirs, targets, m)
        if np.linalg.norm(F) < tol:
            return x, True
        Jac = _constraints_jacobian(x, basis, dirs, m)
        dx, *_ = np.linalg.lstsq(Jac, F, rcond=1e-10)
        x = x - dx
    return x, bool(np.linalg.norm(_constraints(x, basis, dirs, targets, m)) < tol)


@dataclass(frozen=True)
class FamilyResult:
    """Generated family plus its validation record."""

    members: tuple
    t_values: tuple
    seed: int
    isospectral_max: float
    commutant_dims: tuple
    min_separation: float
    separations: tuple
    ok: bool


def _march_to(x, s_now, t_target, direction, basis, dirs, targets, m, max_step):
    """Continuation from arc position s_now to t_target (same sign)."""
    v = direction
    while abs(t_target - s_now) > 1e-14:
        h = math.copysign(min(max_step, abs(t_target - s_now)), t_target - s_now)
        step = abs(h)
        accepted = False
        for _ in range(12):  # step-shrink retries
            vdir = _transverse_direction(x, basis, dirs, m, prev=v)
            if vdir is None:
                raise FamilyGenerationError(
                    "isospectral variety locally exhausted by the conjugation orbit")
            xp = x + math.copysign(step, h) * vdir
            xc, ok = _correct(xp, basis, dirs, targets, m)
            if ok:
                x, v = xc, vdir
                s_now += math.copysign(step, h)
                accepted = True
                break
            step *= 0.5
        if not accepted:
            raise FamilyGenerationError("continuation step rejected repeatedly")
    return x, s_now, v


def generate_family(m, t_values, seed, norm=1.0, max_step=0.02,
                    iso_tol=1e-9, separation_tol=1e-6):
    """One-parameter isospectral family j(t) of generic pairwise
    non-equivalent maps, by numerical continuation from a random seed.

    t is arc length in su(m)^2 (Frobenius real metric) along a path whose
    tangent is kept orthogonal to the global-conjugation orbit while the
    characteristic coefficients of the pencil, sampled on the m+1
    certification directions, are held at their t=0 values.  Each member is
    validated by is_isospectral against j(0) and is_generic; consecutive
    members are checked by trace-word invariant separation.

    Requires m >= 3: for m <= 2 the isospectral variety through a generic
    point is exhausted by the conjugation orbit and no family exists.
    """
    if m < 3:
        raise ValueError("family generation needs m >= 3; below that the "
                         "isospectral variety is exhausted by conjugation")
    if not t_values:
        raise ValueError("t_values must be non-empty")
    rng = np.random.default_rng(seed)
    basis = su_basis(m)
    dirs = spectrum_directions(m)

    last_error = None
    for _ in range(8):  # re-seed attempts
        J1 = random_su(m, rng, norm)
        J2 = random_su(m, rng, norm)
        j0 = JMap(J1, J2)
        if not is_generic(j0):
            continue
        targets = _pencil_targets(J1, J2, dirs, m)
        x0 = _pack_pair(J1, J2, basis)
        try:
            members = _continue_family(x0, j0, t_values, basis, dirs, targets,
                                       m, max_step, seed)
        except FamilyGenerationError as exc:
            last_error = exc
            continue
        return _validate_family(members, t_values, seed, iso_tol, separation_tol)
    raise FamilyGenerationError(f"family generation failed after re-seeding: {last_error}")


def _continue_family(x0, j0, t_values, basis, dirs, targets, m, max_step, seed):
    members = {}
    order = sorted(range(len(t_values)), key=lambda i: t_values[i])
    for sign in (1, -1):
        x, s_now, v = x0.copy(), 0.0, None
        targets_idx = [i for i in order if math.copysign(1, t_values[i]) == sign
                       and t_values[i] != 0]
        if sign == -1:
            targets_idx = targets_idx[::-1]
        for i in targets_idx:
            x, s_now, v = _march_to(x, s_now, t_values[i], v, basis, dirs,
                                    targets, m, max_step)
            J1, J2 = _unpack_pair(x, basis, m)
            members[i] = JMap(J1, J2, {"seed": seed, "t": t_values[i],
                                       "generator": GENERATOR_VERSION})
    for i, t in enumerate(t_values):
        if t == 0:
            members[i] = JMap(j0.J1, j0.J2, {"seed": seed, "t": 0.0,
                                             "generator": GENERATOR_VERSION})
    return [members[i] for i in range(len(t_values))]


def _validate_family(members, t_values, seed, iso_tol, separation_tol):
    iso_max = 0.0
    for member in members[1:]:
        iso_max = max(iso_max, is_isospectral(members[0], member, iso_tol).max_discrepancy)
    commutant_dims = tuple(commutant_dimension(member) for member in members)
    separations = []
    for a in range(len(members)):
        for b in range(a + 1, len(members)):
            if t_values[a] != t_values[b]:
                separations.append(invariant_separation(members[a], members[b]))
    min_sep = min(separations) if separations else math.inf
    ok = (iso_max < iso_tol and all(d == 0 for d in commutant_dims)
          and min_sep > separation_tol)
    return FamilyResult(tuple(members), tuple(t_values), seed, iso_max,
                        commutant_dims, min_sep, tuple(separations), ok)
