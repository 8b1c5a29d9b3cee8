"""Spectral and geometric structure of the decaying-spin effective Hamiltonian.

Everything here works in the local unit system where the spin Hamiltonian is
normalised to mu|B| = 1, so H_T depends on (gamma, theta, phi) only and its
non-trivial eigenvalues solve the cubic, in mu = lambda + i gamma/2,

    mu^3 + (i gamma/2) mu^2 - 4 mu = 2 i gamma cos^2(theta).

The fourth eigenvalue is the trace-preserving zero mode.  Eigenvectors come
from the numerical decomposition; the closed-form coefficient formulas are
kept as a cross-check only.
"""

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dipole import dtheta_da, polar_angle_of_offset
from .errors import ClosedFormError, DegeneracyError, EigenError, SingularGeometryError
from .lindblad import EffectiveHamiltonian, spin_effective_hamiltonian
from .quantum import DEGENERACY_TOL, degenerate_groups, eig_full, kron, pauli, sort_key

DEFAULT_A_MIN = 1e-6
DEFAULT_WEIGHTS = (1 / 3, 1 / 3, 1 / 3, 0.0)

# eg and ge slots of the composite (ee, eg, ge, gg) basis
_EG, _GE = 1, 2


def _cubic_constant(gamma, theta, form):
    c2 = np.cos(theta) ** 2
    if form == "consistent":
        return 2j * gamma * c2
    if form == "printed":
        return 2j * gamma**2 * c2
    raise ValueError(f"unknown cubic form {form!r}")


def cubic_value(lam, gamma, theta, form="consistent"):
    """Left side minus right side of the characteristic cubic at lambda."""
    mu = lam + 0.5j * gamma
    return mu**3 + 0.5j * gamma * mu**2 - 4 * mu - _cubic_constant(gamma, theta, form)


def characteristic_roots(gamma, theta, form="consistent"):
    """The three non-zero-mode eigenvalues of H_T, ordered by descending Re then Im.

    ``form="consistent"`` has right side 2 i gamma cos^2(theta), which is what
    the characteristic polynomial of H_T gives.  ``form="printed"`` uses
    2 i gamma^2 cos^2(theta) instead; the two agree only at gamma in {0, 1}.
    """
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    mus = np.roots([1.0, 0.5j * gamma, -4.0, -_cubic_constant(gamma, theta, form)])
    # one Newton step to polish the companion-matrix roots
    f = mus**3 + 0.5j * gamma * mus**2 - 4 * mus - _cubic_constant(gamma, theta, form)
    fp = 3 * mus**2 + 1j * gamma * mus - 4
    mus = mus - np.divide(f, fp, out=np.zeros_like(f), where=np.abs(fp) > 1e-8)
    lams = mus - 0.5j * gamma
    return lams[sort_key(lams)]


@dataclass(frozen=True)
class EigenTriple:
    """One eigenvalue of H_T with its right vector (a, b, c, d), bilinear left
    vector (A, B, C, D) and pairing M = A a + B b + C c + D d."""

    lam: complex
    right: np.ndarray
    left: np.ndarray
    m_norm: complex

    def geometric_factor(self):
        """(C c - B b)/M written in the engine basis: (w_eg v_eg - w_ge v_ge)/M.

        Invariant under independent rescaling of the left and right vectors.
        """
        w, v = self.left, self.right
        return complex((w[_EG] * v[_EG] - w[_GE] * v[_GE]) / self.m_norm)


def eigen_structure(heff, defect_tol=1e-12):
    """Four EigenTriples: branches j = 1..3 ordered like ``characteristic_roots``, then lambda_4 = 0.

    When the zero eigenvalue is degenerate (gamma = 0) the zero-eigenspace is
    rebased so that the lambda_4 triple carries the trace functional as its
    left vector and the other zero mode is traceless, which is the gamma -> 0+
    limit of the dissipative branches.
    """
    mat = heff.matrix if isinstance(heff, EffectiveHamiltonian) else np.asarray(heff, dtype=complex)
    if mat.shape != (4, 4):
        raise ValueError(f"eigen_structure expects a 4x4 effective Hamiltonian, got {mat.shape}")
    es = eig_full(mat)
    lam = es.eigenvalues.copy()
    right = es.right.copy()
    left = es.left.conj()  # bilinear rows: w^T H_T = lambda w^T

    groups = degenerate_groups(lam, DEGENERACY_TOL)
    zero_group = min(groups, key=lambda g: min(abs(lam[i]) for i in g))
    if min(abs(lam[i]) for i in zero_group) > 1e-8 * max(1.0, np.linalg.norm(mat)):
        raise EigenError("no trace-preserving zero mode found")

    if len(zero_group) == 1:
        zero = zero_group[0]
    else:
        g = list(zero_group)
        rg, wg = right[:, g], left[:, g].T
        wg = np.linalg.solve(wg @ rg, wg)  # now wg @ rg = I
        phi = np.eye(2).reshape(-1)
        alpha = phi @ rg
        t = np.vstack([alpha, scipy.linalg.null_space(alpha[None, :]).conj().T])
        right[:, g] = rg @ np.linalg.inv(t)
        left[:, g] = (t @ wg).T
        lam[g] = 0.0
        zero = g[0]

    branches = [i for i in range(4) if i != zero]
    branches = [branches[k] for k in sort_key(lam[branches])]
    triples = []
    for j, i in enumerate(branches + [zero], start=1):
        v = right[:, i] / np.linalg.norm(right[:, i])
        w = left[:, i] / np.linalg.norm(left[:, i])
        m = complex(w @ v)
        if abs(m) < defect_tol:
            raise EigenError(f"defective eigenvector pairing for branch j={j} (|M_j| = {abs(m):.3g})")
        triples.append(EigenTriple(complex(0.0 if i == zero else lam[i]), v, w, m))
    return triples


def spin_eigen_structure(gamma, theta, phi):
    return eigen_structure(spin_effective_hamiltonian(gamma, theta, phi))


def _safe_div(num, den, what):
    if abs(den) < 1e-12:
        raise ClosedFormError(f"closed-form denominator of {what} vanishes (|den| = {abs(den):.3g})")
    return num / den


@dataclass(frozen=True)
class ClosedForm:
    right: np.ndarray
    left: np.ndarray
    m_norm: complex


def closed_form_coefficients(gamma, theta, phi, lam, convention="printed"):
    """Closed-form right (a, b, c, d) and left (A, B, C, D) coefficients for branch lambda.

    ``convention="printed"`` evaluates the formulas literally and places the
    components in the engine basis order (ee, eg, ge, gg).  ``"reconciled"``
    applies the three adjustments that make them exact eigenvectors of H_T:
    the b/c slots are exchanged (ancilla-major ordering), phi is shifted by pi
    (tan(phi) fixes phi only mod pi), and D = A (i gamma + lambda)/(i gamma - lambda).
    """
    if convention not in ("printed", "reconciled"):
        raise ValueError(f"unknown convention {convention!r}")
    if convention == "reconciled":
        phi = phi + np.pi
    c, s = np.cos(theta), np.sin(theta)
    e = np.exp(1j * phi)
    ig = 0.5j * gamma
    plus = 2 * c + ig + lam
    minus = 2 * c - ig - lam

    a = -plus
    b = 2 * s * e
    cc = _safe_div(2 * s * plus / e, minus, "c_j")
    d = -a
    big_a = -(2 * c - ig + lam)
    if convention == "printed":
        big_d = _safe_div(1j * gamma - lam, 1j * gamma + lam, "D_j") * big_a
    else:
        big_d = _safe_div(1j * gamma + lam, 1j * gamma - lam, "D_j") * big_a
    big_b = _safe_div(s / e * (big_d - big_a), plus, "B_j")
    big_c = _safe_div(s * e * (big_d - big_a), minus, "C_j")

    right = np.array([a, b, cc, d], dtype=complex)
    left = np.array([big_a, big_b, big_c, big_d], dtype=complex)
    m_norm = complex(left @ right)
    if convention == "reconciled":
        swap = [0, 2, 1, 3]
        right, left = right[swap], left[swap]
    return ClosedForm(right, left, m_norm)


def collinearity(u, v):
    """|<u, v>| / (|u| |v|), in [0, 1]."""
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(min(1.0, abs(np.vdot(u, v)) / (nu * nv)))


@dataclass(frozen=True)
class Weights:
    """Static branch weights p_1..p_4 (non-negative, summing to one)."""

    p: tuple = DEFAULT_WEIGHTS

    def __post_init__(self):
        p = tuple(float(x) for x in self.p)
        if len(p) != 4:
            raise ValueError("weights need exactly four entries")
        if any(x < 0 for x in p):
            raise ValueError("weights must be non-negative")
        if abs(sum(p) - 1) > 1e-12:
            raise ValueError(f"weights must sum to 1 (got {sum(p)!r})")
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class GeometricField:
    a_x: complex
    a_y: complex
    b_z: complex


def branch_sum(weights, triples):
    """F = sum_{j=1..3} p_j (C_j c_j - B_j b_j)/M_j; the lambda_4 = 0 triple is excluded."""
    return sum(p * t.geometric_factor() for p, t in zip(weights.p[:3], triples[:3]))


def vector_potential(weights, triples, x, y, a_min=DEFAULT_A_MIN):
    """A = F (-y, x)/a^2 and b_z = 2F/a^2 (hbar = 1)."""
    a2 = x * x + y * y
    if np.sqrt(a2) < a_min:
        raise SingularGeometryError(f"a = {np.sqrt(a2):.3g} below a_min = {a_min:.3g}")
    f = branch_sum(weights, triples)
    return GeometricField(-f * y / a2, f * x / a2, 2 * f / a2)


def local_angles(params, x, y):
    """(theta, phi) of the dipole field at (x, y)."""
    a = np.hypot(x, y)
    theta = float(polar_angle_of_offset(a, params.d))
    # B_perp points opposite to the in-plane offset, so phi is the polar angle of (x, y) plus pi
    phi = float(np.arctan2(-y, -x)) if a > 0 else 0.0
    return theta, phi


def geometric_field(params, weights, x, y, a_min=DEFAULT_A_MIN):
    """Vector potential and magnetic-like field at in-plane position (x, y)."""
    theta, phi = local_angles(params, x, y)
    triples = spin_eigen_structure(params.gamma, theta, phi)
    return vector_potential(weights, triples, x, y, a_min)


def _dheff_dtheta(theta, phi):
    dn = (np.cos(theta) * np.cos(phi), np.cos(theta) * np.sin(phi), -np.sin(theta))
    dh = dn[0] * pauli("x") + dn[1] * pauli("y") + dn[2] * pauli("z")
    eye = np.eye(2)
    return kron(dh, eye) - kron(eye, dh.conj())


def _branch_factors_dtheta_fd(gamma, theta, phi, lams, h=1e-6):
    """Central-difference dX_j/dtheta for the branches nearest to ``lams``."""
    plus = spin_eigen_structure(gamma, theta + h, phi)[:3]
    minus = spin_eigen_structure(gamma, theta - h, phi)[:3]
    out = []
    for lam in lams:
        tp = min(plus, key=lambda t: abs(t.lam - lam))
        tm = min(minus, key=lambda t: abs(t.lam - lam))
        out.append((tp.geometric_factor() - tm.geometric_factor()) / (2 * h))
    return out


def branch_sum_dtheta(gamma, theta, phi, weights, triples=None):
    """dF/dtheta from first-order biorthogonal perturbation theory.

    ``triples`` may be passed in a continued branch order; by default they are
    recomputed in the standard order.  Where a weighted branch coincides with
    another (the zero-mode crossing at gamma = 0) the perturbative formula is
    singular and a central difference in theta is used instead.
    """
    if triples is None:
        triples = spin_eigen_structure(gamma, theta, phi)
    dh = _dheff_dtheta(theta, phi)
    g = np.diag([0.0, 1.0, -1.0, 0.0]).astype(complex)
    vs = [t.right for t in triples]
    ws = [t.left / t.m_norm for t in triples]
    total = 0j
    for j in range(3):
        if weights.p[j] == 0:
            continue
        gaps = [triples[j].lam - triples[k].lam for k in range(4) if k != j]
        if min(abs(gap) for gap in gaps) < DEGENERACY_TOL:
            lams = [t.lam for t in triples[:3]]
            return sum(p * dx for p, dx in zip(weights.p[:3], _branch_factors_dtheta_fd(gamma, theta, phi, lams)))
        dx = 0j
        for k in range(4):
            if k == j:
                continue
            gap = triples[j].lam - triples[k].lam
            dx += ((ws[k] @ dh @ vs[j]) * (ws[j] @ g @ vs[k]) + (ws[j] @ dh @ vs[k]) * (ws[k] @ g @ vs[j])) / gap
        total += weights.p[j] * dx
    return total


def curl_bz(params, weights, x, y, a_min=DEFAULT_A_MIN):
    """True z-curl of A = F(a)(-y, x)/a^2, i.e. F'(a)/a with F differentiated through theta(a).

    This differs from ``GeometricField.b_z`` = 2F/a^2, which is the curl taken
    with the radius (and hence theta) held fixed.
    """
    a = np.hypot(x, y)
    if a < a_min:
        raise SingularGeometryError(f"a = {a:.3g} below a_min = {a_min:.3g}")
    theta, phi = local_angles(params, x, y)
    return branch_sum_dtheta(params.gamma, theta, phi, weights) * dtheta_da(a, params.d) / a


def lambda_gradient(params, x, y, j, form="consistent"):
    """(d lambda_j/dx, d lambda_j/dy) by implicit differentiation of the cubic through theta(a).

    j = 4 is the zero mode and returns zeros.
    """
    if j not in (1, 2, 3, 4):
        raise ValueError("branch index j must be 1..4")
    if j == 4:
        return np.zeros(2, dtype=complex)
    a = float(np.hypot(x, y))
    if a == 0:
        return np.zeros(2, dtype=complex)
    gamma = params.gamma
    theta = polar_angle_of_offset(a, params.d)
    lam = characteristic_roots(gamma, theta, form)[j - 1]
    mu = lam + 0.5j * gamma
    df_dlam = 3 * mu**2 + 1j * gamma * mu - 4
    if abs(df_dlam) < 1e-10:
        raise DegeneracyError(f"branch {j} sits on a repeated root (dF/dlambda = {abs(df_dlam):.3g})")
    coeff = 2j * gamma if form == "consistent" else 2j * gamma**2
    df_dtheta = coeff * 2 * np.cos(theta) * np.sin(theta)
    dlam = -df_dtheta / df_dlam * dtheta_da(a, params.d)
    return np.array([dlam * x / a, dlam * y / a], dtype=complex)


def continue_branches(previous, current):
    """Reorder ``current`` (three roots) to best match ``previous`` by total distance."""
    current = np.asarray(current)
    best = min(
        itertools.permutations(range(len(current))),
        key=lambda perm: sum(abs(current[list(perm)] - previous)),
    )
    return current[list(best)], list(best)
