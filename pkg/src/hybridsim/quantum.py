"""Dense complex linear algebra for small spin problems.

Matrices are plain ``numpy`` complex arrays; kets are 1-D arrays.  The spin
basis is ordered (|e>, |g>) everywhere, and composite system+ancilla states
are ordered (ee, eg, ge, gg) with the system index major.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, EigenError

DEGENERACY_TOL = 1e-10

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    # sigma_+ = |e><g|, sigma_- = |g><e|
    "plus": np.array([[0, 1], [0, 0]], dtype=complex),
    "minus": np.array([[0, 0], [1, 0]], dtype=complex),
}

KET_E = np.array([1, 0], dtype=complex)
KET_G = np.array([0, 1], dtype=complex)


def pauli(axis):
    """Return sigma_axis for axis in {x, y, z, plus, minus} in the (|e>, |g>) basis."""
    try:
        return _PAULI[axis].copy()
    except KeyError:
        raise ValueError(f"unknown Pauli axis {axis!r}") from None


def kron(a, b):
    """Kronecker product with ``a`` acting on the system and ``b`` on the ancilla."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def dagger(m):
    return np.conj(np.swapaxes(np.asarray(m), -1, -2))


def is_hermitian(m, tol=1e-12):
    m = np.asarray(m)
    return m.shape[-1] == m.shape[-2] and np.max(np.abs(m - dagger(m)), initial=0.0) <= tol


def projector(ket):
    ket = np.asarray(ket, dtype=complex)
    return np.outer(ket, ket.conj())


def expectation(state, obs):
    """<psi|O|psi> for a ket, Tr(rho O) for a density matrix."""
    state = np.asarray(state, dtype=complex)
    obs = np.asarray(obs, dtype=complex)
    if obs.ndim != 2 or obs.shape[0] != obs.shape[1]:
        raise DimensionError("observable must be square")
    n = obs.shape[0]
    if state.ndim == 1:
        if state.shape[0] != n:
            raise DimensionError(f"ket of dim {state.shape[0]} vs observable dim {n}")
        return complex(state.conj() @ obs @ state)
    if state.shape != obs.shape:
        raise DimensionError(f"density matrix {state.shape} vs observable {obs.shape}")
    return complex(np.trace(state @ obs))


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues with paired right and left eigenvectors.

    ``right[:, j]`` satisfies ``M r = lambda r``; ``left[:, j]`` satisfies
    ``l^dagger M = lambda l^dagger``.  Both are unit norm and the pairing is
    biorthogonal: ``l_i^dagger r_j = 0`` for ``i != j``.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray

    @property
    def pairings(self):
        """l_j^dagger r_j for each j."""
        return np.einsum("ij,ij->j", self.left.conj(), self.right)

    def __len__(self):
        return len(self.eigenvalues)


def sort_key(values):
    """Indices ordering complex values by descending real part, then descending imaginary part."""
    values = np.asarray(values)
    # round so that ties in the real part are recognised despite noise
    re = np.round(values.real, 9)
    return np.lexsort((-values.imag, -re))


def degenerate_groups(values, tol=DEGENERACY_TOL):
    """Cluster indices whose eigenvalues lie within ``tol`` of each other (single linkage)."""
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) < tol:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def eig_full(m, degeneracy_tol=DEGENERACY_TOL):
    """Full eigen-decomposition of a small square matrix with biorthogonal left vectors.

    Eigenvalues come back ordered by descending real part (ties: descending
    imaginary part).  Within a degenerate cluster the right vectors are
    orthonormalised and the left vectors re-biorthogonalised against them.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"eig_full needs a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise EigenError("matrix has non-finite entries")
    try:
        if is_hermitian(m, 1e-14 * max(1.0, np.abs(m).max())):
            # orthonormal eigenbasis; left and right vectors coincide
            w, vr = scipy.linalg.eigh(m)
            w = w.astype(complex)
            vl = vr.copy()
        else:
            w, vl, vr = scipy.linalg.eig(m, left=True, right=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenError(f"eigensolver failed to converge: {exc}") from exc

    order = sort_key(w)
    w, vl, vr = w[order], vl[:, order], vr[:, order]

    for group in degenerate_groups(w, degeneracy_tol):
        if len(group) == 1:
            continue
        r, _ = np.linalg.qr(vr[:, group])
        lg = vl[:, group]
        overlap = dagger(r) @ lg
        if abs(np.linalg.det(overlap)) < 1e-14:
            raise EigenError(f"defective eigenvalue cluster near {w[group[0]]:.6g}")
        vr[:, group] = r
        vl[:, group] = lg @ np.linalg.inv(overlap)

    vr = vr / np.linalg.norm(vr, axis=0)
    vl = vl / np.linalg.norm(vl, axis=0)
    return EigenSystem(eigenvalues=w, right=vr, left=vl)


def eigen_residuals(m, system):
    """Max right and left eigen-residuals, each relative to the 2-norm of ``m``."""
    m = np.asarray(m, dtype=complex)
    scale = max(np.linalg.norm(m, 2), 1e-300)
    lam = system.eigenvalues
    right = np.linalg.norm(m @ system.right - system.right * lam, axis=0)
    left = np.linalg.norm(dagger(system.left) @ m - lam[:, None] * dagger(system.left), axis=1)
    return float(right.max() / scale), float(left.max() / scale)
