"""Lindblad dynamics and its ancilla-purified (vectorised) counterpart.

A density matrix rho on a d-level system maps onto the d^2 ket
``sum_mn rho_mn |m>|n>^A`` (row-major flattening).  Under that map the master
equation becomes ``i d/dt |Psi> = H_T |Psi>`` with the non-Hermitian

    H_T = K (x) 1 - 1 (x) K^A + i sum_k L_k (x) L_k^A,
    K   = H - (i/2) sum_k L_k^dagger L_k,

where ``O^A`` is the ancilla copy of ``O`` with ``<m|O^A|n> = <n|O^dagger|m>``.

Arrays may carry leading batch dimensions; every operation broadcasts over
them, which is how sweeps over many parameter points stay fast.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ToleranceError
from .quantum import dagger, is_hermitian, kron, pauli

DEFAULT_DT = 1e-3


@dataclass(frozen=True)
class LindbladModel:
    """Hermitian Hamiltonian plus jump operators with their rates absorbed (L = sqrt(rate) * op)."""

    hamiltonian: np.ndarray
    jumps: tuple = field(default_factory=tuple)

    def __post_init__(self):
        h = np.asarray(self.hamiltonian, dtype=complex)
        jumps = tuple(np.asarray(j, dtype=complex) for j in self.jumps)
        if h.ndim < 2 or h.shape[-1] != h.shape[-2]:
            raise DimensionError(f"hamiltonian must be square, got {h.shape}")
        if not is_hermitian(h, 1e-12):
            raise ValueError("hamiltonian is not Hermitian to 1e-12")
        for j in jumps:
            if j.shape[-2:] != h.shape[-2:]:
                raise DimensionError(f"jump operator shape {j.shape} does not match {h.shape}")
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "jumps", jumps)

    @property
    def dim(self):
        return self.hamiltonian.shape[-1]

    def nonhermitian(self):
        """K = H - (i/2) sum_k L_k^dagger L_k."""
        k = self.hamiltonian.copy()
        for jump in self.jumps:
            k = k - 0.5j * (dagger(jump) @ jump)
        return k


def spin_model(gamma, theta, phi, field_norm=1.0):
    """Spin-1/2 in a field of polar angles (theta, phi) with spontaneous emission at rate gamma.

    ``field_norm`` is mu|B|; the default puts the Hamiltonian in the unit
    system where the two levels sit at +-1.
    """
    h = field_norm * (
        np.sin(theta) * np.cos(phi) * pauli("x")
        + np.sin(theta) * np.sin(phi) * pauli("y")
        + np.cos(theta) * pauli("z")
    )
    return LindbladModel(h, (np.sqrt(gamma) * pauli("minus"),))


def check_density_matrix(rho, tol=1e-10):
    """Raise ToleranceError unless ``rho`` is Hermitian, unit trace and positive within ``tol``."""
    rho = np.asarray(rho, dtype=complex)
    herm = np.max(np.abs(rho - dagger(rho)), initial=0.0)
    if herm > tol:
        raise ToleranceError(f"density matrix not Hermitian (deviation {herm:.3g})")
    tr = np.trace(rho, axis1=-2, axis2=-1)
    if np.max(np.abs(tr - 1), initial=0.0) > tol:
        raise ToleranceError(f"density matrix trace deviates from 1 by {np.max(np.abs(tr - 1)):.3g}")
    lowest = np.min(np.linalg.eigvalsh(0.5 * (rho + dagger(rho))))
    if lowest < -tol:
        raise ToleranceError(f"density matrix has negative eigenvalue {lowest:.3g}")
    return rho


def lindblad_rhs(model, rho):
    """d rho/dt = -i[H, rho] + sum_k (L rho L^dagger - 1/2 {L^dagger L, rho})."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape[-2:] != model.hamiltonian.shape[-2:]:
        raise DimensionError(f"rho shape {rho.shape} does not match model dim {model.dim}")
    k = model.nonhermitian()
    out = -1j * (k @ rho - rho @ dagger(k))
    for jump in model.jumps:
        out = out + jump @ rho @ dagger(jump)
    return out


def _rk4_steps(t_final, dt):
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_final < 0:
        raise ValueError("t_final must be non-negative")
    n = int(np.floor(t_final / dt + 1e-9))
    tail = t_final - n * dt
    if tail < 1e-12 * max(dt, 1.0):
        tail = 0.0
    return n, tail


def integrate_master(model, rho0, t_final, dt=DEFAULT_DT, tol=1e-8):
    """Fixed-step RK4 integration of the master equation in matrix form.

    The output is checked against the density-matrix invariants (Hermitian,
    unit trace, positive) at ``tol``; a violation usually means ``dt`` is too
    large for the model's energy scale.
    """
    rho = np.array(rho0, dtype=complex)
    n, tail = _rk4_steps(t_final, dt)
    k = model.nonhermitian()
    kd = dagger(k)
    jumps = [(j, dagger(j)) for j in model.jumps]

    def f(r):
        out = -1j * (k @ r - r @ kd)
        for j, jd in jumps:
            out += j @ r @ jd
        return out

    def step(r, h):
        k1 = f(r)
        k2 = f(r + 0.5 * h * k1)
        k3 = f(r + 0.5 * h * k2)
        k4 = f(r + h * k3)
        return r + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    for _ in range(n):
        rho = step(rho, dt)
    if tail:
        rho = step(rho, tail)
    if t_final > 0:
        check_density_matrix(rho, tol)
    return rho


def vectorize(rho):
    """|Psi_rho> = sum_mn rho_mn |m>|n>^A, system index major."""
    rho = np.asarray(rho, dtype=complex)
    return rho.reshape(rho.shape[:-2] + (-1,))


def devectorize(psi):
    psi = np.asarray(psi, dtype=complex)
    n = psi.shape[-1]
    d = int(round(np.sqrt(n)))
    if d * d != n:
        raise DimensionError(f"ket dimension {n} is not a perfect square")
    return psi.reshape(psi.shape[:-1] + (d, d))


def ancilla_conjugate(op):
    """O^A with <m|O^A|n> = <n|O^dagger|m>: the elementwise complex conjugate of O."""
    op = np.asarray(op, dtype=complex)
    if op.shape[-1] != op.shape[-2]:
        raise DimensionError("ancilla_conjugate needs a square operator")
    return op.conj()


@dataclass(frozen=True)
class EffectiveHamiltonian:
    matrix: np.ndarray
    source_dim: int

    def trace_functional(self):
        """Flattened identity Phi = sum_m |m>|m>^A; Phi^dagger H_T = 0 for a valid generator."""
        return np.eye(self.source_dim, dtype=complex).reshape(-1)

    def trace_leak(self):
        """||Phi^dagger H_T|| / ||H_T||."""
        phi = self.trace_functional()
        scale = max(np.linalg.norm(self.matrix), 1e-300)
        return float(np.linalg.norm(phi.conj() @ self.matrix) / scale)


def effective_hamiltonian(model, cross_order="system-first"):
    """Build H_T for a general Lindblad model.

    ``cross_order`` selects how the jump cross term is laid out:
    ``"system-first"`` is ``L (x) L^A`` (the reading consistent with the
    row-major vectorisation); ``"ancilla-first"`` is the transposed
    ``L^A (x) L`` and exists only so the two readings can be compared.
    """
    d = model.dim
    eye = np.eye(d, dtype=complex)
    k = model.nonhermitian()
    mat = kron(k, eye) - kron(eye, ancilla_conjugate(k))
    for jump in model.jumps:
        if cross_order == "system-first":
            mat = mat + 1j * kron(jump, ancilla_conjugate(jump))
        elif cross_order == "ancilla-first":
            mat = mat + 1j * kron(ancilla_conjugate(jump), jump)
        else:
            raise ValueError(f"unknown cross_order {cross_order!r}")
    return EffectiveHamiltonian(mat, d)


def spin_effective_hamiltonian(gamma, theta, phi, field_norm=1.0):
    """Hand-assembled H_T for the spontaneously decaying spin.

    K = H - i(gamma/2)|e><e| and H_T = K - K^A + i gamma sigma_-^A sigma_-,
    written out directly rather than through the general jump-operator path.
    """
    model = spin_model(0.0, theta, phi, field_norm)
    k = model.hamiltonian - 0.5j * gamma * np.diag([1.0, 0.0])
    eye = np.eye(2)
    sm = pauli("minus")
    mat = kron(k, eye) - kron(eye, ancilla_conjugate(k)) + 1j * gamma * kron(sm, ancilla_conjugate(sm))
    return EffectiveHamiltonian(mat, 2)


def rk4_propagator(generator, dt):
    """One RK4 step of d/dt x = G x for constant G, as a matrix: sum_{k<=4} (dt G)^k / k!."""
    g = np.asarray(generator, dtype=complex) * dt
    eye = np.broadcast_to(np.eye(g.shape[-1], dtype=complex), g.shape)
    term = eye
    out = eye.copy()
    for k in range(1, 5):
        term = term @ g / k
        out = out + term
    return out


def evolve_vectorized(heff, psi0, t_final, dt=DEFAULT_DT):
    """RK4 integration of i d/dt |Psi> = H_T |Psi> (never renormalised).

    H_T is constant, so each RK4 step is the same linear map; it is formed
    once and applied step by step.
    """
    mat = heff.matrix if isinstance(heff, EffectiveHamiltonian) else np.asarray(heff, dtype=complex)
    psi = np.array(psi0, dtype=complex)
    if psi.shape[-1] != mat.shape[-1]:
        raise DimensionError(f"ket dim {psi.shape[-1]} vs generator dim {mat.shape[-1]}")
    n, tail = _rk4_steps(t_final, dt)
    step = rk4_propagator(-1j * mat, dt)
    for _ in range(n):
        psi = np.einsum("...ij,...j->...i", step, psi)
    if tail:
        psi = np.einsum("...ij,...j->...i", rk4_propagator(-1j * mat, tail), psi)
    return psi


def random_density_matrix(rng, dim=2):
    """Full-rank random state from a complex Ginibre matrix, rho = G G^dagger / Tr."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ dagger(g)
    return rho / np.trace(rho)
