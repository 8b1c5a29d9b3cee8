"""Decoherence-free spin driven by the moving magnetic particle."""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .classical import damped_solution, effective_frequency
from .dipole import dipole_field, field_angles, field_norm, spin_hamiltonian
from .errors import ToleranceError


@dataclass(frozen=True)
class InstantaneousBasis:
    plus: np.ndarray
    minus: np.ndarray
    e_plus: float
    e_minus: float


def instantaneous_eigenstates(angles, field_norm):
    """|+> = cos(theta/2)|e> + sin(theta/2) e^{i phi}|g>, |-> = -sin(theta/2)|e> + cos(theta/2) e^{i phi}|g>."""
    if field_norm <= 0:
        raise ValueError("field_norm must be positive")
    half = 0.5 * angles.theta
    phase = np.exp(1j * angles.phi)
    plus = np.array([np.cos(half), np.sin(half) * phase], dtype=complex)
    minus = np.array([-np.sin(half), np.cos(half) * phase], dtype=complex)
    return InstantaneousBasis(plus, minus, float(field_norm), -float(field_norm))


@dataclass(frozen=True)
class AdiabaticitySeries:
    times: np.ndarray
    kappa: np.ndarray
    # the alternative reading with the instantaneous azimuthal rate in place of Omega_0
    kappa_phi_dot: np.ndarray


def _angles_along(params, q):
    b = dipole_field(params, q[:, 0], q[:, 1])
    if np.any(field_norm(b) == 0):
        raise ValueError("zero field on trajectory")
    ang = field_angles(b)
    return np.atleast_1d(ang.theta), np.atleast_1d(ang.phi)


def adiabaticity_series(params, traj, reading="printed"):
    """kappa(t) = |theta' + i Omega_0 sin(theta)| / 4 along the trajectory.

    theta' uses central differences on the uniform grid (one-sided at the ends).
    ``reading="phi_dot"`` makes ``kappa`` use the instantaneous phi' instead of
    Omega_0; both variants are always returned.
    """
    if reading not in ("printed", "phi_dot"):
        raise ValueError(f"unknown kappa reading {reading!r}")
    omega0 = effective_frequency(params)
    theta, phi = _angles_along(params, traj.q)
    if len(traj) > 1:
        theta_dot = np.gradient(theta, traj.times)
        phi_dot = np.gradient(np.unwrap(phi), traj.times)
    else:
        theta_dot = phi_dot = np.zeros_like(theta)
    printed = 0.25 * np.abs(theta_dot + 1j * omega0 * np.sin(theta))
    alt = 0.25 * np.abs(theta_dot + 1j * phi_dot * np.sin(theta))
    kappa = printed if reading == "printed" else alt
    return AdiabaticitySeries(traj.times.copy(), kappa, alt if reading == "printed" else printed)


@dataclass(frozen=True)
class PopulationSeries:
    times: np.ndarray
    p_e: np.ndarray
    norm_drift: np.ndarray
    states: np.ndarray


def _positions(params, traj, t):
    if traj.coeffs is not None:
        return damped_solution(params, traj.coeffs, t).q
    spline = CubicHermiteSpline(traj.times, traj.q, traj.v, axis=0)
    return spline(t)


def _chain(props):
    """Ordered products P_{k-1} ... P_1 P_0 along axis -3, batched over leading axes."""
    while props.shape[-3] > 1:
        if props.shape[-3] % 2:
            eye = np.broadcast_to(np.eye(2, dtype=complex), props.shape[:-3] + (1, 2, 2))
            props = np.concatenate([props, eye], axis=-3)
        props = props[..., 1::2, :, :] @ props[..., 0::2, :, :]
    return props[..., 0, :, :]


def schrodinger_propagate(params, traj, psi0, dt, drift_limit=1e-6):
    """RK4 integration of i psi' = mu B(q(t)) . sigma psi along ``traj``.

    Records P_e = |<e|psi>|^2 and the norm drift at each trajectory sample.
    The state is never renormalised; drift above ``drift_limit`` raises.
    """
    psi = np.array(psi0, dtype=complex)
    if abs(np.linalg.norm(psi) - 1) > 1e-10:
        raise ValueError("initial state must be normalised")
    times = traj.times
    nseg = len(times) - 1
    if nseg == 0:
        return PopulationSeries(times.copy(), np.array([abs(psi[0]) ** 2]), np.zeros(1), psi[None, :])
    ratio = traj.step / dt
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-9 * ratio:
        raise ValueError(f"dt = {dt:g} does not divide the trajectory step {traj.step:g}")
    h = traj.step / k

    # sample times t0 + i h/2 for i = 0 .. 2 k nseg
    half = times[0] + 0.5 * h * np.arange(2 * k * nseg + 1)
    q = _positions(params, traj, half)
    gen = -1j * spin_hamiltonian(params, dipole_field(params, q[:, 0], q[:, 1]))
    g1, g2, g3 = gen[0:-1:2], gen[1::2], gen[2::2]
    eye = np.eye(2, dtype=complex)
    k1 = g1
    k2 = g2 @ (eye + 0.5 * h * k1)
    k3 = g2 @ (eye + 0.5 * h * k2)
    k4 = g3 @ (eye + h * k3)
    steps = eye + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    segments = _chain(steps.reshape(nseg, k, 2, 2))

    states = np.empty((nseg + 1, 2), dtype=complex)
    states[0] = psi
    for i in range(nseg):
        psi = segments[i] @ psi
        states[i + 1] = psi
    norms = np.linalg.norm(states, axis=1)
    drift = np.abs(norms - 1)
    if drift.max() > drift_limit:
        raise ToleranceError(f"norm drift {drift.max():.3g} exceeds {drift_limit:g}; reduce dt")
    return PopulationSeries(times.copy(), np.abs(states[:, 0]) ** 2, drift, states)


def instantaneous_fidelity(params, traj, states, branch="minus"):
    """|<+-(t)|psi(t)>|^2 against the instantaneous eigenstates along the trajectory."""
    theta, phi = _angles_along(params, traj.q)
    half = 0.5 * theta
    phase = np.exp(1j * phi)
    if branch == "plus":
        basis = np.stack([np.cos(half), np.sin(half) * phase], axis=1)
    else:
        basis = np.stack([-np.sin(half), np.cos(half) * phase], axis=1)
    return np.abs(np.einsum("ij,ij->i", basis.conj(), states)) ** 2
