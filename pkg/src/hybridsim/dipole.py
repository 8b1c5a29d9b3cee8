"""Field of the classical magnetic dipole at the spin and the resulting spin Hamiltonian.

The particle sits at q_b = (x, y, d) relative to the spin; with
a^2 = x^2 + y^2 and ``field_scale`` = mu_0 m_F / 4 pi,

    B = -field_scale * (3 d x, 3 d y, 2 d^2 - a^2) / (d^2 + a^2)^(5/2).
"""

from dataclasses import asdict, dataclass, replace

import numpy as np


@dataclass(frozen=True)
class HybridParams:
    """Physical constants of the spin + magnetic particle system.

    Lengths are in units of the reference radius, energies in mu|B| at the
    reference point (see ``normalized``), hbar = 1.
    """

    field_scale: float = 1.0
    mu: float = 1.0
    d: float = 1.0
    a: float = 1.0
    gamma: float = 0.0
    Gamma: float = 0.0
    m: float = 1.0
    Omega: float = 0.1

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite")
        if self.field_scale <= 0:
            raise ValueError("field_scale must be positive")
        if self.d <= 0:
            raise ValueError("d must be positive")
        if self.m <= 0:
            raise ValueError("m must be positive")
        if self.Omega <= 0:
            raise ValueError("Omega must be positive")
        for name in ("a", "gamma", "Gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def normalized(cls, **kwargs):
        """Parameters with field_scale chosen so that mu|B(a, 0, d)| = 1."""
        p = cls(**kwargs)
        norm = field_norm(dipole_field(replace(p, field_scale=1.0), p.a, 0.0))
        return replace(p, field_scale=1.0 / (p.mu * norm))

    def replace(self, **changes):
        return replace(self, **changes)


def dipole_field(params, x, y):
    """(B_x, B_y, B_z) at in-plane offset (x, y); broadcasts over array inputs."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = params.d
    a2 = x * x + y * y
    pref = -params.field_scale / (d * d + a2) ** 2.5
    return np.stack(np.broadcast_arrays(pref * 3 * d * x, pref * 3 * d * y, pref * (2 * d * d - a2)), axis=-1)


def field_norm(field):
    return np.linalg.norm(np.asarray(field, dtype=float), axis=-1)


def spin_hamiltonian(params, field):
    """mu B . sigma as a 2x2 (or batched) Hermitian matrix."""
    b = np.asarray(field, dtype=float)
    bx, by, bz = b[..., 0], b[..., 1], b[..., 2]
    h = np.empty(b.shape[:-1] + (2, 2), dtype=complex)
    h[..., 0, 0] = params.mu * bz
    h[..., 1, 1] = -params.mu * bz
    h[..., 0, 1] = params.mu * (bx - 1j * by)
    h[..., 1, 0] = params.mu * (bx + 1j * by)
    return h


@dataclass(frozen=True)
class SphericalAngles:
    theta: float
    phi: float


def field_angles(field):
    """Polar angles of B: cos(theta) = B_z/|B|, tan(phi) = B_y/B_x.

    theta is evaluated as atan2(|B_perp|, B_z), which equals the arccos form
    but keeps full relative precision near the poles.  phi = atan2(B_y, B_x),
    and phi = 0 on the field axis.
    """
    b = np.asarray(field, dtype=float)
    bx, by, bz = b[..., 0], b[..., 1], b[..., 2]
    if np.any(field_norm(b) == 0):
        raise ValueError("field_angles is undefined for a zero field")
    theta = np.arctan2(np.hypot(bx, by), bz)
    phi = np.where((bx == 0) & (by == 0), 0.0, np.arctan2(by, bx))
    if np.ndim(theta) == 0:
        return SphericalAngles(float(theta), float(phi))
    return SphericalAngles(theta, phi)


def polar_angle_of_offset(a, d):
    """theta as a function of the in-plane distance a alone (the field is axially symmetric)."""
    return np.arctan2(3 * d * a, a * a - 2 * d * d)


def dtheta_da(a, d):
    """Analytic derivative of ``polar_angle_of_offset`` with respect to a."""
    u, v = 3 * d * a, a * a - 2 * d * d
    return (v * 3 * d - u * 2 * a) / (u * u + v * v)
