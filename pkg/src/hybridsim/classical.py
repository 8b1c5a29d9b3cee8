"""Planar motion of the classical magnetic particle.

Two routes: the analytic underdamped solution

    q(t) = exp(-Gamma t / m) (A cos(Omega_0 t) + B sin(Omega_0 t)),
    Omega_0 = sqrt(Omega^2 - (Gamma/m)^2),

and RK4 integration of

    m q'' = -sum_j p_j Re(d lambda_j/dq) - m Omega^2 q + q' x b - 2 Gamma q'

with each force term switchable.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import OverdampedError, SingularGeometryError
from .geometry import DEFAULT_A_MIN, geometric_field, lambda_gradient


@dataclass(frozen=True)
class ClassicalState:
    q: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class InitialCoefficients:
    A_vec: np.ndarray
    B_vec: np.ndarray


@dataclass
class Trajectory:
    """Uniformly sampled path. ``coeffs`` is set when the path is the analytic damped solution."""

    times: np.ndarray
    q: np.ndarray
    v: np.ndarray
    meta: dict = field(default_factory=dict)
    coeffs: InitialCoefficients | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if not (len(self.times) == len(self.q) == len(self.v)):
            raise ValueError("times, q and v must have equal length")
        if len(self.times) > 1:
            steps = np.diff(self.times)
            if np.any(steps <= 0):
                raise ValueError("trajectory times must be strictly increasing")
            if np.max(np.abs(steps - steps[0])) > 1e-12 * max(1.0, abs(self.times[-1])):
                raise ValueError("trajectory times must be uniformly spaced")

    @property
    def step(self):
        return float(self.times[1] - self.times[0])

    def state(self, i):
        return ClassicalState(self.q[i].copy(), self.v[i].copy())

    def __len__(self):
        return len(self.times)


def effective_frequency(params):
    """Omega_0 = sqrt(Omega^2 - (Gamma/m)^2); only the underdamped regime is supported."""
    rate = params.Gamma / params.m
    if rate >= params.Omega:
        raise OverdampedError(f"Gamma/m = {rate:g} >= Omega = {params.Omega:g}: not underdamped")
    return float(np.sqrt(params.Omega**2 - rate**2))


def damped_solution(params, coeffs, t):
    """Analytic position and velocity at time(s) t."""
    omega0 = effective_frequency(params)
    rate = params.Gamma / params.m
    t = np.asarray(t, dtype=float)
    tt = t[..., None]
    env = np.exp(-rate * tt)
    cos, sin = np.cos(omega0 * tt), np.sin(omega0 * tt)
    a, b = np.asarray(coeffs.A_vec, dtype=float), np.asarray(coeffs.B_vec, dtype=float)
    q = env * (a * cos + b * sin)
    v = -rate * q + env * omega0 * (-a * sin + b * cos)
    return ClassicalState(q, v)


def coefficients_from_initial(params, q0, v0):
    omega0 = effective_frequency(params)
    rate = params.Gamma / params.m
    q0 = np.asarray(q0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    return InitialCoefficients(q0.copy(), (v0 + rate * q0) / omega0)


def damped_trajectory(params, coeffs, times):
    times = np.asarray(times, dtype=float)
    st = damped_solution(params, coeffs, times)
    meta = {"integrator": "analytic", "Gamma": params.Gamma, "Omega": params.Omega, "m": params.m}
    return Trajectory(times, st.q, st.v, meta, coeffs)


@dataclass(frozen=True)
class ForceOptions:
    gradient: bool = False
    harmonic: bool = True
    lorentz: bool = False
    drag: bool = False
    # constant b_z override for the Lorentz term; None means the geometric field at q
    bz_constant: float | None = None
    a_min: float = DEFAULT_A_MIN


def hybrid_acceleration(params, weights, opts, q, v):
    """q'' for the hybrid equation of motion; only real parts of geometric quantities enter."""
    force = np.zeros(2)
    if opts.harmonic:
        force -= params.m * params.Omega**2 * q
    if opts.drag:
        force -= 2 * params.Gamma * v
    if opts.gradient:
        for j, p in enumerate(weights.p, start=1):
            if p:
                force -= p * lambda_gradient(params, q[0], q[1], j).real
    if opts.lorentz:
        if opts.bz_constant is not None:
            bz = opts.bz_constant
        else:
            if np.hypot(q[0], q[1]) < opts.a_min:
                raise SingularGeometryError("particle entered the a < a_min zone")
            bz = geometric_field(params, weights, q[0], q[1], opts.a_min).b_z.real
        # (v_x, v_y, 0) x (0, 0, b_z)
        force += bz * np.array([v[1], -v[0]])
    return force / params.m


def integrate_hybrid_eom(params, weights, opts, init, t_final, dt):
    """Fixed-step RK4 trajectory of the hybrid equation of motion.

    Entering the a < a_min zone with the Lorentz term on raises
    SingularGeometryError carrying the trajectory up to that point in ``partial``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = int(round(t_final / dt))
    if abs(n * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ValueError("t_final must be an integer multiple of dt")
    times = dt * np.arange(n + 1)
    qs = np.empty((n + 1, 2))
    vs = np.empty((n + 1, 2))
    q = np.array(init.q, dtype=float)
    v = np.array(init.v, dtype=float)
    qs[0], vs[0] = q, v
    meta = {"integrator": "rk4", "dt": dt, "forces": opts}

    def acc(q, v):
        return hybrid_acceleration(params, weights, opts, q, v)

    for i in range(n):
        try:
            k1q, k1v = v, acc(q, v)
            k2q, k2v = v + 0.5 * dt * k1v, acc(q + 0.5 * dt * k1q, v + 0.5 * dt * k1v)
            k3q, k3v = v + 0.5 * dt * k2v, acc(q + 0.5 * dt * k2q, v + 0.5 * dt * k2v)
            k4q, k4v = v + dt * k3v, acc(q + dt * k3q, v + dt * k3v)
        except SingularGeometryError as exc:
            partial = Trajectory(times[: i + 1], qs[: i + 1], vs[: i + 1], dict(meta, truncated_at=times[i]))
            raise SingularGeometryError(f"{exc} at t = {times[i]:g}; trajectory truncated", partial) from exc
        q = q + dt / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
        v = v + dt / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        qs[i + 1], vs[i + 1] = q, v
    return Trajectory(times, qs, vs, meta)
