"""Scenario configuration, sweeps and result tables behind the ``hybridsim`` CLI."""

import copy
import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from . import __version__
from .adiabatic import adiabaticity_series, schrodinger_propagate
from .classical import InitialCoefficients, coefficients_from_initial, damped_trajectory, effective_frequency
from .dipole import HybridParams, dtheta_da, polar_angle_of_offset
from .errors import ClosedFormError, ConfigError, OverdampedError, SingularGeometryError
from .geometry import (
    Weights,
    branch_sum,
    branch_sum_dtheta,
    characteristic_roots,
    closed_form_coefficients,
    collinearity,
    continue_branches,
    cubic_value,
    local_angles,
    spin_eigen_structure,
)
from .lindblad import (
    LindbladModel,
    effective_hamiltonian,
    evolve_vectorized,
    integrate_master,
    random_density_matrix,
    spin_effective_hamiltonian,
    spin_model,
    vectorize,
    devectorize,
)

SCENARIOS = ("bz_map", "adiabaticity_map", "population_sweep", "equivalence_check", "eigen_report")
UNITS_LINE = "hbar=1, energy=mu|B|"

_BASE = {
    "params": {"mu": 1.0, "d": 1.0, "a": 1.0, "gamma": 0.0, "Gamma": 0.0, "m": 1.0, "Omega": 0.1},
    "weights": [1 / 3, 1 / 3, 1 / 3, 0.0],
    "numerics": {"a_min": 1e-6},
    "output": {"path": "-", "format": "csv"},
    "seed": 0,
    "jobs": None,
}

_DRIVEN = {
    "sweep": {"Gamma": {"min": 0.0, "max": 0.09, "count": 30}, "t": {"min": 0.0, "max": 200.0, "count": 200}},
    "initial": {"A": [1.0, 0.0], "B": [0.0, 1.0]},
}

DEFAULTS = {
    "bz_map": {
        "sweep": {"d": {"min": 0.8, "max": 3.0, "count": 60}, "gamma": {"min": 0.0, "max": 50.0, "count": 60}},
        "numerics": {"bz_model": "fixed_radius"},
    },
    "adiabaticity_map": dict(_DRIVEN, numerics={"kappa_reading": "printed"}),
    "population_sweep": dict(_DRIVEN, numerics={"dt": 2e-3, "tolerance": 1e-8}, spin_initial="g"),
    "equivalence_check": {
        "numerics": {"dt": 1e-3, "t_final": 8.0, "tolerance": 1e-7, "cases": 50, "gammas": [0.0, 0.5, 2.0]},
    },
    "eigen_report": {"params": {"gamma": 1.0}, "probe": {"theta": math.pi / 3, "phi": 0.0}},
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def default_config(scenario):
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")
    return _merge(_merge(_BASE, DEFAULTS[scenario]), {"scenario": scenario})


def parse_override(text):
    """'a.b.c=value' -> (['a', 'b', 'c'], value); value is JSON if it parses, else a string."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().split("."), value


def apply_override(cfg, path, value):
    node = cfg
    for part in path[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {'.'.join(path)}: {part} is not a mapping")
    node[path[-1]] = value


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    count: int

    def values(self):
        return np.linspace(self.min, self.max, self.count)


@dataclass
class ScenarioConfig:
    scenario: str
    params: HybridParams
    weights: Weights
    sweep: dict
    numerics: dict
    raw: dict = field(repr=False)

    def axis(self, name):
        try:
            return self.sweep[name]
        except KeyError:
            raise ConfigError(f"scenario {self.scenario} needs a sweep axis {name!r}") from None

    def num(self, key):
        try:
            value = self.numerics[key]
        except KeyError:
            raise ConfigError(f"missing numerics.{key}") from None
        return value

    @property
    def seed(self):
        return int(self.raw.get("seed", 0))

    def sha256(self):
        """Hash of everything that can change the table body (not output path or job count)."""
        body = {k: v for k, v in self.raw.items() if k not in ("output", "jobs")}
        blob = json.dumps(body, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def build_config(raw):
    """Validate a merged config mapping and turn it into a ScenarioConfig."""
    scenario = raw.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    try:
        pdict = dict(raw.get("params", {}))
        params = HybridParams(**pdict) if "field_scale" in pdict else HybridParams.normalized(**pdict)
        weights = Weights(tuple(raw.get("weights", Weights().p)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    sweep = {}
    for name, spec in (raw.get("sweep") or {}).items():
        try:
            axis = Axis(name, float(spec["min"]), float(spec["max"]), int(spec["count"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad sweep axis {name!r}: {exc}") from exc
        if axis.count < 2:
            raise ConfigError(f"sweep axis {name!r} needs count >= 2")
        if axis.max < axis.min:
            raise ConfigError(f"sweep axis {name!r} has max < min")
        sweep[name] = axis

    numerics = dict(raw.get("numerics") or {})
    for key in ("dt", "t_final", "a_min", "tolerance"):
        if key in numerics and not (isinstance(numerics[key], (int, float)) and numerics[key] > 0):
            raise ConfigError(f"numerics.{key} must be positive")
    if raw.get("output", {}).get("format", "csv") not in ("csv", "gnuplot"):
        raise ConfigError("output.format must be csv or gnuplot")
    return ScenarioConfig(scenario, params, weights, sweep, numerics, raw)


def load_config(scenario, path=None, overrides=()):
    """Defaults for ``scenario`` <- JSON file at ``path`` <- ``key=value`` overrides."""
    cfg = default_config(scenario)
    if path:
        try:
            with open(path) as fh:
                from_file = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(from_file, dict):
            raise ConfigError("config file must hold a JSON object")
        if from_file.get("scenario", scenario) != scenario:
            raise ConfigError(f"config file is for scenario {from_file['scenario']!r}, not {scenario!r}")
        cfg = _merge(cfg, from_file)
    for text in overrides:
        apply_override(cfg, *parse_override(text))
    cfg["scenario"] = scenario
    return build_config(cfg)


@dataclass
class ResultTable:
    columns: list
    rows: list
    header: dict = field(default_factory=dict)
    # blank-line block breaks for gnuplot output (row indices where a new block starts)
    blocks: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError("ResultTable rows must match the column count")

    def column(self, name):
        i = self.columns.index(name)
        return np.array([row[i] for row in self.rows], dtype=float)

    def _header_lines(self):
        lines = [
            f"# engine-version: {__version__}",
            f"# config-sha256: {self.header.get('config_sha256', '')}",
            f"# units: {UNITS_LINE}",
        ]
        for key, value in self.header.items():
            if key != "config_sha256":
                lines.append(f"# {key}: {value}")
        return lines

    @staticmethod
    def _fmt(x):
        if isinstance(x, (int, np.integer)):
            return str(int(x))
        return format(float(x), ".17g")

    def body(self, fmt="csv"):
        buf = io.StringIO()
        if fmt == "csv":
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([self._fmt(x) for x in row])
        elif fmt == "gnuplot":
            buf.write("# " + " ".join(self.columns) + "\n")
            starts = set(self.blocks[1:])
            for i, row in enumerate(self.rows):
                if i in starts:
                    buf.write("\n")
                buf.write(" ".join(self._fmt(x) for x in row) + "\n")
        else:
            raise ValueError(f"unknown format {fmt!r}")
        return buf.getvalue()

    def render(self, fmt="csv"):
        return "\n".join(self._header_lines()) + "\n" + self.body(fmt)


def _map(func, items, jobs):
    items = list(items)
    if jobs and jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(func, items))
    return [func(item) for item in items]


def _jobs(cfg):
    jobs = cfg.raw.get("jobs")
    return int(jobs) if jobs else (os.cpu_count() or 1)


def _table(cfg, columns, rows, blocks=(), failures=()):
    return ResultTable(
        columns,
        rows,
        {"config_sha256": cfg.sha256(), "scenario": cfg.scenario, "seed": cfg.seed},
        list(blocks),
        list(failures),
    )


# --- bz_map -----------------------------------------------------------------


def _bz_line(d, cfg):
    a = cfg.params.a
    a_min = float(cfg.numerics.get("a_min", 1e-6))
    if a < a_min:
        raise SingularGeometryError(f"grid point a = {a:g} lies inside a < a_min = {a_min:g}")
    model = cfg.numerics.get("bz_model", "fixed_radius")
    params = cfg.params.replace(d=float(d))
    theta, phi = local_angles(params, a, 0.0)
    rows = []
    previous = None
    for gamma in cfg.axis("gamma").values():
        triples = spin_eigen_structure(float(gamma), theta, phi)
        lams = np.array([t.lam for t in triples[:3]])
        if previous is not None:
            lams, perm = continue_branches(previous, lams)
            triples = [triples[i] for i in perm] + [triples[3]]
        previous = lams
        f = branch_sum(cfg.weights, triples)
        if model == "fixed_radius":
            bz = 2 * f / a**2
        elif model == "curl":
            bz = branch_sum_dtheta(float(gamma), theta, phi, cfg.weights, triples) * dtheta_da(a, params.d) / a
        else:
            raise ConfigError(f"unknown numerics.bz_model {model!r}")
        row = [float(d), float(gamma), bz.real, bz.imag]
        for lam in lams:
            row += [lam.real, lam.imag]
        rows.append(row)
    return rows


def run_bz_map(cfg):
    """Re/Im b_z over the (d, gamma) grid at fixed radius a, with branch continuation along gamma."""
    ds = cfg.axis("d").values()
    lines = _map(partial(_bz_line, cfg=cfg), ds, _jobs(cfg))
    columns = ["d", "gamma", "re_bz", "im_bz"]
    for j in (1, 2, 3):
        columns += [f"lambda{j}_re", f"lambda{j}_im"]
    rows = [row for line in lines for row in line]
    blocks = [i * len(lines[0]) for i in range(len(lines))]
    return _table(cfg, columns, rows, blocks)


# --- driven spin ------------------------------------------------------------


def _coefficients(cfg, params):
    init = cfg.raw.get("initial") or {}
    if "q0" in init or "v0" in init:
        return coefficients_from_initial(params, init.get("q0", [params.a, 0.0]), init.get("v0", [0.0, params.Omega * params.a]))
    return InitialCoefficients(np.asarray(init.get("A", [params.a, 0.0]), float), np.asarray(init.get("B", [0.0, params.a]), float))


def _trajectory(cfg, gamma_drag):
    params = cfg.params.replace(Gamma=float(gamma_drag))
    try:
        effective_frequency(params)
    except OverdampedError as exc:
        raise ConfigError(f"sweep reaches the overdamped regime: {exc}") from exc
    return params, damped_trajectory(params, _coefficients(cfg, params), cfg.axis("t").values())


def _kappa_line(gamma_drag, cfg):
    params, traj = _trajectory(cfg, gamma_drag)
    series = adiabaticity_series(params, traj, cfg.numerics.get("kappa_reading", "printed"))
    return [[float(gamma_drag), float(t), float(k)] for t, k in zip(series.times, series.kappa)]


def run_adiabaticity_map(cfg):
    """kappa(Gamma, t) along analytic damped trajectories."""
    gammas = cfg.axis("Gamma").values()
    if gammas.max() / cfg.params.m >= cfg.params.Omega:
        raise ConfigError("Gamma sweep reaches Gamma >= m Omega (not underdamped)")
    lines = _map(partial(_kappa_line, cfg=cfg), gammas, _jobs(cfg))
    rows = [row for line in lines for row in line]
    return _table(cfg, ["Gamma", "t", "kappa"], rows, [i * len(lines[0]) for i in range(len(lines))])


_SPIN_STATES = {"g": np.array([0, 1], dtype=complex), "e": np.array([1, 0], dtype=complex)}


def _population_line(gamma_drag, cfg):
    params, traj = _trajectory(cfg, gamma_drag)
    step = traj.step
    dt = step / math.ceil(step / float(cfg.num("dt")) - 1e-9)
    psi0 = _SPIN_STATES[cfg.raw.get("spin_initial", "g")]
    series = schrodinger_propagate(params, traj, psi0, dt, drift_limit=math.inf)
    return [[float(gamma_drag), float(t), float(p), float(n)] for t, p, n in zip(series.times, series.p_e, series.norm_drift)]


def run_population_sweep(cfg):
    """Excited-state population of the driven spin over the (Gamma, t) grid."""
    if cfg.raw.get("spin_initial", "g") not in _SPIN_STATES:
        raise ConfigError("spin_initial must be 'g' or 'e'")
    gammas = cfg.axis("Gamma").values()
    if gammas.max() / cfg.params.m >= cfg.params.Omega:
        raise ConfigError("Gamma sweep reaches Gamma >= m Omega (not underdamped)")
    lines = _map(partial(_population_line, cfg=cfg), gammas, _jobs(cfg))
    rows = [row for line in lines for row in line]
    tol = float(cfg.num("tolerance"))
    failures = [f"norm drift {row[3]:.3g} > {tol:g} at Gamma={row[0]:g}, t={row[1]:g}" for row in rows if row[3] > tol]
    return _table(cfg, ["Gamma", "t", "p_e", "norm_drift"], rows, [i * len(lines[0]) for i in range(len(lines))], failures)


# --- equivalence check ------------------------------------------------------


def equivalence_cases(n, gammas, seed):
    """Seeded (gamma, theta, phi, rho0) cases; gamma cycles through ``gammas``."""
    rng = np.random.default_rng(seed)
    cases = []
    for i in range(n):
        theta = rng.uniform(0.0, np.pi)
        phi = rng.uniform(-np.pi, np.pi)
        rho0 = random_density_matrix(rng)
        cases.append((float(gammas[i % len(gammas)]), theta, phi, rho0))
    return cases


def equivalence_deviations(cases, t_final, dt):
    """Max elementwise |master-equation rho - devectorised H_T evolution| per case."""
    models = [spin_model(g, th, ph) for g, th, ph, _ in cases]
    batch = LindbladModel(
        np.stack([m.hamiltonian for m in models]),
        (np.stack([m.jumps[0] for m in models]),),
    )
    rho0 = np.stack([c[3] for c in cases])
    master = integrate_master(batch, rho0, t_final, dt)
    heff = np.stack([effective_hamiltonian(m).matrix for m in models])
    vec = devectorize(evolve_vectorized(heff, vectorize(rho0), t_final, dt))
    return np.max(np.abs(master - vec), axis=(1, 2))


def run_equivalence_check(cfg):
    n = int(cfg.num("cases"))
    if n < 1:
        raise ConfigError("numerics.cases must be >= 1")
    gammas = cfg.numerics.get("gammas", [0.0, 0.5, 2.0])
    cases = equivalence_cases(n, gammas, cfg.seed)
    dev = equivalence_deviations(cases, float(cfg.num("t_final")), float(cfg.num("dt")))
    tol = float(cfg.num("tolerance"))
    rows = [[i, g, th, ph, float(d)] for i, ((g, th, ph, _), d) in enumerate(zip(cases, dev))]
    failures = [f"case {r[0]}: max_dev {r[4]:.3g} > {tol:g}" for r in rows if r[4] > tol]
    return _table(cfg, ["case_id", "gamma", "theta", "phi", "max_dev"], rows, failures=failures)


# --- eigen report -----------------------------------------------------------


def _closed_form_scores(gamma, theta, phi, lam, right, mat):
    out = []
    for convention in ("printed", "reconciled"):
        try:
            cf = closed_form_coefficients(gamma, theta, phi, lam, convention)
        except ClosedFormError:
            out += [0.0, math.nan]
            continue
        mismatch = np.linalg.norm(mat @ cf.right - lam * cf.right) / np.linalg.norm(cf.right)
        out += [collinearity(cf.right, right), float(mismatch)]
    return out


def run_eigen_report(cfg):
    """Cubic roots vs numerical spectrum, residuals and closed-form agreement at one (gamma, theta, phi)."""
    gamma = float(cfg.params.gamma)
    probe = cfg.raw.get("probe") or {}
    theta = float(probe.get("theta", polar_angle_of_offset(cfg.params.a, cfg.params.d)))
    phi = float(probe.get("phi", 0.0))
    mat = spin_effective_hamiltonian(gamma, theta, phi).matrix
    triples = spin_eigen_structure(gamma, theta, phi)
    roots = list(characteristic_roots(gamma, theta)) + [0j]
    scale = np.linalg.norm(mat, 2)
    rows = []
    for j, (t, root) in enumerate(zip(triples, roots), start=1):
        v = t.right
        res_r = np.linalg.norm(mat @ v - t.lam * v) / scale
        res_l = np.linalg.norm(t.left @ mat - t.lam * t.left) / scale
        cubic_res = abs(t.lam) if j == 4 else abs(cubic_value(root, gamma, theta))
        printed_mismatch = 0.0 if j == 4 else abs(cubic_value(root, gamma, theta, "printed"))
        gf = t.geometric_factor()
        rows.append(
            [j, t.lam.real, t.lam.imag, root.real, root.imag, cubic_res, printed_mismatch, res_r, res_l,
             t.m_norm.real, t.m_norm.imag, gf.real, gf.imag]
            + _closed_form_scores(gamma, theta, phi, t.lam, v, mat)
        )
    columns = [
        "j", "lambda_re", "lambda_im", "root_re", "root_im", "cubic_residual", "printed_cubic_mismatch",
        "eig_residual_right", "eig_residual_left", "m_norm_re", "m_norm_im", "geom_factor_re", "geom_factor_im",
        "collinearity_printed", "closed_form_mismatch_printed", "collinearity_reconciled", "closed_form_mismatch_reconciled",
    ]
    table = _table(cfg, columns, rows)
    table.header.update({"gamma": gamma, "theta": theta, "phi": phi})
    return table


RUNNERS = {
    "bz_map": run_bz_map,
    "adiabaticity_map": run_adiabaticity_map,
    "population_sweep": run_population_sweep,
    "equivalence_check": run_equivalence_check,
    "eigen_report": run_eigen_report,
}


def run(cfg):
    return RUNNERS[cfg.scenario](cfg)
