"""The two reference scenarios, simulation drivers and trajectory utilities."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import ReducedState, SystemParams, kinetic_energy, total_energy
from .integrate import (
    IntegratorConfig,
    block_coefficients,
    dense_coefficients,
    integrate_block,
    integrate_dense,
    integrate_field,
    integrate_forced,
)
from ._pykernels import midpoints6
from .invariants import Equilibrium, aux_invariant, casimirs, energy_controlled, omega3
from .matching import ShapingGains, solve_matching, u_kinetic_along, u_potential

MODES = ("none", "potential_only", "full")
MODE_ALIASES = {"potential": "potential_only"}
INVARIANT_NAMES = ("E0", "E_aux", "C1", "C2", "C3", "Omega3_inv")
CSV_HEADER = (
    ["t", "Omega1", "Omega2", "Omega3", "v1", "v2", "v3", "Gamma1", "Gamma2", "Gamma3", "h",
     "u1", "u2", "u3"] + list(INVARIANT_NAMES)
)
STATE_FIELDS = {"omega": slice(0, 3), "v": slice(3, 6), "gamma": slice(6, 9), "h": slice(9, 10)}


def initial_gamma(theta0: float = np.pi / 4, phi0: float = np.pi / 20) -> np.ndarray:
    """Unit vertical direction from azimuth ``theta0`` and tilt ``phi0``."""
    return np.array([np.cos(theta0) * np.sin(phi0), np.sin(theta0) * np.sin(phi0), np.cos(phi0)])


@dataclass(frozen=True)
class Scenario:
    name: str
    params: SystemParams
    rho: float
    initial: ReducedState
    mode: str = "full"
    t_end: float = 20.0

    def __post_init__(self):
        mode = MODE_ALIASES.get(self.mode, self.mode)
        if mode not in MODES:
            raise ValueError(f"unknown control mode {self.mode!r}")
        object.__setattr__(self, "mode", mode)
        if abs(np.linalg.norm(self.initial.gamma) - 1.0) > 1e-12:
            raise ValueError("initial Gamma must be a unit vector")

    @property
    def gains(self) -> ShapingGains:
        return solve_matching(self.params, self.rho)

    @property
    def equilibrium(self) -> Equilibrium:
        w3 = 0.0 if self.params.degenerate else float(self.initial.omega[2])
        return Equilibrium.upright(w3)

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)


def scenario_spherical_pendulum(mode: str = "full", rho: float | None = None) -> Scenario:
    params = SystemParams.spherical_pendulum(m=0.14, M=0.44, l=0.215, grav=9.8)
    x0 = ReducedState(np.array([0.1, 0.2, 0.0]), np.zeros(3), initial_gamma(), 0.0)
    return Scenario("sp", params, 0.9 * params.m if rho is None else rho, x0, mode, 20.0)


def scenario_heavy_top(mode: str = "full", rho: float | None = None) -> Scenario:
    params = SystemParams(m=0.7, M=0.44, l=0.215, inertia=(0.2, 0.2, 0.24), chi=(0.0, 0.0, 1.0), grav=9.8)
    if rho is None:
        rho = 0.9 * (params.m * params.l) ** 2 / params.inertia[0]
    x0 = ReducedState(np.array([0.1, 0.2, 0.1]), np.zeros(3), initial_gamma(), 0.0)
    return Scenario("ht", params, rho, x0, mode, 30.0)


SCENARIOS = {"sp": scenario_spherical_pendulum, "ht": scenario_heavy_top}


@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray
    u: np.ndarray
    invariants: dict = field(default_factory=dict)
    mode: str = "full"

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0

    @property
    def omega(self):
        return self.states[:, 0:3]

    @property
    def v(self):
        return self.states[:, 3:6]

    @property
    def gamma(self):
        return self.states[:, 6:9]

    @property
    def h(self):
        return self.states[:, 9]

    def drift(self, name: str) -> float:
        """Relative drift ``max |q(t) - q(0)| / |q(0)|`` (absolute when ``q(0) == 0``)."""
        q = np.asarray(self.invariants[name])
        if not np.all(np.isfinite(q)):
            return float("nan")
        scale = abs(q[0]) if q[0] != 0.0 else 1.0
        return float(np.max(np.abs(q - q[0])) / scale)

    def drifts(self) -> dict:
        return {name: self.drift(name) for name in self.invariants}

    def table(self) -> np.ndarray:
        cols = [self.t[:, None], self.states, self.u]
        cols += [np.asarray(self.invariants.get(n, np.full(len(self.t), np.nan)))[:, None]
                 for n in INVARIANT_NAMES]
        return np.hstack(cols)

    def to_csv(self, path) -> None:
        np.savetxt(path, self.table(), fmt="%.17g", delimiter=",", header=",".join(CSV_HEADER), comments="")

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected CSV header")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        inv = {n: data[:, 14 + i] for i, n in enumerate(INVARIANT_NAMES)}
        return cls(data[:, 0], data[:, 1:11], data[:, 11:14], inv, mode="unknown")


def log_invariants(states: np.ndarray, scenario: Scenario, gains: ShapingGains | None = None) -> dict:
    """Invariants per sample.

    ``E0`` is the energy of the system actually simulated (physical energy in
    mode none, top energy without base gravity for potential-only, controlled
    energy in full mode). The remaining columns are the closed-loop invariants.
    """
    params = scenario.params
    gains = gains or scenario.gains
    s = ReducedState.from_array(states)
    if scenario.mode == "none":
        e0 = total_energy(s, params)
    elif scenario.mode == "potential_only":
        e0 = kinetic_energy(s.omega, s.v, params) + params.mgl * s.gamma @ params.chi_vec
    else:
        e0 = energy_controlled(s, gains, params)
    c1, c2, c3 = casimirs(s, gains, params)
    try:
        e_aux = np.asarray(aux_invariant(s, gains, params))
    except ValueError:
        if scenario.mode == "full":
            raise
        e_aux = np.full(len(states), np.nan)  # undefined at the singular rho
    return {
        "E0": np.asarray(e0),
        "E_aux": e_aux,
        "C1": c1,
        "C2": c2,
        "C3": c3,
        "Omega3_inv": np.asarray(omega3(s)),
    }


def _grid(config: IntegratorConfig) -> np.ndarray:
    return np.arange(config.n_steps + 1) * config.dt


def simulate(scenario: Scenario, config: IntegratorConfig | None = None) -> Trajectory:
    """Integrate the scenario in its control mode and log ``u`` and invariants."""
    config = config or IntegratorConfig(t_end=scenario.t_end)
    params = scenario.params
    gains = scenario.gains
    x0 = scenario.initial.to_array()
    if scenario.mode == "none":
        states = integrate_block(x0, block_coefficients(params, params.m_bar, params.m_bar * params.grav), config)
        u = np.zeros((len(states), 3))
    elif scenario.mode == "potential_only":
        states = integrate_block(x0, block_coefficients(params, params.m_bar, 0.0), config)
        u = u_potential(states[:, 6:9], params)
    else:
        states = integrate_block(x0, block_coefficients(params, gains.rho, 0.0), config)
        u = u_kinetic_along(states, gains, params)[1]
    return Trajectory(_grid(config), states, u, log_invariants(states, scenario, gains), scenario.mode)


def simulate_implicit(scenario: Scenario, config: IntegratorConfig | None = None) -> Trajectory:
    """Controlled system with the full law solved implicitly (verification path)."""
    config = config or IntegratorConfig(t_end=scenario.t_end)
    params = scenario.params
    gains = scenario.gains
    coeffs = dense_coefficients(params, k=gains.k, up=params.m_bar * params.grav)
    states = integrate_dense(scenario.initial.to_array(), coeffs, config)
    u = u_kinetic_along(states, gains, params)[1]
    full = scenario.with_(mode="full")
    return Trajectory(_grid(config), states, u, log_invariants(states, full, gains), "full")


def replay_open_loop(traj: Trajectory, scenario: Scenario) -> Trajectory:
    """Drive the uncontrolled plant with the logged control as a prescribed force.

    Stage values of ``u`` between samples come from six-point interpolation.
    """
    params = scenario.params
    coeffs = dense_coefficients(params)
    states = integrate_forced(traj.states[0], coeffs, traj.dt, traj.u, midpoints6(traj.u))
    return Trajectory(traj.t.copy(), states, traj.u.copy(), {}, "replay")


def modified_gravity(rho: float, params: SystemParams) -> float:
    """``g' = rho g / (rho - m)`` seen by the decoupled pendulum."""
    if rho == params.m:
        raise ValueError("rho == m is singular")
    return rho * params.grav / (rho - params.m)


def pendulum_rhs(x, g_eff: float, l: float) -> np.ndarray:
    """Upright spherical pendulum on ``(Omega1, Omega2, Gamma)`` with gravity ``g_eff``."""
    w1, w2, g1, g2, g3 = x[..., 0], x[..., 1], x[..., 2], x[..., 3], x[..., 4]
    a = g_eff / l
    return np.stack([a * g2, -a * g1, -g3 * w2, g3 * w1, g1 * w2 - g2 * w1], axis=-1)


def simulate_pendulum(scenario: Scenario, config: IntegratorConfig | None = None) -> Trajectory:
    """Standalone pendulum with modified gravity, embedded in the reduced-state layout.

    Only the ``omega`` and ``gamma`` fields are meaningful.
    """
    config = config or IntegratorConfig(t_end=scenario.t_end)
    params = scenario.params
    g_eff = modified_gravity(scenario.rho, params)
    s0 = scenario.initial
    y0 = np.concatenate([s0.omega[:2], s0.gamma])
    y = integrate_field(lambda x: pendulum_rhs(x, g_eff, params.l), y0, config)
    states = np.zeros((len(y), 10))
    states[:, 0:2] = y[:, 0:2]
    states[:, 6:9] = y[:, 2:5]
    w = y[:, 0:2]
    energy = 0.5 * params.m * params.l**2 * np.sum(w * w, axis=1) + params.m * g_eff * params.l * y[:, 4]
    return Trajectory(_grid(config), states, np.zeros((len(y), 3)), {"E0": energy}, "pendulum")


def compare_trajectories(t1: Trajectory, t2: Trajectory, fields=None):
    """Supremum-norm deviation per state field and overall.

    Raises ``ValueError`` unless both trajectories share the same time grid.
    """
    if t1.t.shape != t2.t.shape or np.max(np.abs(t1.t - t2.t), initial=0.0) > 1e-12 * max(1.0, t1.t[-1]):
        raise ValueError("trajectories are sampled on different time grids")
    fields = fields or tuple(STATE_FIELDS)
    per = {}
    for name in fields:
        sl = STATE_FIELDS[name]
        per[name] = float(np.max(np.abs(t1.states[:, sl] - t2.states[:, sl]), initial=0.0))
    return max(per.values()), per


def equilibrium_deviation(traj: Trajectory, eq: Equilibrium, params: SystemParams) -> np.ndarray:
    """``|(Omega - Omega_eq, v, Gamma - e3)|`` per sample, over the active components."""
    d = np.hstack([traj.omega[:, : params.n_rot] - eq.omega[: params.n_rot], traj.v, traj.gamma - eq.gamma])
    return np.linalg.norm(d, axis=1)


def free_fall_fit(traj: Trajectory):
    """Least-squares quadratic fit of ``h(t)``.

    Returns ``(acceleration, r_squared)``; a free fall shows an acceleration
    near ``-g`` with ``r_squared`` close to one.
    """
    coef = np.polyfit(traj.t, traj.h, 2)
    resid = traj.h - np.polyval(coef, traj.t)
    ss = np.sum((traj.h - traj.h.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 0.0
    return 2.0 * coef[0], float(r2)

