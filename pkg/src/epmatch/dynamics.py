"""Reduced Lagrangian, metric and Euler-Poincare equations with advected parameters.

The state is ``(Omega, v, Gamma, h)``: body angular velocity, base velocity in
the body frame, the vertical direction seen from the body and the base height.
In the degenerate (spherical pendulum) mode the third angular component is
removed from the metric and held at zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import geometry as geo
from .geometry import AlgebraElement, DualAlgebraElement, GroupElement, Vector4

STATE_DIM = 10


@dataclass(frozen=True)
class SystemParams:
    """Top (or pendulum) on a point-mass base.

    ``inertia`` holds the principal moments ``(I1, I2, I3)``; ``chi`` is the unit
    vector from the pivot to the centre of mass in the body frame.
    """

    m: float
    M: float
    l: float
    inertia: tuple = (0.0, 0.0, 0.0)
    chi: tuple = (0.0, 0.0, 1.0)
    grav: float = 9.8
    degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "inertia", tuple(float(x) for x in self.inertia))
        object.__setattr__(self, "chi", tuple(float(x) for x in self.chi))
        if not (self.m > 0 and self.M > 0):
            raise ValueError("masses m and M must be positive")
        if self.l < 0:
            raise ValueError("length l must be non-negative")
        if len(self.inertia) != 3 or len(self.chi) != 3:
            raise ValueError("inertia and chi must have three components")
        if abs(np.linalg.norm(self.chi) - 1.0) > 1e-12:
            raise ValueError("chi must be a unit vector")
        if min(self.inertia) < 0:
            raise ValueError("principal moments must be non-negative")
        if self.degenerate and (self.inertia[2] != 0.0 or self.chi != (0.0, 0.0, 1.0)):
            raise ValueError("degenerate mode requires I3 = 0 and chi = e3")

    @classmethod
    def spherical_pendulum(cls, m: float, M: float, l: float, grav: float = 9.8) -> "SystemParams":
        """Point bob on a massless rod, treated as a top without spin about the rod."""
        I1 = m * l * l
        return cls(m=m, M=M, l=l, inertia=(I1, I1, 0.0), grav=grav, degenerate=True)

    @property
    def m_bar(self) -> float:
        return self.m + self.M

    @property
    def n_rot(self) -> int:
        return 2 if self.degenerate else 3

    @property
    def chi_vec(self) -> np.ndarray:
        return np.array(self.chi)

    @property
    def inertia_matrix(self) -> np.ndarray:
        return np.diag(self.inertia)

    @property
    def coupling(self) -> np.ndarray:
        """Upper-right metric block ``m l hat(chi)`` (rows: rotation, cols: translation)."""
        return self.m * self.l * geo.hat(self.chi)

    @property
    def mgl(self) -> float:
        return self.m * self.grav * self.l


class ReducedState(NamedTuple):
    """Reduced state; every field may carry leading batch dimensions."""

    omega: np.ndarray
    v: np.ndarray
    gamma: np.ndarray
    h: np.ndarray | float

    def to_array(self) -> np.ndarray:
        omega = np.asarray(self.omega, dtype=float)
        h = np.asarray(self.h, dtype=float)[..., None]
        return np.concatenate([omega, np.asarray(self.v, float), np.asarray(self.gamma, float), h], axis=-1)

    @classmethod
    def from_array(cls, x) -> "ReducedState":
        x = np.asarray(x, dtype=float)
        return cls(x[..., 0:3], x[..., 3:6], x[..., 6:9], x[..., 9])


def _rot_index(params: SystemParams) -> np.ndarray:
    return np.arange(params.n_rot)


def metric_tensor(params: SystemParams) -> np.ndarray:
    """Kinetic metric ``[[I, ml hat(chi)], [-ml hat(chi), m_bar I]]``.

    Degenerate mode returns the 5x5 restriction without the Omega_3 row/column.
    Raises ``ValueError`` when the result is not positive definite.
    """
    G = _full_metric(params.inertia_matrix, params.coupling, params.m_bar)
    G = _restrict(G, params)
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise ValueError("kinetic metric is not positive definite") from None
    return G


def _full_metric(inertia: np.ndarray, coupling: np.ndarray, trans: float) -> np.ndarray:
    G = np.zeros((6, 6))
    G[:3, :3] = inertia
    G[:3, 3:] = coupling
    G[3:, :3] = coupling.T
    G[3:, 3:] = trans * np.eye(3)
    return G


def _restrict(G6: np.ndarray, params: SystemParams) -> np.ndarray:
    if not params.degenerate:
        return G6
    keep = [0, 1, 3, 4, 5]
    return G6[np.ix_(keep, keep)]


def velocity_vector(omega, v, params: SystemParams) -> np.ndarray:
    """Stack ``(Omega_active, v)`` in the metric's coordinate order."""
    omega = np.asarray(omega, dtype=float)
    return np.concatenate([omega[..., : params.n_rot], np.asarray(v, dtype=float)], axis=-1)


def kinetic_energy(omega, v, params: SystemParams):
    """Kinetic energy ``K(Omega, v)`` written out term by term."""
    omega = np.asarray(omega, dtype=float)
    v = np.asarray(v, dtype=float)
    rot = 0.5 * np.sum(np.asarray(params.inertia) * omega * omega, axis=-1)
    trans = 0.5 * params.m_bar * np.sum(v * v, axis=-1)
    cross = params.m * params.l * np.sum(v * np.cross(omega, params.chi_vec), axis=-1)
    return rot + trans + cross


def momenta(state: ReducedState, params: SystemParams) -> DualAlgebraElement:
    """Momenta ``(dl/dOmega, dl/dv)``."""
    omega = np.asarray(state.omega, dtype=float)
    v = np.asarray(state.v, dtype=float)
    A = params.coupling
    mu = omega * np.asarray(params.inertia) + v @ A.T
    p = omega @ A + params.m_bar * v
    return DualAlgebraElement(mu, p)


def reduced_lagrangian(state: ReducedState, params: SystemParams):
    """``K(Omega, v) - g (m l chi, m_bar) . (Gamma, h)``."""
    gamma = np.asarray(state.gamma, dtype=float)
    potential = params.grav * (
        params.m * params.l * gamma @ params.chi_vec + params.m_bar * np.asarray(state.h)
    )
    return kinetic_energy(state.omega, state.v, params) - potential


def extended_lagrangian(g: GroupElement, g_dot, a: Vector4, params: SystemParams) -> float:
    """Lagrangian on ``T SE(3) x (R^4)*``; ``g_dot = (R_dot, y_dot)``.

    Body velocities are recovered as ``Omega^ = R^T R_dot`` and ``v = R^T y_dot``
    and the advected parameter enters as ``g^T a``.
    """
    R_dot, y_dot = g_dot
    omega = geo.vee(g.R.T @ R_dot)
    v = g.R.T @ y_dot
    gTa = g.matrix().T @ a.array()
    mass_vec = np.append(params.m * params.l * params.chi_vec, params.m_bar)
    return float(kinetic_energy(omega, v, params) - params.grav * mass_vec @ gTa)


def original_lagrangian(g: GroupElement, g_dot, params: SystemParams) -> float:
    R_dot, y_dot = g_dot
    omega = geo.vee(g.R.T @ R_dot)
    v = g.R.T @ y_dot
    return float(
        kinetic_energy(omega, v, params)
        - params.mgl * params.chi_vec @ (g.R.T @ geo.E3)
        - params.m_bar * params.grav * g.y @ geo.E3
    )


def ep_rhs(state: ReducedState, u, params: SystemParams) -> ReducedState:
    """Controlled Euler-Poincare equations with advected ``(Gamma, h)``.

    Momentum rates come from ``ad*`` plus the diamond term; the velocity rates
    solve ``G (Omega_dot, v_dot) = (mu_dot, p_dot)``.
    """
    omega = np.asarray(state.omega, dtype=float).copy()
    if params.degenerate:
        omega[2] = 0.0
    v = np.asarray(state.v, dtype=float)
    gamma = np.asarray(state.gamma, dtype=float)
    xi = AlgebraElement(omega, v)
    m = momenta(ReducedState(omega, v, gamma, state.h), params)
    dl_dgamma = Vector4(-params.mgl * params.chi_vec, -params.m_bar * params.grav)
    coad = geo.ad_star(xi, m)
    force = geo.diamond(dl_dgamma, Vector4(gamma, float(state.h)))
    mu_dot = coad.mu + force.mu
    p_dot = coad.p + force.p + np.asarray(u, dtype=float)

    G = metric_tensor(params)
    rates = np.linalg.solve(G, np.concatenate([mu_dot[: params.n_rot], p_dot]))
    omega_dot = np.zeros(3)
    omega_dot[: params.n_rot] = rates[: params.n_rot]
    adv = geo.lambda_prime_star(xi, Vector4(gamma, float(state.h)))
    return ReducedState(omega_dot, rates[params.n_rot :], adv.vec, adv.scalar)


def total_energy(state: ReducedState, params: SystemParams):
    """Energy of the uncontrolled system, ``K + g (m l chi.Gamma + m_bar h)``."""
    gamma = np.asarray(state.gamma, dtype=float)
    return kinetic_energy(state.omega, state.v, params) + params.grav * (
        params.m * params.l * gamma @ params.chi_vec + params.m_bar * np.asarray(state.h)
    )


def polar_project(R: np.ndarray, iters: int = 3) -> np.ndarray:
    """Orthogonal polar factor of a near-rotation by Newton iteration."""
    for _ in range(iters):
        R = 0.5 * (R + np.linalg.inv(R).T)
    return R


@dataclass
class Reconstruction:
    R: np.ndarray
    y: np.ndarray
    orthogonality_error: float = field(default=0.0)


def reconstruct(omega, v, g0: GroupElement, dt: float) -> Reconstruction:
    """Integrate ``g_dot = g xi`` along sampled body velocities.

    ``omega`` and ``v`` are ``(N, 3)`` samples on a uniform grid of spacing
    ``dt``; mid-step values use four-point cubic interpolation. ``R`` is
    projected back onto SO(3) after every step.
    """
    from ._backend import kernels

    omega = np.ascontiguousarray(omega, dtype=float)
    v = np.ascontiguousarray(v, dtype=float)
    R, y = kernels.reconstruct(omega, v, np.ascontiguousarray(g0.R, dtype=float),
                               np.ascontiguousarray(g0.y, dtype=float), float(dt))
    err = float(np.max(np.linalg.norm(np.einsum("nji,njk->nik", R, R) - np.eye(3), axis=(1, 2))))
    return Reconstruction(R, y, err)


def group_from_advected(gamma, h: float) -> GroupElement:
    """A configuration consistent with ``Gamma = R^T e3`` and ``h = y . e3``."""
    return GroupElement(geo.rotation_aligning(gamma), np.array([0.0, 0.0, float(h)]))
