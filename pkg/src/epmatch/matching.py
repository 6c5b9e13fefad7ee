"""Controlled Lagrangian, matching conditions and the shaping controls.

Index conventions follow the kinetic metric blocks: ``G_ab`` is translational
(``m_bar I``), ``G_a_alpha`` couples translation rows to rotation columns and
``tau`` has shape ``(3, n_rot)``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .dynamics import ReducedState, SystemParams, kinetic_energy, _full_metric, _restrict


@dataclass(frozen=True)
class ShapingGains:
    rho: float
    k: float
    rho_mat: np.ndarray
    tau: np.ndarray
    sigma_inv: np.ndarray
    sigma: np.ndarray | None
    kinetic_shaping: bool = True

    def with_tau(self, tau) -> "ShapingGains":
        return dataclasses.replace(self, tau=np.asarray(tau, dtype=float))


def _blocks(params: SystemParams):
    """``(G_ab, G_a_alpha)`` with the rotation columns restricted to active ones."""
    G_ab = params.m_bar * np.eye(3)
    G_a_alpha = (-params.coupling)[:, : params.n_rot]
    return G_ab, G_a_alpha


def solve_matching(params: SystemParams, rho: float) -> ShapingGains:
    """Gains satisfying MC1-MC3 for a scalar kinetic-shaping parameter ``rho``.

    ``rho == m_bar`` gives ``k = 0`` (no kinetic shaping); the returned gains
    are flagged with ``kinetic_shaping=False`` and ``sigma`` is ``None``.
    """
    rho = float(rho)
    if rho == 0.0 or not np.isfinite(rho):
        raise ValueError(f"invalid rho={rho!r}: must be finite and non-zero")
    if abs(rho - params.m_bar) <= 4 * np.finfo(float).eps * params.m_bar:
        rho = params.m_bar  # absorb rounding in m + M
    G_ab, G_a_alpha = _blocks(params)
    k = rho - params.m_bar
    rho_mat = G_ab + k * np.eye(3)
    G_inv = np.linalg.inv(G_ab)
    rho_inv = np.linalg.inv(rho_mat)
    tau = (rho_inv - G_inv) @ G_a_alpha
    sigma_inv = G_inv - rho_inv
    if k == 0.0:
        return ShapingGains(rho, 0.0, rho_mat, tau, sigma_inv, None, kinetic_shaping=False)
    return ShapingGains(rho, k, rho_mat, tau, sigma_inv, np.linalg.inv(sigma_inv))


def matching_residuals(params: SystemParams, gains: ShapingGains) -> dict:
    """Residual norms of MC1, MC2, MC3 and of ``Delta_a_alpha``."""
    G_ab, G_a_alpha = _blocks(params)
    G_inv = np.linalg.inv(G_ab)
    eye = np.eye(3)
    mc1 = np.linalg.norm(gains.rho_mat - G_ab - gains.k * eye)
    mc2 = np.linalg.norm(gains.tau - (np.linalg.inv(gains.rho_mat) - G_inv) @ G_a_alpha)
    if gains.sigma is None:
        # k == 0: tau vanishes and the sigma term drops out of K_{tau,sigma,rho}
        mc3 = np.linalg.norm(gains.tau)
    else:
        mc3 = np.linalg.norm(gains.sigma @ gains.tau + G_a_alpha)
    delta = np.linalg.norm(gains.rho_mat @ (G_inv @ G_a_alpha + gains.tau) - G_a_alpha)
    return {"MC1": float(mc1), "MC2": float(mc2), "MC3": float(mc3), "Delta": float(delta)}


def _active(omega, params):
    omega = np.asarray(omega, dtype=float)
    return omega[..., : params.n_rot]


def controlled_kinetic(omega, v, gains: ShapingGains, params: SystemParams):
    """Three-term kinetic energy of the controlled Lagrangian.

    ``K(Omega, v + tau Omega) + 1/2 sigma (tau Omega)(tau Omega)
    + 1/2 (rho - G)(v + (G^-1 G_a_alpha + tau) Omega)^2``.
    """
    G_ab, G_a_alpha = _blocks(params)
    omega = np.asarray(omega, dtype=float)
    v = np.asarray(v, dtype=float)
    om = _active(omega, params)
    shift = om @ gains.tau.T
    k1 = kinetic_energy(omega, v + shift, params)
    if gains.sigma is None:
        k2 = 0.0
    else:
        k2 = 0.5 * np.sum(shift * (shift @ gains.sigma.T), axis=-1)
    w = v + om @ (np.linalg.inv(G_ab) @ G_a_alpha + gains.tau).T
    k3 = 0.5 * np.sum(w * (w @ (gains.rho_mat - G_ab).T), axis=-1)
    return k1 + k2 + k3


def controlled_metric(gains: ShapingGains, params: SystemParams) -> np.ndarray:
    """Quadratic form of the controlled kinetic energy (``m_bar`` -> ``rho``).

    Not positive definite in general: for the stabilising choices of ``rho`` it
    is indefinite by construction.
    """
    G = _full_metric(params.inertia_matrix, params.coupling, gains.rho)
    return _restrict(G, params)


def is_controlled_metric_definite(gains: ShapingGains, params: SystemParams) -> bool:
    return bool(np.all(np.linalg.eigvalsh(controlled_metric(gains, params)) > 0))


def controlled_lagrangian(state: ReducedState, gains: ShapingGains, params: SystemParams):
    gamma = np.asarray(state.gamma, dtype=float)
    return controlled_kinetic(state.omega, state.v, gains, params) - params.mgl * gamma @ params.chi_vec


def controlled_momenta(omega, v, gains: ShapingGains, params: SystemParams):
    """``(dl_c/dOmega, dl_c/dv)``; equal to ``(mu, p + k v)``."""
    omega = np.asarray(omega, dtype=float)
    v = np.asarray(v, dtype=float)
    A = params.coupling
    mu = omega * np.asarray(params.inertia) + v @ A.T
    p = omega @ A + gains.rho * v
    return mu, p


def u_potential(gamma, params: SystemParams) -> np.ndarray:
    """Potential shaping: cancels the ``(dl/dh) Gamma`` force on the base."""
    return params.m_bar * params.grav * np.asarray(gamma, dtype=float)


def _solve_block(inertia, A, trans, f_mu, f_p, n_rot):
    """Solve ``[[I, A], [A^T, trans I]] (w, z) = (f_mu, f_p)`` by block elimination."""
    Ar = A[:n_rot]
    S = inertia[:n_rot, :n_rot] - Ar @ Ar.T / trans
    omega_dot = np.zeros(3)
    omega_dot[:n_rot] = np.linalg.solve(S, f_mu[:n_rot] - Ar @ f_p / trans)
    v_dot = (f_p - A.T @ omega_dot) / trans
    return omega_dot, v_dot


def closed_loop_rhs(state: ReducedState, gains: ShapingGains, params: SystemParams) -> ReducedState:
    """Free Euler-Poincare flow of the controlled Lagrangian on se(3) x R^3*.

    ``h`` is carried along by ``h_dot = v . Gamma`` for bookkeeping only.
    """
    omega = np.asarray(state.omega, dtype=float).copy()
    if params.degenerate:
        omega[2] = 0.0
    v = np.asarray(state.v, dtype=float)
    gamma = np.asarray(state.gamma, dtype=float)
    mu, p = controlled_momenta(omega, v, gains, params)
    xi = geo.AlgebraElement(omega, v)
    coad = geo.ad_star(xi, geo.DualAlgebraElement(mu, p))
    torque = np.cross(-params.mgl * params.chi_vec, gamma)
    omega_dot, v_dot = _solve_block(
        params.inertia_matrix, params.coupling, gains.rho, coad.mu + torque, coad.p, params.n_rot
    )
    return ReducedState(omega_dot, v_dot, np.cross(gamma, omega), float(v @ gamma))


def implicit_control_rhs(state: ReducedState, gains: ShapingGains, params: SystemParams) -> ReducedState:
    """Controlled system with the full law, ``v_dot`` moved into the mass matrix.

    Independent of :func:`closed_loop_rhs`: physical momenta, explicit
    ``u^p`` and a dense solve with ``G + k P_trans``.
    """
    omega = np.asarray(state.omega, dtype=float).copy()
    if params.degenerate:
        omega[2] = 0.0
    v = np.asarray(state.v, dtype=float)
    gamma = np.asarray(state.gamma, dtype=float)
    A = params.coupling
    mu = params.inertia_matrix @ omega + A @ v
    p = A.T @ omega + params.m_bar * v
    mu_dot = np.cross(mu, omega) + np.cross(p, v) - params.mgl * np.cross(params.chi_vec, gamma)
    gravity = -params.m_bar * params.grav * gamma
    p_dot = np.cross(p, omega) + gravity + u_potential(gamma, params) + gains.k * np.cross(v, omega)
    G = _full_metric(params.inertia_matrix, A, params.m_bar)
    G[3:, 3:] += gains.k * np.eye(3)
    G = _restrict(G, params)
    rates = np.linalg.solve(G, np.concatenate([mu_dot[: params.n_rot], p_dot]))
    omega_dot = np.zeros(3)
    omega_dot[: params.n_rot] = rates[: params.n_rot]
    return ReducedState(omega_dot, rates[params.n_rot :], np.cross(gamma, omega), float(v @ gamma))


def control_law(omega, v, gamma, v_dot, gains: ShapingGains, params: SystemParams):
    """Total control ``u = (m_bar - rho)(v_dot - v x Omega) + m_bar g Gamma``.

    Returns ``(u_kinetic, u)``; works on batches.
    """
    omega = np.asarray(omega, dtype=float)
    v = np.asarray(v, dtype=float)
    u_k = -gains.k * (np.asarray(v_dot, dtype=float) - np.cross(v, omega))
    return u_k, u_k + u_potential(gamma, params)


def u_kinetic_along(states, gains: ShapingGains, params: SystemParams):
    """Kinetic and total control along a closed-loop trajectory ``(N, 10)``."""
    from ._backend import batch_rhs_block
    from .integrate import block_coefficients

    states = np.asarray(states, dtype=float)
    coeffs = block_coefficients(params, gains.rho, 0.0)
    rates = batch_rhs_block(states, coeffs)
    return control_law(states[:, 0:3], states[:, 3:6], states[:, 6:9], rates[:, 3:6], gains, params)
