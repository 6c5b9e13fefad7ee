"""RK4 time stepping and the coefficient packs handed to the kernels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from ._backend import kernels
from .dynamics import SystemParams, _full_metric, _restrict


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    t_end: float = 20.0
    renormalize_gamma: bool = False

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if not (self.t_end >= 0 and np.isfinite(self.t_end)):
            raise ValueError("t_end must be non-negative")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


class BlockCoeffs(NamedTuple):
    """Vector field with momentum ``A^T Omega + trans v`` and base force ``-grav Gamma``."""

    n_rot: int
    inertia: np.ndarray
    A: np.ndarray
    mglchi: np.ndarray
    trans: float
    grav: float
    Sinv: np.ndarray


class DenseCoeffs(NamedTuple):
    """Physical momenta; base force ``(up - grav) Gamma + kv v x Omega``; dense ``Minv``."""

    n_rot: int
    inertia: np.ndarray
    A: np.ndarray
    mglchi: np.ndarray
    mbar: float
    grav: float
    up: float
    kv: float
    Minv: np.ndarray


def block_coefficients(params: SystemParams, trans: float, grav: float) -> BlockCoeffs:
    """Coefficients for uncontrolled (``trans=m_bar, grav=m_bar g``), potential-only
    (``m_bar, 0``) or matched closed-loop (``rho, 0``) flows."""
    nr = params.n_rot
    A = params.coupling
    if params.degenerate:
        # I1 = m l^2, so the Schur complement factors as m l^2 (trans - m) / trans;
        # the factored form avoids the cancellation in I1 - (m l)^2 / trans
        S = params.m * params.l**2 * (trans - params.m) / trans * np.eye(2)
    else:
        S = params.inertia_matrix[:nr, :nr] - A[:nr] @ A[:nr].T / trans
    Sinv = np.zeros((3, 3))
    Sinv[:nr, :nr] = np.linalg.inv(S)
    return BlockCoeffs(nr, params.inertia_matrix, A, params.mgl * params.chi_vec,
                       float(trans), float(grav), Sinv)


def dense_coefficients(params: SystemParams, k: float = 0.0, up: float = 0.0) -> DenseCoeffs:
    """Coefficients for the controlled system with ``u = up Gamma + (kinetic shaping)``.

    The ``-k v_dot`` part of the kinetic control is moved to the left-hand side,
    so the mass matrix is ``G + k P_trans``.
    """
    M = _full_metric(params.inertia_matrix, params.coupling, params.m_bar)
    M[3:, 3:] += k * np.eye(3)
    M = _restrict(M, params)
    return DenseCoeffs(params.n_rot, params.inertia_matrix, params.coupling,
                       params.mgl * params.chi_vec, params.m_bar, params.m_bar * params.grav,
                       float(up), float(k), np.linalg.inv(M))


def rk4_step(rhs: Callable[[np.ndarray], np.ndarray], state, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step for an autonomous field."""
    x = np.asarray(state, dtype=float)
    k1 = rhs(x)
    k2 = rhs(x + 0.5 * dt * k1)
    k3 = rhs(x + 0.5 * dt * k2)
    k4 = rhs(x + dt * k3)
    out = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite state after RK4 step")
    return out


def integrate_field(rhs: Callable[[np.ndarray], np.ndarray], x0, config: IntegratorConfig) -> np.ndarray:
    """Generic (slow) RK4 loop for arbitrary Python vector fields."""
    n = config.n_steps
    out = np.empty((n + 1, np.size(x0)))
    out[0] = x = np.asarray(x0, dtype=float)
    for i in range(n):
        try:
            x = rk4_step(rhs, x, config.dt)
        except FloatingPointError:
            raise FloatingPointError(f"non-finite state at t={(i + 1) * config.dt:.17g}") from None
        if config.renormalize_gamma and x.size >= 9:
            x[6:9] /= np.linalg.norm(x[6:9])
        out[i + 1] = x
    return out


def integrate_block(x0, coeffs: BlockCoeffs, config: IntegratorConfig) -> np.ndarray:
    return kernels.integrate_block(np.asarray(x0, dtype=float), config.dt, config.n_steps,
                                   coeffs, config.renormalize_gamma)


def integrate_dense(x0, coeffs: DenseCoeffs, config: IntegratorConfig) -> np.ndarray:
    return kernels.integrate_dense(np.asarray(x0, dtype=float), config.dt, config.n_steps,
                                   coeffs, config.renormalize_gamma)


def integrate_forced(x0, coeffs: DenseCoeffs, dt: float, u_nodes, u_mid) -> np.ndarray:
    """RK4 with a sampled open-loop base force (nodes plus interval midpoints)."""
    return kernels.integrate_forced(np.asarray(x0, dtype=float), float(dt), u_nodes, u_mid, coeffs)
