"""SE(3), se(3) and their actions on R^4 and its dual.

Duals are identified with primal spaces through the dot product, so a single
``Vector4`` type carries both ``w = (w, w~)`` and ``a = (a, a~)``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

E3 = np.array([0.0, 0.0, 1.0])


class GroupElement(NamedTuple):
    """Rigid motion ``(R, y)``, i.e. the 4x4 matrix ``[[R, y], [0, 1]]``."""

    R: np.ndarray
    y: np.ndarray

    @classmethod
    def identity(cls) -> "GroupElement":
        return cls(np.eye(3), np.zeros(3))

    def matrix(self) -> np.ndarray:
        g = np.eye(4)
        g[:3, :3] = self.R
        g[:3, 3] = self.y
        return g

    def check(self, tol: float = 1e-9) -> None:
        R = np.asarray(self.R)
        if np.linalg.norm(R.T @ R - np.eye(3)) > tol:
            raise ValueError("R is not orthogonal")
        if abs(np.linalg.det(R) - 1.0) > tol:
            raise ValueError("det R != 1")


class AlgebraElement(NamedTuple):
    """Element ``(Omega, v)`` of se(3): body angular and base velocity."""

    omega: np.ndarray
    v: np.ndarray

    def matrix(self) -> np.ndarray:
        xi = np.zeros((4, 4))
        xi[:3, :3] = hat(self.omega)
        xi[:3, 3] = self.v
        return xi


class DualAlgebraElement(NamedTuple):
    """Element ``(mu, p)`` of se(3)*: angular and linear momentum."""

    mu: np.ndarray
    p: np.ndarray


class Vector4(NamedTuple):
    """Element of R^4 (or its dual): 3-vector part and scalar part."""

    vec: np.ndarray
    scalar: float

    def array(self) -> np.ndarray:
        return np.append(self.vec, self.scalar)


def hat(u) -> np.ndarray:
    """Skew matrix with ``hat(u) @ w == cross(u, w)``."""
    u = np.asarray(u, dtype=float)
    return np.array([
        [0.0, -u[2], u[1]],
        [u[2], 0.0, -u[0]],
        [-u[1], u[0], 0.0],
    ])


def vee(S) -> np.ndarray:
    S = np.asarray(S)
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def group_mul(g1: GroupElement, g2: GroupElement) -> GroupElement:
    return GroupElement(g1.R @ g2.R, g1.R @ g2.y + g1.y)


def group_inv(g: GroupElement) -> GroupElement:
    Rt = g.R.T
    return GroupElement(Rt, -Rt @ g.y)


def act_on_r4(g: GroupElement, w: Vector4) -> Vector4:
    """Matrix-vector action ``g w = (R w + w~ y, w~)``."""
    return Vector4(g.R @ w.vec + w.scalar * g.y, w.scalar)


def dual_act_on_r4(g: GroupElement, a: Vector4) -> Vector4:
    """Dual action ``g^{-T} a = (R a, -y.R a + a~)``."""
    Ra = g.R @ a.vec
    return Vector4(Ra, -g.y @ Ra + a.scalar)


def pair4(a: Vector4, w: Vector4) -> float:
    return float(a.vec @ w.vec + a.scalar * w.scalar)


def pair_se3(m: DualAlgebraElement, xi: AlgebraElement) -> float:
    return float(m.mu @ xi.omega + m.p @ xi.v)


def lambda_prime(xi: AlgebraElement, w: Vector4) -> Vector4:
    """Infinitesimal action ``xi w = (Omega x w + w~ v, 0)``."""
    return Vector4(np.cross(xi.omega, w.vec) + w.scalar * xi.v, 0.0)


def lambda_prime_star(xi: AlgebraElement, a: Vector4) -> Vector4:
    """Dual infinitesimal action ``xi^T a = (a x Omega, v.a)``."""
    return Vector4(np.cross(a.vec, xi.omega), float(xi.v @ a.vec))


def diamond(w: Vector4, a: Vector4) -> DualAlgebraElement:
    """``w <> a = (w x a, w~ a)``, dual to ``xi -> xi w``."""
    return DualAlgebraElement(np.cross(w.vec, a.vec), w.scalar * np.asarray(a.vec, dtype=float))


def ad_star(xi: AlgebraElement, m: DualAlgebraElement) -> DualAlgebraElement:
    """Coadjoint term of the Euler-Poincare equations on se(3)*."""
    return DualAlgebraElement(
        np.cross(m.mu, xi.omega) + np.cross(m.p, xi.v),
        np.cross(m.p, xi.omega),
    )


def bracket_se3(x1: AlgebraElement, x2: AlgebraElement) -> AlgebraElement:
    return AlgebraElement(
        np.cross(x1.omega, x2.omega),
        np.cross(x1.omega, x2.v) - np.cross(x2.omega, x1.v),
    )


def bracket_semidirect(x1, x2):
    """Lie bracket on se(3) x| R^4 or, for 3-vector second slots, se(3) x| R^3.

    ``x1`` and ``x2`` are pairs ``(AlgebraElement, w)`` where ``w`` is a
    ``Vector4`` or a plain 3-vector.
    """
    xi1, w1 = x1
    xi2, w2 = x2
    top = bracket_se3(xi1, xi2)
    if isinstance(w1, Vector4):
        a = lambda_prime(xi1, w2)
        b = lambda_prime(xi2, w1)
        return top, Vector4(a.vec - b.vec, 0.0)
    w1 = np.asarray(w1, dtype=float)
    w2 = np.asarray(w2, dtype=float)
    return top, np.cross(xi1.omega, w2) - np.cross(xi2.omega, w1)


def so3_exp(omega) -> np.ndarray:
    """Rodrigues formula for ``expm(hat(omega))``."""
    omega = np.asarray(omega, dtype=float)
    theta = np.linalg.norm(omega)
    K = hat(omega)
    if theta < 1e-8:
        return np.eye(3) + K + 0.5 * K @ K
    return (
        np.eye(3)
        + np.sin(theta) / theta * K
        + (1.0 - np.cos(theta)) / theta**2 * K @ K
    )


def se3_exp(xi: AlgebraElement) -> GroupElement:
    """Closed-form exponential; translation via the left-Jacobian V matrix."""
    omega = np.asarray(xi.omega, dtype=float)
    theta = np.linalg.norm(omega)
    K = hat(omega)
    if theta < 1e-8:
        V = np.eye(3) + 0.5 * K + K @ K / 6.0
    else:
        V = (
            np.eye(3)
            + (1.0 - np.cos(theta)) / theta**2 * K
            + (theta - np.sin(theta)) / theta**3 * K @ K
        )
    return GroupElement(so3_exp(omega), V @ np.asarray(xi.v, dtype=float))


def rotation_aligning(gamma) -> np.ndarray:
    """A rotation R with ``R.T @ e3 == gamma`` (gamma a unit vector)."""
    gamma = np.asarray(gamma, dtype=float)
    gamma = gamma / np.linalg.norm(gamma)
    axis = np.cross(gamma, E3)
    s = np.linalg.norm(axis)
    c = float(gamma @ E3)
    if s < 1e-15:
        if c > 0:
            return np.eye(3)
        return np.diag([1.0, -1.0, -1.0])
    return so3_exp(axis / s * np.arctan2(s, c))
