"""Pure-Python kernels: vector fields, RK4 loops and group reconstruction.

Same interface as the compiled ``_ckernels`` module. The vector fields accept
states of shape ``(..., 10)``.
"""

import numpy as np


def _cross(a, b):
    return np.stack([
        a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
        a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
        a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
    ], axis=-1)


def _advection(omega, v, gamma):
    return _cross(gamma, omega), np.sum(v * gamma, axis=-1)


def rhs_block(x, c):
    """Vector field with translational block ``c.trans * I``, solved by Schur complement."""
    x = np.asarray(x, dtype=float)
    nr = c.n_rot
    omega = x[..., 0:3].copy()
    omega[..., nr:] = 0.0
    v = x[..., 3:6]
    gamma = x[..., 6:9]
    A = c.A
    mu = omega @ c.inertia.T + v @ A.T
    p = omega @ A + c.trans * v
    f_mu = _cross(mu, omega) + _cross(p, v) - _cross(c.mglchi, gamma)
    f_p = _cross(p, omega) - c.grav * gamma
    r = f_mu - f_p @ A.T / c.trans
    omega_dot = np.zeros_like(omega)
    omega_dot[..., :nr] = r[..., :nr] @ c.Sinv[:nr, :nr].T
    v_dot = (f_p - omega_dot @ A) / c.trans
    gamma_dot, h_dot = _advection(omega, v, gamma)
    return np.concatenate([omega_dot, v_dot, gamma_dot, h_dot[..., None]], axis=-1)


def rhs_dense(x, c, ext=None):
    """Vector field with physical momenta, explicit forces and a dense inverse mass matrix.

    ``ext`` is an optional extra force on the base.
    """
    x = np.asarray(x, dtype=float)
    nr = c.n_rot
    omega = x[..., 0:3].copy()
    omega[..., nr:] = 0.0
    v = x[..., 3:6]
    gamma = x[..., 6:9]
    A = c.A
    mu = omega @ c.inertia.T + v @ A.T
    p = omega @ A + c.mbar * v
    f_mu = _cross(mu, omega) + _cross(p, v) - _cross(c.mglchi, gamma)
    f_p = _cross(p, omega) - c.grav * gamma + c.up * gamma + c.kv * _cross(v, omega)
    if ext is not None:
        f_p = f_p + ext
    f = np.concatenate([f_mu[..., :nr], f_p], axis=-1)
    rates = f @ c.Minv.T
    omega_dot = np.zeros_like(omega)
    omega_dot[..., :nr] = rates[..., :nr]
    gamma_dot, h_dot = _advection(omega, v, gamma)
    return np.concatenate([omega_dot, rates[..., nr:], gamma_dot, h_dot[..., None]], axis=-1)


def _integrate(rhs, x0, dt, nsteps, c, renorm):
    out = np.empty((nsteps + 1, 10))
    x = np.array(x0, dtype=float)
    out[0] = x
    half = 0.5 * dt
    for n in range(nsteps):
        k1 = rhs(x, c)
        k2 = rhs(x + half * k1, c)
        k3 = rhs(x + half * k2, c)
        k4 = rhs(x + dt * k3, c)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if renorm:
            x[6:9] /= np.sqrt(x[6:9] @ x[6:9])
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"non-finite state at t={(n + 1) * dt:.17g}")
        out[n + 1] = x
    return out


def integrate_block(x0, dt, nsteps, c, renorm=False):
    return _integrate(rhs_block, x0, dt, nsteps, c, renorm)


def integrate_dense(x0, dt, nsteps, c, renorm=False):
    return _integrate(rhs_dense, x0, dt, nsteps, c, renorm)


def integrate_forced(x0, dt, u_nodes, u_mid, c):
    """RK4 of the dense field with a sampled external base force."""
    u_nodes = np.asarray(u_nodes, dtype=float)
    u_mid = np.asarray(u_mid, dtype=float)
    nsteps = u_nodes.shape[0] - 1
    if u_mid.shape[0] != nsteps:
        raise ValueError("need one midpoint force per step")
    out = np.empty((nsteps + 1, 10))
    x = np.array(x0, dtype=float)
    out[0] = x
    half = 0.5 * dt
    for n in range(nsteps):
        k1 = rhs_dense(x, c, u_nodes[n])
        k2 = rhs_dense(x + half * k1, c, u_mid[n])
        k3 = rhs_dense(x + half * k2, c, u_mid[n])
        k4 = rhs_dense(x + dt * k3, c, u_nodes[n + 1])
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"non-finite state at t={(n + 1) * dt:.17g}")
        out[n + 1] = x
    return out


def _lagrange_weights(nodes, x):
    nodes = np.asarray(nodes, dtype=float)
    w = np.ones(len(nodes))
    for j, xj in enumerate(nodes):
        for k, xk in enumerate(nodes):
            if k != j:
                w[j] *= (x - xk) / (xj - xk)
    return w


def midpoints6(f):
    """Six-point Lagrange interpolation at interval midpoints (one-sided near the ends)."""
    f = np.asarray(f, dtype=float)
    n = f.shape[0]
    if n < 6:
        return _midpoints(f)
    mid = np.empty((n - 1,) + f.shape[1:])
    inner = _lagrange_weights(range(6), 2.5)
    mid[2:n - 3] = sum(inner[j] * f[j:n - 5 + j] for j in range(6))
    for i in (0, 1, n - 3, n - 2):
        s = min(max(i - 2, 0), n - 6)
        mid[i] = np.tensordot(_lagrange_weights(range(s, s + 6), i + 0.5), f[s:s + 6], axes=1)
    return mid


def _midpoints(f):
    """Cubic (four-point) interpolation of samples at interval midpoints."""
    n = f.shape[0]
    if n < 4:
        return 0.5 * (f[:-1] + f[1:])
    mid = np.empty((n - 1,) + f.shape[1:])
    mid[1:-1] = (-f[:-3] + 9.0 * f[1:-2] + 9.0 * f[2:-1] - f[3:]) / 16.0
    mid[0] = (5.0 * f[0] + 15.0 * f[1] - 5.0 * f[2] + f[3]) / 16.0
    mid[-1] = (f[-4] - 5.0 * f[-3] + 15.0 * f[-2] + 5.0 * f[-1]) / 16.0
    return mid


def _hat(w):
    return np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])


def _polar(R):
    for _ in range(3):
        R = 0.5 * (R + np.linalg.inv(R).T)
    return R


def reconstruct(omega, v, R0, y0, dt):
    """RK4 for ``R_dot = R hat(Omega)``, ``y_dot = R v`` with polar projection."""
    n = omega.shape[0]
    Rs = np.empty((n, 3, 3))
    ys = np.empty((n, 3))
    R = np.array(R0, dtype=float)
    y = np.array(y0, dtype=float)
    Rs[0] = R
    ys[0] = y
    om_mid = _midpoints(omega)
    v_mid = _midpoints(v)
    for i in range(n - 1):
        W1, Wm, W2 = _hat(omega[i]), _hat(om_mid[i]), _hat(omega[i + 1])
        kR1 = R @ W1
        ky1 = R @ v[i]
        R2 = R + 0.5 * dt * kR1
        kR2 = R2 @ Wm
        ky2 = R2 @ v_mid[i]
        R3 = R + 0.5 * dt * kR2
        kR3 = R3 @ Wm
        ky3 = R3 @ v_mid[i]
        R4 = R + dt * kR3
        kR4 = R4 @ W2
        ky4 = R4 @ v[i + 1]
        R = _polar(R + dt / 6.0 * (kR1 + 2.0 * kR2 + 2.0 * kR3 + kR4))
        y = y + dt / 6.0 * (ky1 + 2.0 * ky2 + 2.0 * ky3 + ky4)
        Rs[i + 1] = R
        ys[i + 1] = y
    return Rs, ys
