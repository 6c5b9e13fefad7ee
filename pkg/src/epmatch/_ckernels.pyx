# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: vector fields, RK4 loops and group reconstruction.

Mirrors ``_pykernels`` operation for operation.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, isfinite

cnp.import_array()


cdef struct Block:
    int nr
    double inert[3][3]
    double A[3][3]
    double mglchi[3]
    double trans
    double grav
    double Sinv[3][3]


cdef struct Dense:
    int nr
    double inert[3][3]
    double A[3][3]
    double mglchi[3]
    double mbar
    double grav
    double up
    double kv
    double ext[3]
    double Minv[6][6]


cdef inline void cross(const double* a, const double* b, double* out) noexcept nogil:
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


cdef Block _block(c) except *:
    cdef Block b
    cdef int i, j
    b.nr = c.n_rot
    for i in range(3):
        b.mglchi[i] = c.mglchi[i]
        for j in range(3):
            b.inert[i][j] = c.inertia[i, j]
            b.A[i][j] = c.A[i, j]
            b.Sinv[i][j] = c.Sinv[i, j]
    b.trans = c.trans
    b.grav = c.grav
    return b


cdef Dense _dense(c) except *:
    cdef Dense d
    cdef int i, j, n
    d.nr = c.n_rot
    n = d.nr + 3
    for i in range(3):
        d.mglchi[i] = c.mglchi[i]
        for j in range(3):
            d.inert[i][j] = c.inertia[i, j]
            d.A[i][j] = c.A[i, j]
    for i in range(6):
        for j in range(6):
            d.Minv[i][j] = c.Minv[i, j] if (i < n and j < n) else 0.0
    d.mbar = c.mbar
    d.grav = c.grav
    d.up = c.up
    d.kv = c.kv
    d.ext[0] = d.ext[1] = d.ext[2] = 0.0
    return d


cdef void f_block(const Block* c, const double* x, double* dx) noexcept nogil:
    cdef double om[3]
    cdef double mu[3]
    cdef double p[3]
    cdef double t1[3]
    cdef double t2[3]
    cdef double t3[3]
    cdef double fmu[3]
    cdef double fp[3]
    cdef double r[3]
    cdef double omd[3]
    cdef int i, j
    cdef int nr = c.nr
    cdef const double* v = x + 3
    cdef const double* g = x + 6
    for i in range(3):
        om[i] = x[i] if i < nr else 0.0
    for i in range(3):
        mu[i] = 0.0
        p[i] = c.trans * v[i]
        for j in range(3):
            mu[i] += c.inert[i][j] * om[j] + c.A[i][j] * v[j]
            p[i] += c.A[j][i] * om[j]
    cross(mu, om, t1)
    cross(p, v, t2)
    cross(c.mglchi, g, t3)
    for i in range(3):
        fmu[i] = t1[i] + t2[i] - t3[i]
    cross(p, om, t1)
    for i in range(3):
        fp[i] = t1[i] - c.grav * g[i]
    for i in range(3):
        r[i] = fmu[i]
        for j in range(3):
            r[i] -= c.A[i][j] * fp[j] / c.trans
    for i in range(3):
        omd[i] = 0.0
        if i < nr:
            for j in range(nr):
                omd[i] += c.Sinv[i][j] * r[j]
    for i in range(3):
        dx[i] = omd[i]
        dx[3 + i] = fp[i]
        for j in range(3):
            dx[3 + i] -= c.A[j][i] * omd[j]
        dx[3 + i] /= c.trans
    cross(g, om, t1)
    for i in range(3):
        dx[6 + i] = t1[i]
    dx[9] = v[0] * g[0] + v[1] * g[1] + v[2] * g[2]


cdef void f_dense(const Dense* c, const double* x, double* dx) noexcept nogil:
    cdef double om[3]
    cdef double mu[3]
    cdef double p[3]
    cdef double t1[3]
    cdef double t2[3]
    cdef double t3[3]
    cdef double f[6]
    cdef double rates[6]
    cdef int i, j
    cdef int nr = c.nr
    cdef int n = nr + 3
    cdef const double* v = x + 3
    cdef const double* g = x + 6
    for i in range(3):
        om[i] = x[i] if i < nr else 0.0
    for i in range(3):
        mu[i] = 0.0
        p[i] = c.mbar * v[i]
        for j in range(3):
            mu[i] += c.inert[i][j] * om[j] + c.A[i][j] * v[j]
            p[i] += c.A[j][i] * om[j]
    cross(mu, om, t1)
    cross(p, v, t2)
    cross(c.mglchi, g, t3)
    for i in range(nr):
        f[i] = t1[i] + t2[i] - t3[i]
    cross(p, om, t1)
    cross(v, om, t2)
    for i in range(3):
        f[nr + i] = t1[i] - c.grav * g[i] + c.up * g[i] + c.kv * t2[i] + c.ext[i]
    for i in range(n):
        rates[i] = 0.0
        for j in range(n):
            rates[i] += c.Minv[i][j] * f[j]
    for i in range(3):
        dx[i] = rates[i] if i < nr else 0.0
        dx[3 + i] = rates[nr + i]
    cross(g, om, t1)
    for i in range(3):
        dx[6 + i] = t1[i]
    dx[9] = v[0] * g[0] + v[1] * g[1] + v[2] * g[2]


ctypedef void (*field_t)(const void*, const double*, double*) noexcept nogil


cdef int _rk4(field_t f, const void* c, double* x, double dt) noexcept nogil:
    cdef double k1[10]
    cdef double k2[10]
    cdef double k3[10]
    cdef double k4[10]
    cdef double tmp[10]
    cdef int i
    f(c, x, k1)
    for i in range(10):
        tmp[i] = x[i] + 0.5 * dt * k1[i]
    f(c, tmp, k2)
    for i in range(10):
        tmp[i] = x[i] + 0.5 * dt * k2[i]
    f(c, tmp, k3)
    for i in range(10):
        tmp[i] = x[i] + dt * k3[i]
    f(c, tmp, k4)
    for i in range(10):
        x[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return 0


cdef object _integrate(field_t f, const void* c, x0, double dt, Py_ssize_t nsteps, bint renorm):
    out_arr = np.empty((nsteps + 1, 10))
    cdef double[:, ::1] out = out_arr
    cdef double x[10]
    cdef double nrm
    cdef Py_ssize_t n
    cdef Py_ssize_t bad = -1
    cdef int i
    for i in range(10):
        x[i] = x0[i]
        out[0, i] = x[i]
    with nogil:
        for n in range(nsteps):
            _rk4(f, c, x, dt)
            if renorm:
                nrm = sqrt(x[6] * x[6] + x[7] * x[7] + x[8] * x[8])
                x[6] /= nrm
                x[7] /= nrm
                x[8] /= nrm
            for i in range(10):
                if not isfinite(x[i]):
                    bad = n + 1
                out[n + 1, i] = x[i]
            if bad >= 0:
                break
    if bad >= 0:
        raise FloatingPointError(f"non-finite state at t={bad * dt:.17g}")
    return out_arr


def integrate_forced(x0, double dt, u_nodes, u_mid, c):
    """RK4 of the dense field with a sampled external base force.

    ``u_nodes`` holds the force at the grid points and ``u_mid`` at the
    interval midpoints (used for the two middle stages).
    """
    cdef Dense d = _dense(c)
    cdef double[:, ::1] un = np.ascontiguousarray(u_nodes, dtype=float)
    cdef double[:, ::1] um = np.ascontiguousarray(u_mid, dtype=float)
    cdef Py_ssize_t nsteps = un.shape[0] - 1
    if um.shape[0] != nsteps:
        raise ValueError("need one midpoint force per step")
    out_arr = np.empty((nsteps + 1, 10))
    cdef double[:, ::1] out = out_arr
    cdef double x[10]
    cdef double k1[10]
    cdef double k2[10]
    cdef double k3[10]
    cdef double k4[10]
    cdef double tmp[10]
    cdef Py_ssize_t n
    cdef Py_ssize_t bad = -1
    cdef int i
    for i in range(10):
        x[i] = x0[i]
        out[0, i] = x[i]
    with nogil:
        for n in range(nsteps):
            for i in range(3):
                d.ext[i] = un[n, i]
            f_dense(&d, x, k1)
            for i in range(3):
                d.ext[i] = um[n, i]
            for i in range(10):
                tmp[i] = x[i] + 0.5 * dt * k1[i]
            f_dense(&d, tmp, k2)
            for i in range(10):
                tmp[i] = x[i] + 0.5 * dt * k2[i]
            f_dense(&d, tmp, k3)
            for i in range(3):
                d.ext[i] = un[n + 1, i]
            for i in range(10):
                tmp[i] = x[i] + dt * k3[i]
            f_dense(&d, tmp, k4)
            for i in range(10):
                x[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not isfinite(x[i]):
                    bad = n + 1
                out[n + 1, i] = x[i]
            if bad >= 0:
                break
    if bad >= 0:
        raise FloatingPointError(f"non-finite state at t={bad * dt:.17g}")
    return out_arr


def rhs_block(x, c):
    cdef Block b = _block(c)
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        return np.stack([rhs_block(row, c) for row in x.reshape(-1, 10)]).reshape(x.shape)
    cdef double xi[10]
    cdef double dx[10]
    cdef int i
    for i in range(10):
        xi[i] = x[i]
    f_block(&b, xi, dx)
    return np.array([dx[i] for i in range(10)])


def rhs_dense(x, c):
    cdef Dense d = _dense(c)
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        return np.stack([rhs_dense(row, c) for row in x.reshape(-1, 10)]).reshape(x.shape)
    cdef double xi[10]
    cdef double dx[10]
    cdef int i
    for i in range(10):
        xi[i] = x[i]
    f_dense(&d, xi, dx)
    return np.array([dx[i] for i in range(10)])


def integrate_block(x0, double dt, Py_ssize_t nsteps, c, bint renorm=False):
    cdef Block b = _block(c)
    return _integrate(<field_t>f_block, &b, np.asarray(x0, dtype=float), dt, nsteps, renorm)


def integrate_dense(x0, double dt, Py_ssize_t nsteps, c, bint renorm=False):
    cdef Dense d = _dense(c)
    return _integrate(<field_t>f_dense, &d, np.asarray(x0, dtype=float), dt, nsteps, renorm)


cdef inline void matmul3(const double* a, const double* b, double* out) noexcept nogil:
    cdef int i, j, k
    for i in range(3):
        for j in range(3):
            out[3 * i + j] = 0.0
            for k in range(3):
                out[3 * i + j] += a[3 * i + k] * b[3 * k + j]


cdef inline void hat3(const double* w, double* out) noexcept nogil:
    out[0] = 0.0
    out[1] = -w[2]
    out[2] = w[1]
    out[3] = w[2]
    out[4] = 0.0
    out[5] = -w[0]
    out[6] = -w[1]
    out[7] = w[0]
    out[8] = 0.0


cdef inline void polar3(double* R) noexcept nogil:
    # Newton iteration R <- (R + R^{-T}) / 2; R^{-T} = cofactor(R) / det(R)
    cdef double C[9]
    cdef double det
    cdef int it, i
    for it in range(3):
        C[0] = R[4] * R[8] - R[5] * R[7]
        C[1] = R[5] * R[6] - R[3] * R[8]
        C[2] = R[3] * R[7] - R[4] * R[6]
        C[3] = R[2] * R[7] - R[1] * R[8]
        C[4] = R[0] * R[8] - R[2] * R[6]
        C[5] = R[1] * R[6] - R[0] * R[7]
        C[6] = R[1] * R[5] - R[2] * R[4]
        C[7] = R[2] * R[3] - R[0] * R[5]
        C[8] = R[0] * R[4] - R[1] * R[3]
        det = R[0] * C[0] + R[1] * C[1] + R[2] * C[2]
        for i in range(9):
            R[i] = 0.5 * (R[i] + C[i] / det)


cdef inline void matvec3(const double* a, const double* x, double* out) noexcept nogil:
    cdef int i
    for i in range(3):
        out[i] = a[3 * i] * x[0] + a[3 * i + 1] * x[1] + a[3 * i + 2] * x[2]


def reconstruct(omega_in, v_in, R0, y0, double dt):
    from ._pykernels import _midpoints

    cdef double[:, ::1] omega = np.ascontiguousarray(omega_in, dtype=float)
    cdef double[:, ::1] v = np.ascontiguousarray(v_in, dtype=float)
    cdef double[:, ::1] om_mid = np.ascontiguousarray(_midpoints(np.asarray(omega_in, dtype=float)))
    cdef double[:, ::1] v_mid = np.ascontiguousarray(_midpoints(np.asarray(v_in, dtype=float)))
    cdef Py_ssize_t n = omega.shape[0]
    Rs_arr = np.empty((n, 3, 3))
    ys_arr = np.empty((n, 3))
    cdef double[:, :, ::1] Rs = Rs_arr
    cdef double[:, ::1] ys = ys_arr
    cdef double R[9]
    cdef double y[3]
    cdef double W1[9]
    cdef double Wm[9]
    cdef double W2[9]
    cdef double kR1[9]
    cdef double kR2[9]
    cdef double kR3[9]
    cdef double kR4[9]
    cdef double Rt[9]
    cdef double ky1[3]
    cdef double ky2[3]
    cdef double ky3[3]
    cdef double ky4[3]
    cdef double w[3]
    cdef Py_ssize_t s
    cdef int i, j
    R0a = np.asarray(R0, dtype=float)
    for i in range(3):
        y[i] = y0[i]
        ys[0, i] = y[i]
        for j in range(3):
            R[3 * i + j] = R0a[i, j]
            Rs[0, i, j] = R[3 * i + j]
    with nogil:
        for s in range(n - 1):
            for i in range(3):
                w[i] = omega[s, i]
            hat3(w, W1)
            for i in range(3):
                w[i] = om_mid[s, i]
            hat3(w, Wm)
            for i in range(3):
                w[i] = omega[s + 1, i]
            hat3(w, W2)

            matmul3(R, W1, kR1)
            for i in range(3):
                w[i] = v[s, i]
            matvec3(R, w, ky1)

            for i in range(9):
                Rt[i] = R[i] + 0.5 * dt * kR1[i]
            matmul3(Rt, Wm, kR2)
            for i in range(3):
                w[i] = v_mid[s, i]
            matvec3(Rt, w, ky2)

            for i in range(9):
                Rt[i] = R[i] + 0.5 * dt * kR2[i]
            matmul3(Rt, Wm, kR3)
            matvec3(Rt, w, ky3)

            for i in range(9):
                Rt[i] = R[i] + dt * kR3[i]
            matmul3(Rt, W2, kR4)
            for i in range(3):
                w[i] = v[s + 1, i]
            matvec3(Rt, w, ky4)

            for i in range(9):
                R[i] = R[i] + dt / 6.0 * (kR1[i] + 2.0 * kR2[i] + 2.0 * kR3[i] + kR4[i])
            polar3(R)
            for i in range(3):
                y[i] = y[i] + dt / 6.0 * (ky1[i] + 2.0 * ky2[i] + 2.0 * ky3[i] + ky4[i])
                ys[s + 1, i] = y[i]
                for j in range(3):
                    Rs[s + 1, i, j] = R[3 * i + j]
    return Rs_arr, ys_arr
