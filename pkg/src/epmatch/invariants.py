"""Conserved quantities, Lie-Poisson brackets and the energy-Casimir test.

The energy-Casimir function is

    E = E0 + c * E_aux + Phi(C1, C2, C3) + phi(Omega_3)

where ``Phi`` and ``phi`` are known only through their 2-jets at the
equilibrium. Hessians are taken in the coordinates ``(Omega_active, v, Gamma)``
without imposing ``|Gamma| = 1``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ReducedState, SystemParams
from .matching import ShapingGains, controlled_kinetic, controlled_momenta, solve_matching

# central-difference step balancing truncation and roundoff
GRADIENT_STEP = float(np.finfo(float).eps ** (1 / 3))
HESSIAN_STEP = 1e-4
MINOR_THRESHOLD = 1e-10


@dataclass(frozen=True)
class Equilibrium:
    omega: np.ndarray
    v: np.ndarray
    gamma: np.ndarray
    omega3_0: float = 0.0

    @classmethod
    def upright(cls, omega3_0: float = 0.0) -> "Equilibrium":
        """Upright (possibly spinning) top on a stationary base."""
        return cls(np.array([0.0, 0.0, omega3_0]), np.zeros(3), np.array([0.0, 0.0, 1.0]), omega3_0)

    def state(self) -> ReducedState:
        return ReducedState(self.omega, self.v, self.gamma, 0.0)


@dataclass
class EnergyCasimirJet:
    """2-jet of ``Phi`` at the equilibrium Casimir values, plus ``phi'`` and ``phi''``."""

    c: float
    D: np.ndarray
    DD: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    phi1: float = 0.0
    phi2: float = 0.0
    casimir_values: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    gradient_norm: float = float("nan")


def energy_controlled(state: ReducedState, gains: ShapingGains, params: SystemParams):
    """Energy of the controlled Lagrangian, ``K_c + g m l chi . Gamma``."""
    gamma = np.asarray(state.gamma, dtype=float)
    return controlled_kinetic(state.omega, state.v, gains, params) + params.mgl * gamma @ params.chi_vec


def _check_symmetric_top(params: SystemParams) -> None:
    if params.chi != (0.0, 0.0, 1.0) or params.inertia[0] != params.inertia[1]:
        raise ValueError("auxiliary invariant needs I1 == I2 and chi == e3")


def modified_gravity_factor(rho: float, params: SystemParams) -> float:
    """Factor ``I1 rho / (I1 rho - m^2 l^2)`` multiplying g in the auxiliary energy.

    For the pendulum (``I1 = m l^2``) this is ``rho / (rho - m)``.
    """
    _check_symmetric_top(params)
    I1 = params.inertia[0]
    ml2 = (params.m * params.l) ** 2
    if params.degenerate:
        den = rho - params.m
        num = rho
    else:
        den = I1 * rho - ml2
        num = I1 * rho
    if den == 0.0:
        raise ValueError("modified gravity is singular for this rho")
    return num / den


def aux_invariant(state: ReducedState, gains: ShapingGains, params: SystemParams):
    """Energy of the top alone under the modified gravitational constant."""
    f = modified_gravity_factor(gains.rho, params)
    omega = np.asarray(state.omega, dtype=float)
    gamma = np.asarray(state.gamma, dtype=float)
    I1, _, I3 = params.inertia
    kin = 0.5 * (I1 * (omega[..., 0] ** 2 + omega[..., 1] ** 2))
    if not params.degenerate:
        kin = kin + 0.5 * I3 * omega[..., 2] ** 2
    return kin + params.m * f * params.grav * params.l * gamma[..., 2]


def casimirs(state: ReducedState, gains: ShapingGains, params: SystemParams):
    """``(|p_c|^2, p_c . Gamma, |Gamma|^2)`` with ``p_c = dl_c/dv``."""
    _, p = controlled_momenta(state.omega, state.v, gains, params)
    gamma = np.asarray(state.gamma, dtype=float)
    return (np.sum(p * p, axis=-1), np.sum(p * gamma, axis=-1), np.sum(gamma * gamma, axis=-1))


def omega3(state: ReducedState):
    return np.asarray(state.omega, dtype=float)[..., 2]


# Lie-Poisson brackets -------------------------------------------------------

def numeric_gradient(f, x, step: float = GRADIENT_STEP) -> np.ndarray:
    """Central-difference gradient."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2.0 * step)
    return g


def lie_poisson_bracket(F, G, point, variant: str = "r3", grad_F=None, grad_G=None,
                        step: float = GRADIENT_STEP) -> float:
    """(-) Lie-Poisson bracket on (se(3) x| R^4)* or (se(3) x| R^3)*.

    ``point`` is ``(mu, p, Gamma, h)`` (length 10, ``variant="r4"``) or
    ``(mu, p, Gamma)`` (length 9, ``variant="r3"``). Gradients are computed by
    central differences unless supplied as callables.
    """
    z = np.asarray(point, dtype=float)
    size = {"r4": 10, "r3": 9}[variant]
    if z.size != size:
        raise ValueError(f"{variant} bracket needs a point of length {size}")
    dF = grad_F(z) if grad_F is not None else numeric_gradient(F, z, step)
    dG = grad_G(z) if grad_G is not None else numeric_gradient(G, z, step)
    mu, p, gam = z[0:3], z[3:6], z[6:9]
    Fm, Fp, Fg = dF[0:3], dF[3:6], dF[6:9]
    Gm, Gp, Gg = dG[0:3], dG[3:6], dG[6:9]
    val = -mu @ np.cross(Fm, Gm)
    val -= p @ (np.cross(Fm, Gp) - np.cross(Gm, Fp))
    inner = np.cross(Fm, Gg) - np.cross(Gm, Fg)
    if variant == "r4":
        inner = inner + dG[9] * Fp - dF[9] * Gp
    val -= gam @ inner
    return float(val)


def lie_poisson_casimirs(variant: str = "r3"):
    """Casimir functions of the bracket as ``(C, grad_C)`` pairs of callables."""
    p = slice(3, 6)
    g = slice(6, 9)

    def grad(n, **parts):
        def fn(z):
            out = np.zeros(n)
            for key, f in parts.items():
                out[{"p": p, "g": g}[key]] = f(z)
            return out
        return fn

    if variant == "r3":
        return [
            (lambda z: z[p] @ z[p], grad(9, p=lambda z: 2 * z[p])),
            (lambda z: z[p] @ z[g], grad(9, p=lambda z: z[g], g=lambda z: z[p])),
            (lambda z: z[g] @ z[g], grad(9, g=lambda z: 2 * z[g])),
        ]

    def pxg(z):
        return np.cross(z[p], z[g])

    return [
        (lambda z: z[g] @ z[g], grad(10, g=lambda z: 2 * z[g])),
        (lambda z: pxg(z) @ pxg(z),
         grad(10, p=lambda z: 2 * np.cross(z[g], pxg(z)), g=lambda z: -2 * np.cross(z[p], pxg(z)))),
    ]


# energy-Casimir analysis ----------------------------------------------------

def _to_state(x, eq: Equilibrium, params: SystemParams) -> ReducedState:
    x = np.asarray(x, dtype=float)
    nr = params.n_rot
    omega = np.zeros(x.shape[:-1] + (3,))
    omega[..., :nr] = x[..., :nr]
    return ReducedState(omega, x[..., nr:nr + 3], x[..., nr + 3:nr + 6], 0.0)


def _from_state(state: ReducedState, params: SystemParams) -> np.ndarray:
    nr = params.n_rot
    return np.concatenate([np.asarray(state.omega)[:nr], state.v, state.gamma])


def energy_casimir(state: ReducedState, jet: EnergyCasimirJet, eq: Equilibrium,
                   gains: ShapingGains, params: SystemParams):
    """Candidate Lyapunov function built from the 2-jets of ``Phi`` and ``phi``."""
    e = energy_controlled(state, gains, params) + jet.c * aux_invariant(state, gains, params)
    C = np.stack(casimirs(state, gains, params), axis=-1) - jet.casimir_values
    e = e + C @ jet.D + 0.5 * np.einsum("...i,ij,...j->...", C, jet.DD, C)
    if not params.degenerate:
        w = omega3(state) - eq.omega3_0
        e = e + jet.phi1 * w + 0.5 * jet.phi2 * w * w
    return e


def equilibrium_coordinates(eq: Equilibrium, params: SystemParams) -> np.ndarray:
    return _from_state(eq.state(), params)


def energy_casimir_gradient(eq: Equilibrium, jet: EnergyCasimirJet, gains: ShapingGains,
                            params: SystemParams, step: float = GRADIENT_STEP) -> np.ndarray:
    f = lambda x: float(energy_casimir(_to_state(x, eq, params), jet, eq, gains, params))
    return numeric_gradient(f, equilibrium_coordinates(eq, params), step)


def first_variation_solve(eq: Equilibrium, c: float, gains: ShapingGains,
                          params: SystemParams) -> EnergyCasimirJet:
    """Jet making the first variation of E vanish at an upright equilibrium.

    ``D2 Phi = 0``, ``D3 Phi`` cancels the vertical gravity terms and
    ``phi'(Omega3_0) = -(1 + c) I3 Omega3_0``. Remaining jet entries are the
    zero choices that make the Hessian test sufficient. The numeric gradient
    norm of E at the equilibrium is stored on the result.
    """
    modified_gravity_factor(gains.rho, params)  # raises on a singular rho
    mgl = params.mgl
    # -(mgl + c m f g l) / 2, written in the factored closed form
    if params.degenerate:
        rho, m = gains.rho, params.m
        d3 = (m - (c + 1.0) * rho) * mgl / (2.0 * (rho - m))
    else:
        ml2 = (params.m * params.l) ** 2
        I1 = params.inertia[0]
        d3 = (ml2 - (1.0 + c) * I1 * gains.rho) * mgl / (2.0 * (I1 * gains.rho - ml2))
    phi1 = 0.0 if params.degenerate else -(1.0 + c) * params.inertia[2] * eq.omega3_0
    C_eq = np.array([np.asarray(x, dtype=float) for x in casimirs(eq.state(), gains, params)])
    jet = EnergyCasimirJet(c=float(c), D=np.array([0.0, 0.0, d3]), phi1=phi1, casimir_values=C_eq)
    jet.gradient_norm = float(np.linalg.norm(energy_casimir_gradient(eq, jet, gains, params)))
    return jet


@dataclass
class Definiteness:
    hessian: np.ndarray
    positive_definite: bool
    minors: np.ndarray
    eigenvalues: np.ndarray
    constrained_eigenvalues: np.ndarray


def numeric_hessian(f, x, step: float = HESSIAN_STEP, batched: bool = False) -> np.ndarray:
    """Central second differences.

    With ``batched=True`` ``f`` maps an ``(N, n)`` array of points to ``N`` values
    and the whole stencil is evaluated in one call.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    E = np.eye(n) * step
    iu, ju = np.triu_indices(n, 1)
    pts = np.concatenate([
        x[None],
        x + E, x - E,
        x + E[iu] + E[ju], x + E[iu] - E[ju], x - E[iu] + E[ju], x - E[iu] - E[ju],
    ])
    vals = np.asarray(f(pts) if batched else [f(q) for q in pts], dtype=float)
    f0 = vals[0]
    fp, fm = vals[1:n + 1], vals[n + 1:2 * n + 1]
    q = np.split(vals[2 * n + 1:], 4)
    H = np.empty((n, n))
    H[np.diag_indices(n)] = (fp - 2.0 * f0 + fm) / step**2
    H[iu, ju] = H[ju, iu] = (q[0] - q[1] - q[2] + q[3]) / (4.0 * step**2)
    return H


def leading_minors(H: np.ndarray) -> np.ndarray:
    return np.array([np.linalg.det(H[:k, :k]) for k in range(1, H.shape[0] + 1)])


def hessian_definiteness(eq: Equilibrium, jet: EnergyCasimirJet, gains: ShapingGains,
                         params: SystemParams, step: float = HESSIAN_STEP,
                         threshold: float = MINOR_THRESHOLD) -> Definiteness:
    """Numeric Hessian of E at the equilibrium and Sylvester's criterion.

    Minors are evaluated on the unit-diagonal rescaling ``D^-1/2 H D^-1/2``,
    which preserves their signs and makes ``threshold`` independent of the
    physical units. A non-positive diagonal entry means not definite.
    ``constrained_eigenvalues`` restricts the Hessian to the tangent space of
    ``|Gamma| = 1`` at the equilibrium (auxiliary output).
    """
    f = lambda x: energy_casimir(_to_state(x, eq, params), jet, eq, gains, params)
    x0 = equilibrium_coordinates(eq, params)
    H = numeric_hessian(f, x0, step, batched=True)
    diag = np.diag(H)
    if np.all(diag > 0):
        d = 1.0 / np.sqrt(diag)
        minors = leading_minors(H * np.outer(d, d))
    else:
        minors = np.full(H.shape[0], -np.inf)
    n = H.shape[0]
    normal = np.zeros(n)
    normal[n - 3:] = eq.gamma / np.linalg.norm(eq.gamma)
    # orthonormal basis of the complement of the Gamma-normal direction
    basis = np.linalg.svd(np.eye(n) - np.outer(normal, normal))[0][:, : n - 1]
    constrained = np.linalg.eigvalsh(basis.T @ H @ basis)
    return Definiteness(H, bool(np.all(minors > threshold)), minors, np.linalg.eigvalsh(H), constrained)


def predicted_interval(params: SystemParams, c: float) -> tuple[float, float]:
    """Sufficient-condition interval for rho (empty when ``c <= 0``)."""
    top = params.m if params.degenerate else (params.m * params.l) ** 2 / params.inertia[0]
    if c <= 0:
        return (top, top)
    return (top / (1.0 + c), top)


def default_grids(params: SystemParams, n: int = 20):
    """``n x n`` grids: rho across twice the predicted upper edge, c log-spaced.

    The rho grid avoids the singular value itself.
    """
    top = predicted_interval(params, 1.0)[1]
    return top * np.linspace(0.1, 1.9, n), np.logspace(-2, 3, n)


@dataclass(frozen=True)
class StabilityPoint:
    rho: float
    c: float
    definite: bool
    predicted: bool
    boundary_distance: float


def _scan_point(params: SystemParams, rho: float, c: float, omega3_0: float) -> StabilityPoint:
    lo, hi = predicted_interval(params, c)
    predicted = bool(lo < rho < hi)
    dist = min(abs(rho - lo), abs(rho - hi)) if c > 0 else float("inf")
    eq = Equilibrium.upright(0.0 if params.degenerate else omega3_0)
    gains = solve_matching(params, rho)
    jet = first_variation_solve(eq, c, gains, params)
    res = hessian_definiteness(eq, jet, gains, params)
    return StabilityPoint(float(rho), float(c), res.positive_definite, predicted, dist)


def scan_threads() -> int:
    try:
        return max(1, int(os.environ.get("EPMATCH_THREADS", "1")))
    except ValueError:
        return 1


def stability_region(params: SystemParams, c_grid, rho_grid, omega3_0: float = 0.0,
                     threads: int | None = None) -> list[StabilityPoint]:
    """Hessian definiteness over a (rho, c) grid, alongside the predicted verdict."""
    jobs = [(float(r), float(c)) for r in rho_grid for c in c_grid]
    threads = threads or scan_threads()
    run = lambda rc: _scan_point(params, rc[0], rc[1], omega3_0)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, jobs))
    return [run(rc) for rc in jobs]


def lyapunov_bound(x0_state: ReducedState, eq: Equilibrium, jet: EnergyCasimirJet,
                   definiteness: Definiteness, gains: ShapingGains, params: SystemParams) -> float:
    """Radius of a ball containing the level set of E through ``x0_state``.

    E is quadratic in the state, so ``E - E_eq = dx^T H dx / 2 >= lambda_min |dx|^2 / 2``.
    """
    level = float(energy_casimir(x0_state, jet, eq, gains, params)
                  - energy_casimir(eq.state(), jet, eq, gains, params))
    lam = float(definiteness.eigenvalues[0])
    if lam <= 0:
        raise ValueError("Hessian is not positive definite")
    return float(np.sqrt(2.0 * level / lam))
