"""Discrete energy, its exact gradient (the weak-form residual), and the
inner solver realizing the operators T and tilde-T.

The discrete energy is

    I(u) = omega * [ sum_k |d_k|^p M_k / p
                     + sum_i w_i (m |u_i|^p / p - F(u_i)) ],

with cell slopes d_k, exact cell masses M_k, and exact hat moments w_i.
The residual below is the exact partial gradient of this expression, so
finite differences of the energy reproduce it to rounding; no separate
consistency fudge is needed.

T(w) solves -Delta_p v + m |v|^(p-2) v = w with natural Neumann
conditions.  The discrete version is the unique minimizer of the strictly
convex  E_w(v) = ||v||^p / p - int w v,  computed by damped Newton with a
regularized Jacobian.  Only the Jacobian is smoothed: the gradient is kept
exact, so the computed solution does not depend on the regularization
parameter, which merely steers convergence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import solve_banded

from .errors import NonConvergence
from .grid import RadialFunction, RadialGrid, _values


@dataclass(frozen=True)
class InnerSolverConfig:
    """Knobs for the damped-Newton inner solver.

    eps_reg is the starting Jacobian smoothing of |u'|^(p-2); it is driven
    down geometrically to eps_min during the iteration (continuation).
    """

    eps_reg: float = 1.0e-2
    eps_min: float = 1.0e-9
    # the exact gradient carries O(eps_mach/h) rounding per node, which the
    # density norm turns into a ~1e-10..1e-9 floor at n ~ 2048; tolerances
    # below that floor cannot be met at fine resolutions
    newton_tol: float = 1.0e-9
    max_iter: int = 120
    backtrack_factor: float = 0.5
    max_backtracks: int = 40

    def __post_init__(self):
        if not (self.eps_reg >= self.eps_min > 0.0):
            raise ValueError("need eps_reg >= eps_min > 0")


@dataclass(frozen=True)
class EnergyReport:
    value: float
    residual_norm: float
    gradient_vector: NDArray[np.float64] = field(repr=False)


def energy(grid: RadialGrid, u, trunc) -> float:
    """I(u) for the truncated problem; exact on constant profiles."""
    v = _values(u)
    p, m = trunc.p, trunc.m
    d = np.diff(v) / grid.h
    grad_part = float(grid.cell_masses @ np.abs(d) ** p) / p
    bulk = float(grid.quad_weights @ (m * np.abs(v) ** p / p - trunc.F(v)))
    return grid.angular_factor * (grad_part + bulk)


def residual(grid: RadialGrid, u, trunc) -> NDArray[np.float64]:
    """Exact gradient of the discrete energy (weak-form residual)."""
    v = _values(u)
    p, m = trunc.p, trunc.m
    return _gradient(grid, v, p, m, trunc.f(v))


def _gradient(grid, v, p, m, forcing):
    """Gradient of omega*(sum |d|^p M/p + sum w m|v|^p/p) minus the forcing
    term omega * w_i * forcing_i."""
    d = np.diff(v) / grid.h
    flux = np.sign(d) * np.abs(d) ** (p - 1.0) * grid.cell_masses
    R = np.zeros_like(v)
    R[1:] += flux / grid.h
    R[:-1] -= flux / grid.h
    R += grid.quad_weights * (m * np.sign(v) * np.abs(v) ** (p - 1.0) - forcing)
    return grid.angular_factor * R


def residual_norm(grid: RadialGrid, gradient: NDArray[np.float64]) -> float:
    """L2(B) norm of the strong-form residual density.

    The gradient component R_i equals (density at node i) * omega * w_i, so
    the L2(B) norm of the density is sqrt(sum R_i^2 / (omega w_i)).  This is
    a documented surrogate for the W^(1,p') dual norm.
    """
    return float(np.sqrt(np.sum(gradient**2 / (grid.angular_factor * grid.quad_weights))))


def energy_report(grid: RadialGrid, u, trunc) -> EnergyReport:
    g = residual(grid, u, trunc)
    return EnergyReport(energy(grid, u, trunc), residual_norm(grid, g), g)


def _inner_energy(grid, v, p, m, w_nodal):
    d = np.diff(v) / grid.h
    grad_part = float(grid.cell_masses @ np.abs(d) ** p) / p
    bulk = float(grid.quad_weights @ (m * np.abs(v) ** p / p - w_nodal * v))
    return grid.angular_factor * (grad_part + bulk)


def solve_T(
    grid: RadialGrid,
    w_nodal,
    m: float,
    p: float,
    cfg: InnerSolverConfig = InnerSolverConfig(),
) -> RadialFunction:
    """Solve -Delta_p v + m |v|^(p-2) v = w with Neumann conditions.

    Damped Newton on the strictly convex inner energy.  The Jacobian uses
    the smoothing (d^2 + eps^2)^((p-2)/2) so it stays positive definite
    where u' or u vanish; eps is lowered every iteration down to eps_min.
    Backtracking on the true inner energy guarantees descent.
    """
    w_nodal = np.asarray(w_nodal, dtype=float)
    n = grid.n_cells
    h = grid.h
    omega = grid.angular_factor

    # constant start matching the mean forcing; exact when w is constant
    mean_w = float(grid.quad_weights @ w_nodal) * grid.N
    v = np.full(n + 1, np.sign(mean_w) * (abs(mean_w) / m) ** (1.0 / (p - 1.0)))

    eps = cfg.eps_reg
    E = _inner_energy(grid, v, p, m, w_nodal)
    stalls = 0
    for it in range(cfg.max_iter):
        G = _gradient(grid, v, p, m, w_nodal)
        gnorm = residual_norm(grid, G)
        if gnorm <= cfg.newton_tol:
            return RadialFunction(grid, v)
        a = (np.diff(v) ** 2 / h**2 + eps**2) ** ((p - 2.0) / 2.0)
        b = (v**2 + eps**2) ** ((p - 2.0) / 2.0)
        off = -(p - 1.0) * a * grid.cell_masses / h**2
        diag = grid.quad_weights * m * (p - 1.0) * b
        diag[:-1] -= off
        diag[1:] -= off
        ab = np.zeros((3, n + 1))
        ab[0, 1:] = off * omega
        ab[1, :] = diag * omega
        ab[2, :-1] = off * omega
        dv = solve_banded((1, 1), ab, -G)
        slope = float(G @ dv)
        t = 1.0
        accepted = False
        for _ in range(cfg.max_backtracks):
            v_try = v + t * dv
            E_new = _inner_energy(grid, v_try, p, m, w_nodal)
            if E_new <= E + 1e-4 * t * slope:
                accepted = True
                break
            # near the minimum the energy decrease falls below rounding
            # (Delta E ~ gnorm^2); accept on gradient-norm decrease instead
            if residual_norm(grid, _gradient(grid, v_try, p, m, w_nodal)) <= 0.9 * gnorm:
                accepted = True
                break
            t *= cfg.backtrack_factor
        if accepted:
            v = v_try
            E = _inner_energy(grid, v, p, m, w_nodal)
            eps = max(eps * 0.1, cfg.eps_min)
        else:
            # direction too poor at this smoothing; re-inflate and retry
            eps = min(eps * 100.0, cfg.eps_reg)
            stalls += 1
            if stalls > 3:
                break
    G = _gradient(grid, v, p, m, w_nodal)
    gnorm = residual_norm(grid, G)
    if gnorm <= cfg.newton_tol * 10.0:
        return RadialFunction(grid, v)
    raise NonConvergence(
        f"inner solver stalled at residual {gnorm:.3e} after {cfg.max_iter} iterations",
        last_residual=gnorm,
    )


def tilde_T(
    grid: RadialGrid,
    u,
    trunc,
    cfg: InnerSolverConfig = InnerSolverConfig(),
) -> RadialFunction:
    """The composed map: solve (P_w) with w = f_t(u)."""
    return solve_T(grid, trunc.f(_values(u)), trunc.m, trunc.p, cfg)
