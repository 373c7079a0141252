"""Nehari projection, cone-constrained descent to the mountain-pass level,
the Euler polygonal descending flow, and the certificate operations.

The mountain-pass level equals the energy infimum over the Nehari set
intersected with the cone, so the solver realizes it directly: project the
iterate onto the cone window, rescale onto the Nehari set, and step against
the energy gradient.  Once the residual is small and the iterate is safely
nonconstant, a damped Newton polish drives the full residual to tolerance.

The descending flow steps along the normalized direction u - tilde_T(u).
With step length below ||u - tilde_T(u)|| each step is a convex combination
of u and tilde_T(u), hence stays in the cone window; the flow stops before
reaching a fixed point, where the direction field is undefined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import solve_banded

from .errors import (
    ConvergedToConstant,
    MaxIterations,
    NoBracket,
    ValidationError,
)
from .grid import (
    RadialFunction,
    RadialGrid,
    _values,
    gradient_lp,
    project_cone,
    sup_norm,
    w1p_norm,
)
from .operators import (
    InnerSolverConfig,
    energy,
    residual,
    residual_norm,
    tilde_T,
)


@dataclass(frozen=True)
class NehariPoint:
    u: RadialFunction
    h: float
    energy: float


@dataclass(frozen=True)
class SolveResult:
    u: RadialFunction
    c: float
    residual: float
    iterations: int
    certificates: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DescentConfig:
    step0: float = 1.0
    tol: float = 1.0e-9
    max_iter: int = 500
    polish_threshold: float = 1.0e-3
    constant_tol: float = 1.0e-6
    inner: InnerSolverConfig = InnerSolverConfig()


def _norm_p(grid: RadialGrid, v, p: float, m: float) -> float:
    """||u||^p = int |u'|^p + m |u|^p over the ball."""
    return gradient_lp(grid, v, p) + grid.angular_factor * float(
        grid.quad_weights @ (m * np.abs(_values(v)) ** p)
    )


def nehari_h(grid: RadialGrid, u, trunc, cap: float = 1.0e6) -> float:
    """Unique t > 0 placing t*u on the Nehari set.

    Root of psi(t) = t^(p-1) ||u||^p - int f_t(t u) u, by exponential
    bracketing and bisection to relative tolerance 1e-12.  Uniqueness is
    guaranteed by the monotonicity of t -> f_t(t s)/t^(p-1).
    """
    v = _values(u)
    if np.any(v < 0):
        raise ValidationError("nehari_h requires a nonnegative profile")
    if not np.any(v > 0):
        raise ValidationError("nehari_h requires a nonzero profile")
    p, m = trunc.p, trunc.m
    norm_p = _norm_p(grid, v, p, m)
    wv = grid.angular_factor * grid.quad_weights * v

    def psi(t: float) -> float:
        return t ** (p - 1.0) * norm_p - float(wv @ trunc.f(t * v))

    t = 1.0
    val = psi(t)
    if val == 0.0:
        return t
    if val > 0.0:
        lo, hi = t, 2.0 * t
        while psi(hi) > 0.0:
            lo, hi = hi, 2.0 * hi
            if hi > cap:
                raise NoBracket(f"psi stays positive up to t={cap:g}")
    else:
        lo, hi = 0.5 * t, t
        while psi(lo) < 0.0:
            lo, hi = 0.5 * lo, lo
            if lo < 1.0 / cap:
                raise NoBracket(f"psi stays negative down to t={1.0/cap:g}")
    while hi - lo > 1.0e-12 * hi:
        mid = 0.5 * (lo + hi)
        if psi(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def nehari_point(grid: RadialGrid, u, trunc) -> NehariPoint:
    h = nehari_h(grid, u, trunc)
    scaled = RadialFunction(grid, h * _values(u), in_cone=getattr(u, "in_cone", False))
    return NehariPoint(scaled, h, energy(grid, scaled, trunc))


def _banded_from(grid, off, diag):
    ab = np.zeros((3, diag.size))
    ab[0, 1:] = off * grid.angular_factor
    ab[1, :] = diag * grid.angular_factor
    ab[2, :-1] = off * grid.angular_factor
    return ab


def _full_jacobian_banded(grid, v, trunc, eps):
    """Tridiagonal Jacobian of the residual, with smoothed |u'|^(p-2)."""
    p, m = trunc.p, trunc.m
    h = grid.h
    a = (np.diff(v) ** 2 / h**2 + eps**2) ** ((p - 2.0) / 2.0)
    b = (v**2 + eps**2) ** ((p - 2.0) / 2.0)
    off = -(p - 1.0) * a * grid.cell_masses / h**2
    diag = grid.quad_weights * (m * (p - 1.0) * b - trunc.fprime(v))
    diag[:-1] -= off
    diag[1:] -= off
    return _banded_from(grid, off, diag)


def _metric_banded(grid, v, p, m, eps=1e-6):
    """SPD metric: the Hessian of the strictly convex part of the energy.

    Lifting the gradient through this metric instead of plain L2 keeps
    the step size mesh-independent (the L2 lift is CFL-limited, with
    stable steps shrinking like h^2).
    """
    h = grid.h
    a = (np.diff(v) ** 2 / h**2 + eps**2) ** ((p - 2.0) / 2.0)
    b = (v**2 + eps**2) ** ((p - 2.0) / 2.0)
    off = -(p - 1.0) * a * grid.cell_masses / h**2
    diag = grid.quad_weights * m * (p - 1.0) * b
    diag[:-1] -= off
    diag[1:] -= off
    return _banded_from(grid, off, diag)


def residual_floor(grid: RadialGrid) -> float:
    """Rounding floor of the density-norm residual at this resolution.

    The exact gradient accumulates O(eps_mach/h) rounding per node, which
    the density norm amplifies to O(eps_mach/h^2); tolerances below this
    cannot be met no matter how many iterations run.
    """
    return 2.0 * float(np.finfo(float).eps) * grid.n_cells**2


def _newton_polish(grid, v, trunc, tol, max_iter=60):
    """Damped Newton on the full residual, with Levenberg fallback."""
    lam = 0.0
    R = residual(grid, v, trunc)
    rn = residual_norm(grid, R)
    for it in range(max_iter):
        if rn <= tol:
            return v, rn, it
        ab = _full_jacobian_banded(grid, v, trunc, eps=1e-9)
        if lam > 0.0:
            ab[1, :] += lam
        try:
            dv = solve_banded((1, 1), ab, -R)
        except Exception:
            lam = max(10.0 * lam, 1e-8)
            continue
        t = 1.0
        improved = False
        for _ in range(30):
            v_try = v + t * dv
            R_try = residual(grid, v_try, trunc)
            rn_try = residual_norm(grid, R_try)
            if rn_try < rn:
                v, R, rn = v_try, R_try, rn_try
                improved = True
                break
            t *= 0.5
        if improved:
            lam *= 0.1
        else:
            lam = max(10.0 * lam, 1e-8)
    return v, rn, max_iter


def nehari_descent(
    grid: RadialGrid,
    start,
    trunc,
    window: tuple[float, float] = (0.0, math.inf),
    cfg: DescentConfig = DescentConfig(),
) -> SolveResult:
    """Minimize the energy over Nehari set within the cone window.

    Iterates: L2 gradient step, cone-window projection, Nehari rescaling,
    with backtracking on the energy.  Stops on the residual surrogate.
    The requested tolerance is clipped from below by residual_floor(grid),
    since finer grids cannot express residuals under the rounding floor.
    Raises ConvergedToConstant when the iterate collapses onto u0 and
    MaxIterations when the budget runs out.
    """
    tol_eff = max(cfg.tol, residual_floor(grid))
    u0 = trunc.u0
    lo = max(window[0], 0.0)
    hi = window[1]
    u = project_cone(grid, start, lo, hi)
    if sup_norm(u.values - u0) <= cfg.constant_tol:
        raise ConvergedToConstant(
            "start coincides with the constant equilibrium",
            constant_value=u0,
            level=energy(grid, np.full(grid.n_cells + 1, u0), trunc),
        )
    h = nehari_h(grid, u, trunc)
    v = h * u.values
    E = energy(grid, v, trunc)
    sigma = cfg.step0
    rn = math.inf

    for it in range(cfg.max_iter):
        R = residual(grid, v, trunc)
        rn = residual_norm(grid, R)
        if rn <= tol_eff:
            break
        gap = sup_norm(v - u0)
        if gap <= cfg.constant_tol:
            raise ConvergedToConstant(
                f"iterate collapsed onto u0 after {it} iterations "
                "(restart from a different profile is advised)",
                constant_value=u0,
                level=energy(grid, np.full(grid.n_cells + 1, u0), trunc),
            )
        if rn <= cfg.polish_threshold and gap > 10.0 * cfg.constant_tol:
            v, rn, polish_its = _newton_polish(grid, v, trunc, tol_eff)
            it += polish_its
            break
        metric = _metric_banded(grid, v, trunc.p, trunc.m)
        lifted = solve_banded((1, 1), metric, R)
        accepted = False
        for _ in range(40):
            cand = project_cone(grid, v - sigma * lifted, lo, hi)
            try:
                h = nehari_h(grid, cand, trunc)
            except NoBracket:
                sigma *= 0.5
                continue
            v_try = h * cand.values
            E_try = energy(grid, v_try, trunc)
            if E_try < E:
                v, E = v_try, E_try
                sigma = min(sigma * 1.5, 4.0)
                accepted = True
                break
            sigma *= 0.5
        if not accepted:
            # descent stalled inside the backtracking loop; polish from here
            v, rn, _ = _newton_polish(grid, v, trunc, tol_eff)
            break
    else:
        raise MaxIterations(
            f"descent did not reach tol={tol_eff:g} in {cfg.max_iter} iterations",
            last_residual=rn,
        )

    if rn > tol_eff:
        raise MaxIterations(
            f"descent stalled at residual {rn:.3e} above tol={tol_eff:g}",
            last_residual=rn,
        )
    if sup_norm(v - u0) <= cfg.constant_tol:
        raise ConvergedToConstant(
            "polish landed on the constant equilibrium",
            constant_value=u0,
            level=energy(grid, np.full(grid.n_cells + 1, u0), trunc),
        )

    min_slope = float(np.min(np.diff(v))) / grid.h
    in_cone = min_slope >= -1e-10 and float(np.min(v)) >= lo - 1e-12
    result_u = RadialFunction(grid, v, in_cone=in_cone)
    certificates = {
        "min_cell_slope": min_slope,
        "window": (lo, hi),
        "nehari_gap": abs(
            _norm_p(grid, v, trunc.p, trunc.m)
            - grid.angular_factor * float(grid.quad_weights @ (trunc.f(v) * v))
        ),
        "constant_gap": sup_norm(v - u0),
    }
    return SolveResult(result_u, energy(grid, v, trunc), rn, it + 1, certificates)


def euler_flow(
    grid: RadialGrid,
    u,
    trunc,
    horizon: float = 1.0,
    steps: int = 1000,
    window: tuple[float, float] = (0.0, math.inf),
    inner: InnerSolverConfig = InnerSolverConfig(),
) -> dict:
    """Explicit Euler polygonal for the descending flow.

    Returns {"profiles": ..., "energies": ..., "status": ...}.  Status is
    "horizon" when all steps ran, "near-fixed-point" when the direction
    norm fell to the step length (the field is undefined at fixed points,
    so stopping there is the faithful discrete analogue).
    """
    tau = horizon / steps
    v = _values(u).copy()
    if sup_norm(v - trunc.u0) <= 1e-12:
        raise ValidationError("the constant equilibrium is a fixed point of the flow")
    lo = max(window[0], 0.0)
    hi = window[1]
    p, m = trunc.p, trunc.m
    energies = [energy(grid, v, trunc)]
    profiles = [v.copy()]
    status = "horizon"
    for _ in range(steps):
        w = tilde_T(grid, v, trunc, inner).values
        direction = v - w
        dn = w1p_norm(grid, direction, p, m)
        if dn <= tau:
            status = "near-fixed-point"
            break
        stepped = v - (tau / dn) * direction
        v = project_cone(grid, stepped, lo, hi).values
        energies.append(energy(grid, v, trunc))
        profiles.append(v.copy())
    return {
        "profiles": profiles,
        "energies": np.asarray(energies),
        "status": status,
    }


def ray_argmax(grid: RadialGrid, u, trunc, t_lo=0.01, t_hi=5.0, n_t=500):
    """Location of the maximum of t -> I(t u) on a dense grid."""
    ts = np.linspace(t_lo, t_hi, n_t)
    vals = np.array([energy(grid, t * _values(u), trunc) for t in ts])
    k = int(np.argmax(vals))
    return ts[k], ts, vals


def ray_max_check(grid: RadialGrid, u, trunc, t_lo=0.01, t_hi=5.0, n_t=500) -> bool:
    """Certify that the ray energy peaks at t = 1 and is positive below.

    True when the dense-grid argmax of I(t u) sits within one grid cell of
    t = 1 and I(t u) > 0 for all grid points t in (0, 1].
    """
    t_star, ts, vals = ray_argmax(grid, u, trunc, t_lo, t_hi, n_t)
    cell = ts[1] - ts[0]
    if abs(t_star - 1.0) > cell * (1.0 + 1e-12):
        return False
    below = ts <= 1.0
    return bool(np.all(vals[below] > 0.0))


def default_perturbation(grid: RadialGrid) -> NDArray[np.float64]:
    """r^2 minus its grid mean: nondecreasing with exact zero average."""
    r2 = grid.nodes**2
    mean = float(grid.quad_weights @ r2) / float(np.sum(grid.quad_weights))
    return r2 - mean


def nonconstancy_certificate(
    grid: RadialGrid,
    trunc,
    v: Optional[NDArray[np.float64]] = None,
    s_list=(0.02, 0.05, 0.1),
) -> dict:
    """Energy gap along the Nehari-projected curve through u0.

    For each s computes h(s) = nehari_h(u0 + s v) and
    Delta(s) = I(h(s)(u0 + s v)) - I(u0).  For p > 2 the gap is negative
    for small s (the constant is not the minimizer); for 1 < p < 2 with
    pure powers it is positive.
    """
    if v is None:
        v = default_perturbation(grid)
    v = np.asarray(v, dtype=float)
    mean = grid.angular_factor * float(grid.quad_weights @ v)
    if abs(mean) > 1e-10:
        raise ValidationError(f"perturbation has nonzero average {mean:.2e}")
    if np.any(np.diff(v) < -1e-14):
        raise ValidationError("perturbation must be nondecreasing")
    u0 = trunc.u0
    s0 = trunc.params.s0
    smax = max(abs(s) for s in s_list)
    prof_hi = u0 + smax * np.max(v)
    prof_lo = u0 + smax * np.min(v)
    if prof_hi > s0 or prof_lo < 0.0:
        raise ValidationError("perturbed profile leaves [0, s0]")
    E0 = energy(grid, np.full(grid.n_cells + 1, u0), trunc)
    rows = []
    for s in s_list:
        prof = u0 + s * v
        h = nehari_h(grid, prof, trunc) if s != 0.0 else 1.0
        gap = energy(grid, h * prof, trunc) - E0 if s != 0.0 else 0.0
        rows.append({"s": s, "h": h, "delta": gap})
    p = trunc.p
    signs_ok = all(
        (row["delta"] * (p - 2.0) < 0.0) if row["s"] != 0.0 and p != 2.0 else True
        for row in rows
    )
    return {
        "rows": rows,
        "p": p,
        "expected_sign": "negative" if p > 2 else ("positive" if p < 2 else "none"),
        "signs_consistent": signs_ok,
        "energy_u0": E0,
    }


def mp_geometry_sample(
    grid: RadialGrid,
    trunc,
    window: tuple[float, float],
    tau: float,
    n_samples: int = 200,
    seed: int = 0,
) -> dict:
    """Sampled mountain-pass geometry on the shell ||u - u_minus||_inf = tau.

    Draws random in-cone profiles at sup-distance exactly tau above the
    lower equilibrium and reports the minimum energy gap; a positive
    minimum supports (does not prove) the mountain-pass geometry.
    """
    u_minus = max(window[0], 0.0)
    u0 = trunc.u0
    u_plus = window[1]
    if not (tau < min(u0 - u_minus, (u_plus - u0) if math.isfinite(u_plus) else math.inf)):
        raise ValidationError(f"tau={tau} too large for the window around u0")
    if tau == 0.0:
        return {"min_gap": 0.0, "tau": 0.0, "n_samples": 0, "gaps": []}
    rng = np.random.default_rng(seed)
    base = energy(grid, np.full(grid.n_cells + 1, u_minus), trunc)
    gaps = []
    # the constant shell point is always included: its gap has a closed
    # form and anchors the sampled minimum
    const = np.full(grid.n_cells + 1, u_minus + tau)
    gaps.append(energy(grid, const, trunc) - base)
    for _ in range(n_samples - 1):
        bumps = np.abs(rng.standard_normal(grid.n_cells + 1))
        prof = np.cumsum(bumps)
        prof -= prof[0]
        top = prof[-1] if prof[-1] > 0 else 1.0
        prof = u_minus + tau * prof / top
        gaps.append(energy(grid, prof, trunc) - base)
    gaps = np.asarray(gaps)
    return {
        "min_gap": float(np.min(gaps)),
        "tau": tau,
        "n_samples": n_samples,
        "gaps": gaps,
        "constant_gap": float(gaps[0]),
    }
