"""Radial shooting: the independent route to the same profiles.

Integrates the radial equation in flux form,

    mu = r^(N-1) |u'|^(p-2) u',
    mu' = r^(N-1) (m u^(p-1) - f_t(u)),

from a series start near the origin, and locates the nonconstant
nondecreasing solution as the first +/- sign change of the Neumann miss
u'(1) while the shooting height a sweeps upward.  Everything here is
quadrature over dense ODE output plus scalar bisection, so it shares no
code path with the variational solver and can serve as its oracle.

Also computes the limit profile G (the q -> infinity endpoint) and the
pure-power phase-plane diagnostics used by the verification battery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import simpson, solve_ivp

from .errors import NoSignChange, OutOfRange, ValidationError
from .grid import RadialFunction, RadialGrid, build_grid
from .minimax import nehari_h
from .nonlinearity import TruncatedNonlinearity, truncate_pure_power
from .operators import energy

_SERIES_EPS = 1.0e-4


@dataclass(frozen=True)
class ShootState:
    """One trajectory: height, dense profile, and the Neumann miss."""

    a: float
    r: NDArray[np.float64]
    u: NDArray[np.float64]
    du: NDArray[np.float64]
    miss: float
    status: str  # "ok" or "blowup"


@dataclass(frozen=True)
class PhaseDiagnostics:
    """Pure-power phase-plane report for a computed profile."""

    liapunov: NDArray[np.float64]
    increase_violations: int
    max_increase: float
    in_sigma: bool
    sup_bound: float
    slope_bound: float
    max_u: float
    max_slope: float
    sigma_margin: float


@dataclass(frozen=True)
class SweepRow:
    q: float
    c_q: float
    sup_dist_G: float
    w1p_dist_G: float
    h_q_G: float
    u_at_0: float
    u_at_1: float
    status: str
    c_q_nehari: float = math.nan
    a_star: float = math.nan


def _signed_pow(x, e):
    return np.sign(x) * np.abs(x) ** e


def _series_coeff(a: float, trunc, N: int) -> float:
    """u'(r) ~ c r^(1/(p-1)) near 0, matching the flux equation."""
    g = trunc.m * _signed_pow(a, trunc.p - 1.0) - float(trunc.f(a))
    return float(_signed_pow(g / N, 1.0 / (trunc.p - 1.0)))


def _series_u(r, a: float, c: float, p: float):
    return a + c * (p - 1.0) / p * r ** (p / (p - 1.0))


def _series_du(r, a: float, c: float, p: float):
    return c * r ** (1.0 / (p - 1.0))


def _shoot_raw(
    a: float,
    trunc,
    N: int,
    rtol: float,
    atol: float,
    dense: bool = False,
) -> tuple:
    """Integrate to r = 1; returns (sol, status, miss_or_sign)."""
    p, m = trunc.p, trunc.m
    c = _series_coeff(a, trunc, N)
    r0 = _SERIES_EPS
    u0 = float(_series_u(r0, a, c, p))
    mu0 = float(r0 ** (N - 1) * _signed_pow(_series_du(r0, a, c, p), p - 1.0))
    cap = 10.0 * trunc.params.s0
    e = 1.0 / (p - 1.0)

    def rhs(r, y):
        u, mu = y
        slope = _signed_pow(mu / r ** (N - 1), e)
        forcing = r ** (N - 1) * (m * _signed_pow(u, p - 1.0) - float(trunc.f(u)))
        return (slope, forcing)

    def blow(r, y):
        return cap - abs(y[0])

    blow.terminal = True
    blow.direction = -1
    sol = solve_ivp(
        rhs,
        (r0, 1.0),
        (u0, mu0),
        method="DOP853",
        rtol=rtol,
        atol=atol,
        dense_output=dense,
        events=blow,
    )
    if sol.status == 1:  # stopped by the blow-up event
        u_end = sol.y[0, -1]
        return sol, "blowup", math.copysign(math.inf, u_end)
    if not sol.success:
        raise OutOfRange(f"integration failed at a={a}: {sol.message}")
    mu_end = sol.y[1, -1]
    miss = float(_signed_pow(mu_end, e))
    return sol, "ok", miss


def shoot(
    a: float,
    trunc: TruncatedNonlinearity,
    N: int,
    rtol: float = 1.0e-10,
    atol: float = 1.0e-13,
    r_eval: Optional[NDArray[np.float64]] = None,
) -> ShootState:
    """Shoot from height a; raises OutOfRange if the trajectory blows up.

    The miss is u'(1), recovered from the flux.  With r_eval given, the
    profile is evaluated there (series below the matching radius, dense
    ODE output above); otherwise on a default 2049-point uniform grid.
    """
    if a <= 0.0:
        raise ValidationError("shooting height must be positive")
    sol, status, miss = _shoot_raw(a, trunc, N, rtol, atol, dense=True)
    if status == "blowup":
        raise OutOfRange(
            f"trajectory from a={a} exceeded 10*s0={10*trunc.params.s0:g} "
            f"before r=1"
        )
    if r_eval is None:
        r_eval = np.linspace(0.0, 1.0, 2049)
    r_eval = np.asarray(r_eval, dtype=float)
    u, du = _eval_profile(r_eval, a, trunc, N, sol)
    return ShootState(a=a, r=r_eval, u=u, du=du, miss=miss, status="ok")


def _eval_profile(rs, a, trunc, N, sol):
    """Profile and slope at rs: series below _SERIES_EPS, ODE above."""
    p = trunc.p
    c = _series_coeff(a, trunc, N)
    u = np.empty_like(rs)
    du = np.empty_like(rs)
    low = rs < _SERIES_EPS
    u[low] = _series_u(rs[low], a, c, p)
    du[low] = _series_du(rs[low], a, c, p)
    if np.any(~low):
        y = sol.sol(rs[~low])
        u[~low] = y[0]
        rnm1 = rs[~low] ** (N - 1)
        du[~low] = _signed_pow(y[1] / rnm1, 1.0 / (p - 1.0))
    return u, du


def _miss_sign(a, trunc, N, rtol, atol) -> float:
    try:
        _, status, miss = _shoot_raw(a, trunc, N, rtol, atol)
    except OutOfRange:
        return math.inf
    return miss


def find_nonconstant(
    trunc: TruncatedNonlinearity,
    N: int,
    grid: Optional[RadialGrid] = None,
    a_min: Optional[float] = None,
    a_max: Optional[float] = None,
    n_scan: int = 240,
    rtol: float = 1.0e-10,
    scan_rtol: float = 1.0e-6,
    miss_tol: float = 1.0e-10,
) -> tuple[RadialFunction, float, dict]:
    """Locate the nonconstant nondecreasing solution by shooting.

    Scans heights upward below u0 for the first miss sign change from
    positive to negative, bisects the bracket until |u'(1)| <= miss_tol
    or the bracket width falls below 1e-14 (the miss is computed through
    the exponent 1/(p-1), so for p > 2 integrator noise makes the plain
    miss tolerance unreachable; the width stop is the honest limit), and
    verifies the profile is nondecreasing.  Raises NoSignChange when the
    scan finds no admissible bracket.
    """
    u0 = trunc.u0
    if a_min is None:
        a_min = 0.02 * u0
    if a_max is None:
        a_max = u0 * (1.0 - 1e-6)
    if grid is None:
        grid = build_grid(N, 1024)
    heights = np.linspace(a_min, a_max, n_scan)
    scan_atol = max(scan_rtol * 1e-3, 1e-12)
    misses = np.array(
        [_miss_sign(a, trunc, N, scan_rtol, scan_atol) for a in heights]
    )

    diagnostics = {"n_scan": n_scan, "a_range": (a_min, a_max)}
    start = 0
    while True:
        bracket = None
        for i in range(start, n_scan - 1):
            if misses[i] > 0.0 and misses[i + 1] < 0.0:
                bracket = (heights[i], heights[i + 1])
                start = i + 1
                break
        if bracket is None:
            raise NoSignChange(
                "no sign change of the Neumann miss in "
                f"a in ({a_min:g}, {a_max:g}); no nonconstant nondecreasing "
                "solution was found at these parameters"
            )
        lo, hi = bracket
        # refine cheaply first, then at the requested tolerance
        lo, hi, miss_mid = _bisect_miss(lo, hi, trunc, N, scan_rtol, scan_atol, 1e-8, miss_tol)
        lo, hi, miss_mid = _bisect_miss(lo, hi, trunc, N, rtol, 1e-13, 1e-14, miss_tol)
        a_star = 0.5 * (lo + hi)
        state = shoot(a_star, trunc, N, rtol=rtol, r_eval=grid.nodes)
        min_slope = float(np.min(np.diff(state.u))) / grid.h
        if min_slope >= -1e-10:
            break
        # non-monotone root: keep scanning for the next bracket

    u_fn = RadialFunction(grid, np.maximum(state.u, 0.0), in_cone=True)
    diagnostics.update(
        {
            "a_star": a_star,
            "miss": state.miss,
            "bracket_width": hi - lo,
            "min_cell_slope": min_slope,
            "du": state.du,
        }
    )
    return u_fn, a_star, diagnostics


def _bisect_miss(lo, hi, trunc, N, rtol, atol, width_tol, miss_tol):
    miss_mid = math.inf
    for _ in range(200):
        if hi - lo <= width_tol * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        miss_mid = _miss_sign(mid, trunc, N, rtol, atol)
        if abs(miss_mid) <= miss_tol:
            return mid, mid, miss_mid
        if miss_mid > 0.0:
            lo = mid
        else:
            hi = mid
    return lo, hi, miss_mid


# --- limit profile -----------------------------------------------------------


def solve_G(
    p: float,
    N: int,
    grid: Optional[RadialGrid] = None,
    rtol: float = 1.0e-12,
    target_tol: float = 1.0e-12,
) -> dict:
    """Limit profile G: p-harmonic-type problem with G(1) = 1.

    Solves (r^(N-1)|G'|^(p-2) G')' = r^(N-1) G^(p-1) with G'(0) = 0 by
    shooting on G(0) in (0, 1); the boundary map is strictly increasing
    in the height, so bisection converges.  Returns the dense profile,
    G(0), and the limit level c_infty = (1/p) ||G||^p.
    """
    if p <= 1.0:
        raise ValidationError("p must exceed 1")
    e = 1.0 / (p - 1.0)

    def rhs(r, y):
        u, mu = y
        slope = _signed_pow(mu / r ** (N - 1), e)
        return (slope, r ** (N - 1) * _signed_pow(u, p - 1.0))

    def end_value(b: float):
        r0 = _SERIES_EPS
        c = float(_signed_pow(b ** (p - 1.0) / N, e))
        u0 = float(_series_u(r0, b, c, p))
        mu0 = float(r0 ** (N - 1) * _signed_pow(_series_du(r0, b, c, p), p - 1.0))
        sol = solve_ivp(
            rhs, (r0, 1.0), (u0, mu0), method="DOP853",
            rtol=rtol, atol=1e-14, dense_output=True,
        )
        if not sol.success:
            raise OutOfRange(f"limit-profile integration failed: {sol.message}")
        return float(sol.y[0, -1]), sol, c

    lo, hi = 1e-8, 1.0 - 1e-12
    val_lo, _, _ = end_value(lo)
    val_hi, _, _ = end_value(hi)
    if not (val_lo < 1.0 < val_hi):
        raise NoSignChange("limit-profile boundary map does not bracket 1")
    sol = None
    b = 0.5 * (lo + hi)
    for _ in range(200):
        b = 0.5 * (lo + hi)
        val, sol, c = end_value(b)
        if abs(val - 1.0) <= target_tol or hi - lo <= 1e-15:
            break
        if val < 1.0:
            lo = b
        else:
            hi = b

    rs = np.linspace(0.0, 1.0, 8193)
    u = np.empty_like(rs)
    du = np.empty_like(rs)
    low = rs < _SERIES_EPS
    u[low] = _series_u(rs[low], b, c, p)
    du[low] = _series_du(rs[low], b, c, p)
    y = sol.sol(rs[~low])
    u[~low] = y[0]
    du[~low] = _signed_pow(y[1] / rs[~low] ** (N - 1), e)
    # G(1) = 1 exactly, by construction of the shooting target
    scale = u[-1]
    u = u / scale
    du = du / scale

    omega = 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)
    rnm1 = rs ** (N - 1)
    norm_p = omega * float(
        simpson((np.abs(du) ** p + np.abs(u) ** p) * rnm1, x=rs)
    )
    out = {
        "G0": float(u[0]),
        "c_infty": norm_p / p,
        "norm_p": norm_p,
        "r": rs,
        "u": u,
        "du": du,
    }
    if grid is not None:
        out["G"] = RadialFunction(grid, np.interp(grid.nodes, rs, u), in_cone=True)
    return out


# --- phase-plane diagnostics -------------------------------------------------


def phase_diagnostics(
    grid: RadialGrid, u, p: float, q: float, slopes=None
) -> PhaseDiagnostics:
    """Liapunov monotonicity and trapping-region membership, pure powers.

    L(r) = ((p-1)/p)|u'|^p - u^p/p + u^q/q decays along radial solutions
    (strictly for N >= 2, constant for N = 1), and the monotone solutions
    live in the region 0 <= u' <= [p/(p-1) (u^p/p - u^q/q)]^(1/p) with
    u <= (q/p)^(1/(q-p)).

    Slope data decides how sharp the report is: pass the integrator's
    slopes (from find_nonconstant diagnostics) for first-integral-level
    accuracy; without them, averaged cell slopes are used and the
    Liapunov samples wobble at the discretization-error scale.  The end
    slopes are always set to zero exactly (symmetry at 0, Neumann at 1),
    which also discards the one endpoint where recovering u' from the
    flux is noise-amplified.
    """
    v = np.asarray(u.values if isinstance(u, RadialFunction) else u, dtype=float)
    if slopes is None:
        cell = np.diff(v) / grid.h
        slopes = np.zeros_like(v)
        slopes[1:-1] = 0.5 * (cell[:-1] + cell[1:])
    else:
        slopes = np.asarray(slopes, dtype=float).copy()
        slopes[0] = 0.0
        slopes[-1] = 0.0
    L = ((p - 1.0) / p) * np.abs(slopes) ** p - v**p / p + v**q / q
    increases = np.diff(L)
    bad = increases > 1e-8
    sup_bound = (q / p) ** (1.0 / (q - p))
    slope_bound = ((q - p) / (q * (p - 1.0))) ** (1.0 / p)
    cap = (p / (p - 1.0)) * (v**p / p - v**q / q)
    cap = np.maximum(cap, 0.0) ** (1.0 / p)
    margin = float(np.min(cap - slopes))
    in_sigma = bool(
        np.all(slopes >= -1e-10)
        and float(np.max(v)) <= sup_bound + 1e-10
        and margin >= -1e-8
    )
    return PhaseDiagnostics(
        liapunov=L,
        increase_violations=int(np.count_nonzero(bad)),
        max_increase=float(np.max(increases)) if increases.size else 0.0,
        in_sigma=in_sigma,
        sup_bound=sup_bound,
        slope_bound=slope_bound,
        max_u=float(np.max(v)),
        max_slope=float(np.max(slopes)),
        sigma_margin=margin,
    )


# --- the q -> infinity sweep -------------------------------------------------


def limit_sweep(
    p: float,
    N: int,
    qs,
    n_cells: int = 1024,
    s0: float = 2.0,
    rtol: float = 1.0e-10,
    scan_rtol: float = 1.0e-6,
) -> dict:
    """Solutions and distances to the limit profile for each exponent.

    Each row solves the pure-power problem by shooting, evaluates the
    level two ways (energy of the profile, and the pure-power identity
    c = (1/p - 1/q) int u^q, which must agree), and measures distances to
    G.  Rows that fail to produce a nonconstant solution carry the error
    name in their status and NaN numeric fields instead of aborting the
    sweep.
    """
    grid = build_grid(N, n_cells)
    gdata = solve_G(p, N, grid=grid)
    rs = gdata["r"]
    omega = 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)
    rnm1 = rs ** (N - 1)
    rows = []
    for q in qs:
        trunc = truncate_pure_power(p, q, N, s0=s0)
        h_q_G = nehari_h(grid, gdata["G"], trunc)
        try:
            u_fn, a_star, diag = find_nonconstant(
                trunc, N, grid=grid, rtol=rtol, scan_rtol=scan_rtol
            )
            state = shoot(a_star, trunc, N, rtol=rtol, r_eval=rs)
        except (NoSignChange, OutOfRange) as err:
            rows.append(
                SweepRow(
                    q=q, c_q=math.nan, sup_dist_G=math.nan, w1p_dist_G=math.nan,
                    h_q_G=h_q_G, u_at_0=math.nan, u_at_1=math.nan,
                    status=type(err).__name__,
                )
            )
            continue
        c_q = float(
            omega * simpson(
                (np.abs(state.du) ** p / p
                 + trunc.m * np.abs(state.u) ** p / p
                 - trunc.F(state.u)) * rnm1,
                x=rs,
            )
        )
        c_q_nehari = (1.0 / p - 1.0 / q) * omega * float(
            simpson(np.abs(state.u) ** q * rnm1, x=rs)
        )
        sup_dist = float(np.max(np.abs(state.u - gdata["u"])))
        w1p_dist = float(
            (omega * simpson(
                (np.abs(state.du - gdata["du"]) ** p
                 + np.abs(state.u - gdata["u"]) ** p) * rnm1,
                x=rs,
            )) ** (1.0 / p)
        )
        rows.append(
            SweepRow(
                q=q, c_q=c_q, sup_dist_G=sup_dist, w1p_dist_G=w1p_dist,
                h_q_G=h_q_G, u_at_0=float(state.u[0]), u_at_1=float(state.u[-1]),
                status="ok", c_q_nehari=c_q_nehari, a_star=a_star,
            )
        )
    return {
        "rows": rows,
        "c_infty": gdata["c_infty"],
        "G0": gdata["G0"],
        "G": gdata["G"],
        "grid": grid,
    }
