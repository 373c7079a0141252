"""Nonlinearity handling: the monotone shift, a-priori constants, and the
subcritical truncation.

The solver never works with the raw right-hand side g directly.  It first
shifts it, f(s) = g(s) + C s^(p-1) with m = 1 + C, so that f is
nondecreasing, then replaces f beyond a threshold s0 by a tail with
subcritical growth exponent ell.  Solutions staying below s0 solve the
original problem, which is checked a posteriori (adaptive s0 policy).

Pure powers g(s) = s^(q-1) keep C = 0, m = 1, u0 = 1 and use the exact
piecewise truncation formula; a general f gets a C1 splice whose bridge is
a cubic Hermite blend on [s0, s0 + eps] with eps = 0.1 s0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ValidationError

_SCAN_CAP = 1.0e6  # all root/constant scans stop here; beyond it u_plus = inf


def sobolev_critical(p: float, N: int) -> float:
    """p* = Np/(N-p) for p < N, +inf otherwise."""
    if p < N:
        return N * p / (N - p)
    return math.inf


def ell_range(p: float, N: int) -> tuple[float, float]:
    """Admissible interval (lo, hi) for the truncation growth exponent."""
    pstar = sobolev_critical(p, N)
    if p > 2:
        hi = min(((p - 1.0) ** 2 + p - 2.0) / (p - 2.0), pstar)
    else:
        hi = pstar
    return p, hi


def default_ell(p: float, N: int) -> float:
    lo, hi = ell_range(p, N)
    if math.isinf(hi):
        return p + 1.0
    return min(p + 1.0, 0.5 * (lo + hi))


@dataclass(frozen=True)
class NonlinearitySpec:
    """The shifted nonlinearity f = g + C s^(p-1), with m = 1 + C.

    u0 is the distinguished constant equilibrium: f(u0) = m u0^(p-1) with a
    transversal crossing, f'(u0) > m (p-1) u0^(p-2).
    """

    kind: str  # "power" or "general"
    p: float
    q: Optional[float]
    f: Callable[[np.ndarray], np.ndarray]
    fprime: Callable[[np.ndarray], np.ndarray]
    shift_constant: float
    m: float
    u0: float


def pure_power(p: float, q: float) -> NonlinearitySpec:
    """g(s) = s^(q-1), q > p.  No shift needed: C = 0, m = 1, u0 = 1."""
    if p <= 1:
        raise ValidationError(f"p must exceed 1, got {p}")
    if q <= p:
        raise ValidationError(f"q must exceed p, got q={q}, p={p}")
    f = lambda s: np.abs(s) ** (q - 1.0)
    fp = lambda s: (q - 1.0) * np.abs(s) ** (q - 2.0)
    return NonlinearitySpec("power", p, q, f, fp, 0.0, 1.0, 1.0)


def shift(
    g: Callable,
    gprime: Callable,
    p: float,
    s_max: float = 100.0,
    n_samples: int = 20001,
) -> NonlinearitySpec:
    """Shift g to a nondecreasing f = g + C s^(p-1), m = 1 + C.

    C is the smallest nonnegative constant with g'(s) >= -C (p-1) s^(p-2)
    on a dense sample of (0, s_max], raised by 10 percent because a sampled
    scan can miss thin dips.
    """
    if p <= 1:
        raise ValidationError(f"p must exceed 1, got {p}")
    s = np.linspace(s_max / n_samples, s_max, n_samples)
    need = -np.asarray(gprime(s), dtype=float) / ((p - 1.0) * s ** (p - 2.0))
    c_req = float(np.max(need))
    if not np.isfinite(c_req):
        raise ValidationError("no finite shift constant makes f nondecreasing")
    C = 1.1 * max(c_req, 0.0)
    m = 1.0 + C

    def f(t):
        return np.asarray(g(t), dtype=float) + C * np.abs(t) ** (p - 1.0)

    def fp(t):
        return np.asarray(gprime(t), dtype=float) + C * (p - 1.0) * np.abs(t) ** (p - 2.0)

    fv = f(s)
    if np.any(np.diff(fv) < -1e-12 * max(1.0, float(np.max(np.abs(fv))))):
        raise ValidationError("shifted f is not nondecreasing on the sampled range")
    if fv[0] < -1e-12:
        raise ValidationError("shifted f is negative near 0; (g1) fails")

    u0 = _find_u0(f, fp, m, p, s_max)
    return NonlinearitySpec("general", p, None, f, fp, C, m, u0)


def _find_u0(f, fprime, m: float, p: float, s_max: float) -> float:
    """First transversal upward crossing of f(t) = m t^(p-1)."""
    t = np.linspace(1e-4, s_max, 200001)
    gap = np.asarray(f(t), dtype=float) - m * t ** (p - 1.0)
    sign = np.sign(gap)
    for i in range(t.size - 1):
        if sign[i] < 0 <= sign[i + 1]:
            lo, hi = t[i], t[i + 1]
            root = _bisect(lambda x: float(f(x)) - m * x ** (p - 1.0), lo, hi)
            slope_gap = float(fprime(root)) - m * (p - 1.0) * root ** (p - 2.0)
            if slope_gap > 1e-8 * max(1.0, m * root ** (p - 2.0)):
                return root
    raise ValidationError("no transversal equilibrium u0 found; (g3) fails")


def _bisect(fun, lo, hi, iters=200):
    flo = fun(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        if fm == 0.0:
            return mid
        if (flo < 0) == (fm < 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


def ball_volume(N: int) -> float:
    omega = 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)
    return omega / N


def a_priori_constants(
    f: Callable,
    m: float,
    p: float,
    N: int,
    M: Optional[float] = None,
    s_cap: float = _SCAN_CAP,
) -> tuple[float, float, float, Optional[float]]:
    """Constants (delta, M, K_{p-1}, K_inf) controlling solutions in the cone.

    delta and M realize f(s) >= (m + delta) s^(p-1) for s >= M, found by
    scanning the ratio f(s)/s^(p-1).  K_{p-1} follows from the closed form
    K^(p-1) = (1 + m/delta) M^(p-1) |B|.  K_inf uses the explicit
    monotone-average chain, valid for p >= 2; for p < 2 it is None and the
    adaptive s0 policy applies (solve, then verify sup u < s0).
    """
    s = np.geomspace(1e-3, s_cap, 4000)
    rho = np.asarray(f(s), dtype=float) / s ** (p - 1.0)

    def inf_ratio_from(M0):
        mask = s >= M0
        return float(np.min(rho[mask])) if mask.any() else -math.inf

    if M is None:
        for cand in [1.25, 1.5, 2.0, 4.0, 8.0, 32.0, 128.0, 1024.0]:
            delta = inf_ratio_from(cand) - m
            if delta >= 0.1 * m:
                M = cand
                break
        else:
            raise ValidationError(
                "no (delta, M) below the scan cap: liminf f(s)/s^(p-1) "
                "does not exceed m; (f2) fails"
            )
    else:
        delta = inf_ratio_from(M) - m
        if delta <= 0:
            raise ValidationError(
                f"f(s)/s^(p-1) falls to m + {delta:.3e} beyond M={M}; (f2) fails"
            )

    volume = ball_volume(N)
    k_pm1 = ((1.0 + m / delta) * M ** (p - 1.0) * volume) ** (1.0 / (p - 1.0))

    k_inf = None
    if p >= 2:
        omega = 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)
        w1pm1 = (1.0 + m) ** (1.0 / (p - 1.0)) * k_pm1
        # Hoelder from W^{1,p-1} down to W^{1,1}, then the in-cone bound
        # u(1) <= 3 * 2^(N-1) / omega * ||u||_{W^{1,1}}.
        w11 = volume ** ((p - 2.0) / (p - 1.0)) * (1.0 + m ** (-1.0 / (p - 1.0))) * w1pm1
        k_inf = 3.0 * 2.0 ** (N - 1) / omega * w11
    return delta, M, k_pm1, k_inf


@dataclass(frozen=True)
class TruncationParams:
    s0: float
    ell: float
    delta: float
    M: float
    k_pm1: float
    k_inf: Optional[float]


class TruncatedNonlinearity:
    """Piecewise nonlinearity agreeing with f up to the junction.

    Pure power:
        f_t(s) = s^(q-1)                                  on [0, s0]
        f_t(s) = s0^(q-1) + A (s^(ell-1) - s0^(ell-1))    beyond,
    with A = (q-1)/(ell-1) s0^(q-ell); junction is C1 by construction.

    General f: if f(s0) is tangent to (m+delta) s^(p-1) the tail
        f(s0) + (m+delta)(s^(p-1) - s0^(p-1)) + (s - s0)^(ell-1)
    attaches at s0 directly; otherwise a cubic Hermite bridge on
    [s0, s0+eps] brings the slope down to (m+delta)(p-1)(s0+eps)^(p-2)
    first and the same tail attaches at s0 + eps.
    """

    def __init__(self, base: NonlinearitySpec, params: TruncationParams, N: int):
        self.base = base
        self.params = params
        self.N = N
        self.p = base.p
        self.q = base.q
        self.m = base.m
        self.u0 = base.u0
        s0, ell = params.s0, params.ell
        lo, hi = ell_range(base.p, N)
        if not (lo < ell < hi):
            raise ValidationError(f"ell={ell} outside the admissible range ({lo}, {hi})")
        if s0 <= params.M:
            raise ValidationError(f"s0={s0} must exceed M={params.M}")
        if params.k_inf is not None and s0 <= params.k_inf:
            raise ValidationError(f"s0={s0} must exceed K_inf={params.k_inf:.4g}")
        if base.kind == "power":
            self._init_power()
        else:
            self._init_general()

    # -- pure power branch ------------------------------------------------

    def _init_power(self):
        p, q = self.p, self.q
        s0, ell = self.params.s0, self.params.ell
        self._A = (q - 1.0) / (ell - 1.0) * s0 ** (q - ell)
        self._junction = s0
        # primitive constants on the tail branch
        self._tail_const = s0**q / q
        self._tail_lin = s0 ** (q - 1.0) - self._A * s0 ** (ell - 1.0)

    def _f_power(self, s):
        s = np.asarray(s, dtype=float)
        s0, ell, q = self.params.s0, self.params.ell, self.q
        lowmask = s <= s0
        out = np.empty_like(s)
        out[lowmask] = np.abs(s[lowmask]) ** (q - 1.0)
        st = s[~lowmask]
        out[~lowmask] = s0 ** (q - 1.0) + self._A * (st ** (ell - 1.0) - s0 ** (ell - 1.0))
        return out

    def _fprime_power(self, s):
        s = np.asarray(s, dtype=float)
        s0, ell, q = self.params.s0, self.params.ell, self.q
        lowmask = s <= s0
        out = np.empty_like(s)
        out[lowmask] = (q - 1.0) * np.abs(s[lowmask]) ** (q - 2.0)
        out[~lowmask] = self._A * (ell - 1.0) * s[~lowmask] ** (ell - 2.0)
        return out

    def _F_power(self, s):
        s = np.asarray(s, dtype=float)
        s0, ell, q = self.params.s0, self.params.ell, self.q
        lowmask = s <= s0
        out = np.empty_like(s)
        out[lowmask] = np.abs(s[lowmask]) ** q / q
        st = s[~lowmask]
        out[~lowmask] = (
            self._tail_const
            + self._tail_lin * (st - s0)
            + self._A * (st**ell - s0**ell) / ell
        )
        return out

    # -- general branch ----------------------------------------------------

    def _init_general(self):
        p, m = self.p, self.m
        s0, ell, delta = self.params.s0, self.params.ell, self.params.delta
        f, fp = self.base.f, self.base.fprime
        fs0 = float(f(s0))
        target = (m + delta) * s0 ** (p - 1.0)
        if fs0 < target - 1e-12 * max(1.0, target):
            raise ValidationError("f(s0) < (m+delta) s0^(p-1): (delta, M) invalid at s0")
        tangent = fs0 <= target * (1.0 + 1e-9)
        if tangent:
            self._junction = s0
            self._vj = fs0
            self._bridge = None
        else:
            eps = 0.1 * s0
            self._junction = s0 + eps
            dl = float(fp(s0))
            dr = (m + delta) * (p - 1.0) * (s0 + eps) ** (p - 2.0)
            vl = fs0
            vr = max(vl + eps * max(dl, dr), (m + delta) * (s0 + eps) ** (p - 1.0) * 1.05)
            self._bridge = _HermiteBridge(s0, eps, vl, dl, vr, dr)
            # the bridge must stay above the (m+delta) power curve
            ss = np.linspace(s0, s0 + eps, 512)
            if np.any(self._bridge(ss) < (m + delta) * ss ** (p - 1.0) - 1e-10):
                raise ValidationError("Hermite bridge dips below (m+delta) s^(p-1)")
            if np.any(np.diff(self._bridge(ss)) < -1e-12):
                raise ValidationError("Hermite bridge is not nondecreasing")
            self._vj = vr
        self._tail_base = (m + delta) * self._junction ** (p - 1.0)
        self._F_cache = None

    def _f_general(self, s):
        s = np.asarray(s, dtype=float)
        p, m = self.p, self.m
        delta = self.params.delta
        sj = self._junction
        out = np.empty_like(s)
        low = s <= self.params.s0
        out[low] = self.base.f(s[low])
        if self._bridge is not None:
            mid = (~low) & (s <= sj)
            out[mid] = self._bridge(s[mid])
        high = s > sj
        sh = s[high]
        out[high] = (
            self._vj
            + (m + delta) * (sh ** (p - 1.0) - sj ** (p - 1.0))
            + (sh - sj) ** (self.params.ell - 1.0)
        )
        return out

    def _fprime_general(self, s):
        s = np.asarray(s, dtype=float)
        p, m = self.p, self.m
        delta, ell = self.params.delta, self.params.ell
        sj = self._junction
        out = np.empty_like(s)
        low = s <= self.params.s0
        out[low] = self.base.fprime(s[low])
        if self._bridge is not None:
            mid = (~low) & (s <= sj)
            out[mid] = self._bridge.deriv(s[mid])
        high = s > sj
        sh = s[high]
        out[high] = (m + delta) * (p - 1.0) * sh ** (p - 2.0) + (ell - 1.0) * (
            sh - sj
        ) ** (ell - 2.0)
        return out

    def _F_general(self, s):
        """Primitive by cached cumulative quadrature up to the junction,
        closed form on the tail."""
        s = np.asarray(s, dtype=float)
        if self._F_cache is None:
            self._build_F_cache()
        xs, cums = self._F_cache
        out = np.interp(np.clip(s, 0.0, self._junction), xs, cums)
        high = s > self._junction
        if np.any(high):
            sh = s[high]
            p, m = self.p, self.m
            delta, ell = self.params.delta, self.params.ell
            sj = self._junction
            tail = (
                self._vj * (sh - sj)
                + (m + delta) * ((sh**p - sj**p) / p - sj ** (p - 1.0) * (sh - sj))
                + (sh - sj) ** ell / ell
            )
            out[high] = cums[-1] + tail
        return out

    def _build_F_cache(self):
        # 5-point Gauss-Legendre per subinterval, cumulative; the grid is
        # fine enough that interpolation error is far below solver tolerances
        nseg = 4096
        xs = np.linspace(0.0, self._junction, nseg + 1)
        gl_x, gl_w = np.polynomial.legendre.leggauss(5)
        a, b = xs[:-1], xs[1:]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        pts = mid[:, None] + half[:, None] * gl_x[None, :]
        vals = self.f(pts.ravel()).reshape(pts.shape)
        seg = (vals * gl_w[None, :]).sum(axis=1) * half
        cums = np.concatenate([[0.0], np.cumsum(seg)])
        self._F_cache = (xs, cums)

    # -- public interface --------------------------------------------------
    # The truncation is extended by zero on (-inf, 0); iterates that dip
    # negative see no forcing there.

    def _dispatch(self, s, power_fn, general_fn):
        s = np.asarray(s, dtype=float)
        scalar = s.ndim == 0
        sv = np.atleast_1d(s)
        out = np.zeros_like(sv)
        pos = sv > 0.0
        if np.any(pos):
            branch = power_fn if self.base.kind == "power" else general_fn
            out[pos] = branch(sv[pos])
        return float(out[0]) if scalar else out

    def f(self, s):
        return self._dispatch(s, self._f_power, self._f_general)

    def fprime(self, s):
        return self._dispatch(s, self._fprime_power, self._fprime_general)

    def F(self, s):
        return self._dispatch(s, self._F_power, self._F_general)


class _HermiteBridge:
    """Cubic Hermite blend matching values and slopes at both ends."""

    def __init__(self, s0, eps, vl, dl, vr, dr):
        self.s0, self.eps = s0, eps
        self.vl, self.dl, self.vr, self.dr = vl, dl, vr, dr

    def __call__(self, s):
        t = (np.asarray(s, dtype=float) - self.s0) / self.eps
        h00 = 2 * t**3 - 3 * t**2 + 1
        h10 = t**3 - 2 * t**2 + t
        h01 = -2 * t**3 + 3 * t**2
        h11 = t**3 - t**2
        return (
            h00 * self.vl
            + h10 * self.eps * self.dl
            + h01 * self.vr
            + h11 * self.eps * self.dr
        )

    def deriv(self, s):
        t = (np.asarray(s, dtype=float) - self.s0) / self.eps
        d00 = (6 * t**2 - 6 * t) / self.eps
        d10 = 3 * t**2 - 4 * t + 1
        d01 = (-6 * t**2 + 6 * t) / self.eps
        d11 = 3 * t**2 - 2 * t
        return d00 * self.vl + d10 * self.dl + d01 * self.vr + d11 * self.dr


def truncate(
    spec: NonlinearitySpec,
    N: int,
    s0: float,
    ell: Optional[float] = None,
    M: Optional[float] = None,
) -> TruncatedNonlinearity:
    """Build the subcritical truncation of the shifted nonlinearity."""
    if ell is None:
        ell = default_ell(spec.p, N)
    delta, M_, k_pm1, k_inf = a_priori_constants(spec.f, spec.m, spec.p, N, M=M)
    params = TruncationParams(s0, ell, delta, M_, k_pm1, k_inf)
    return TruncatedNonlinearity(spec, params, N)


def truncate_pure_power(
    p: float, q: float, N: int, s0: float = 2.0, ell: Optional[float] = None
) -> TruncatedNonlinearity:
    spec = pure_power(p, q)
    if ell is None:
        ell = default_ell(p, N)
    # for s^(q-1) the constants are available in closed form: the ratio
    # s^(q-p) exceeds 1 + delta for s >= M whenever M > 1, and the
    # truncation needs M strictly inside (1, s0)
    M = min(0.5 * (1.0 + s0), 2.0)
    if M <= 1.0:
        raise ValidationError(f"s0={s0} too small for the pure-power truncation")
    delta = M ** (q - p) - 1.0
    volume = ball_volume(N)
    k_pm1 = ((1.0 + 1.0 / delta) * M ** (p - 1.0) * volume) ** (1.0 / (p - 1.0))
    params = TruncationParams(s0, ell, delta, M, k_pm1, None)
    return TruncatedNonlinearity(spec, params, N)


def cone_window(
    trunc: TruncatedNonlinearity, cap: float = _SCAN_CAP
) -> tuple[float, float]:
    """Neighboring constant equilibria (u_minus, u_plus) around u0.

    Roots of f_t(t) = m t^(p-1) bracketing u0; u_plus = +inf when no root
    lies below the scan cap and the tail stays above the power curve.
    """
    m, p, u0 = trunc.m, trunc.p, trunc.u0
    gap = lambda t: trunc.f(t) - m * np.asarray(t, dtype=float) ** (p - 1.0)
    slope_gap = float(trunc.fprime(u0)) - m * (p - 1.0) * u0 ** (p - 2.0)
    if abs(float(gap(u0))) > 1e-8 * max(1.0, m * u0 ** (p - 1.0)):
        raise ValidationError(f"u0={u0} is not an equilibrium of the truncation")
    if slope_gap <= 1e-8 * max(1.0, m * u0 ** (p - 2.0)):
        raise ValidationError("degenerate tangential crossing at u0; (f3) fails")

    # below u0: uniform scan is fine since u0 is O(1)
    t_lo = np.linspace(u0 * 1e-6, u0 * (1.0 - 1e-9), 20000)
    g_lo = gap(t_lo)
    u_minus = 0.0
    idx = np.nonzero(np.sign(g_lo[:-1]) != np.sign(g_lo[1:]))[0]
    if idx.size:
        i = idx[-1]
        u_minus = _bisect(lambda x: float(gap(x)), t_lo[i], t_lo[i + 1])

    # above u0: geometric scan out to the cap
    t_hi = np.geomspace(u0 * (1.0 + 1e-9), cap, 20000)
    g_hi = gap(t_hi)
    u_plus = math.inf
    idx = np.nonzero(np.sign(g_hi[:-1]) != np.sign(g_hi[1:]))[0]
    if idx.size:
        i = idx[0]
        u_plus = _bisect(lambda x: float(gap(x)), t_hi[i], t_hi[i + 1])
    return u_minus, u_plus
