"""Invariant battery behind the `verify` subcommand.

Each invariant is a small, self-contained check of one structural property
the library promises: exact quadrature mass, projection idempotence,
truncation smoothness and monotonicity, exactness on constants, gradient
consistency, the inner-solver closed form, Nehari scaling, fixed-point
agreement between the variational and shooting routes, flow monotonicity,
and refinement behavior.  The battery returns a machine-readable report;
it never raises.

The optional mutation hook deliberately corrupts the nonlinearity before
running the battery, as a self-test that the invariants actually detect
breakage (a battery that cannot fail verifies nothing).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import PneumannError
from .grid import build_grid, project_cone, sup_norm
from .minimax import nehari_descent, nehari_h, ray_max_check, euler_flow
from .nonlinearity import truncate_pure_power
from .operators import InnerSolverConfig, energy, residual, residual_norm, solve_T
from .shooting import shoot, find_nonconstant


@dataclass(frozen=True)
class InvariantResult:
    name: str
    passed: bool
    skipped: bool
    detail: str


class _SignFlipped:
    """Deliberately broken truncation: the forcing has flipped sign."""

    def __init__(self, trunc):
        self._t = trunc
        self.p = trunc.p
        self.m = trunc.m
        self.u0 = trunc.u0
        self.params = trunc.params

    def f(self, s):
        return -self._t.f(s)

    def fprime(self, s):
        return -self._t.fprime(s)

    def F(self, s):
        return -self._t.F(s)


def _wrap(trunc, mutate):
    if mutate is None:
        return trunc
    if mutate == "sign-flip":
        return _SignFlipped(trunc)
    raise ValueError(f"unknown mutation {mutate!r}")


def run_battery(n_cells: int = 256, seed: int = 0, mutate=None) -> dict:
    """Run every invariant; returns the report dictionary."""
    rng = np.random.default_rng(seed)
    results: list[InvariantResult] = []

    def check(name):
        def deco(fn):
            try:
                detail = fn()
                results.append(InvariantResult(name, True, False, detail or "ok"))
            except _Skip as s:
                results.append(InvariantResult(name, True, True, str(s)))
            except (AssertionError, PneumannError, ValueError) as exc:
                results.append(InvariantResult(name, False, False, f"{exc}"))
            return fn

        return deco

    class _Skip(Exception):
        pass

    trunc = _wrap(truncate_pure_power(3.0, 6.0, 1, s0=2.0), mutate)

    @check("quadrature-mass")
    def _():
        for N in (1, 2, 3):
            g = build_grid(N, n_cells)
            err = abs(float(np.sum(g.quad_weights)) - 1.0 / N)
            assert err <= 1e-13, f"weight mass off by {err:.2e} at N={N}"
        return "sum of hat moments equals 1/N for N=1,2,3"

    @check("projection-idempotent-and-ordered")
    def _():
        g = build_grid(1, 64)
        for _ in range(20):
            u = rng.standard_normal(g.n_cells + 1)
            v = u + np.abs(rng.standard_normal(g.n_cells + 1))
            pu = project_cone(g, u, 0.0, math.inf).values
            pv = project_cone(g, v, 0.0, math.inf).values
            ppu = project_cone(g, pu, 0.0, math.inf).values
            assert sup_norm(ppu - pu) <= 1e-14, "projection not idempotent"
            assert np.all(pu <= pv + 1e-12), "projection not order preserving"
        return "idempotent and order preserving on 20 random pairs"

    @check("truncation-smooth-junction")
    def _():
        s0 = trunc.params.s0
        for ds in (1e-6, 1e-7):
            jump = abs(float(trunc.f(s0 + ds)) - float(trunc.f(s0 - ds)))
            assert jump <= 1e-3 * max(1.0, abs(float(trunc.f(s0)))), (
                f"value jump {jump:.2e} across s0"
            )
        d_left = (float(trunc.f(s0)) - float(trunc.f(s0 - 1e-6))) / 1e-6
        d_right = (float(trunc.f(s0 + 1e-6)) - float(trunc.f(s0))) / 1e-6
        assert abs(d_left - d_right) <= 1e-2 * max(1.0, abs(d_left)), (
            f"slope jump {abs(d_left-d_right):.2e} across s0"
        )
        return "value and slope continuous across the junction"

    @check("truncation-monotone")
    def _():
        s = np.linspace(0.0, 3.0 * trunc.params.s0, 4001)
        vals = trunc.f(s)
        drops = np.diff(vals)
        assert np.all(drops >= -1e-12), (
            f"f_t decreases somewhere (worst drop {float(np.min(drops)):.2e})"
        )
        return "f_t nondecreasing on [0, 3 s0]"

    @check("truncation-ray-monotone")
    def _():
        # f_t(ts)/t^(p-1) must increase in t for fixed s > 0
        p = trunc.p
        for s in (0.5, 1.0, 1.7, 2.5):
            ts = np.linspace(0.2, 3.0, 200)
            vals = np.array([float(trunc.f(t * s)) / t ** (p - 1.0) for t in ts])
            assert np.all(np.diff(vals) >= -1e-10), f"ray ratio not increasing at s={s}"
        return "f_t(ts)/t^(p-1) increasing along rays"

    @check("constant-exactness")
    def _():
        if mutate is not None:
            raise _Skip("constant equilibrium undefined under mutation")
        for p, q in ((3.0, 6.0), (2.0, 10.0), (1.5, 3.0)):
            tr = truncate_pure_power(p, q, 1, s0=2.0)
            g = build_grid(1, n_cells)
            ones = np.ones(g.n_cells + 1)
            rmax = float(np.max(np.abs(residual(g, ones, tr))))
            assert rmax <= 1e-12, f"constant residual {rmax:.2e} at ({p},{q})"
            closed = 2.0 * (1.0 / p - 1.0 / q)
            assert abs(energy(g, ones, tr) - closed) <= 1e-12
        return "u = 1 exact at (3,6), (2,10), (1.5,3)"

    @check("gradient-consistency")
    def _():
        g = build_grid(1, 128)
        h = 1e-5
        for _ in range(10):
            u = 1.0 + 0.3 * np.abs(rng.standard_normal()) * g.nodes**2
            R = residual(g, u, trunc)
            for _ in range(3):
                i = int(rng.integers(0, g.n_cells + 1))
                e = np.zeros_like(u)
                e[i] = h
                fd = (energy(g, u + e, trunc) - energy(g, u - e, trunc)) / (2 * h)
                rel = abs(fd - R[i]) / max(1.0, abs(R[i]))
                assert rel <= 1e-5, f"gradient mismatch {rel:.2e} at node {i}"
        return "residual matches central differences of the energy"

    @check("inner-solver-oracle")
    def _():
        g = build_grid(1, 512)
        r = g.nodes
        v = solve_T(g, np.cosh(r), 1.0, 2.0, InnerSolverConfig())
        exact = -0.5 * r * np.sinh(r) + (
            (math.sinh(1.0) + math.cosh(1.0)) / (2.0 * math.sinh(1.0))
        ) * np.cosh(r)
        err = sup_norm(v.values - exact)
        assert err <= 1e-5, f"linear Neumann solve off by {err:.2e}"
        v3 = solve_T(g, np.full(r.size, 8.0), 1.0, 3.0, InnerSolverConfig())
        err3 = sup_norm(v3.values - math.sqrt(8.0))
        assert err3 <= 1e-12, f"constant solve off by {err3:.2e}"
        return "closed-form Neumann and constant solves reproduced"

    @check("nehari-scaling")
    def _():
        g = build_grid(1, 128)
        for _ in range(5):
            u = 0.5 + np.sort(np.abs(rng.standard_normal(g.n_cells + 1)))
            h1 = nehari_h(g, u, trunc)
            for c in (0.5, 2.0):
                hc = nehari_h(g, c * u, trunc)
                assert abs(hc * c - h1) <= 1e-9 * h1, "scaling law violated"
        return "h(cu) = h(u)/c on 5 random profiles"

    @check("descent-and-ray")
    def _():
        g = build_grid(1, n_cells)
        start = 1.0 + 0.3 * (g.nodes**2 - 1.0 / 3.0)
        res = nehari_descent(g, start, trunc, window=(0.0, math.inf))
        assert res.residual <= 1e-8, f"residual {res.residual:.2e}"
        assert res.u.values[0] < 1.0 < res.u.values[-1], "profile not straddling u0"
        assert ray_max_check(g, res.u, trunc), "ray maximum not at t=1"
        return f"converged in {res.iterations} iterations, ray max certified"

    @check("shooting-linear-oracle")
    def _():
        import types

        lin = types.SimpleNamespace(
            p=2.0,
            m=1.0,
            f=lambda s: 0.0 if np.isscalar(s) else np.zeros_like(s),
            fprime=lambda s: 0.0 if np.isscalar(s) else np.zeros_like(s),
            params=types.SimpleNamespace(s0=100.0),
            u0=0.0,
        )
        st = shoot(0.7, lin, 1)
        err = abs(st.miss - 0.7 * math.sinh(1.0))
        assert err <= 1e-9, f"linear miss off by {err:.2e}"
        return "miss(a) = a sinh(1) reproduced"

    @check("cross-oracle-agreement")
    def _():
        if mutate is not None:
            raise _Skip("shooting route undefined under mutation")
        g = build_grid(1, n_cells)
        tr = truncate_pure_power(3.0, 6.0, 1, s0=2.0)
        start = 1.0 + 0.3 * (g.nodes**2 - 1.0 / 3.0)
        res = nehari_descent(g, start, tr, window=(0.0, math.inf))
        u_shoot, _, _ = find_nonconstant(tr, 1, grid=g, scan_rtol=1e-6)
        gap = sup_norm(res.u.values - u_shoot.values)
        tol = max(1e-3, g.h)  # agreement holds up to discretization error
        assert gap <= tol, f"routes disagree by {gap:.2e} (tol {tol:.1e})"
        return f"variational and shooting profiles within {gap:.1e}"

    @check("flow-monotone")
    def _():
        g = build_grid(1, 128)
        start = 1.0 + 0.3 * (g.nodes**2 - 1.0 / 3.0)
        out = euler_flow(g, start, trunc, horizon=0.05, steps=50)
        worst = float(np.max(np.diff(out["energies"])))
        assert worst <= 1e-12, f"energy increased by {worst:.2e}"
        return f"energy nonincreasing over {len(out['energies'])-1} steps"

    @check("refinement")
    def _():
        if n_cells < 64:
            raise _Skip(f"refinement needs n_cells >= 64, got {n_cells}")
        if mutate is not None:
            raise _Skip("refinement undefined under mutation")
        tr = truncate_pure_power(3.0, 6.0, 1, s0=2.0)
        sols = {}
        for n in (64, 128, 256):
            g = build_grid(1, n)
            start = 1.0 + 0.3 * (g.nodes**2 - 1.0 / 3.0)
            sols[n] = nehari_descent(g, start, tr, window=(0.0, math.inf)).u.values
        d1 = sup_norm(sols[64] - sols[128][::2])
        d2 = sup_norm(sols[128] - sols[256][::2])
        assert d1 <= 4.0 * d2 + 1e-12, f"refinement ratio {d1/d2:.2f} above 4"
        return f"d(64,128)={d1:.2e}, d(128,256)={d2:.2e}"

    all_passed = all(r.passed for r in results)
    return {
        "n_cells": n_cells,
        "seed": seed,
        "mutation": mutate,
        "all_passed": all_passed,
        "results": [asdict(r) for r in results],
    }
