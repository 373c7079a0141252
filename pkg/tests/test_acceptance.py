"""Acceptance gate: thirteen numbered criteria with pinned tolerances.

Each criterion is one test that prints a single verdict line before
asserting, so the transcript always carries the full scoreboard (run with
-v, or -s to see the lines of passing tests too).  Criteria 9 and 10 state
asymptotic monotonicity properties that the computed solutions genuinely
violate; they are asserted as stated and left red rather than weakened.
"""

import math

import numpy as np
import pytest

from pneumann.grid import build_grid, sup_norm
from pneumann.minimax import (
    default_perturbation,
    euler_flow,
    nehari_descent,
    nehari_h,
    nonconstancy_certificate,
    ray_max_check,
)
from pneumann.nonlinearity import truncate_pure_power
from pneumann.operators import energy, residual, tilde_T
from pneumann.shooting import find_nonconstant, limit_sweep, phase_diagnostics


def _verdict(num, name, ok, detail=""):
    tail = f"  [{detail}]" if detail else ""
    line = f"criterion {num:02d} {name}: {'PASS' if ok else 'FAIL'}{tail}"
    print(line)
    assert ok, line


def _decreasing(xs):
    return all(b < a for a, b in zip(xs, xs[1:]))


def _cone_profile(rng, n, lo=0.2, hi=1.8):
    v = np.cumsum(np.abs(rng.standard_normal(n + 1)))
    v = lo + (hi - lo) * (v - v[0]) / (v[-1] - v[0])
    return v


@pytest.fixture(scope="module")
def descent_361():
    """(p,q,N) = (3,6,1) descent solutions over a refinement ladder."""
    out = {}
    for n in (512, 1024, 2048, 4096):
        g = build_grid(1, n)
        tr = truncate_pure_power(3.0, 6.0, 1, s0=2.0)
        start = 1.0 + 0.3 * default_perturbation(g)
        out[n] = (g, tr, nehari_descent(g, start, tr))
    return out


@pytest.fixture(scope="module")
def shot_361_2048():
    tr = truncate_pure_power(3.0, 6.0, 1, s0=2.0)
    g = build_grid(1, 2048)
    return (g, tr) + find_nonconstant(tr, 1, grid=g)


@pytest.fixture(scope="module")
def shot_382():
    tr = truncate_pure_power(3.0, 8.0, 2, s0=2.0)
    g = build_grid(2, 1024)
    return (g, tr) + find_nonconstant(tr, 2, grid=g)


@pytest.fixture(scope="module")
def sweep_p2():
    return limit_sweep(2.0, 1, (10.0, 20.0, 40.0, 80.0), n_cells=1024)


@pytest.fixture(scope="module")
def sweep_p3():
    return limit_sweep(3.0, 2, (8.0, 16.0, 32.0), n_cells=1024)


def test_criterion_01_constant_solution_exactness():
    worst_r, worst_e = 0.0, 0.0
    for p, q in ((3.0, 6.0), (2.0, 10.0), (1.5, 3.0)):
        for N in (1, 2, 3):
            g = build_grid(N, 256)
            tr = truncate_pure_power(p, q, N, s0=2.0)
            ones = np.ones(g.n_cells + 1)
            worst_r = max(worst_r, sup_norm(residual(g, ones, tr)))
            vol = g.angular_factor / N
            want = vol * (1.0 / p - 1.0 / q)
            worst_e = max(worst_e, abs(energy(g, ones, tr) - want))
    ok = worst_r <= 1e-12 and worst_e <= 1e-12
    _verdict(1, "constant-solution exactness", ok,
             f"max residual {worst_r:.2e}, max energy gap {worst_e:.2e}")


def test_criterion_02_cone_preservation():
    rng = np.random.default_rng(2)
    worst = 0.0
    for N in (1, 2, 3):
        g = build_grid(N, 512)
        tr = truncate_pure_power(3.0, 6.0, N, s0=2.0)
        for _ in range(100):
            u = _cone_profile(rng, 512)
            out = tilde_T(g, u, tr).values
            if np.min(out) < 0.0:
                worst = -math.inf
            worst = min(worst, float(np.min(np.diff(out))) / g.h)
    ok = worst >= -1e-8
    _verdict(2, "cone preservation under the composed map", ok,
             f"min cell slope {worst:.2e} over 300 profiles")


def test_criterion_03_gradient_consistency():
    rng = np.random.default_rng(3)
    h = 1e-5
    worst = 0.0
    for k in range(50):
        N = 1 + k % 2
        g = build_grid(N, 96)
        tr = truncate_pure_power(3.0, 6.0, N, s0=2.0)
        u = _cone_profile(rng, 96)
        R = residual(g, u, tr)
        i = int(rng.integers(0, 97))
        up, um = u.copy(), u.copy()
        up[i] += h
        um[i] -= h
        fd = (energy(g, up, tr) - energy(g, um, tr)) / (2 * h)
        # relative to the larger of 1 and the entry; the sampled entries
        # are O(1) here
        worst = max(worst, abs(fd - R[i]) / max(1.0, abs(R[i])))
    ok = worst <= 1e-5
    _verdict(3, "gradient consistency against finite differences", ok,
             f"max relative error {worst:.2e} over 50 pairs")


def test_criterion_04_cross_oracle_equivalence(descent_361, shot_361_2048):
    g, tr, res = descent_361[2048]
    gs, trs, u_shoot, a_star, diag = shot_361_2048
    gap = sup_norm(res.u.values - u_shoot.values)
    des, sho = res.u.values, u_shoot.values
    ordering = des[0] < 1.0 < des[-1] and sho[0] < 1.0 < sho[-1]
    ok = gap <= 1e-4 and ordering
    _verdict(4, "descent and shooting agree", ok,
             f"sup gap {gap:.2e}, u(0)<1<u(1) {ordering}")


def test_criterion_05_phase_plane_suite(shot_361_2048, shot_382):
    problems = []
    for label, pack, (p, q) in (
        ("(3,6,1)", shot_361_2048, (3.0, 6.0)),
        ("(3,8,2)", shot_382, (3.0, 8.0)),
    ):
        g, tr, u_fn, a_star, diag = pack
        rep = phase_diagnostics(g, u_fn.values, p, q, slopes=diag["du"])
        if rep.increase_violations != 0:
            problems.append(f"{label}: {rep.increase_violations} increases")
        if rep.max_u > rep.sup_bound + 1e-10:
            problems.append(f"{label}: sup {rep.max_u:.6f} > {rep.sup_bound:.6f}")
        if rep.max_slope > rep.slope_bound + 1e-10:
            problems.append(
                f"{label}: slope {rep.max_slope:.6f} > {rep.slope_bound:.6f}"
            )
    _verdict(5, "Liapunov decay and trapping-region bounds", not problems,
             "; ".join(problems) or "zero violations at 1e-8")


def test_criterion_06_nonconstancy_sign_dichotomy():
    g = build_grid(1, 512)
    problems = []
    for p, q, sign, word in ((3.0, 6.0, -1.0, "negative"),
                             (1.5, 3.0, 1.0, "positive")):
        tr = truncate_pure_power(p, q, 1, s0=2.0)
        cert = nonconstancy_certificate(g, tr, s_list=(0.02, 0.05, 0.1))
        for row in cert["rows"]:
            if row["delta"] * sign <= 0.0:
                problems.append(f"p={p}, s={row['s']}: delta not {word}")
    _verdict(6, "energy-gap sign dichotomy around the constant",
             not problems, "; ".join(problems))


def test_criterion_07_nehari_scaling_law():
    g = build_grid(1, 128)
    tr = truncate_pure_power(3.0, 6.0, 1, s0=2.0)
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        u = _cone_profile(rng, 128)
        base = nehari_h(g, u, tr)
        for c in (0.5, 2.0):
            worst = max(worst, abs(c * nehari_h(g, c * u, tr) - base) / base)
    ok = worst <= 1e-9
    _verdict(7, "Nehari projection scaling law", ok,
             f"max relative defect {worst:.2e}")


def test_criterion_08_ray_max_certification(descent_361):
    problems = []
    for n in (512, 2048):
        g, tr, res = descent_361[n]
        if not ray_max_check(g, res.u.values, tr):
            problems.append(f"n={n}: ray max off t=1")
    g2 = build_grid(2, 512)
    tr2 = truncate_pure_power(3.0, 6.0, 2, s0=2.0)
    res2 = nehari_descent(g2, 1.0 + 0.3 * default_perturbation(g2), tr2)
    if not ray_max_check(g2, res2.u.values, tr2):
        problems.append("(3,6,2): ray max off t=1")
    _verdict(8, "ray energy peaks at the solution", not problems,
             "; ".join(problems) or "all converged solutions")


def test_criterion_09_asymptotics_closed_form_anchor(sweep_p2):
    rows = sweep_p2["rows"]
    c_inf = math.tanh(1.0)
    problems = []
    if abs(sweep_p2["c_infty"] - c_inf) > 1e-8:
        problems.append("computed c_infty differs from tanh 1")
    bad = [row for row in rows if row.status != "ok"]
    for row in bad:
        problems.append(f"q={row.q:g} produced no solution ({row.status})")
    gaps = [abs(row.c_q - c_inf) for row in rows]
    if not _decreasing(gaps):
        problems.append(
            "|c_q - tanh 1| not strictly decreasing: "
            + ", ".join(f"{gv:.4f}" for gv in gaps)
        )
    if not gaps[-1] <= 0.05:
        problems.append(f"|c_80 - tanh 1| = {gaps[-1]:.6f} > 0.05")
    sups = [row.sup_dist_G for row in rows]
    if not _decreasing(sups):
        problems.append("sup distance to cosh(r)/cosh(1) not strictly decreasing")
    hs = [row.h_q_G for row in rows]
    if not all(0.8 < hv < 1.05 for hv in hs):
        problems.append(
            "h_q(G) outside (0.8, 1.05): "
            + ", ".join(f"{hv:.4f}" for hv in hs)
        )
    if not _decreasing([abs(hv - 1.0) for hv in hs]):
        problems.append("|h_q(G) - 1| not decreasing")
    _verdict(9, "pure-power asymptotics, closed-form anchor",
             not problems, "; ".join(problems))


def test_criterion_10_asymptotics_p3(sweep_p3):
    rows = sweep_p3["rows"]
    c_inf = sweep_p3["c_infty"]
    problems = []
    bad = [row for row in rows if row.status != "ok"]
    for row in bad:
        problems.append(f"q={row.q:g} produced no solution ({row.status})")
    sups = [row.sup_dist_G for row in rows]
    if not _decreasing(sups):
        problems.append("||u_q - G||_inf not strictly decreasing")
    gaps = [abs(row.c_q - c_inf) for row in rows]
    if not _decreasing(gaps):
        problems.append(
            "|c_q - c_infty| not strictly decreasing: "
            + ", ".join(f"{gv:.4f}" for gv in gaps)
        )
    low = [row for row in rows if not c_inf <= row.c_q]
    for row in low:
        problems.append(f"c_{row.q:g} = {row.c_q:.4f} < c_infty = {c_inf:.4f}")
    _verdict(10, "asymptotics toward the limit profile, p=3",
             not problems, "; ".join(problems))


def test_criterion_11_flow_energy_monotone():
    rng = np.random.default_rng(11)
    g = build_grid(1, 128)
    tr = truncate_pure_power(3.0, 6.0, 1, s0=2.0)
    worst = -math.inf
    for _ in range(10):
        start = _cone_profile(rng, 128, lo=0.3, hi=1.7)
        out = euler_flow(g, start, tr, horizon=1.0, steps=1000)
        if len(out["energies"]) > 1:
            worst = max(worst, float(np.max(np.diff(out["energies"]))))
    ok = worst <= 1e-12
    _verdict(11, "descending-flow energy monotonicity", ok,
             f"max energy increase {worst:.2e} over 10 trajectories")


def test_criterion_12_truncation_invariance():
    sols = {}
    for s0 in (2.0, 3.0):
        for ell in (3.5, 4.5):
            g = build_grid(1, 512)
            tr = truncate_pure_power(3.0, 6.0, 1, s0=s0, ell=ell)
            start = 1.0 + 0.3 * default_perturbation(g)
            sols[(s0, ell)] = nehari_descent(g, start, tr).u.values
    vals = list(sols.values())
    worst_gap = max(
        sup_norm(a - b) for i, a in enumerate(vals) for b in vals[i + 1:]
    )
    worst_sup = max(sup_norm(v) for v in vals)
    ok = worst_gap <= 1e-6 and worst_sup < 2.0
    _verdict(12, "truncation-parameter invariance", ok,
             f"max pairwise gap {worst_gap:.2e}, max sup {worst_sup:.4f}")


def test_criterion_13_refinement_convergence(descent_361):
    u1 = descent_361[1024][2].u.values
    u2 = descent_361[2048][2].u.values
    u3 = descent_361[4096][2].u.values
    d12 = sup_norm(u2[::2] - u1)
    d23 = sup_norm(u3[::2] - u2)
    ok = d12 <= 4.0 * d23
    _verdict(13, "refinement convergence", ok,
             f"d(1024,2048)={d12:.2e}, d(2048,4096)={d23:.2e}, "
             f"ratio {d12 / d23:.2f}")
