"""Shooting solver, limit profile, phase-plane checks, and the sweep."""

import math
from types import SimpleNamespace

import numpy as np
import pytest

from pneumann.errors import NoSignChange, OutOfRange, ValidationError
from pneumann.grid import build_grid
from pneumann.nonlinearity import truncate_pure_power
from pneumann.shooting import (
    find_nonconstant,
    limit_sweep,
    phase_diagnostics,
    shoot,
    solve_G,
)


def _linear_toy(s0=100.0):
    # f = 0 turns the radial problem into -u'' + u = 0 (p = 2, N = 1),
    # solved by a*cosh(r) with miss a*sinh(1)
    params = SimpleNamespace(s0=s0)
    zero = lambda s: np.zeros_like(np.asarray(s, dtype=float))
    return SimpleNamespace(p=2.0, m=1.0, u0=1.0, f=zero, fprime=zero, params=params)


def test_shoot_linear_closed_form():
    toy = _linear_toy()
    a = 0.5
    state = shoot(a, toy, 1, rtol=1e-12, atol=1e-14)
    assert state.status == "ok"
    assert state.miss == pytest.approx(a * math.sinh(1.0), abs=1e-9)
    assert np.max(np.abs(state.u - a * np.cosh(state.r))) <= 1e-9
    assert np.max(np.abs(state.du - a * np.sinh(state.r))) <= 1e-7


def test_shoot_equilibrium_height_is_flat():
    tr = truncate_pure_power(3.0, 6.0, 1, s0=2.0)
    state = shoot(1.0, tr, 1, rtol=1e-12)
    assert abs(state.miss) <= 1e-10
    assert np.max(np.abs(state.u - 1.0)) <= 1e-10


def test_shoot_rejects_nonpositive_height():
    tr = truncate_pure_power(3.0, 6.0, 1, s0=2.0)
    with pytest.raises(ValidationError):
        shoot(0.0, tr, 1)


def test_shoot_raises_on_blowup():
    # with the cap at 10*s0 = 1, the growing cosh branch trips the event
    toy = _linear_toy(s0=0.1)
    with pytest.raises(OutOfRange):
        shoot(0.9, toy, 1)


@pytest.fixture(scope="module")
def shot_361():
    tr = truncate_pure_power(3.0, 6.0, 1, s0=2.0)
    g = build_grid(1, 512)
    u_fn, a_star, diag = find_nonconstant(tr, 1, grid=g)
    return tr, g, u_fn, a_star, diag


def test_find_nonconstant_anchors(shot_361):
    # frozen values confirmed by the independent descent route and by
    # halving the integrator tolerance
    tr, g, u_fn, a_star, diag = shot_361
    assert a_star == pytest.approx(0.864268533091, abs=1e-6)
    assert u_fn.values[-1] == pytest.approx(1.106415919298, abs=1e-6)
    assert u_fn.values[0] == pytest.approx(a_star, abs=1e-9)
    assert diag["min_cell_slope"] >= -1e-10
    assert diag["bracket_width"] <= 1e-13
    assert u_fn.values[0] < 1.0 < u_fn.values[-1]


def test_find_nonconstant_no_solution_regime():
    tr = truncate_pure_power(2.0, 10.0, 1, s0=2.0)
    with pytest.raises(NoSignChange):
        find_nonconstant(tr, 1, grid=build_grid(1, 128))


def test_limit_profile_linear_closed_form():
    # p = 2, N = 1: G = cosh(r)/cosh(1), G(0) = sech(1), level tanh(1)
    out = solve_G(2.0, 1)
    assert out["G0"] == pytest.approx(1.0 / math.cosh(1.0), abs=1e-9)
    assert out["c_infty"] == pytest.approx(math.tanh(1.0), abs=1e-9)
    assert out["u"][-1] == 1.0
    want = np.cosh(out["r"]) / math.cosh(1.0)
    assert np.max(np.abs(out["u"] - want)) <= 1e-9


def test_limit_profile_p3_anchors():
    # frozen from a run at integrator tolerance 1e-12, stable to 1e-8
    # under tolerance halving
    out = solve_G(3.0, 2)
    assert out["G0"] == pytest.approx(0.6491847367, abs=1e-6)
    assert out["c_infty"] == pytest.approx(0.75143432, abs=1e-6)
    assert np.all(np.diff(out["u"]) >= -1e-12)
    assert out["norm_p"] == pytest.approx(3.0 * out["c_infty"], rel=1e-14)


def test_limit_profile_interpolates_onto_grid():
    g = build_grid(1, 64)
    out = solve_G(2.0, 1, grid=g)
    assert out["G"].grid is g
    assert out["G"].values[-1] == pytest.approx(1.0, abs=1e-12)


def test_limit_profile_rejects_bad_p():
    with pytest.raises(ValidationError):
        solve_G(1.0, 1)


def test_phase_first_integral_with_integrator_slopes(shot_361):
    # for N = 1 the Liapunov function is an exact first integral, so with
    # integrator slopes it must be flat to the ODE tolerance
    tr, g, u_fn, a_star, diag = shot_361
    rep = phase_diagnostics(g, u_fn.values, 3.0, 6.0, slopes=diag["du"])
    assert rep.increase_violations == 0
    assert rep.max_increase <= 1e-8
    inner = rep.liapunov[1:-1]  # end slopes are pinned to zero
    assert np.max(np.abs(inner - inner[0])) <= 1e-8
    assert rep.in_sigma
    assert rep.max_u <= rep.sup_bound + 1e-12
    assert rep.max_slope <= rep.slope_bound + 1e-12


def test_phase_cell_slopes_wobble_but_stay_bounded(shot_361):
    # averaged cell slopes see the Liapunov function only to O(h^2); the
    # integrator-slope route must be strictly sharper
    tr, g, u_fn, a_star, diag = shot_361
    fe = phase_diagnostics(g, u_fn.values, 3.0, 6.0)
    ode = phase_diagnostics(g, u_fn.values, 3.0, 6.0, slopes=diag["du"])
    assert fe.max_increase <= 1e-4
    assert ode.max_increase < fe.max_increase


def test_phase_liapunov_decays_in_higher_dimension():
    tr = truncate_pure_power(3.0, 8.0, 2, s0=2.0)
    g = build_grid(2, 512)
    u_fn, a_star, diag = find_nonconstant(tr, 2, grid=g)
    rep = phase_diagnostics(g, u_fn.values, 3.0, 8.0, slopes=diag["du"])
    assert rep.increase_violations == 0
    assert rep.in_sigma
    # genuine decay, not just nonincrease: the damping term works
    assert rep.liapunov[0] - rep.liapunov[-2] > 1e-4


def test_sweep_rows_and_failure_marking():
    out = limit_sweep(2.0, 1, (10.0, 20.0), n_cells=256)
    rows = {row.q: row for row in out["rows"]}
    assert rows[10.0].status == "NoSignChange"
    assert math.isnan(rows[10.0].c_q)
    assert rows[10.0].h_q_G == pytest.approx(1.227171, abs=1e-3)
    ok = rows[20.0]
    assert ok.status == "ok"
    assert ok.c_q == pytest.approx(0.85974848, abs=1e-6)
    assert ok.c_q == pytest.approx(ok.c_q_nehari, abs=1e-6)
    assert ok.sup_dist_G == pytest.approx(0.160219, abs=1e-4)
    assert ok.h_q_G == pytest.approx(1.142888, abs=1e-3)
    assert ok.u_at_0 < 1.0 < ok.u_at_1
    assert out["c_infty"] == pytest.approx(math.tanh(1.0), abs=1e-8)
