"""Radial grid, quadrature against r^(N-1) dr, norms, and cone projection.

Profiles live on a uniform node grid over [0, 1].  Integrals over the unit
ball reduce to weighted 1-d sums: for radial h,

    int_B h(|x|) dx = omega * int_0^1 h(r) r^(N-1) dr,

where omega is the surface measure of the unit sphere.  Node weights are the
exact moments of the piecewise-linear hat functions against r^(N-1) dr, so
the rule integrates piecewise-linear profiles exactly and sums to 1/N to
machine precision.  Gradients are stored on cells, which makes the gradient
quadrature exact for piecewise-linear profiles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .errors import ValidationError


@dataclass(frozen=True)
class RadialGrid:
    """Uniform discretization of [0, 1] carrying the radial measure.

    Attributes
    ----------
    N : int
        Space dimension; the weight is r^(N-1).
    n_cells : int
        Number of cells; there are n_cells + 1 nodes.
    nodes : array of shape (n_cells + 1,)
        Node radii, 0 = r_0 < ... < r_n = 1.
    quad_weights : array of shape (n_cells + 1,)
        Exact hat-function moments against r^(N-1) dr.  Sum equals 1/N.
    cell_masses : array of shape (n_cells,)
        Exact cell moments (r_{k+1}^N - r_k^N)/N for the gradient rule.
    angular_factor : float
        Surface measure omega of the unit sphere (omega = 2 for N = 1).
    """

    N: int
    n_cells: int
    nodes: NDArray[np.float64] = field(repr=False)
    quad_weights: NDArray[np.float64] = field(repr=False)
    cell_masses: NDArray[np.float64] = field(repr=False)
    angular_factor: float = 0.0

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells


@dataclass(frozen=True)
class RadialFunction:
    """A radial profile sampled at the grid nodes.

    The in_cone flag records that the values are nonnegative and
    nondecreasing; it is set by the cone projection and by solvers that
    verify membership.
    """

    grid: RadialGrid
    values: NDArray[np.float64] = field(repr=False)
    in_cone: bool = False

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.nodes.shape:
            raise ValidationError(
                f"values shape {vals.shape} does not match grid "
                f"({self.grid.nodes.shape})"
            )
        if not np.all(np.isfinite(vals)):
            raise ValidationError("profile contains non-finite values")
        object.__setattr__(self, "values", vals)

    def with_values(self, values, in_cone: bool = False) -> "RadialFunction":
        return RadialFunction(self.grid, np.asarray(values, dtype=float), in_cone)

    def to_csv_rows(self):
        """Rows (r_i, u_i) for delimited export."""
        return list(zip(self.grid.nodes.tolist(), self.values.tolist()))

    def to_json_record(self) -> dict:
        return {
            "N": self.grid.N,
            "n_cells": self.grid.n_cells,
            "values": self.values.tolist(),
        }

    @staticmethod
    def from_json_record(record: dict) -> "RadialFunction":
        g = build_grid(int(record["N"]), int(record["n_cells"]))
        return RadialFunction(g, np.asarray(record["values"], dtype=float))

    def to_json(self) -> str:
        return json.dumps(self.to_json_record())


def _hat_moments(nodes: NDArray[np.float64], N: int) -> NDArray[np.float64]:
    """Exact moments int phi_i(r) r^(N-1) dr of the hat basis."""
    a, b = nodes[:-1], nodes[1:]
    len_ = b - a
    m0 = (b**N - a**N) / N
    m1 = (b ** (N + 1) - a ** (N + 1)) / (N + 1)
    rising = (m1 - a * m0) / len_
    falling = (b * m0 - m1) / len_
    w = np.zeros(nodes.size)
    w[1:] += rising
    w[:-1] += falling
    return w


def build_grid(N: int, n_cells: int) -> RadialGrid:
    """Build the uniform radial grid for the unit ball in dimension N."""
    if N < 1 or int(N) != N:
        raise ValidationError(f"dimension N must be a positive integer, got {N}")
    if n_cells < 8:
        raise ValidationError(f"n_cells must be at least 8, got {n_cells}")
    N = int(N)
    nodes = np.linspace(0.0, 1.0, n_cells + 1)
    omega = 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)
    weights = _hat_moments(nodes, N)
    masses = (nodes[1:] ** N - nodes[:-1] ** N) / N
    return RadialGrid(N, n_cells, nodes, weights, masses, omega)


def _values(u) -> NDArray[np.float64]:
    return u.values if isinstance(u, RadialFunction) else np.asarray(u, dtype=float)


def integrate(grid: RadialGrid, phi) -> float:
    """Integral of phi over the ball: omega * sum_i w_i phi_i."""
    v = _values(phi)
    if v.shape != grid.nodes.shape:
        raise ValidationError("integrand does not live on this grid")
    return grid.angular_factor * float(grid.quad_weights @ v)


def derivative(grid: RadialGrid, u) -> NDArray[np.float64]:
    """Forward-difference slopes on cells, shape (n_cells,)."""
    v = _values(u)
    return np.diff(v) / np.diff(grid.nodes)


def gradient_lp(grid: RadialGrid, u, p: float) -> float:
    """int_B |u'|^p, exact for piecewise-linear u (cell-midpoint rule)."""
    d = derivative(grid, u)
    return grid.angular_factor * float(grid.cell_masses @ np.abs(d) ** p)


def w1p_norm(grid: RadialGrid, u, p: float, m: float = 1.0) -> float:
    """The norm (int_B |u'|^p + m|u|^p)^(1/p) used throughout."""
    if p <= 1:
        raise ValidationError(f"exponent p must exceed 1, got {p}")
    v = _values(u)
    bulk = grid.angular_factor * float(grid.quad_weights @ (m * np.abs(v) ** p))
    return (gradient_lp(grid, v, p) + bulk) ** (1.0 / p)


def sup_norm(u) -> float:
    return float(np.max(np.abs(_values(u))))


def lq_norm(grid: RadialGrid, u, q: float) -> float:
    v = _values(u)
    return integrate(grid, np.abs(v) ** q) ** (1.0 / q)


def _pava(values: NDArray[np.float64], weights: NDArray[np.float64]) -> NDArray[np.float64]:
    """Weighted isotonic regression by pool-adjacent-violators.

    Returns the nondecreasing vector minimizing sum_i w_i (x_i - v_i)^2.
    Stack of blocks, each carrying (mean, weight, count); amortized O(n).
    """
    means = []
    wsums = []
    counts = []
    for v, w in zip(values, weights):
        means.append(v)
        wsums.append(w)
        counts.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m2, w2, c2 = means.pop(), wsums.pop(), counts.pop()
            m1, w1, c1 = means.pop(), wsums.pop(), counts.pop()
            w = w1 + w2
            means.append((m1 * w1 + m2 * w2) / w)
            wsums.append(w)
            counts.append(c1 + c2)
    out = np.empty(values.size)
    pos = 0
    for m, c in zip(means, counts):
        out[pos : pos + c] = m
        pos += c
    return out


def project_cone(grid: RadialGrid, u, lower: float = 0.0, upper: float = math.inf) -> RadialFunction:
    """Project onto nondecreasing profiles within the window [lower, upper].

    Weighted isotonic regression in the grid-weighted L2 metric, then a
    clamp into the window.  Clamping a nondecreasing vector keeps it
    nondecreasing, and the composition is the exact weighted-L2 projection
    onto the intersection.  Idempotent.
    """
    if lower > upper:
        raise ValidationError(f"empty window: lower {lower} > upper {upper}")
    v = _values(u)
    if np.all(np.diff(v) >= 0.0) and v[0] >= lower and v[-1] <= upper:
        return RadialFunction(grid, v.copy(), in_cone=True)
    iso = _pava(v, grid.quad_weights)
    np.clip(iso, lower, upper, out=iso)
    return RadialFunction(grid, iso, in_cone=True)
