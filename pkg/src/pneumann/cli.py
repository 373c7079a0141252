"""Command-line entry point.

Subcommands
-----------
solve   -- truncation, Nehari descent, certificates; writes result JSON,
           profile CSV, and the profile figure.
sweep   -- exponent sweep toward the limit profile; writes sweep CSV/JSON
           and the convergence figure.
limit   -- the limit profile G alone; writes its CSV/JSON and figure.
verify  -- the invariant battery; writes a machine-readable report.

Exit codes: 0 success, 1 invalid configuration, 2 solver failure,
3 certificate or invariant failure.

Configuration comes from defaults, then an optional key=value config file,
then command-line flags; flags win.  All sampled diagnostics draw from the
single seed in the configuration, and identical configurations produce
byte-identical JSON outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import PneumannError, ValidationError
from .grid import build_grid
from .minimax import (
    DescentConfig,
    nehari_descent,
    nonconstancy_certificate,
    ray_max_check,
)
from .nonlinearity import cone_window, truncate_pure_power
from .operators import energy
from .plots import save_profile_figure, save_sweep_figure
from .shooting import find_nonconstant, limit_sweep, phase_diagnostics, solve_G
from .verify import run_battery

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_CERTIFICATE = 3


@dataclass(frozen=True)
class RunConfig:
    command: str = ""
    p: float = 3.0
    q: float = 6.0
    q_list: tuple = ()
    N: int = 1
    n_cells: int = 1024
    tol: float = 1.0e-9
    rtol: float = 1.0e-10
    s0: str = "adaptive"  # "adaptive" or a float literal
    ell: float | None = None
    out_dir: str = "."
    seed: int = 0
    mutate: str | None = None

    def validate(self):
        if not self.p > 1.0:
            raise ValidationError("p must exceed 1")
        if self.command in ("solve",) and not self.q > self.p:
            raise ValidationError("q must exceed p")
        if self.command == "sweep" and any(not q > self.p for q in self.q_list):
            raise ValidationError("every q must exceed p")
        if self.n_cells < 8:
            raise ValidationError("n_cells must be at least 8")
        if self.N < 1:
            raise ValidationError("N must be a positive integer")

    def resolved_s0(self) -> float:
        if self.s0 == "adaptive":
            # pure-power a-priori sup bound; the margin keeps solutions
            # strictly inside the untruncated region
            qs = self.q_list if self.command == "sweep" else (self.q,)
            bound = max((q / self.p) ** (1.0 / (q - self.p)) for q in qs)
            return max(2.0, 1.5 * bound)
        return float(self.s0)


_CONFIG_KEYS = {f.name for f in fields(RunConfig)}


def serialize_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        val = getattr(cfg, f.name)
        if f.name == "q_list":
            val = ",".join(repr(q) for q in val)
        elif val is None:
            val = "none"
        lines.append(f"{f.name}={val}")
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"config line {lineno}: expected key=value")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _CONFIG_KEYS:
            raise ValidationError(f"config line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, val)
    return out


def _coerce(key: str, val: str):
    if key in ("command", "out_dir", "s0"):
        return val
    if key in ("mutate",):
        return None if val in ("none", "") else val
    if key in ("ell",):
        return None if val in ("none", "") else float(val)
    if key in ("N", "n_cells", "seed"):
        return int(val)
    if key == "q_list":
        return tuple(float(tok) for tok in val.split(",") if tok.strip()) if val else ()
    return float(val)


def _load_config(cfg: RunConfig, path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        overrides = parse_config(fh.read())
    overrides.pop("command", None)
    return replace(cfg, **overrides)


def _jsonable(obj):
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def _write_json(path: str, payload: dict):
    text = json.dumps(payload, sort_keys=True, indent=2, default=_jsonable)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    os.replace(tmp, path)


def _write_csv(path: str, header, rows):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    os.replace(tmp, path)


def _node_slopes(grid, values):
    """Averaged cell slopes; end slopes are the boundary conditions."""
    cell = np.diff(values) / grid.h
    slopes = np.zeros_like(values)
    slopes[1:-1] = 0.5 * (cell[:-1] + cell[1:])
    return slopes


def cmd_solve(cfg: RunConfig) -> int:
    grid = build_grid(cfg.N, cfg.n_cells)
    s0 = cfg.resolved_s0()
    trunc = truncate_pure_power(cfg.p, cfg.q, cfg.N, s0=s0, ell=cfg.ell)
    window = cone_window(trunc)
    r2 = grid.nodes**2
    mean_r2 = float(grid.quad_weights @ r2) * grid.N
    start = trunc.u0 * (1.0 + 0.3 * (r2 - mean_r2))
    try:
        result = nehari_descent(
            grid, start, trunc, window=window, cfg=DescentConfig(tol=cfg.tol)
        )
    except PneumannError as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER

    certificates = dict(result.certificates)
    certificates["ray_max_at_one"] = ray_max_check(grid, result.u, trunc)
    cert = nonconstancy_certificate(grid, trunc)
    certificates["nonconstancy_signs_consistent"] = cert["signs_consistent"]
    certificates["nonconstancy_rows"] = cert["rows"]
    cross_ok = True
    phase_ok = True
    try:
        u_shoot, a_star, diag = find_nonconstant(
            trunc, cfg.N, grid=grid, rtol=cfg.rtol
        )
        gap = float(np.max(np.abs(result.u.values - u_shoot.values)))
        certificates["cross_oracle_sup_gap"] = gap
        certificates["cross_oracle_a_star"] = a_star
        cross_ok = gap <= max(1e-3, grid.h)
        # phase-plane certificate on the integrator-accurate slopes; the
        # averaged-difference version wobbles at the h^2 scale and would
        # mask the first-integral structure
        if float(np.max(u_shoot.values)) <= s0:
            ph = phase_diagnostics(grid, u_shoot, cfg.p, cfg.q, slopes=diag["du"])
            certificates["phase"] = {
                "increase_violations": ph.increase_violations,
                "max_increase": ph.max_increase,
                "in_sigma": ph.in_sigma,
                "sup_bound": ph.sup_bound,
                "slope_bound": ph.slope_bound,
                "max_u": ph.max_u,
                "max_slope": ph.max_slope,
            }
            phase_ok = ph.increase_violations == 0 and ph.in_sigma
    except PneumannError as err:
        certificates["cross_oracle_sup_gap"] = None
        certificates["cross_oracle_error"] = str(err)
        cross_ok = False

    slopes = _node_slopes(grid, result.u.values)
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    _write_json(
        os.path.join(out, "solve_result.json"),
        {
            "p": cfg.p,
            "q": cfg.q,
            "N": cfg.N,
            "n_cells": cfg.n_cells,
            "c": result.c,
            "energy_u0": energy(grid, np.full(grid.n_cells + 1, trunc.u0), trunc),
            "u_values": result.u.values.tolist(),
            "residual": result.residual,
            "certificates": certificates,
        },
    )
    _write_csv(
        os.path.join(out, "profile.csv"),
        ("r", "u", "du"),
        zip(grid.nodes.tolist(), result.u.values.tolist(), slopes.tolist()),
    )
    save_profile_figure(
        os.path.join(out, "profile.png"), grid.nodes, result.u.values, slopes
    )
    ok = (
        certificates["ray_max_at_one"]
        and certificates["nonconstancy_signs_consistent"]
        and phase_ok
        and cross_ok
    )
    if not ok:
        print("certificate failure; see solve_result.json", file=sys.stderr)
        return EXIT_CERTIFICATE
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    if not cfg.q_list:
        print("sweep requires a nonempty q list", file=sys.stderr)
        return EXIT_CONFIG
    sweep = limit_sweep(
        cfg.p,
        cfg.N,
        cfg.q_list,
        n_cells=cfg.n_cells,
        s0=cfg.resolved_s0(),
        rtol=cfg.rtol,
    )
    rows = sweep["rows"]
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    _write_csv(
        os.path.join(out, "sweep.csv"),
        ("q", "c_q", "sup_dist_G", "w1p_dist_G", "h_q_G", "u_at_0", "u_at_1"),
        [
            (row.q, row.c_q, row.sup_dist_G, row.w1p_dist_G, row.h_q_G,
             row.u_at_0, row.u_at_1)
            for row in rows
        ],
    )
    _write_json(
        os.path.join(out, "sweep.json"),
        {
            "p": cfg.p,
            "N": cfg.N,
            "n_cells": cfg.n_cells,
            "c_infty": sweep["c_infty"],
            "G0": sweep["G0"],
            "rows": [
                {
                    "q": row.q,
                    "c_q": row.c_q,
                    "sup_dist_G": row.sup_dist_G,
                    "w1p_dist_G": row.w1p_dist_G,
                    "h_q_G": row.h_q_G,
                    "u_at_0": row.u_at_0,
                    "u_at_1": row.u_at_1,
                    "status": row.status,
                    "c_q_nehari": row.c_q_nehari,
                    "a_star": row.a_star,
                }
                for row in rows
            ],
        },
    )
    save_sweep_figure(os.path.join(out, "sweep.png"), rows, sweep["c_infty"])
    failed = [row for row in rows if row.status != "ok"]
    for row in failed:
        print(f"row q={row.q:g} failed: {row.status}", file=sys.stderr)
    gaps = [abs(row.c_q - sweep["c_infty"]) for row in rows if row.status == "ok"]
    monotone = all(b < a for a, b in zip(gaps, gaps[1:]))
    if failed or not monotone:
        if not monotone:
            print("|c_q - c_infty| is not strictly decreasing", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_limit(cfg: RunConfig) -> int:
    grid = build_grid(cfg.N, cfg.n_cells)
    gdata = solve_G(cfg.p, cfg.N, grid=grid)
    values = gdata["G"].values
    slopes = np.interp(grid.nodes, gdata["r"], gdata["du"])
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    _write_json(
        os.path.join(out, "limit.json"),
        {
            "p": cfg.p,
            "N": cfg.N,
            "n_cells": cfg.n_cells,
            "G0": gdata["G0"],
            "c_infty": gdata["c_infty"],
            "norm_p": gdata["norm_p"],
            "G_values": values.tolist(),
        },
    )
    _write_csv(
        os.path.join(out, "limit_profile.csv"),
        ("r", "u", "du"),
        zip(grid.nodes.tolist(), values.tolist(), slopes.tolist()),
    )
    save_profile_figure(
        os.path.join(out, "limit_profile.png"), grid.nodes, values, slopes, label="G"
    )
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    report = run_battery(n_cells=cfg.n_cells, seed=cfg.seed, mutate=cfg.mutate)
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    _write_json(os.path.join(out, "verify_report.json"), report)
    for res in report["results"]:
        flag = "SKIP" if res["skipped"] else ("PASS" if res["passed"] else "FAIL")
        stream = sys.stdout if res["passed"] else sys.stderr
        print(f"[{flag}] {res['name']}: {res['detail']}", file=stream)
    return EXIT_OK if report["all_passed"] else EXIT_CERTIFICATE


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pneumann",
        description="Nonconstant radial solutions of a supercritical "
        "Neumann problem on the unit ball",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key=value configuration file")
        sp.add_argument("--p", type=float, default=None)
        sp.add_argument("--N", type=int, default=None)
        sp.add_argument("--n", type=int, default=None, dest="n_cells",
                        help="number of grid cells")
        sp.add_argument("--tol", type=float, default=None,
                        help="descent residual tolerance")
        sp.add_argument("--rtol", type=float, default=None,
                        help="shooting integrator relative tolerance")
        sp.add_argument("--s0", default=None,
                        help="truncation threshold: a number or 'adaptive'")
        sp.add_argument("--ell", type=float, default=None,
                        help="truncation tail exponent")
        sp.add_argument("--out", default=None, dest="out_dir",
                        help="output directory")
        sp.add_argument("--seed", type=int, default=None)

    sp = sub.add_parser("solve", help="solve one problem and certify it")
    common(sp)
    sp.add_argument("--q", type=float, default=None)

    sp = sub.add_parser("sweep", help="exponent sweep toward the limit profile")
    common(sp)
    sp.add_argument("--q", default=None, dest="q_csv",
                    help="comma-separated exponent list, e.g. 10,20,40,80")

    sp = sub.add_parser("limit", help="compute the limit profile G only")
    common(sp)

    sp = sub.add_parser("verify", help="run the invariant battery")
    common(sp)
    sp.add_argument("--mutate", default=None, choices=("sign-flip",),
                    help="corrupt the nonlinearity to self-test the battery")
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit status 2 for bad arguments; fold into the
        # validation exit code
        return EXIT_OK if not exc.code else EXIT_CONFIG

    cfg = RunConfig(command=args.command)
    try:
        if getattr(args, "config", None):
            cfg = _load_config(cfg, args.config)
        overrides = {}
        for f in fields(RunConfig):
            if f.name in ("command", "q_list"):
                continue
            val = getattr(args, f.name, None)
            if val is not None:
                overrides[f.name] = val
        if getattr(args, "q_csv", None) is not None:
            overrides["q_list"] = _coerce("q_list", args.q_csv)
        cfg = replace(cfg, **overrides)
        cfg.validate()
    except (ValidationError, OSError, ValueError) as err:
        print(f"invalid configuration: {err}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "limit":
            return cmd_limit(cfg)
        return cmd_verify(cfg)
    except ValidationError as err:
        print(f"invalid configuration: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except PneumannError as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER


def run():  # console-script shim
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
