"""Command-line entry point orchestrating all routes.

Subcommands: drift-table, villat-check, simulate-sde, solve-pde, lattice,
cardy, compare.  JSON for summaries, CSV for fields/curves; every output file
embeds the resolved configuration and master seed (schema_version 1), so a
run can be reproduced bit-exactly (PDE/Cardy) or stream-exactly (Monte Carlo).

Flags override values from an optional flat key-value config file
(`--config`, lines of `name = value`, '#' comments, names as the long flags
without the leading dashes).  Exit codes: 0 success, 1 usage error,
2 validation failure (`compare --strict` beyond tolerance).
"""

from __future__ import annotations

import argparse
import cmath
import json
import math
import sys

import numpy as np

from . import __version__
from .annulus import AnnulusDomain, villat_residuals
from .cardy import cardy_pn
from .diffusion import SdeConfig, estimate_circuit_probs
from .elliptic import PI, ModulusParam, drift_profile
from .lattice import build_annulus, estimate_events, estimate_F
from .pde import GridSpec, solve_cn_recursion, solve_crossing_F, solve_exit_H

SCHEMA_VERSION = 1


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _json_payload(command: str, config: dict, results: dict) -> str:
    return json.dumps({
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": command,
        "config": config,
        "results": results,
    }, indent=2, sort_keys=True) + "\n"


def _write_json(path, command, config, results):
    text = _json_payload(command, config, results)
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_csv(path, header_cols, rows, command, config):
    with open(path, "w") as fh:
        fh.write("# " + json.dumps({"schema_version": SCHEMA_VERSION,
                                    "command": command, "config": config},
                                   sort_keys=True) + "\n")
        fh.write(",".join(header_cols) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _mc_dict(est) -> dict:
    return {"mean": est.mean, "stderr": est.stderr, "n": est.n, "seed": est.seed}


def _load_config_file(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise _UsageError(f"config line without '=': {raw.rstrip()}")
            key, val = line.split("=", 1)
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _resolve(args: argparse.Namespace, parser: _Parser) -> dict:
    """File values fill in flags the user left at their defaults."""
    ns = vars(args)
    if ns.get("config"):
        file_vals = _load_config_file(ns["config"])
        for key, val in file_vals.items():
            if key not in ns:
                raise _UsageError(f"unknown config key '{key}'")
            if ns[key] == parser.get_default(key):
                current = parser.get_default(key)
                caster = type(current) if current is not None else str
                if caster is bool:
                    ns[key] = val.lower() in ("1", "true", "yes", "on")
                else:
                    ns[key] = caster(val)
    return {k: v for k, v in ns.items() if k not in ("func", "config")}


# ----------------------------------------------------------------------------
# subcommands


def _cmd_cardy(args, config):
    pn = cardy_pn(ModulusParam(args.a))
    print(f"{pn:.12f}")
    if args.out:
        _write_json(args.out, "cardy", config, {"pn": pn})
    return 0


def _cmd_drift_table(args, config):
    nus = np.linspace(args.nu_min, args.nu_max, args.nu_steps)
    avals = np.linspace(args.a_min, args.a_max, args.a_steps)
    rows = []
    for a in avals:
        b = drift_profile(nus, a)
        rows.extend((nu, a, bv) for nu, bv in zip(nus, b))
    _write_csv(args.out, ("nu", "a", "b"), rows, "drift-table", config)
    return 0


def _cmd_villat_check(args, config):
    rng = np.random.Generator(np.random.Philox(key=args.seed))
    reports = []
    worst = 0.0
    for _ in range(args.triples):
        a = -float(rng.uniform(0.35, 3.0))
        th_x = float(rng.uniform(0.0, 2.0 * PI))
        th_y = (th_x + float(rng.uniform(0.4, 2.0 * PI - 0.4))) % (2.0 * PI)
        dom = AnnulusDomain(ModulusParam(a))
        res = villat_residuals(dom, cmath.exp(1j * th_x), cmath.exp(1j * th_y))
        checked = {k: v for k, v in res.items() if k != "inner_constant_value"}
        worst = max(worst, max(checked.values()))
        reports.append({"q": dom.q, "theta_x": th_x, "theta_y": th_y, **res})
    ok = worst < args.tol
    _write_json(args.out, "villat-check", config,
                {"triples": reports, "max_residual": worst, "tol": args.tol,
                 "pass": ok})
    return 0 if ok else 2


def _cmd_simulate_sde(args, config):
    cfg = SdeConfig(step=args.step, eps_hit=args.eps_hit,
                    eps_restart=args.eps_restart, seed=args.seed,
                    antithetic=not args.no_antithetic)
    est = estimate_circuit_probs(args.a0, args.nmax, args.samples, cfg)
    results = {
        "a0": args.a0,
        "pn": _mc_dict(est.pn),
        "c": [_mc_dict(x) for x in est.c],
        "pb": [_mc_dict(x) for x in est.pb],
        "m_histogram": list(est.m_histogram),
    }
    _write_json(args.out, "simulate-sde", config, results)
    return 0


def _cmd_solve_pde(args, config):
    m = ModulusParam(args.a)
    spec = GridSpec(nu_points=args.nu_points,
                    a_start=min(args.a_start, args.a - 0.2),
                    terminal_offset=args.delta, da=args.da)
    csv_path = args.out + ".csv" if args.out else None
    summary = {"grid": {"nu_points": spec.nu_points, "a_start": spec.a_start,
                        "terminal_offset": spec.terminal_offset, "da": spec.da}}
    if args.problem == "F":
        fld = solve_crossing_F(m, spec)
        sl = fld.slice_at(args.a)
        if csv_path:
            _write_csv(csv_path, ("nu", "a", "F"),
                       [(nu, args.a, v) for nu, v in zip(fld.nu, sl)],
                       "solve-pde", config)
        nu_q = args.nu if args.nu is not None else PI
        summary["F"] = fld.value_at(nu_q, args.a)
        summary["nu"] = nu_q
    elif args.problem == "H":
        res = solve_exit_H(m, spec)
        if csv_path:
            _write_csv(csv_path, ("a", "pn"),
                       list(zip(res.a_grid, res.pn_curve)), "solve-pde", config)
        summary["pn"] = res.pn
        coarse = GridSpec(nu_points=spec.nu_points // 2, a_start=spec.a_start,
                          terminal_offset=spec.terminal_offset, da=2 * spec.da)
        summary["refinement_estimate"] = abs(
            res.pn - solve_exit_H(m, coarse).pn)
    else:
        rec = solve_cn_recursion(m, spec, args.nmax)
        cn = rec.cn_at(args.a)
        if csv_path:
            rows = [(float(n + 1), args.a, c) for n, c in enumerate(cn)]
            _write_csv(csv_path, ("n", "a", "c_n"), rows, "solve-pde", config)
        summary["c_n"] = list(map(float, cn))
        summary["pn_series"] = float(1.0 + 2.0 * np.sum(
            [(-1) ** (n + 1) * cn[n] for n in range(cn.size)]))
    _write_json(args.out, "solve-pde", config, summary)
    return 0


def _cmd_lattice(args, config):
    lat = build_annulus(args.q, args.mesh)
    results = {"n_sites": lat.n_sites, "mesh": args.mesh, "q": args.q}
    if args.chordal_nu is not None:
        est = estimate_F(lat, args.chordal_nu, args.samples, args.seed)
        results["f_hat"] = _mc_dict(est)
    else:
        ev = estimate_events(lat, args.samples, args.seed)
        results.update({
            "pn": _mc_dict(ev.pn),
            "pb": [_mc_dict(x) for x in ev.pb],
            "py": [_mc_dict(x) for x in ev.py],
            "counts": {"n": ev.count_n, "b": list(ev.counts_b),
                       "y": list(ev.counts_y)},
            "partition_identity": ev.partition_identity(),
        })
    _write_json(args.out, "lattice", config, results)
    return 0


def _cmd_compare(args, config):
    m = ModulusParam(args.a)
    pn_closed = cardy_pn(m)
    spec = GridSpec(nu_points=args.nu_points,
                    a_start=min(-4.5, args.a - 0.5),
                    terminal_offset=1e-3, da=args.da)
    h_res = solve_exit_H(m, spec)
    rec = solve_cn_recursion(m, spec, 6)
    cn = rec.cn_at(args.a)
    pn_series = float(1.0 + 2.0 * sum((-1) ** (n + 1) * cn[n] for n in range(6)))
    cfg = SdeConfig(seed=args.seed)
    mc = estimate_circuit_probs(args.a, 6, args.samples, cfg)
    d_closed = abs(pn_closed - h_res.pn)
    d_series = abs(pn_series - h_res.pn)
    d_mc = abs(mc.pn.mean - h_res.pn)
    checks = {
        "closed_form_vs_pde": d_closed <= args.tol,
        "series_vs_pde": d_series <= args.tol + 2.0 * cn[-1],
        "mc_vs_pde": d_mc <= args.tol + 3.0 * mc.pn.stderr,
    }
    results = {
        "a": args.a,
        "pn_closed_form": pn_closed,
        "pn_pde_exit": h_res.pn,
        "pn_pde_series": pn_series,
        "pn_mc": _mc_dict(mc.pn),
        "c_n_pde": list(map(float, cn)),
        "discrepancies": {"closed_form_vs_pde": d_closed,
                          "series_vs_pde": d_series, "mc_vs_pde": d_mc},
        "tolerance": args.tol,
        "checks": checks,
        "pass": all(checks.values()),
    }
    _write_json(args.out, "compare", config, results)
    if args.strict and not results["pass"]:
        return 2
    return 0


# ----------------------------------------------------------------------------
# parser wiring


def _build_parser() -> _Parser:
    p = _Parser(prog="annulus-perc",
                description="crossing and circuit probabilities of critical "
                            "percolation in annuli")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default=None,
                        help="flat key-value config file; flags override it")
        sp.add_argument("--out", default=None, help="output path (JSON)")

    sp = sub.add_parser("cardy", help="closed-form P(N)")
    sp.add_argument("--a", type=float, required=True, help="log-modulus, a < 0")
    common(sp)
    sp.set_defaults(func=_cmd_cardy)

    sp = sub.add_parser("drift-table", help="dump b(nu, a) grid as CSV")
    sp.add_argument("--nu-min", type=float, default=0.1)
    sp.add_argument("--nu-max", type=float, default=2.0 * PI - 0.1)
    sp.add_argument("--nu-steps", type=int, default=64)
    sp.add_argument("--a-min", type=float, default=-5.0)
    sp.add_argument("--a-max", type=float, default=-0.2)
    sp.add_argument("--a-steps", type=int, default=16)
    sp.add_argument("--config", default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_drift_table)

    sp = sub.add_parser("villat-check",
                        help="residuals of the boundary vector-field properties")
    sp.add_argument("--triples", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tol", type=float, default=1e-6)
    common(sp)
    sp.set_defaults(func=_cmd_villat_check)

    sp = sub.add_parser("simulate-sde", help="Monte Carlo for the interface diffusion")
    sp.add_argument("--a0", type=float, required=True)
    sp.add_argument("--samples", type=int, default=20000)
    sp.add_argument("--nmax", type=int, default=6)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--step", type=float, default=1e-4)
    sp.add_argument("--eps-hit", type=float, default=1e-4)
    sp.add_argument("--eps-restart", type=float, default=1e-3)
    sp.add_argument("--no-antithetic", action="store_true")
    common(sp)
    sp.set_defaults(func=_cmd_simulate_sde)

    sp = sub.add_parser("solve-pde", help="finite-difference crossing solves")
    sp.add_argument("--problem", choices=("F", "H", "cn"), required=True)
    sp.add_argument("--a", type=float, required=True)
    sp.add_argument("--nu", type=float, default=None)
    sp.add_argument("--nmax", type=int, default=6)
    sp.add_argument("--nu-points", type=int, default=800)
    sp.add_argument("--da", type=float, default=2e-4)
    sp.add_argument("--delta", type=float, default=1e-3)
    sp.add_argument("--a-start", type=float, default=-5.0)
    common(sp)
    sp.set_defaults(func=_cmd_solve_pde)

    sp = sub.add_parser("lattice", help="triangular-lattice percolation sampler")
    sp.add_argument("--q", type=float, required=True)
    sp.add_argument("--mesh", type=float, default=1.0 / 60.0)
    sp.add_argument("--samples", type=int, default=20000)
    sp.add_argument("--chordal-nu", type=float, default=None)
    sp.add_argument("--seed", type=int, default=0)
    common(sp)
    sp.set_defaults(func=_cmd_lattice)

    sp = sub.add_parser("compare",
                        help="four-route comparison at one modulus")
    sp.add_argument("--a", type=float, required=True)
    sp.add_argument("--tol", type=float, default=1e-2)
    sp.add_argument("--strict", action="store_true")
    sp.add_argument("--samples", type=int, default=20000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--nu-points", type=int, default=800)
    sp.add_argument("--da", type=float, default=2e-4)
    common(sp)
    sp.set_defaults(func=_cmd_compare)
    return p


def run(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        config = _resolve(args, parser)
        return args.func(args, config)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))
