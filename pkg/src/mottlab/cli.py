"""Command-line front end: ``mottlab {ed,expand,kp-verify,bounds,phase-diagram}``.

Parameters come from flags or from a flat ``key = value`` file given with
``--config``; keys are the flag names with dashes or underscores, and flags
win on conflict. Every emitted row carries a ``provenance`` column:
``oracle`` (exact diagonalization), ``expansion`` (truncated cluster or
enumeration) or ``formula`` (closed-form bound).

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 a checked
bound is violated.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import fock
from .lattice import HARD_CORE, LatticeSpec, ModelParams
from .polymer import ClusterDivergence, KPViolation, kp_best_linear
from .reports import BoundReport

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VIOLATION = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ config


def read_config(path: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _float(s):
    v = float(s)
    if math.isnan(v):
        raise argparse.ArgumentTypeError("nan is not a valid value")
    return v


def _model_flags(p: argparse.ArgumentParser, beta: bool = True):
    g = p.add_argument_group("model")
    g.add_argument("--d", type=int, default=1)
    g.add_argument("--L", type=int, default=4)
    g.add_argument("--boundary", choices=("periodic", "open"), default="periodic")
    g.add_argument("--nmax", type=int, default=None, help="occupation cap (default 1 for U = inf, else 2)")
    g.add_argument("--t", type=_float, default=0.01)
    g.add_argument("--U", type=_float, default=1.0, help="on-site repulsion, 'inf' for hard core")
    g.add_argument("--mu", type=_float, default=0.2)
    if beta:
        g.add_argument("--beta", type=_float, default=10.0)


def _cutoff_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("cutoffs")
    g.add_argument("--max-jumps", type=int, default=4)
    g.add_argument("--max-winding", type=int, default=None, help="default 2 (dilute) or 1 (mott)")
    g.add_argument("--radius", type=int, default=2)
    g.add_argument("--K", type=int, default=3, help="cluster order")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--out", metavar="PATH", help="write here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(prog="mottlab", description="Bose-Hubbard bounds and expansions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ed", parents=[common], help="exact diagonalization")
    _model_flags(p)
    p.add_argument("--spectrum", action="store_true", help="also emit every eigenvalue")

    p = sub.add_parser("expand", parents=[common], help="truncated cluster expansion")
    _model_flags(p)
    _cutoff_flags(p)
    p.add_argument("--regime", choices=("auto", "dilute", "mott"), default="auto")
    p.add_argument("--check-ed", action="store_true", help="compare with ED; exit 4 if outside the reported error")

    p = sub.add_parser("kp-verify", parents=[common], help="convergence criteria and lemma bounds")
    _model_flags(p)
    p.add_argument("--max-jumps", type=int, default=None, help="default 4 for the gas, 6 for the hopping matrix")
    p.add_argument("--radius", type=int, default=None)
    p.add_argument("--self-check", type=int, default=0, metavar="N", help="N random loop configurations")

    p = sub.add_parser("bounds", parents=[common], help="theorem conditions and density bounds")
    _model_flags(p)

    p = sub.add_parser("phase-diagram", parents=[common], help="classify a (mu, t) grid")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--U", type=_float, default=HARD_CORE)
    p.add_argument("--mu-min", type=_float, default=-1.0)
    p.add_argument("--mu-max", type=_float, default=1.0)
    p.add_argument("--t-min", type=_float, default=0.0)
    p.add_argument("--t-max", type=_float, default=0.5)
    p.add_argument("--resolution", type=int, default=200)
    p.add_argument("--svg", metavar="PATH", help="also write a self-contained SVG")
    return parser


def parse_args(argv):
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        cfg = read_config(known.config)
        # the subcommand is the first token naming one
        sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        cmd = next((a for a in argv if a in sub.choices), None)
        if cmd is None:
            raise ConfigError("a subcommand is required")
        subparser = sub.choices[cmd]
        actions = {a.dest: a for a in subparser._actions}
        defaults = {}
        for key, value in cfg.items():
            if key not in actions or key in ("config", "help"):
                raise ConfigError(f"unknown config key {key!r} for {cmd}")
            if isinstance(actions[key], argparse._StoreTrueAction):
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ConfigError(f"{key} must be a boolean")
                defaults[key] = value.lower() in ("true", "1", "yes")
            else:
                defaults[key] = value
        subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def model_params(args) -> ModelParams:
    n_max = args.nmax if args.nmax is not None else (1 if math.isinf(args.U) else 2)
    lat = LatticeSpec(args.d, args.L, args.boundary)
    return ModelParams(lat, t=args.t, U=args.U, mu=args.mu, beta=args.beta, n_max=n_max)


# ------------------------------------------------------------------ output


def _num(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def _json_safe(x):
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
        return x
    if isinstance(x, np.integer):
        return int(x)
    return x


def quantity_row(params: ModelParams, quantity: str, value, error, provenance: str) -> dict:
    """``{params, quantity, value, error, provenance}``; ``error`` is the solver residual for ED."""
    rec = fock.ed_record(params, quantity, value, error)
    rec["error"] = rec.pop("solver_residual")
    rec["provenance"] = provenance
    return rec


def bound_row(rep: BoundReport, provenance: str) -> dict:
    d = rep.as_dict()
    d["provenance"] = provenance
    return d


def render(rows: list, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_json_safe(rows), indent=2, sort_keys=True, allow_nan=False) + "\n"
    flat = []
    for r in rows:
        r = dict(r)
        params = r.pop("params", {})
        r.update(params)
        flat.append(r)
    columns = []
    for r in flat:
        columns += [k for k in r if k not in columns]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in flat:
        w.writerow([_num(r.get(c)) for c in columns])
    return buf.getvalue()


def emit(text: str, path: str | None):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands


def cmd_ed(args):
    p = model_params(args)
    th = fock.thermodynamics(p)
    n = p.lattice.n_sites
    rows = [
        quantity_row(p, "log_Z", th.log_Z, th.residual, "oracle"),
        quantity_row(p, "pressure", th.log_Z / n, th.residual, "oracle"),
        quantity_row(p, "density", th.mean_N / n, th.residual, "oracle"),
    ]
    if args.spectrum:
        for N in range(p.n_max * n + 1):
            s = fock.sector_spectrum(p, N)
            rows += [quantity_row(p, f"energy[N={N}]", float(e), s.residual, "oracle") for e in s.energies]
    return rows, EXIT_OK


def _regime(args, p):
    if args.regime != "auto":
        return args.regime
    return "dilute" if p.mu < 0 else "mott"


def cmd_expand(args):
    from .worldline.loopgas import truncated_pressure_loops
    from .worldline.trajectories import truncated_pressure_trajectories

    p = model_params(args)
    regime = _regime(args, p)
    if regime == "dilute":
        res = truncated_pressure_trajectories(
            p, args.max_jumps, 2 if args.max_winding is None else args.max_winding, args.K, args.radius
        )
        pressure, p_err = res.pressure, res.report["total"]
        density, rho_err = res.density, None
        extra = []
    else:
        res = truncated_pressure_loops(
            p, args.max_jumps, 1 if args.max_winding is None else args.max_winding, args.radius, args.K
        )
        # same normalization as ED: beta * (mu + series / beta) = log Z / |Lambda|
        pressure, p_err = p.beta * res.pressure, p.beta * res.report["pressure_error"]
        density, rho_err = 1.0 + res.density_deviation, res.report["density_error"]
        extra = [quantity_row(p, "density_deviation_bound", res.density_bound, None, "expansion")]
    rows = [
        quantity_row(p, "pressure", pressure, p_err, "expansion"),
        quantity_row(p, "density", density, rho_err, "expansion"),
    ] + extra
    code = EXIT_OK
    if args.check_ed:
        th = fock.thermodynamics(p)
        n = p.lattice.n_sites
        ed_p, ed_rho = th.log_Z / n, th.mean_N / n
        rows += [
            quantity_row(p, "pressure", ed_p, th.residual, "oracle"),
            quantity_row(p, "density", ed_rho, th.residual, "oracle"),
        ]
        if abs(pressure - ed_p) > p_err:
            code = EXIT_VIOLATION
        if rho_err is not None and abs(density - ed_rho) > rho_err:
            code = EXIT_VIOLATION
        if regime == "mott" and abs(ed_rho - 1) > res.density_bound:
            code = EXIT_VIOLATION
    return rows, code


def _self_check_report(p: ModelParams, n: int, seed: int) -> BoundReport:
    from fractions import Fraction

    from .worldline.loops import config_weight, decompose_config_to_loops, loop_weight, random_config

    rng = np.random.default_rng(seed)
    beta = Fraction(p.beta).limit_denominator(1000)
    q = p.replace(beta=float(beta), n_max=2, U=p.U if math.isfinite(p.U) else 1.0)
    worst = 0.0
    for _ in range(n):
        cfg = random_config(q.lattice, beta, rng, n_random=int(rng.integers(0, 7)))
        loops = decompose_config_to_loops(cfg)
        lhs = config_weight(cfg, q)
        rhs = math.exp(q.beta * q.mu * q.lattice.n_sites) * math.prod(loop_weight(lp, q) for lp in loops)
        worst = max(worst, abs(lhs - rhs) / rhs)
    return BoundReport("loop_factorization_rel_error", worst, 1e-12)


def cmd_kp_verify(args):
    from .bounds import (
        small_hopping_check,
        hopping_series_check,
        kp_loop_report,
        lemma32_bounds,
        prop21_inequality_check,
        sigma_rowsum_bound,
    )
    from .worldline.loopgas import loop_gas
    from .worldline.trajectories import kp_trajectory_params, trajectory_gas

    p = model_params(args)
    t, mu, d = p.t, p.mu, p.d
    rows = []

    def kp_row(name, gas):
        sizes = [len(c.sites) for c in gas.classes]
        alpha, rep = kp_best_linear(gas.system, sizes)
        if rep.worst is None:
            return
        i = rep.worst
        rows.append(bound_row(BoundReport(f"{name}[a={alpha:.4g}|A|]", rep.lhs[i], alpha * sizes[i]), "expansion"))

    def named(rep, name):
        return BoundReport(name, rep.lhs, rep.rhs, rep.hypotheses_ok)

    if mu < -2 * d * t:
        kp = kp_trajectory_params(t, mu, d)
        if kp is not None:
            for j, ell in ((0, 1), (2, 1), (4, 1), (2, 2)):
                rep = prop21_inequality_check(t, mu, d, kp.a, kp.b, p.beta, j, ell)
                rows.append(bound_row(named(rep, f"{rep.name}[j={j},l={ell}]"), "formula"))
        if p.lattice.boundary == "periodic":
            jumps = 4 if args.max_jumps is None else args.max_jumps
            kp_row("kp_trajectory_gas", trajectory_gas(p, jumps, 2, 2 if args.radius is None else args.radius))
    if math.isfinite(p.U):
        for rep in lemma32_bounds(p):
            rows.append(bound_row(rep, "formula"))
        rows.append(bound_row(small_hopping_check(p), "formula"))
        rows.append(bound_row(hopping_series_check(p), "formula"))
        rows.append(bound_row(kp_loop_report(p, j=2, ell=1.0), "formula"))
        if p.lattice.boundary == "periodic":
            jumps = 6 if args.max_jumps is None else args.max_jumps
            radius = 3 if args.radius is None else args.radius
            rows.append(bound_row(sigma_rowsum_bound(p, max_jumps=jumps, radius=radius), "expansion"))
            if p.n_max == 2 and mu >= -2 * d * t:
                gas = loop_gas(p, 4 if args.max_jumps is None else args.max_jumps, 1, 2)
                kp_row("kp_loop_gas", gas)
    if args.self_check:
        rows.append(bound_row(_self_check_report(p, args.self_check, args.seed), "expansion"))
    violated = any(r["hypotheses_ok"] and not r["satisfied"] for r in rows)
    return rows, EXIT_VIOLATION if violated else EXIT_OK


def cmd_bounds(args):
    from .bounds import density_bounds_rho0, density_bounds_rho1, theorem2_condition, variational_check
    from .phasemap import PhasePoint, classify, tc_approx, tc_hardcore

    p = model_params(args)
    t, mu, U, d = p.t, p.mu, p.U, p.d

    def q(name, value, provenance="formula"):
        return quantity_row(p, name, value, None, provenance)

    rows = [q("tc_hardcore", tc_hardcore(mu, d)), q("tc_approx", tc_approx(mu, U, d))]
    if t > 0:
        verdict = classify(PhasePoint(t, mu, U, d))
        rows.append(q("verdict", str(verdict)))
        rows.append(q("witnesses", ";".join(verdict.witnesses)))
    if math.isfinite(U) and t > 0:
        rows.append(q("theorem2_condition", bool(theorem2_condition(t, mu, U, d))))
    if t > 0 and mu > -2 * d * t:
        b0 = density_bounds_rho0(t, mu, d)
        rows += [q("rho0_lower_slope", b0.a), q("rho0_energy_min", b0.c), q("rho0_rho_star", b0.rho_star)]
        if math.isfinite(U):
            b1 = density_bounds_rho1(t, mu, U, d)
            rows.append(q("rho1_hole_lower_bound", b1.hole_bound))
    code = EXIT_OK
    if p.lattice.boundary == "open" and t > 0:
        for N in range(1, p.lattice.n_sites + 1):
            rep = variational_check(p, N)
            rows.append(quantity_row(p, f"variational_slack[N={N}]", rep.slack, None, "oracle"))
            if rep.hypotheses_ok and not rep.satisfied:
                code = EXIT_VIOLATION
    return rows, code


def cmd_phase_diagram(args):
    from .phasemap import scan_grid, scan_to_svg

    if args.resolution < 0:
        raise ConfigError("resolution must be >= 0")
    if not args.U > 0:
        raise ConfigError("U must be > 0 or inf")
    scan = scan_grid((args.mu_min, args.mu_max), (args.t_min, args.t_max), args.resolution, args.U, args.d)
    rows = [
        {"mu": pt.mu, "t": pt.t, "U": pt.U, "d": pt.d, "label": str(v), "witnesses": ";".join(v.witnesses), "provenance": "formula"}
        for pt, v in scan.rows
    ]
    if args.svg:
        emit(scan_to_svg(scan), args.svg)
    if not rows:
        # keep the header for empty grids
        return [], EXIT_OK, "mu,t,U,d,label,witnesses,provenance\n"
    return rows, EXIT_OK


COMMANDS = {
    "ed": cmd_ed,
    "expand": cmd_expand,
    "kp-verify": cmd_kp_verify,
    "bounds": cmd_bounds,
    "phase-diagram": cmd_phase_diagram,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"mottlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:
        # argparse: 0 for --help, 2 for bad flags
        return int(exc.code or 0)
    try:
        out = COMMANDS[args.command](args)
        rows, code = out[0], out[1]
        if len(out) == 3 and args.format == "csv":
            text = out[2]
        else:
            text = render(rows, args.format) if rows or args.format == "json" else ""
        emit(text, args.out)
    except (ConfigError, KPViolation) as exc:
        print(f"mottlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (fock.SolverError, ClusterDivergence, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"mottlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"mottlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"mottlab: cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if code == EXIT_VIOLATION:
        print("mottlab: bound violation detected", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
