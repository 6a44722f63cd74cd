"""Command-line front end: ``regnoise <subcommand> [flags]``.

Every subcommand writes a CSV: ``#`` metadata lines (version, seed, config
echo, run summary), a header row, then data rows.  Exit status is 0 on
success, 2 on validation failure and 3 when an enumeration would exceed the
budget.
"""

import argparse
import csv
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from regnoise import __version__, estimates, gronwall, lattice, rng
from regnoise.config import FIELDS, ConfigError, ExperimentConfig, parse_config
from regnoise.drift import decay_log_bound, make_drift, validate_assumption
from regnoise.lattice import BudgetExceeded
from regnoise.phi import phi_vector
from regnoise.solver import MildSolveConfig, solve_mild, uniqueness_experiment
from regnoise.spectral import TimeGrid, simulate_ou

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_BUDGET = 3


@dataclass
class Table:
    header: list
    rows: list
    meta: list = field(default_factory=list)
    plot: dict | None = None
    status: int = EXIT_OK


def int_list(text):
    """``"4-10"``, ``"2,4,6"`` or a mix such as ``"1,3-5"``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty list {text!r}")
    return out


def float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _drift(cfg):
    return make_drift(cfg.drift, cfg.D, cfg.gamma, cfg.amplitude, cfg.threshold,
                      cfg.threshold_slope, cfg.drift_seed)


def _solve_cfg(cfg):
    return MildSolveConfig(cfg.grid_steps, cfg.horizon, cfg.tolerance, cfg.max_iter, cfg.damping)


# -- subcommands ---------------------------------------------------------------


def cmd_simulate_ou(args, cfg):
    op = cfg.operator()
    grid = TimeGrid(cfg.grid_steps, cfg.horizon)
    rows = []
    paths = rng.ordered_map(lambda i: simulate_ou(op, grid, cfg.seed, i), range(args.paths), cfg.workers)
    for path in paths:
        vals = path.values
        for i, t in enumerate(grid.times):
            for n in range(op.dim):
                rows.append((path.replica, t, n + 1, vals[i, n]))
    return Table(["replica", "t", "mode", "value"], rows,
                 plot=dict(x="t", ys=["value"], group="mode", title="OU coefficients, replica 0",
                           filter=lambda r: r[0] == 0))


def cmd_lattice_stats(args, cfg):
    rows = []
    for r in args.r:
        for m in args.m:
            if m < r:
                continue
            q = lattice.QDescriptor(cfg.gamma, r, args.scale)
            pts = lattice.enumerate_lattice(q, m, cfg.budget)
            nonzero = np.flatnonzero(np.any(pts.coords != 0, axis=0))
            brute = 1 + (int(nonzero[-1]) + 1 if nonzero.size else 0)
            rows.append((cfg.gamma, r, m, brute, lattice.effdim_bound(cfg.gamma, m), len(pts),
                         lattice.koltik_bound(q, m)))
    return Table(["gamma", "r", "m", "effdim_bruteforce", "effdim_bound", "lattice_count", "koltik_bound"], rows,
                 plot=dict(x="m", ys=["lattice_count", "koltik_bound"], group="r", logy=True, title="lattice size"))


def cmd_validate_drift(args, cfg):
    op = cfg.operator()
    drift = _drift(cfg)
    cert = validate_assumption(drift, op, cfg.gamma, seed=cfg.drift_seed)
    rows = [
        ("sup_norm", 0, cert.sup_norm_log, 0.0, -cert.sup_norm_log, cert.conditions["sup_norm"]),
        ("weighted_sum", 0, cert.weighted_sum_log, 0.0, -cert.weighted_sum_log, cert.conditions["weighted_sum"]),
    ]
    for n, margin in enumerate(cert.log_margins, start=1):
        bound = decay_log_bound(cfg.gamma, n)
        rows.append(("component", n, bound - margin, bound, margin, bool(margin >= 0)))
    meta = [f"passed={cert.passed}", f"closed_form={cert.closed_form}"]
    if cert.witness is not None:
        w = cert.witness
        meta.append(f"witness={w.condition} component={w.component} sample={w.sample} t={w.t!r} excess_log={w.excess_log!r}")
    return Table(["condition", "component", "log_value", "log_bound", "log_margin", "passed"], rows, meta,
                 status=EXIT_OK if cert.passed else EXIT_INVALID)


def cmd_phi_estimate(args, cfg):
    op = cfg.operator()
    drift = _drift(cfg)
    grid = estimates.scan_grid(args.n, cfg.quadrature_min)
    path = simulate_ou(op, grid, cfg.seed, 0)
    gen = rng.stream(cfg.seed, 0, rng.SAMPLE)
    q = lattice.QDescriptor(max(cfg.gamma, 1.0), 0, 1)
    rows = []
    for n in args.n:
        ks = gen.integers(0, 2**n, size=args.queries)
        xs = lattice.sample_lattice_points(q, args.lattice_m, args.queries, gen, op.dim)
        ys = lattice.sample_lattice_points(q, args.lattice_m, args.queries, gen, op.dim)
        for k, x, y in zip(ks, xs, ys):
            norm = float(np.linalg.norm(phi_vector(drift, path, n, int(k), x, y, cfg.quadrature_min)))
            d = float(np.max(np.abs(x - y))) if x.size else 0.0
            bs, _ = estimates.sigma_bound(n, cfg.gamma, d)
            br, _ = estimates.rho_bound(n, cfg.gamma, d)
            ratio = norm / (cfg.beta_A * br) if br > 0 else math.nan
            rows.append((n, int(k), d, norm, bs, br, ratio))
    return Table(["n", "k", "dist_inf", "phi_norm", "bound_sigma", "bound_rho", "ratio"], rows,
                 plot=dict(x="n", ys=["ratio"], logy=True, title="phi / pair bound"))


def _scan(kind, args, cfg):
    fn = estimates.sigma_scan if kind == "sigma" else estimates.rho_scan
    rep = fn(_drift(cfg), cfg.operator(), args.n, cfg.replicas, cfg.seed, cfg.gamma, args.samples,
             args.lattice_m, cfg.quadrature_min, cfg.beta_A, cfg.workers)
    meta = [f"fitted_slope={rep.fitted_slope!r}", f"fitted_slope_raw={rep.fitted_slope_raw!r}",
            f"theta={rep.theta!r}", f"beta_A={rep.beta_A!r}",
            "failure probabilities are not estimated; acceptance is quantile stability"]
    return Table(["n", "samples", "q50", "q95", "q99", "raw_q99", "floor_negligible"], list(rep.rows()), meta,
                 plot=dict(x="n", ys=["q50", "q95", "q99", "raw_q99"], logy=True, title=f"{kind} scan"))


def cmd_sigma_scan(args, cfg):
    return _scan("sigma", args, cfg)


def cmd_rho_scan(args, cfg):
    return _scan("rho", args, cfg)


def cmd_euler_chain(args, cfg):
    reps = estimates.chain_sum_scan(_drift(cfg), cfg.operator(), args.n, args.N, cfg.replicas, cfg.seed,
                                    cfg.gamma, args.lattice_m, cfg.quadrature_min, cfg.workers)
    rows = [(i, r.left, r.term_x, r.term_x0, r.term_error, r.term_floor, r.floor_negligible, r.implied_constant)
            for i, r in enumerate(reps)]
    consts = np.array([r.implied_constant for r in reps])
    finite = consts[np.isfinite(consts)]
    meta = [f"n={args.n}", f"N={args.N}"]
    if finite.size:
        meta.append("implied_constant_quantiles=" + ",".join(repr(float(v)) for v in np.quantile(finite, estimates.QUANTILES)))
    return Table(["replica", "left", "term_x", "term_x0", "term_error", "term_floor", "floor_negligible",
                  "implied_constant"], rows, meta,
                 plot=dict(x="replica", ys=["implied_constant"], title="implied constant per path"))


def cmd_bdg_check(args, cfg):
    rows = []
    for p in args.p:
        for n in args.n:
            r = estimates.bdg_check(p, n, args.family, cfg.replicas, cfg.seed, cfg.workers)
            rows.append((r.family, r.p, r.n, r.lhs, r.rhs, r.ratio, r.exact, r.ratio <= r.p))
    status = EXIT_OK if all(r[-1] for r in rows) else EXIT_INVALID
    return Table(["family", "p", "n", "lhs", "rhs", "ratio", "exact", "within_p"], rows, status=status,
                 plot=dict(x="n", ys=["ratio"], group="p", title="BDG ratio"))


def cmd_exp_moment(args, cfg):
    rows = []
    for r in args.r:
        res = estimates.exp_moment_check(args.C, r, args.family, cfg.replicas, cfg.seed, cfg.workers)
        rows.append((res.family, res.C, res.r, res.replicas, res.estimate, res.se, res.estimate_abs, res.se_abs,
                     res.estimate <= 2.0 + 3.0 * res.se))
    return Table(["family", "C", "r", "replicas", "estimate", "se", "estimate_abs", "se_abs", "within_bound"], rows,
                 plot=dict(x="r", ys=["estimate", "estimate_abs"], title="exponential moment"))


def cmd_gronwall(args, cfg):
    seq = gronwall.run_recursion(args.K, args.m, args.beta0, args.steps)
    cap = seq.cap
    rows = [(j, b, cap) for j, b in enumerate(seq.values)]
    meta = [f"K={args.K!r}", f"m={args.m}", f"beta0={args.beta0!r}", f"max_beta={float(seq.values.max())!r}",
            f"within_cap={bool(seq.values.max() <= cap * (1 + 1e-12))}"]
    return Table(["j", "beta", "cap"], rows, meta, plot=dict(x="j", ys=["beta", "cap"], title="Gronwall sequence"))


def cmd_solve(args, cfg):
    op = cfg.operator()
    x0 = np.zeros(op.dim) if args.x0 is None else np.asarray(args.x0, dtype=float)
    if x0.size != op.dim:
        raise ValueError(f"--x0 has {x0.size} entries, D={op.dim}")
    grid = TimeGrid(cfg.grid_steps, cfg.horizon)
    path = simulate_ou(op, grid, cfg.seed, args.replica)
    sol = solve_mild(_drift(cfg), op, x0, path, _solve_cfg(cfg))
    rows = [(t, n + 1, sol.values[i, n]) for i, t in enumerate(grid.times) for n in range(op.dim)]
    meta = [f"converged={sol.converged}", f"iterations={sol.iterations}", f"residual={sol.residual!r}"]
    return Table(["t", "mode", "value"], rows, meta, status=EXIT_OK if sol.converged else EXIT_INVALID,
                 plot=dict(x="t", ys=["value"], group="mode", title="mild solution"))


def cmd_uniqueness(args, cfg):
    op = cfg.operator()
    rep = uniqueness_experiment(_drift(cfg), op, args.paths, args.inits, _solve_cfg(cfg), cfg.seed,
                                gamma=cfg.gamma, workers=cfg.workers)
    rows = [(p, rep.max_distance[p], rep.nonconverged[p], rep.iterations[p], rep.success[p])
            for p in range(rep.paths)]
    meta = [f"success_fraction={rep.success_fraction!r}", f"nonconvergence_count={rep.nonconvergence_count}"]
    return Table(["path", "max_distance", "nonconverged", "iterations", "success"], rows, meta,
                 plot=dict(x="path", ys=["max_distance"], logy=True, title="pairwise sup-distance"))


# -- parser --------------------------------------------------------------------


def _config_flags(parser):
    g = parser.add_argument_group("config overrides (flags win over --config)")
    for name in FIELDS:
        g.add_argument("--" + name.replace("_", "-"), dest="cfg_" + name, metavar="VALUE", default=None)
    g.add_argument("--config", metavar="FILE", default=None, help="key=value file")
    g.add_argument("--plot", action="store_true", help="also write a PNG next to --out")


def build_parser():
    parser = argparse.ArgumentParser(prog="regnoise", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"regnoise {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")
    sub.required = True

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        _config_flags(p)
        p.set_defaults(handler=fn)
        return p

    p = add("simulate-ou", cmd_simulate_ou, "sample OU coefficient paths")
    p.add_argument("--paths", type=int, default=1)
    p = add("lattice-stats", cmd_lattice_stats, "dimension and counting statistics of the dyadic lattice")
    p.add_argument("--r", type=int_list, default=[0])
    p.add_argument("--m", type=int_list, default=list(range(0, 11)))
    p.add_argument("--scale", type=int, choices=(1, 2), default=1)
    add("validate-drift", cmd_validate_drift, "decay certificate of the configured drift")
    p = add("phi-estimate", cmd_phi_estimate, "per-query functional values against both bounds")
    p.add_argument("--n", type=int_list, default=[4, 6, 8])
    p.add_argument("--queries", type=int, default=20)
    p.add_argument("--lattice-m", type=int, default=8)
    for name, fn in (("sigma-scan", cmd_sigma_scan), ("rho-scan", cmd_rho_scan)):
        p = add(name, fn, f"{name.split('-')[0]} ratio quantiles over levels n")
        p.add_argument("--n", type=int_list, default=list(range(4, 11)))
        p.add_argument("--samples", type=int, default=4)
        p.add_argument("--lattice-m", type=int, default=8)
    p = add("euler-chain", cmd_euler_chain, "implied constants of Euler chain sums")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--N", type=int, default=64)
    p.add_argument("--lattice-m", type=int, default=8)
    p = add("bdg-check", cmd_bdg_check, "moment ratio for martingale walks")
    p.add_argument("--p", type=float_list, default=[2.0, 4.0, 6.0])
    p.add_argument("--n", type=int_list, default=list(range(1, 13)))
    p.add_argument("--family", default="pm1", choices=("pm1", "uniform", "gaussian"))
    p = add("exp-moment", cmd_exp_moment, "exponential moment of a bounded-increment walk")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--r", type=int_list, default=[10, 100])
    p.add_argument("--family", default="pm", choices=estimates.CERTIFIED)
    p = add("gronwall", cmd_gronwall, "log-type recursion and its cap")
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--beta0", type=float, required=True)
    p.add_argument("--steps", type=int, default=None)
    p = add("solve", cmd_solve, "mild solution on one noise path")
    p.add_argument("--x0", type=float_list, default=None)
    p.add_argument("--replica", type=int, default=0)
    p = add("uniqueness", cmd_uniqueness, "solve from several initial guesses per path")
    p.add_argument("--paths", type=int, default=50)
    p.add_argument("--inits", type=int, default=3)
    return parser


def resolve_config(args):
    text = Path(args.config).read_text() if args.config else ""
    base = parse_config(text)
    flags = "\n".join(f"{name}={getattr(args, 'cfg_' + name)}" for name in FIELDS
                      if getattr(args, "cfg_" + name) is not None)
    return parse_config(flags, base)


def write_csv(stream, command, cfg, table):
    stream.write(f"# regnoise {__version__}\n")
    stream.write(f"# command={command}\n")
    stream.write(f"# seed={cfg.seed}\n")
    for line in cfg.echo():
        stream.write(f"# config {line}\n")
    for line in table.meta:
        stream.write(f"# {line}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(table.header)
    for row in table.rows:
        w.writerow([fmt(v) for v in row])


def run(argv=None, stdout=None):
    """Parse ``argv`` and run one subcommand; returns the exit status."""
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
    except (ConfigError, OSError) as exc:
        for e in getattr(exc, "errors", [str(exc)]):
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_INVALID
    try:
        table = args.handler(args, cfg)
    except BudgetExceeded as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except gronwall.GronwallAbort as exc:
        print(f"aborted at index {exc.j}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if cfg.out == "-":
        write_csv(stdout, args.command, cfg, table)
    else:
        with open(cfg.out, "w", newline="") as fh:
            write_csv(fh, args.command, cfg, table)
    if args.plot:
        if cfg.out == "-":
            print("--plot needs --out FILE", file=sys.stderr)
            return EXIT_INVALID
        if table.plot:
            from regnoise.plotting import plot_table

            spec = dict(table.plot)
            keep = spec.pop("filter", None)
            rows = [r for r in table.rows if keep is None or keep(r)]
            plot_table(cfg.out, table.header, rows, **spec)
    return table.status


def main():
    logging.basicConfig(level=logging.WARNING)
    sys.exit(run())


if __name__ == "__main__":
    main()
