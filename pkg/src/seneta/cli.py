"""Command-line front end.

    seneta <subcommand> --offspring SPEC --lifetime SPEC [options]

Subcommands: malthusian, renewal, solve-r, asymptote, gw, simulate, verify.
CSV goes to ``--output`` (default stdout), UTF-8 with LF line endings and
17 significant digits.  ``--config FILE`` reads ``key = value`` lines whose
keys are long flag names; flags on the command line win.

Exit codes: 0 success, 1 usage error, 2 numeric non-convergence (or no
data), 3 hypothesis or domain violation, 4 ``verify`` ran but a check failed.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import math
import sys

import numpy as np

from . import __version__
from .errors import SenetaError

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_HYPOTHESIS, EXIT_VERIFY_FAILED = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def fmt(x) -> str:
    """CSV rendering: integers verbatim, reals with 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


@contextlib.contextmanager
def _sink(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def write_csv(path, header, rows) -> None:
    with _sink(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


# -- argument parsing --------------------------------------------------------

def parse_theta(text: str, offspring) -> float:
    if str(text).strip().lower() == "mid":
        return 0.5 * (offspring.extinction_probability + 1.0)
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"--theta expects a number or 'mid', got {text!r}") from None


def parse_times(text: str) -> tuple:
    """``2,4,8`` or ``start:stop:step`` (stop included)."""
    text = str(text).strip()
    try:
        if ":" in text:
            a, b, h = (float(x) for x in text.split(":"))
            if h <= 0 or b < a:
                raise ValueError
            n = int(math.floor((b - a) / h + 1e-9))
            return tuple(a + h * np.arange(n + 1))
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"bad time grid {text!r}; use '2,4,8' or 'start:stop:step'") from None


def read_config(path: str) -> dict:
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for num, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{num}: expected key = value, got {raw.rstrip()!r}")
                k, v = line.split("=", 1)
                out[k.strip().lstrip("-").replace("-", "_")] = v.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config {path!r}: {exc}") from None
    return out


def _common(p, lifetime=True):
    p.add_argument("--offspring", help="offspring spec, e.g. binary or heavylog:0.5,2.0")
    if lifetime:
        p.add_argument("--lifetime", help="lifetime spec, e.g. exp:1 or gamma:2,2")
    p.add_argument("-o", "--output", help="output path (default stdout)")
    p.add_argument("--config", help="key = value file; command-line flags override it")


def _grid(p, renewal=True):
    p.add_argument("--theta", default="mid", help="R(1); a number in (q, 1) or 'mid' = (q+1)/2")
    p.add_argument("--du", type=float, default=0.01, help="log-y grid step (default 0.01)")
    p.add_argument("--t-max", type=float, default=None, help="time coverage (default 60/beta)")
    if renewal:
        p.add_argument("--delta", type=float, default=None, help="renewal step (default (1/nu)/50)")
        p.add_argument("--horizon", type=float, default=None, help="renewal horizon (default 30/nu)")
        p.add_argument("--utilde-atom", action="store_true",
                       help="include the unit atom of Utilde at 0 in sigma")
        p.add_argument("--override-non-lattice", action="store_true",
                       help="accept lifetimes whose lattice class is unknown")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="seneta", description="Seneta constants for Bellman-Harris processes")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("malthusian", help="Malthusian parameter beta and renewal rate nu")
    _common(p)

    p = sub.add_parser("renewal", help="renewal table t,U,nu_t,Utilde")
    _common(p)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--override-non-lattice", action="store_true")

    p = sub.add_parser("solve-r", help="limit Laplace transform logy,R")
    _common(p)
    _grid(p, renewal=False)

    p = sub.add_parser("asymptote", help="series t,X,logX,Y,ratio,sigma,gap,chi")
    _common(p)
    _grid(p)

    p = sub.add_parser("gw", help="Galton-Watson Seneta constants n,s_n,chi_n,m_n,Y,ratio")
    _common(p, lifetime=False)
    p.add_argument("--theta", default="mid")
    p.add_argument("--generations", type=int, default=60, help="last generation N (default 60)")

    p = sub.add_parser("simulate", help="Monte Carlo replicate,t,Z,extinct,censored")
    _common(p)
    p.add_argument("--replicates", type=int, default=10_000)
    p.add_argument("--times", default="1:10:1", help="'2,4,8' or 'start:stop:step'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=10_000_000, help="events per replicate")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--engine", choices=("bh", "gw"), default="bh",
                   help="gw runs generation by generation (unit Dirac lifetime)")
    p.add_argument("--summary", help="also write t,meanZ,seZ,survivors,laplace_y1,se here")
    p.add_argument("--theta", default="mid", help="normalization of the chi schedule in the summary")
    p.add_argument("--conditional", action="store_true",
                   help="summary Laplace column averages over survivors only")

    p = sub.add_parser("verify", help="full self-consistency pipeline with a pass/fail report")
    _common(p)
    _grid(p)
    return ap


def parse_args(argv):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command is None:
        raise UsageError("missing subcommand; see --help")
    if args.config:
        cfg = read_config(args.config)
        sub = ap._subparsers._group_actions[0].choices[args.command]
        dests = {a.dest: a for a in sub._actions}
        explicit = set()
        probe = sub.parse_args(argv[argv.index(args.command) + 1:], argparse.Namespace())
        for dest in dests:
            if getattr(probe, dest, None) != sub.get_default(dest):
                explicit.add(dest)
        for key, raw in cfg.items():
            if key not in dests or key in ("config", "help"):
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            if key in explicit:
                continue
            act = dests[key]
            if act.const is True and act.nargs == 0:
                val = raw.lower() in ("1", "true", "yes", "on")
            elif act.type is not None:
                try:
                    val = act.type(raw)
                except ValueError:
                    raise UsageError(f"config key {key!r}: bad value {raw!r}") from None
            else:
                val = raw
            setattr(args, key, val)
    for need in ("offspring", "lifetime"):
        if need in vars(args) and not getattr(args, need):
            if need == "lifetime" and args.command == "gw":
                continue
            raise UsageError(f"--{need} is required for {args.command}")
    return args


# -- subcommands -------------------------------------------------------------

def _laws(args):
    from .lifetime import parse_lifetime_spec
    from .offspring import parse_offspring_spec

    off = parse_offspring_spec(args.offspring)
    life = parse_lifetime_spec(args.lifetime) if getattr(args, "lifetime", None) else None
    return off, life


def cmd_malthusian(args) -> int:
    from .lifetime import malthusian, tilt

    off, life = _laws(args)
    beta = malthusian(life, off.mean)
    nu = tilt(life, beta, off.mean).nu
    write_csv(args.output, ["mu", "beta", "nu"], [[off.mean, beta, nu]])
    return EXIT_OK


def cmd_renewal(args) -> int:
    from .lifetime import malthusian, tilt
    from .renewal import build_table

    off, life = _laws(args)
    beta = malthusian(life, off.mean)
    table = build_table(tilt(life, beta, off.mean), args.delta, args.horizon, args.override_non_lattice)
    rows = zip(table.t, table.U, table.nu * table.t, table.Ut)
    write_csv(args.output, ["t", "U", "nu_t", "Utilde"], rows)
    return EXIT_OK


def cmd_solve_r(args) -> int:
    from .laplace import solve_R
    from .lifetime import malthusian

    off, life = _laws(args)
    theta = parse_theta(args.theta, off)
    beta = malthusian(life, off.mean)
    sol = solve_R(off, life, beta, theta, du=args.du, t_max=args.t_max)
    write_csv(args.output, ["logy", "R"], zip(sol.u, sol.R))
    return EXIT_OK


def cmd_asymptote(args) -> int:
    from .laplace import build_series, solve_R
    from .lifetime import malthusian, tilt
    from .offspring import XLogX, xlogx_diverges
    from .renewal import build_table

    off, life = _laws(args)
    theta = parse_theta(args.theta, off)
    beta = malthusian(life, off.mean)
    table = build_table(tilt(life, beta, off.mean), args.delta, args.horizon, args.override_non_lattice)
    sol = solve_R(off, life, beta, theta, du=args.du, t_max=args.t_max, nu=table.nu)
    s = build_series(sol, table, args.utilde_atom)
    ratio = s.ratio
    if xlogx_diverges(off) is not XLogX.INFINITE:
        print("notice: hypothesis violated: E(Z log Z) finite, Y converges; ratio not reported",
              file=sys.stderr)
        ratio = np.full(len(s.t), np.nan)
    rows = zip(s.t, s.X, s.logX, s.Y, ratio, s.sigma, s.gap, s.chi)
    write_csv(args.output, ["t", "X", "logX", "Y", "ratio", "sigma", "gap", "chi"], rows)
    return EXIT_OK


def cmd_gw(args) -> int:
    from .errors import HypothesisError
    from .gw_oracle import gw_theorem_check, gw_Y, seneta_chi

    off, _ = _laws(args)
    theta = parse_theta(args.theta, off)
    if args.generations < 0:
        raise UsageError("--generations must be >= 0")
    series = seneta_chi(off, theta, args.generations)
    try:
        ratio = gw_theorem_check(off, theta, args.generations).ratio
    except HypothesisError as exc:
        print(f"notice: {exc}", file=sys.stderr)
        ratio = np.full(len(series.n), np.nan)
    Y = gw_Y(off, series.n)
    rows = zip(series.n, series.s, series.chi, series.m, Y, ratio)
    write_csv(args.output, ["n", "s_n", "chi_n", "m_n", "Y", "ratio"], rows)
    return EXIT_OK


def _chi_schedule(args, off, life, times):
    """(t, chi_t) for the summary's Laplace column."""
    theta = parse_theta(args.theta, off)
    if args.engine == "gw":
        from .gw_oracle import seneta_chi

        series = seneta_chi(off, theta, int(max(times)))
        return series.n.astype(float), series.chi
    from .laplace import X_of_t, solve_R
    from .lifetime import malthusian

    beta = malthusian(life, off.mean)
    t_max = max(60.0 / beta, 1.05 * max(times))
    sol = solve_R(off, life, beta, theta, t_max=t_max)
    t = np.asarray(times, dtype=float)
    return t, X_of_t(sol, t).chi


def cmd_simulate(args) -> int:
    from . import simulator as sim

    off, life = _laws(args)
    times = parse_times(args.times)
    cfg = sim.SimConfig(args.offspring, args.lifetime, args.replicates, times, args.cap,
                        args.seed, args.workers)
    run = sim.simulate_gw if args.engine == "gw" else sim.simulate_bh
    ens = run(cfg)

    def rows():
        for r in range(ens.Z.shape[0]):
            for i, t in enumerate(ens.times):
                z = int(ens.Z[r, i])
                yield [r, float(t), None if z < 0 else z, z == 0, z < 0]

    write_csv(args.output, ["replicate", "t", "Z", "extinct", "censored"], rows())
    if args.summary:
        sched = _chi_schedule(args, off, life, ens.times)
        summary = []
        for t in ens.times:
            z = ens.observed(t)
            if len(z) == 0:
                summary.append([t, math.nan, math.nan, 0, math.nan, math.nan])
                continue
            m, se = ens.mean_Z(t)
            try:
                lap = sim.empirical_laplace(ens, sched, 1.0, t, conditional=args.conditional)
            except SenetaError:
                lap = (math.nan, math.nan)
            summary.append([t, m, se, int(np.sum(z > 0)), *lap])
        write_csv(args.summary, ["t", "meanZ", "seZ", "survivors", "laplace_y1", "se"], summary)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .laplace import verify_pipeline

    off, life = _laws(args)
    theta = parse_theta(args.theta, off)
    rep = verify_pipeline(off, life, theta, du=args.du, t_max=args.t_max, delta=args.delta,
                          horizon=args.horizon, include_atom=args.utilde_atom,
                          allow_non_lattice_override=args.override_non_lattice)
    with _sink(args.output) as fh:
        fh.write("\n".join(rep.lines()) + "\n")
    return EXIT_OK if rep.passed else EXIT_VERIFY_FAILED


COMMANDS = {
    "malthusian": cmd_malthusian,
    "renewal": cmd_renewal,
    "solve-r": cmd_solve_r,
    "asymptote": cmd_asymptote,
    "gw": cmd_gw,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def run(argv=None) -> int:
    """Parse ``argv`` and run; returns the exit code instead of exiting."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SenetaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


def main(argv=None) -> None:
    sys.exit(run(argv))
