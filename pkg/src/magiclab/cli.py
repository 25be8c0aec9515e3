"""``magiclab`` command line.

Exit codes: 0 success, 2 usage or validation error, 3 negative predicate
(for example a channel that is not CPWP), 4 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np

from . import conic
from ._validation import DimensionError, ValidationError
from .channels import parse_angle, parse_channel, state_library, u_theta
from .measures import (
    MeasureReport,
    is_cpwp,
    mana_channel,
    mana_state,
    max_thauma_channel,
    max_thauma_state,
    robustness_stab,
    robustness_wplus,
)
from .serialization import SCHEMA_VERSION, dumps, load_operator
from .simulator import Circuit, estimate, exact_born
from .synthesis import approx_bound, exact_bound

EXIT_OK, EXIT_USAGE, EXIT_NEGATIVE, EXIT_SOLVER = 0, 2, 3, 4

log = logging.getLogger("magiclab")


def _threads(value: Optional[int]) -> int:
    if value:
        return value
    env = os.environ.get("MAGICLAB_THREADS")
    return int(env) if env else (os.cpu_count() or 1)


def _load_state(spec: str, d: int, n: int) -> np.ndarray:
    if os.path.exists(spec):
        rho, _ = load_operator(spec)
        return rho
    return state_library(spec, d, n)


def _out(text: str, path: Optional[str]) -> None:
    if path and path != "-":
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _report(measure: str, value: float) -> MeasureReport:
    return MeasureReport(measure, value, float(2.0**value))


def cmd_measure(args) -> int:
    kind = args.measure
    if (args.channel is None) == (args.state is None):
        raise ValidationError("give exactly one of --channel or --state")
    if args.state is not None:
        rho = _load_state(args.state, args.d, args.n)
        if kind == "mana":
            rep = _report("mana", mana_state(rho, args.d))
        elif kind == "thauma":
            rep = max_thauma_state(rho, args.d, force=args.force)
        elif kind == "rob-wplus":
            rep = robustness_wplus(rho, args.d)
        else:
            rep = robustness_stab(rho, args.d)
    else:
        ch = parse_channel(args.channel, args.d)
        if kind == "mana":
            rep = mana_channel(ch)
        elif kind == "thauma":
            rep = max_thauma_channel(ch, force=args.force)
        else:
            # robustness of the normalized Choi state
            phi = ch.choi / ch.dim_in
            rep = robustness_wplus(phi, ch.d) if kind == "rob-wplus" else robustness_stab(phi, ch.d)
    _out(dumps(rep.to_dict()) + "\n", args.out)
    return EXIT_OK


def cmd_check_cpwp(args) -> int:
    ch = parse_channel(args.channel, args.d)
    res = is_cpwp(ch, args.tol)
    _out(dumps(res.to_dict()) + "\n", args.out)
    return EXIT_OK if res else EXIT_NEGATIVE


def cmd_simulate(args) -> int:
    c = Circuit.load(args.circuit)
    res = estimate(c, args.eps, args.delta, seed=args.seed, shards=args.shards, threads=_threads(args.threads))
    out = res.to_dict()
    if args.exact:
        out["exact"] = exact_born(c)
    _out(dumps(out) + "\n", args.out)
    return EXIT_OK


def parse_grid(spec: str) -> np.ndarray:
    """``"a:b:step"`` (inclusive of ``b`` up to rounding); ``pi`` multiples allowed, e.g. ``"pi:2pi:0.25pi"``."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValidationError(f"grid must look like a:b:step, got {spec!r}")
    a, b, step = (parse_angle(p) for p in parts)
    if step <= 0 or b < a:
        raise ValidationError("grid needs step > 0 and b >= a")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return a + step * np.arange(count)


def _row_dep_t(p: float) -> list:
    ch = parse_channel(f"dep:{p!r}∘t")
    chk = is_cpwp(ch)
    return [p, mana_channel(ch).log2_value, chk.min_entry, int(chk.is_cpwp)]


def _row_dep3_ccx(p: float) -> list:
    ch = parse_channel(f"dep3:{p!r}∘ccx")
    chk = is_cpwp(ch)
    return [p, mana_channel(ch).log2_value, chk.min_entry, int(chk.is_cpwp)]


def _row_noisy_ccx(p: float, target_mana: float) -> list:
    m_res = mana_channel(parse_channel(f"dep:{p!r}∘t")).log2_value
    ratio = target_mana / m_res if m_res > 1e-9 else math.inf
    return [p, target_mana, m_res, ratio]


def _row_utheta(theta: float) -> list:
    ch = u_theta(theta)
    m = mana_channel(ch).log2_value
    rob = robustness_wplus(ch.choi / ch.dim_in).exp_value
    return [theta, m, 2.0**m, rob]


FAMILIES = {
    "dep-t": ["p", "mana", "min_entry", "cpwp"],
    "dep3-ccx": ["p", "mana", "min_entry", "cpwp"],
    "noisy-ccx": ["p", "mana_target", "mana_resource", "ratio"],
    "utheta": ["theta", "mana", "exp_mana", "rob_wplus"],
}


def cmd_sweep(args) -> int:
    grid = parse_grid(args.grid)
    fam = args.family
    if fam == "dep-t":
        fn = _row_dep_t
    elif fam == "dep3-ccx":
        fn = _row_dep3_ccx
    elif fam == "noisy-ccx":
        target = mana_channel(parse_channel("dep3:0.01∘ccx")).log2_value
        fn = lambda p: _row_noisy_ccx(p, target)  # noqa: E731
    else:
        fn = _row_utheta
    workers = min(_threads(args.threads), len(grid))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            rows = list(ex.map(fn, [float(g) for g in grid]))
    else:
        rows = [fn(float(g)) for g in grid]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FAMILIES[fam] + ["schema"])
    for r in rows:
        w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in r] + [SCHEMA_VERSION])
    _out(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_synth_bound(args) -> int:
    target = parse_channel(args.target, args.d)
    resource = parse_channel(args.resource, args.d)
    target_name, resource_name = args.target, args.resource
    if args.eps is None:
        res = exact_bound(target, resource, thauma=not args.no_thauma)
        res.target, res.resource = target_name, resource_name
        out = res.to_dict()
    else:
        out = approx_bound(target, resource, args.eps).to_dict()
        out.update(target=target_name, resource=resource_name)
    _out(dumps(out) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="magiclab", description="Wigner-negativity magic measures for qudit channels.")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: MAGICLAB_THREADS or all cores)")
    p.add_argument("--quiet", action="store_true", help="suppress log output")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp_):
        sp_.add_argument("--d", type=int, default=3, help="qudit dimension (odd prime)")
        sp_.add_argument("--out", default=None, help="output file (default stdout)")

    m = sub.add_parser("measure", help="evaluate a magic measure")
    common(m)
    m.add_argument("--channel", help="channel expression, e.g. 'dep:0.5∘t'")
    m.add_argument("--state", help="state name (0, +, T, mixed, phi) or operator JSON file")
    m.add_argument("--n", type=int, default=1, help="qudit count for named product states")
    m.add_argument("--measure", choices=["mana", "thauma", "rob-wplus", "rob-stab"], default="mana")
    m.add_argument("--force", action="store_true", help="allow SDPs beyond the default size limit")
    m.set_defaults(func=cmd_measure)

    c = sub.add_parser("check-cpwp", help="exit 0 if the channel is CPWP, 3 otherwise")
    common(c)
    c.add_argument("--channel", required=True)
    c.add_argument("--tol", type=float, default=1e-9)
    c.set_defaults(func=cmd_check_cpwp)

    s = sub.add_parser("simulate", help="Monte Carlo estimate of a circuit outcome probability")
    common(s)
    s.add_argument("circuit", help="circuit JSON file")
    s.add_argument("--eps", type=float, default=0.05)
    s.add_argument("--delta", type=float, default=0.1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--shards", type=int, default=1)
    s.add_argument("--exact", action="store_true", help="also report the exact probability")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="CSV data for parameter sweeps")
    common(w)
    w.add_argument("--family", choices=sorted(FAMILIES), required=True)
    w.add_argument("--grid", required=True, help="a:b:step, pi multiples allowed")
    w.set_defaults(func=cmd_sweep)

    b = sub.add_parser("synth-bound", help="lower bound on resource gate count")
    common(b)
    b.add_argument("--target", required=True)
    b.add_argument("--resource", required=True)
    b.add_argument("--eps", type=float, default=None, help="approximation tolerance (half diamond norm)")
    b.add_argument("--no-thauma", action="store_true", help="skip the thauma ratio")
    b.set_defaults(func=cmd_synth_bound)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads:
        os.environ["MAGICLAB_THREADS"] = str(args.threads)
    try:
        return args.func(args)
    except conic.SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except conic.ProblemTooLarge as exc:
        print(f"error: {exc} (--force on the command line)", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, DimensionError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
