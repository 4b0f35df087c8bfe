"""Command-line driver: one subcommand per experiment.

Scans are written as CSV and single runs as JSON.  Both start with the
resolved configuration so any run can be repeated from its own output.
Exit status is 0 on pass, 1 on a tolerance failure and 2 on a usage or
precondition error.

The default for ``--jobs`` comes from the ``SPACETIME_QI_JOBS`` environment
variable when it is set.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import acceptance
from . import fieldkernel as fk
from . import randomfield as rf
from . import spatial as sp
from . import spinbell as sb
from . import wick as wk
from .exceptions import BoundViolation, ConvergenceError, DomainError, PreconditionError, SizeLimitError

JOBS_ENV = "SPACETIME_QI_JOBS"
SCHEMA = 1

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class Result:
    """Envelope shared by every subcommand.

    ``rows`` and ``columns`` are set for scans; ``outputs`` holds named
    scalars or summaries.  ``passed`` is None when nothing was checked.
    """

    def __init__(self, outputs=None, tolerances=None, passed=None, columns=None, rows=None):
        self.outputs = outputs or {}
        self.tolerances = tolerances or {}
        self.passed = passed
        self.columns = columns
        self.rows = rows


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------


def _clean(x):
    """Turn numpy scalars, complex numbers and NaN into JSON-safe values."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_clean(float(x.real)), _clean(float(x.imag))]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False)


def envelope(command: str, config: dict, result: Result, wall_time) -> dict:
    outputs = dict(result.outputs)
    if result.rows is not None:
        outputs["rows"] = [dict(zip(result.columns, r)) for r in result.rows]
    return {
        "schema": SCHEMA,
        "command": command,
        "config": config,
        "outputs": outputs,
        "tolerances": result.tolerances,
        "passed": result.passed,
        "wall_time": wall_time,
    }


def _csv_cell(v):
    v = _clean(v)
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True)
    return v


def render_csv(command: str, config: dict, result: Result, wall_time) -> str:
    buf = io.StringIO()
    buf.write(f"# command: {command}\n")
    buf.write(f"# config: {json.dumps(_clean(config), sort_keys=True)}\n")
    buf.write(f"# tolerances: {json.dumps(_clean(result.tolerances), sort_keys=True)}\n")
    if result.outputs:
        buf.write(f"# summary: {json.dumps(_clean(result.outputs), sort_keys=True)}\n")
    buf.write(f"# passed: {json.dumps(result.passed)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow([_csv_cell(v) for v in row])
    buf.write(f"# wall_time: {json.dumps(_clean(wall_time))}\n")
    return buf.getvalue()


def read_csv(text: str):
    """Parse CSV output back into ``(header_dict, rows)``; the inverse of :func:`render_csv`."""
    header, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            header[key] = value if key == "command" else json.loads(value)
        else:
            body.append(line)
    rows = list(csv.DictReader(body))
    return header, rows


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def _grid(lo: float, hi: float, step: float) -> list:
    if not step > 0.0 or hi < lo:
        raise UsageError("need step > 0 and max >= min")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 12) for i in range(count)]


def cmd_wightman(args) -> Result:
    if args.r is not None:
        rs = [float(r) for r in args.r]
    else:
        if args.r_num < 1:
            raise UsageError("--r-num must be at least 1")
        rs = np.linspace(args.r_min, args.r_max, args.r_num).tolist()
        if args.r_max < args.r_min:
            raise UsageError("--r-max must not be below --r-min")
    if any(not r > 0.0 for r in rs):
        raise UsageError("distances must be positive")
    if args.m < 0.0:
        raise UsageError("mass must be non-negative")
    want = {"closed", "quadrature", "asymptotic"} if args.method == "all" else {args.method}
    rows = []
    worst = 0.0
    for r in rs:
        closed = fk.wightman_closed(r, args.m).value if want & {"closed", "quadrature"} else None
        quad = asym = ratio = None
        message = ""
        if "quadrature" in want:
            try:
                quad = fk.wightman_quadrature(r, args.m).value
                worst = max(worst, abs(quad - closed) / abs(closed))
            except ConvergenceError as exc:
                message = str(exc)
                worst = math.inf
        if "asymptotic" in want:
            try:
                asym = fk.wightman_asymptotic(r, args.m).value
                ratio = fk.wightman_closed(r, args.m).value / asym
            except DomainError as exc:
                message = str(exc)
        rows.append([r, closed if "closed" in want else None, quad, asym, ratio, message])
    checked = "quadrature" in want
    passed = worst <= args.tol if checked else None
    outputs = {"max_rel_error": worst} if checked else {}
    return Result(
        outputs, {"rel": args.tol} if checked else {}, passed,
        ["r", "closed", "quadrature", "asymptotic", "ratio", "error"], rows,
    )


def _cluster_setup(args):
    u = wk.OnShellAmplitude((0.0, 0.0, 0.0), (0.0, 0.0, args.k0), args.sigma)
    v = wk.OnShellAmplitude((0.0, 0.5, 0.0), (0.0, 0.5, args.k0 - 0.5), args.sigma)
    w = wk.OnShellAmplitude((0.3, 0.0, 0.0), (0.5, 0.0, args.k0 - 1.0), args.sigma)
    w2 = wk.OnShellAmplitude((-0.3, 0.2, 0.0), (0.0, -0.5, args.k0 - 1.0), args.sigma)
    creators = {"vacuum": [], "one": [w], "two": [w, w2]}
    state = wk.PolynomialState(wk.FieldMonomial(creators[args.state]), args.m)
    return state, wk.FieldMonomial([u] * args.a_power), wk.FieldMonomial([v] * args.b_power)


def cmd_cluster(args) -> Result:
    if args.m < 0.0 or not args.sigma > 0.0:
        raise UsageError("need m >= 0 and sigma > 0")
    if args.a_power < 0 or args.b_power < 0:
        raise UsageError("monomial powers must be non-negative")
    state, A, B = _cluster_setup(args)
    ls = _grid(0.0, args.l_max, args.l_step)
    scan = wk.cluster_scan(state, A, B, ls, args.direction)
    rows = [
        [r["l"], r["gap"], r["omega_A"].real, r["omega_A"].imag,
         r["vacuum_A"].real, r["vacuum_A"].imag, abs(r["omega_A"] - r["vacuum_A"])]
        for r in scan
    ]
    gaps = [r["gap"] for r in scan]
    monotone = acceptance._monotone_tail(gaps)
    passed = gaps[-1] < args.tol and monotone
    return Result(
        {"final_gap": gaps[-1], "monotone_tail": monotone, "position_width": 1.0 / (2.0 * args.sigma)},
        {"final_gap": args.tol, "tail_floor": acceptance.TAIL_FLOOR}, passed,
        ["l", "gap", "omega_A_re", "omega_A_im", "vacuum_A_re", "vacuum_A_im", "deviation"], rows,
    )


def cmd_chsh(args) -> Result:
    gs = _grid(args.g_min, args.g_max, args.g_step)
    if gs[0] < 0.0 or gs[-1] > 1.0:
        raise UsageError("g must lie in [0, 1]")
    rows = []
    worst = 0.0
    crossing = None
    for g in gs:
        opt = sb.chsh_max_quantum(g)
        worst = max(worst, abs(opt.value - 2.0 * math.sqrt(2.0) * g))
        verdict = sb.local_realism_necessary_test(sb.attenuated_matrix(g, opt.angles))
        if crossing is None and opt.value > 2.0 + sb.CHSH_SLACK:
            crossing = g
        rows.append([g, opt.value, sb.g_regime(g), verdict])
    return Result(
        {"first_g_above_2": crossing, "threshold": sb.NO_LHV_BOUND, "max_error": worst},
        {"abs": args.tol}, worst <= args.tol,
        ["g", "S", "regime", "chsh_test"], rows,
    )


def cmd_lhv(args) -> Result:
    est = sb.lhv_monte_carlo(args.g, args.alpha, args.beta, args.n, args.seed, jobs=args.jobs)
    exact = args.g * math.cos(args.alpha - args.beta)
    z = (est.estimate - exact) / est.stderr if est.stderr > 0.0 else 0.0
    return Result(
        {"estimate": est.estimate, "stderr": est.stderr, "exact": exact, "z": z,
         "regime": sb.g_regime(args.g)},
        {"sigma": args.tol}, abs(z) <= args.tol,
    )


def cmd_gfactor(args) -> Result:
    rho = sp.ProductDensity(sp.GaussianPacket3(args.mean1, args.s1), sp.GaussianPacket3(args.mean2, args.s2))
    A = sp.Box.cube(args.mean1, args.side_a)
    B = sp.Box.cube(args.mean2, args.side_b)
    l_max = 12.0 * args.s1 if args.l_max is None else args.l_max
    ls = _grid(0.0, l_max, args.l_step)
    gs = sp.g_decay_scan(rho, A, B, args.direction, ls)
    rows = [[l, g] for l, g in zip(ls, gs)]
    if args.mc_samples:
        for i, l in enumerate(ls):
            shift = np.asarray(args.direction, float) / np.linalg.norm(args.direction) * l
            est = sp.g_factor_mc(rho, A.translated(shift), B, args.mc_samples, seed=args.seed * 1000 + i)
            rows[i] += [est.estimate, est.stderr]
    in_range = all(0.0 <= g <= 1.0 for g in gs)
    passed = in_range and gs[-1] < args.tol and acceptance._monotone_tail(gs, floor=0.0)
    columns = ["l", "g"] + (["g_mc", "g_mc_stderr"] if args.mc_samples else [])
    return Result(
        {"final_g": gs[-1], "in_unit_interval": in_range}, {"final_g": args.tol}, passed, columns, rows,
    )


def cmd_theorem8(args) -> Result:
    psi1 = sp.GaussianPacket3(args.mean1, args.s1)
    psi2 = sp.GaussianPacket3(args.mean2, args.s2)
    A = sp.Box(args.a_lower, args.a_upper)
    B = sp.Box(args.b_lower, args.b_upper)
    res = sp.theorem8_model(psi1, psi2, A, B, args.L, args.alpha, args.beta, args.n, args.seed, jobs=args.jobs)
    z = (res.estimate - res.exact) / res.stderr if res.stderr > 0.0 else 0.0
    return Result(
        {"estimate": res.estimate, "stderr": res.stderr, "exact": res.exact, "z": z,
         "epsilon": res.epsilon, "bounds_ok": res.bounds_ok,
         "terms": {k: t._asdict() for k, t in res.terms.items()}, "joint": res.joint._asdict()},
        {"sigma": args.tol}, abs(z) <= args.tol,
    )


def cmd_randomfield(args) -> Result:
    spec = rf.LatticeSpec(args.n, args.spacing, args.m)
    if args.ensemble < 2:
        raise UsageError("--ensemble must be at least 2")
    ok, metrics = acceptance.randomfield_checks(spec, args.ensemble, args.seed, args.configs, args.tol)
    return Result(metrics, {"sigma": args.tol}, ok)


def cmd_verify_all(args) -> Result:
    only = set(args.only) if args.only else None
    echo = (lambda line: print(line, file=sys.stderr)) if not args.quiet else None
    results, timings = acceptance.run_all(args.seed, budget=args.budget, only=only, echo=echo)
    passed = all(r.passed for r in results)
    res = Result({"criteria": [r.as_dict() for r in results]}, {}, passed)
    res.timings = timings
    return res


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def _default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _common(default_tol: float, default_format: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    g.add_argument("--out", type=Path, default=None, help="write output here instead of stdout")
    g.add_argument("--format", choices=["csv", "json"], default=default_format)
    g.add_argument("--tol", type=float, default=default_tol, help="pass/fail tolerance")
    g.add_argument("--jobs", type=int, default=_default_jobs(),
                   help=f"worker threads (default from ${JOBS_ENV}, else 1)")
    g.add_argument("--config", type=Path, default=None,
                   help="JSON file of option values; explicit flags win")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spacetime-qi",
        description="Free-field correlations, CHSH bounds and classical models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    vec = dict(nargs=3, type=float, metavar=("X", "Y", "Z"))

    p = sub.add_parser("wightman", parents=[_common(1e-6, "csv")],
                       help="two-point function: closed form, quadrature, asymptotic")
    p.add_argument("--r-min", type=float, default=1.0)
    p.add_argument("--r-max", type=float, default=10.0)
    p.add_argument("--r-num", type=int, default=10)
    p.add_argument("--r", nargs="+", type=float, default=None, help="explicit distances")
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--method", choices=["all", "closed", "quadrature", "asymptotic"], default="all")
    p.set_defaults(func=cmd_wightman)

    p = sub.add_parser("cluster", parents=[_common(1e-4, "csv")],
                       help="correlation gap under translation of A")
    p.add_argument("--state", choices=["vacuum", "one", "two"], default="one")
    p.add_argument("--a-power", type=int, default=2, help="number of factors in A")
    p.add_argument("--b-power", type=int, default=2, help="number of factors in B")
    p.add_argument("--k0", type=float, default=3.0, help="mean momentum of the A packet")
    p.add_argument("--sigma", type=float, default=1.0, help="momentum width of every packet")
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--l-max", type=float, default=20.0)
    p.add_argument("--l-step", type=float, default=1.0)
    p.add_argument("--direction", default=(1.0, 0.0, 0.0), **vec)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("chsh", parents=[_common(1e-6, "csv")],
                       help="optimal CHSH value of g cos(alpha - beta)")
    p.add_argument("--g-min", type=float, default=0.0)
    p.add_argument("--g-max", type=float, default=1.0)
    p.add_argument("--g-step", type=float, default=0.05)
    p.set_defaults(func=cmd_chsh)

    p = sub.add_parser("lhv", parents=[_common(4.0, "json")],
                       help="Monte Carlo of the cosine hidden-variable model")
    p.add_argument("--g", type=float, default=0.5)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--n", type=int, default=10**6)
    p.set_defaults(func=cmd_lhv)

    p = sub.add_parser("gfactor", parents=[_common(1e-8, "csv")],
                       help="g-factor of two Gaussian packets as box A moves away")
    p.add_argument("--s1", type=float, default=1.0)
    p.add_argument("--s2", type=float, default=1.0)
    p.add_argument("--mean1", default=(0.0, 0.0, 0.0), **vec)
    p.add_argument("--mean2", default=(0.0, 0.0, 0.0), **vec)
    p.add_argument("--side-a", type=float, default=1.0)
    p.add_argument("--side-b", type=float, default=1.0)
    p.add_argument("--direction", default=(1.0, 0.0, 0.0), **vec)
    p.add_argument("--l-max", type=float, default=None, help="default 12 * s1")
    p.add_argument("--l-step", type=float, default=1.0)
    p.add_argument("--mc-samples", type=int, default=0, help="also estimate each row by Monte Carlo")
    p.set_defaults(func=cmd_gfactor)

    p = sub.add_parser("theorem8", parents=[_common(4.0, "json")],
                       help="bounded factorized classical model outside radius L")
    p.add_argument("--s1", type=float, default=1.0)
    p.add_argument("--s2", type=float, default=1.0)
    p.add_argument("--mean1", default=(0.0, 0.0, 0.0), **vec)
    p.add_argument("--mean2", default=(8.0, 0.0, 0.0), **vec)
    p.add_argument("--L", type=float, default=3.0)
    p.add_argument("--a-lower", default=(3.0, -1.0, -1.0), **vec)
    p.add_argument("--a-upper", default=(5.0, 1.0, 1.0), **vec)
    p.add_argument("--b-lower", default=(6.5, -1.5, -1.5), **vec)
    p.add_argument("--b-upper", default=(9.5, 1.5, 1.5), **vec)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=math.pi / 4)
    p.add_argument("--n", type=int, default=10**6)
    p.set_defaults(func=cmd_theorem8)

    p = sub.add_parser("randomfield", parents=[_common(4.0, "json")],
                       help="ensemble moments of the lattice random field")
    p.add_argument("--n", type=int, default=32, help="points per axis")
    p.add_argument("--spacing", type=float, default=1.0)
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--ensemble", type=int, default=10**4)
    p.add_argument("--configs", type=int, default=5, help="random point clusters to test")
    p.set_defaults(func=cmd_randomfield)

    p = sub.add_parser("verify-all", parents=[_common(0.0, "json")],
                       help="run the full acceptance suite (--tol is ignored)")
    p.add_argument("--budget", type=float, default=900.0, help="time budget in seconds")
    p.add_argument("--only", nargs="+", type=int, choices=sorted(acceptance.CRITERIA), default=None)
    p.add_argument("--quiet", action="store_true", help="do not print per-criterion lines")
    p.set_defaults(func=cmd_verify_all)
    return parser


_NOT_ECHOED = {"func", "out", "config", "command", "quiet"}


def _apply_config(parser, argv):
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        data = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {args.config}: {exc}")
    if not isinstance(data, dict):
        parser.error("config file must hold a JSON object")
    data = {k.replace("-", "_"): v for k, v in data.items()}
    if data.pop("command", args.command) != args.command:
        parser.error("config file was written for a different subcommand")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions} - _NOT_ECHOED
    unknown = sorted(set(data) - known)
    if unknown:
        parser.error(f"unknown config keys: {', '.join(unknown)}")
    sub.set_defaults(**data)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    args = _apply_config(parser, argv)
    config = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}
    if args.jobs < 1:
        parser.error("--jobs must be at least 1")
    t0 = time.perf_counter()
    try:
        result = args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (DomainError, PreconditionError, SizeLimitError) as exc:
        err = Result({"error": f"{type(exc).__name__}: {exc}"})
        _emit(args, config, err, time.perf_counter() - t0, force_json=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BoundViolation, ConvergenceError) as exc:
        err = Result({"error": f"{type(exc).__name__}: {exc}"}, passed=False)
        _emit(args, config, err, time.perf_counter() - t0, force_json=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    wall = getattr(result, "timings", None) or time.perf_counter() - t0
    _emit(args, config, result, wall)
    return EXIT_PASS if result.passed in (True, None) else EXIT_FAIL


def _emit(args, config, result, wall, force_json=False):
    if args.format == "csv" and result.rows is not None and not force_json:
        text = render_csv(args.command, config, result, wall)
    else:
        text = _dumps(envelope(args.command, config, result, wall)) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)


if __name__ == "__main__":
    sys.exit(main())
