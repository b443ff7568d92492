"""``confine-fp`` command-line interface.

Exit codes: 0 success, 1 domain failure (rejected model, failed check,
solver or path failure), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .acceptance import run_suite, write_artifacts
from .analysis import hardy_audit, kernel_and_gap, poincare_audit
from .errors import ConfineFPError, InvalidArgument, PathAbort, RejectedModel, SolverFailure, SpectralFailure
from .fem import assemble
from .geometry import build_disk_mesh
from .output import heatmap, write_pgm
from .potential import CoRotational, ConfinementModel, Shear, check_hypotheses
from .sde import SdeConfig, compare, config_dict, l1_to_maxwellian, report_json, simulate
from .solver import PECLET_LIMIT, solve_fokker_planck

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2
SEED_ENV = "CONFINE_FP_SEED"
DEFAULT_SEED = 42


class UsageError(Exception):
    pass


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return DEFAULT_SEED
    try:
        return int(raw, 0)
    except ValueError as exc:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from exc


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _float_list(s: str) -> list[float]:
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from exc


# --------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--json", action="store_true", help="print machine-readable JSON to stdout")
    p.add_argument("--config", metavar="FILE", help="flat key=value file; flags override it")


def _add_model(p: argparse.ArgumentParser, drift: bool = True) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--fene", dest="kind", action="store_const", const="fene", help="FENE potential (default)")
    g.add_argument("--power-law", dest="kind", action="store_const", const="power-law", help="M ~ (1-|Q|)^alpha on the unit disk")
    g.add_argument("--quadratic", dest="kind", action="store_const", const="quadratic", help="V = -c|Q|^2/2 on a disk")
    p.set_defaults(kind="fene")
    p.add_argument("--l", type=float, default=5.0, help="FENE maximal extension (disk radius)")
    p.add_argument("--alpha", type=float, default=2.0, help="power-law exponent")
    p.add_argument("--curvature", type=float, default=1.0, help="quadratic curvature")
    p.add_argument("--radius", type=float, default=1.0, help="quadratic disk radius")
    if drift:
        d = p.add_mutually_exclusive_group()
        d.add_argument("--shear", dest="drift", action="store_const", const="shear")
        d.add_argument("--corotational", dest="drift", action="store_const", const="corotational")
        p.set_defaults(drift="none")
        p.add_argument("--de", type=float, default=10.0, help="Deborah number")
        p.add_argument("--gamma", type=float, default=0.2, help="shear rate")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="confine-fp", description="Steady Fokker-Planck solver with confining potentials.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="audit the admissibility hypotheses")
    _add_common(p)
    _add_model(p, drift=False)
    p.add_argument("--window", type=float, default=0.01, help="boundary window as a fraction of the radius")
    p.add_argument("--out", help="also write the report to this JSON file")

    p = sub.add_parser("solve", help="solve and write solution.csv, summary.json, heatmap.pgm")
    _add_common(p)
    _add_model(p)
    p.add_argument("--rings", type=_positive_int, default=32)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--method", choices=("lagrange", "penalization"), default="lagrange")
    p.add_argument("--eps-pen", type=float, default=1e-8)
    p.add_argument("--force", action="store_true", help="solve even if the model fails a hypothesis")
    p.add_argument("--out", default="out")

    p = sub.add_parser("fene-sweep", help="FENE shear sweep with trend.csv")
    _add_common(p)
    p.add_argument("--gammas", type=_float_list, default=[0.1, 0.2, 0.5, 1.0])
    p.add_argument("--de", type=float, default=10.0)
    p.add_argument("--l", type=float, default=5.0)
    p.add_argument("--rings", type=_positive_int, default=48)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--out", default="sweep")

    p = sub.add_parser("sde", help="Monte Carlo histogram, optionally compared with the PDE")
    _add_common(p)
    p.add_argument("--de", type=float, default=10.0)
    p.add_argument("--gamma", type=float, default=0.2)
    p.add_argument("--l", type=float, default=5.0)
    p.add_argument("--paths", type=_positive_int, default=100_000)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--burn-in", type=int, default=2500)
    p.add_argument("--sample-steps", type=int, default=1000)
    p.add_argument("--thinning", type=_positive_int, default=250)
    p.add_argument("--bins", type=_positive_int, default=64)
    p.add_argument("--seed", type=int, default=None, help=f"defaults to ${SEED_ENV} or {DEFAULT_SEED}")
    p.add_argument("--compare", action="store_true", help="solve the PDE and report the L1 distance")
    p.add_argument("--rings", type=_positive_int, default=48)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--out", default="sde")

    p = sub.add_parser("audit", help="Hardy, Poincare and kernel/gap audits")
    _add_common(p)
    _add_model(p, drift=False)
    p.add_argument("--rings", type=_positive_int, default=24)
    p.add_argument("--fields", type=_positive_int, default=200)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("validate", help="run the acceptance suite")
    _add_common(p)
    p.add_argument("--quick", action="store_true", help="skip the SDE cross-check")
    p.add_argument("--only", type=_float_list, default=None, help="comma-separated criterion numbers")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--out", default=None, help="write report.json and artifacts here")
    return parser


# --------------------------------------------------------------------------
# config file


def read_config(path: str) -> dict[str, str]:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _convert_bool(key: str, raw: str) -> bool:
    low = raw.lower()
    if low not in ("true", "false", "1", "0", "yes", "no"):
        raise UsageError(f"{key} expects a boolean, got {raw!r}")
    return low in ("true", "1", "yes")


def _convert(action: argparse.Action, raw: str):
    if isinstance(action, argparse._StoreTrueAction):
        return _convert_bool(action.dest, raw)
    if action.type is not None:
        try:
            return action.type(raw)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"bad value for {action.dest}: {exc}") from exc
    if action.choices is not None and raw not in action.choices:
        raise UsageError(f"{action.dest} must be one of {sorted(action.choices)}")
    return raw


def parse(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    # keys may name either an option (``shear``, ``eps_pen``) or a destination
    actions = {}
    for a in subparser._actions:
        actions.setdefault(a.dest, a)
        for opt in a.option_strings:
            if opt.startswith("--"):
                actions[opt[2:].replace("-", "_")] = a
    defaults = {}
    for k, raw in read_config(args.config).items():
        if k not in actions or k in ("help", "config"):
            raise UsageError(f"unknown config key {k!r} for '{args.command}'")
        a = actions[k]
        if isinstance(a, argparse._StoreConstAction) and k != a.dest:
            if _convert_bool(k, raw):
                defaults[a.dest] = a.const
        else:
            defaults[a.dest] = _convert(a, raw)
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


# --------------------------------------------------------------------------
# helpers


def _finite(name: str, value: float, positive: bool = False) -> float:
    if not math.isfinite(value) or (positive and value <= 0):
        raise InvalidArgument(f"--{name} must be {'positive and ' if positive else ''}finite, got {value}")
    return value


def model_from_args(args) -> ConfinementModel:
    if args.kind == "fene":
        model = ConfinementModel.fene(_finite("l", args.l, True))
    elif args.kind == "power-law":
        model = ConfinementModel.power_law(_finite("alpha", args.alpha, True))
    elif args.kind == "quadratic":
        model = ConfinementModel.quadratic(_finite("curvature", args.curvature), _finite("radius", args.radius, True))
    else:
        raise UsageError(f"unknown potential kind {args.kind!r}")
    drift = getattr(args, "drift", "none")
    if drift == "shear":
        model = model.with_drift(Shear(_finite("de", args.de, True), _finite("gamma", args.gamma)))
    elif drift == "corotational":
        model = model.with_drift(CoRotational(_finite("de", args.de, True), _finite("gamma", args.gamma)))
    elif drift != "none":
        raise UsageError(f"unknown drift {drift!r}")
    return model


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        print(text)


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


# --------------------------------------------------------------------------
# commands


def cmd_check(args) -> int:
    rep = check_hypotheses(model_from_args(args), boundary_window=args.window)
    payload = rep.to_dict()
    if args.out:
        Path(args.out).write_text(rep.to_json(indent=2) + "\n")
    lines = [
        f"H1 {'pass' if rep.h1_pass else 'FAIL'}  a={rep.a:.6g} b={rep.b:.6g} deriv_limit={rep.limit_of_radial_derivative_at_boundary:.6g}",
        f"H2 {'pass' if rep.h2_pass else 'FAIL'}  c={rep.c:.6g}",
        f"H3 {'pass' if rep.h3_pass else 'FAIL'}  gamma={rep.gamma:.6g}",
        f"p_bound={rep.p_bound:.6g}",
    ]
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK if rep.passed else EXIT_DOMAIN


def _solve_into(model: ConfinementModel, rings: int, out: Path, **kw):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        sol = solve_fokker_planck(model, rings, **kw)
    for w in caught:
        _warn(str(w.message))
    out.mkdir(parents=True, exist_ok=True)
    sol.write_csv(out / "solution.csv")
    sol.write_summary(out / "summary.json")
    write_pgm(out / "heatmap.pgm", heatmap(sol))
    return sol


def cmd_solve(args) -> int:
    model = model_from_args(args)
    _finite("rho", args.rho)
    sol = _solve_into(model, args.rings, Path(args.out), rho=args.rho, method=args.method, eps_pen=args.eps_pen, force=args.force)
    s = sol.summary()
    m = s["moments"]
    text = (
        f"mass={m['mass']:.12g} lambda={s['lambda']:.3e} residual={s['residual']:.3e} defect={s['defect']:.3e}\n"
        f"<Q1Q1>={m['Q1Q1']:.6g} <Q2Q2>={m['Q2Q2']:.6g} <Q1Q2>={m['Q1Q2']:.6g} peclet_max={s['peclet_max']:.3g}\n"
        f"wrote {args.out}/solution.csv, summary.json, heatmap.pgm"
    )
    _emit(args, s, text)
    return EXIT_OK


def _sweep_one(task):
    g, de, l, rings, out = task
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        sol = solve_fokker_planck(ConfinementModel.fene(l, Shear(de, g)), rings)
    d = Path(out) / f"gamma_{g:g}"
    d.mkdir(parents=True, exist_ok=True)
    sol.write_csv(d / "solution.csv")
    sol.write_summary(d / "summary.json")
    write_pgm(d / "heatmap.pgm", heatmap(sol))
    m = sol.moments
    return {"gamma_dot": g, "N1": m["Q1Q1"] - m["Q2Q2"], "Q1Q2": m["Q1Q2"], "peclet_max": sol.peclet_max}


def cmd_fene_sweep(args) -> int:
    if not args.gammas:
        raise InvalidArgument("--gammas must list at least one value")
    for g in args.gammas:
        _finite("gammas", g)
    _finite("de", args.de, True)
    _finite("l", args.l, True)
    tasks = [(g, args.de, args.l, args.rings, args.out) for g in args.gammas]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_one, tasks))
    else:
        rows = [_sweep_one(t) for t in tasks]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "trend.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gamma_dot", "Q1Q1_minus_Q2Q2", "Q1Q2", "peclet_max"])
        for r in rows:
            w.writerow([repr(r["gamma_dot"]), repr(r["N1"]), repr(r["Q1Q2"]), repr(r["peclet_max"])])
    for r in rows:
        if r["peclet_max"] > PECLET_LIMIT:
            _warn(f"gamma_dot={r['gamma_dot']:g}: mesh Peclet number {r['peclet_max']:.2f} exceeds {PECLET_LIMIT}")
    text = "\n".join(
        [f"{'gamma_dot':>10} {'N1':>12} {'Q1Q2':>12} {'peclet':>8}"]
        + [f"{r['gamma_dot']:>10g} {r['N1']:>12.6g} {r['Q1Q2']:>12.6g} {r['peclet_max']:>8.3g}" for r in rows]
    )
    _emit(args, {"rows": rows}, text)
    return EXIT_OK


def cmd_sde(args) -> int:
    seed = default_seed() if args.seed is None else args.seed
    cfg = SdeConfig(
        deborah=args.de, shear_rate=args.gamma, length=args.l, dt=args.dt, n_paths=args.paths,
        burn_in_steps=args.burn_in, sample_steps=args.sample_steps, thinning=args.thinning, seed=seed, bins=args.bins,
    )
    hist = simulate(cfg, jobs=args.jobs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    hist.write_csv(out / "histogram.csv")
    report = {
        "config": config_dict(cfg),
        "moments": hist.moments,
        "rejections": hist.rejections,
        "shrinks": hist.shrinks,
        "n_samples": hist.n_samples,
    }
    if cfg.shear_rate == 0:
        report["l1_to_maxwellian"] = l1_to_maxwellian(hist)
    if args.compare:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            sol = solve_fokker_planck(ConfinementModel.fene(cfg.length, Shear(cfg.deborah, cfg.shear_rate)), args.rings)
        report["comparison"] = compare(hist, sol)
    (out / "report.json").write_text(report_json(report))
    m = hist.moments
    text = f"samples={hist.n_samples} <Q1Q1>={m['Q1Q1']:.5g} <Q2Q2>={m['Q2Q2']:.5g} <Q1Q2>={m['Q1Q2']:.5g} rejections={hist.rejections}"
    if "l1_to_maxwellian" in report:
        text += f"\nL1 to Maxwellian: {report['l1_to_maxwellian']:.4g}"
    if "comparison" in report:
        text += f"\nL1 to PDE: {report['comparison']['l1_distance']:.4g}"
    _emit(args, json.loads(report_json(report)), text)
    return EXIT_OK


def cmd_audit(args) -> int:
    model = model_from_args(args)
    seed = default_seed() if args.seed is None else args.seed
    hyp = check_hypotheses(model)
    mesh = build_disk_mesh(model.radius, args.rings)
    nm = model.normalized(mesh)
    payload = {"hypotheses": hyp.to_dict()}
    ok = True
    if hyp.h1_pass:
        payload["hardy"] = hardy_audit(mesh, nm).to_dict()
    else:
        payload["hardy"] = {"skipped": "model fails H1"}
    gamma = hyp.gamma if hyp.h3_pass else None
    if gamma is not None and gamma > 0:
        pa = poincare_audit(mesh, nm, gamma, n_fields=args.fields, seed=seed)
        sp = kernel_and_gap(assemble(mesh, nm), gamma, seed=seed)
        payload["poincare"] = pa.to_dict()
        payload["spectral"] = sp.to_dict()
        ok = pa.passed and sp.passed
    else:
        payload["poincare"] = payload["spectral"] = {"skipped": "model fails H3"}
    payload["passed"] = ok
    text = json.dumps(payload, sort_keys=True, indent=2)
    _emit(args, payload, text)
    return EXIT_OK if ok else EXIT_DOMAIN


def cmd_validate(args) -> int:
    seed = default_seed() if args.seed is None else args.seed
    only = None if args.only is None else [int(k) for k in args.only]
    echo = None if args.json else print
    suite = run_suite(quick=args.quick, seed=seed, jobs=args.jobs, only=only, echo=echo)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(suite.to_json())
        write_artifacts(out / "artifacts", seed)
    if args.json:
        print(suite.to_json(), end="")
    else:
        print(suite.table())
    bad = suite.first_failure
    if bad is not None:
        print(f"first failing criterion: {bad.number} ({bad.name})", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "solve": cmd_solve,
    "fene-sweep": cmd_fene_sweep,
    "sde": cmd_sde,
    "audit": cmd_audit,
    "validate": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse(argv)
    except SystemExit as exc:  # argparse usage errors and --help/--version
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RejectedModel as exc:
        print(f"rejected: model fails hypothesis {', '.join(exc.failed)} (use --force to override)", file=sys.stderr)
        return EXIT_DOMAIN
    except (SolverFailure, SpectralFailure, PathAbort, ConfineFPError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
