"""``osclab`` command line: generate, construct, verify, check and experiment."""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import BACKEND, set_workers
from .fclass import ClassParams, GridFunction, FAMILIES, check_mean_value, check_weak_max, generate_test_function
from .growth import growth_curve, run_chain
from .lattice import (LatticeParams, LatticeRangeError, ROGUE_FAMILIES, RogueFileError, random_rogue_set,
                      read_rogue_file, write_rogue_file)
from .measure import (DensityGrid, PsiFunction, check_psi_condition, constant_density, cos_bump_density,
                      power_density)
from .oscillation import BudgetFunction, classify
from .quadrature import GridFileError, RegionError
from .stopping import BudgetError, StoppingParams, construct
from .verify import bulk_properties, verify_seq_length

log = logging.getLogger("osclab")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _config(args) -> dict:
    skip = {"func", "verbose", "out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def write_report(args, body: dict) -> str:
    report = {"command": args.command, "config": _config(args), "version": __version__,
              "backend": BACKEND, **body}
    if not args.no_timestamp:
        report["timestamp"] = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
    text = json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return text


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("OSCLAB_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"OSCLAB_SEED must be an integer, got {env!r}") from None


def _stopping(args) -> StoppingParams:
    return StoppingParams(eps=args.eps, r0=args.r0, c0=args.c0, alpha=args.alpha, C1=args.C1, C2=args.C2)


def _lattice_from_file(args):
    return read_rogue_file(args.rogue, margin=args.margin, scale=args.scale)


def _pipeline(args):
    E = _lattice_from_file(args)
    p = _stopping(args)
    return E, p, construct(E, p, enforce_budget=not args.ungated)


def _construction_summary(E, p, C) -> dict:
    lat = E.params
    ok_a, ok_b = bulk_properties(C)
    return {
        "lattice": {"d": lat.d, "N": lat.N, "margin": lat.margin},
        "stopping": p.as_dict(lat),
        "rogue_count": len(E),
        "pipeline_hash": C.digest(),
        "step_breakpoints": list(C.M.s),
        "cover_orders": {int(m): int(c) for m, c in sorted(C.cover.n.items())},
        "length_histogram": {int(k): int(v) for k, v in zip(*np.unique(C.lengths, return_counts=True))},
        "property_fractions": {"separation": float(ok_a.mean()), "density": float(ok_b.mean()),
                               "both": float((ok_a & ok_b).mean())},
    }


# -- subcommands ---------------------------------------------------------------

def cmd_gen_rogue(args) -> int:
    lat = LatticeParams(args.d, args.n, args.margin) if args.margin is not None \
        else LatticeParams.from_scale(args.d, args.n, args.scale)
    E = random_rogue_set(lat, args.count, _seed(args), args.family)
    if args.out:
        write_rogue_file(args.out, E)
    else:
        sys.stdout.write(f"{lat.d} {lat.N}\n" + "".join(" ".join(map(str, c.corner)) + "\n" for c in E.members))
    return EXIT_OK


def cmd_construct(args) -> int:
    E, p, C = _pipeline(args)
    write_report(args, _construction_summary(E, p, C))
    return EXIT_OK


def cmd_verify(args) -> int:
    E, p, C = _pipeline(args)
    rep = verify_seq_length(C)
    lat = E.params
    inner = lat.inner_mask().ravel()
    good = (C.lengths > 0)
    checks = {
        "property_Q": rep.pass_Q == rep.checked_Q,
        "property_M": rep.pass_M == rep.checked_M,
        "half_of_cubes": rep.headline_pass,
    }
    body = _construction_summary(E, p, C)
    body["report"] = rep.as_dict()
    body["fraction_with_sequence_inner"] = float(good[inner].mean()) if inner.any() else None
    body["checks"] = checks
    write_report(args, body)
    return EXIT_OK if all(checks.values()) else EXIT_FAIL


def _density(args, d, N, s) -> DensityGrid:
    if args.omega:
        return DensityGrid.read(args.omega, binary=args.binary)
    kind = args.density
    if kind == "constant":
        return constant_density(d, N, s)
    if kind == "power":
        return power_density(d, N, s, args.power)
    if kind == "cos-bump":
        if d != 2:
            raise UsageError("cos-bump density is defined for d = 2")
        return cos_bump_density(N, s, args.kmax)
    raise UsageError(f"unknown density {kind!r}")


def cmd_check_measure(args) -> int:
    omega = _density(args, args.d, args.n, args.s)
    psi = PsiFunction.parse(args.psi)
    v = check_psi_condition(omega, psi, args.trials, _seed(args), workers=args.workers)
    write_report(args, {"psi": psi.describe(), "verdict": v.as_dict()})
    return EXIT_OK if v.passed else EXIT_FAIL


def _function(args) -> GridFunction:
    if args.u:
        return GridFunction.read(args.u, binary=args.binary)
    return generate_test_function(args.family, args.d, args.n, args.s, seed=_seed(args))


def cmd_check_fclass(args) -> int:
    u = _function(args)
    omega = _density(args, u.d, u.N, u.s)
    seed = _seed(args)
    wm = check_weak_max(u, args.A, args.trials, seed, tol=args.tol, workers=args.workers)
    mv = check_mean_value(u, omega, args.B, args.r0_mv, args.trials, seed, tol=args.tol, workers=args.workers)
    write_report(args, {"weak_max": wm.as_dict(), "mean_value": mv.as_dict()})
    return EXIT_OK if wm.passed and mv.passed else EXIT_FAIL


def cmd_classify(args) -> int:
    u = _function(args)
    omega = _density(args, u.d, u.N, u.s)
    f = BudgetFunction.parse(args.f)
    rep = classify(u, omega, args.delta, f)
    if args.export_rogue:
        rep.export_rogue(args.export_rogue, margin=args.margin, scale=args.scale)
    write_report(args, {"summary": rep.summary()})
    return EXIT_OK


def cmd_experiment(args) -> int:
    u = _function(args)
    omega = _density(args, u.d, u.N, u.s)
    f = BudgetFunction.parse(args.f)
    try:
        radii = [float(r) for r in args.radii.split(",")]
    except ValueError:
        raise UsageError(f"bad --radii {args.radii!r}") from None
    curve = growth_curve(u, f, radii, eps=args.eps)
    with open(args.curve, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        fh.write("# R,M_u(R),boundShape(R),logM_over_bound\n")
        for row in curve.rows():
            w.writerow([f"{x:.12g}" for x in row])
    body = {"curve": curve.as_dict()}
    ok = curve.monotone
    if args.rogue:
        E, p, C = _pipeline(args)
        params = ClassParams(args.A, args.B, args.r0_mv, args.delta)
        chain = run_chain(u, omega, params, C, psi=PsiFunction.parse(args.psi), tolerance=args.tol)
        body["chain"] = chain.as_dict()
        body["pipeline_hash"] = C.digest()
        ok = ok and chain.monotone and chain.ratio_check
    write_report(args, body)
    return EXIT_OK if ok else EXIT_FAIL


# -- parser --------------------------------------------------------------------

def _common(sp):
    sp.add_argument("--seed", type=int, default=None, help="RNG seed (falls back to $OSCLAB_SEED, then 0)")
    sp.add_argument("--out", default=None, help="report path (stdout if omitted)")
    sp.add_argument("--no-timestamp", action="store_true", help="omit the timestamp for byte-stable reports")
    sp.add_argument("--workers", type=int, default=1, help="worker pool size")


def _lattice_opts(sp):
    sp.add_argument("--scale", type=float, default=4.0, help="margin L = floor(N / (scale d))")
    sp.add_argument("--margin", type=int, default=None, help="explicit margin L (overrides --scale)")


def _stop_opts(sp, rogue_required=True):
    sp.add_argument("--rogue", required=rogue_required, help="rogue-set file")
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--r0", type=float, default=4.0)
    sp.add_argument("--c0", type=float, default=None)
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--C1", type=float, default=None)
    sp.add_argument("--C2", type=float, default=None)
    sp.add_argument("--ungated", action="store_true", help="skip the rogue-count budget gate")
    _lattice_opts(sp)


def _grid_opts(sp, function=True):
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--n", type=int, default=32, help="edge N of Q")
    sp.add_argument("--s", type=int, default=16, help="samples per unit length")
    sp.add_argument("--binary", action="store_true", help="grid files are raw little-endian float64")
    sp.add_argument("--omega", default=None, help="density grid file")
    sp.add_argument("--density", default="constant", choices=("constant", "power", "cos-bump"))
    sp.add_argument("--power", type=float, default=1.0, help="exponent of the power density |x|^a")
    sp.add_argument("--kmax", type=int, default=8, help="bumps in the cos-bump density")
    if function:
        sp.add_argument("--u", default=None, help="function grid file")
        sp.add_argument("--family", default="log-sin", choices=FAMILIES)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="osclab", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("gen-rogue", help="write a seeded random rogue-set file")
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--count", type=int, required=True)
    sp.add_argument("--family", default="uniform", choices=ROGUE_FAMILIES)
    _common(sp)
    _lattice_opts(sp)
    sp.set_defaults(func=cmd_gen_rogue)

    for name, fn, hlp in (("construct", cmd_construct, "run the stopping-time construction"),
                          ("verify", cmd_verify, "construct and check the sequence properties")):
        sp = sub.add_parser(name, help=hlp)
        _stop_opts(sp)
        _common(sp)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("check-measure", help="randomized psi-condition check for a density")
    _grid_opts(sp, function=False)
    sp.add_argument("--psi", default="linear:1", help="linear:slope | power:c,q")
    sp.add_argument("--trials", type=int, default=1000)
    _common(sp)
    sp.set_defaults(func=cmd_check_measure)

    sp = sub.add_parser("check-fclass", help="weak maximum and mean-value checks for a function")
    _grid_opts(sp)
    sp.add_argument("--A", type=float, default=1.0)
    sp.add_argument("--B", type=float, default=1.0)
    sp.add_argument("--r0-mv", dest="r0_mv", type=float, default=1.0)
    sp.add_argument("--tol", type=float, default=1e-3)
    sp.add_argument("--trials", type=int, default=200)
    _common(sp)
    sp.set_defaults(func=cmd_check_fclass)

    sp = sub.add_parser("classify", help="rogue cubes of a function-density pair")
    _grid_opts(sp)
    sp.add_argument("--delta", type=float, default=0.05)
    sp.add_argument("--f", default="power:1,1.5", help="budget: power:beta,p | linear:beta | capped:beta,p")
    sp.add_argument("--export-rogue", default=None, help="write the rogue set to this file")
    _lattice_opts(sp)
    _common(sp)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("experiment", help="growth curve, optionally with the chain walk")
    _grid_opts(sp)
    sp.add_argument("--f", default="power:1,1.5")
    sp.add_argument("--radii", default="4,8,16")
    sp.add_argument("--curve", default="curve.csv", help="CSV output for the growth curve")
    sp.add_argument("--delta", type=float, default=0.05)
    sp.add_argument("--A", type=float, default=1.0)
    sp.add_argument("--B", type=float, default=1.0)
    sp.add_argument("--r0-mv", dest="r0_mv", type=float, default=1.0)
    sp.add_argument("--psi", default="linear:1")
    sp.add_argument("--tol", type=float, default=1e-3)
    _stop_opts(sp, rogue_required=False)
    _common(sp)
    sp.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", None):
        if args.workers < 1:
            print("osclab: error: --workers must be >= 1", file=sys.stderr)
            return EXIT_USAGE
        set_workers(args.workers)
    try:
        return args.func(args)
    except BudgetError as exc:
        print(f"osclab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, RogueFileError, GridFileError, LatticeRangeError, RegionError, ValueError,
            FileNotFoundError) as exc:
        print(f"osclab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
