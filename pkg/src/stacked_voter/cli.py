"""Command-line entry point: one subcommand per experiment.

Every run writes its artifacts plus ``manifest.json`` into ``--out``. The
manifest echoes the resolved parameters; passing it back with ``--config``
reproduces the CSV bodies exactly. Parameters may also come from a flat
``key=value`` file; explicit flags win over file values.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import asymptotics as asy
from .lattice import LatticeGeometry, Site
from .rng import default_seed

SUBCOMMANDS = ("survival", "speed", "boundary-compare", "duality", "branch-classify",
               "return-time", "lclt", "formulas", "cancer-init", "field-hist",
               "shape-snapshot", "verify")


class UsageError(ValueError):
    pass


# -- parsing helpers ------------------------------------------------------------------------

def parse_int_list(s: str) -> list:
    return [int(v) for v in str(s).split(",") if v.strip()]


def parse_float_list(s: str) -> list:
    return [float(v) for v in str(s).split(",") if v.strip()]


def parse_grid(text: str) -> list:
    """``lo:hi:log10[:per_decade]``, ``lo:hi:n`` (linear) or a comma list."""
    text = str(text)
    if ":" not in text:
        return parse_float_list(text)
    parts = text.split(":")
    lo, hi = float(parts[0]), float(parts[1])
    mode = parts[2] if len(parts) > 2 else "log10"
    if mode == "log10":
        per = int(parts[3]) if len(parts) > 3 else 1
        if lo <= 0 or hi <= lo:
            raise UsageError(f"bad log grid {text!r}")
        n = int(round(math.log10(hi / lo) * per)) + 1
        return np.logspace(math.log10(lo), math.log10(hi), n).tolist()
    n = int(mode)
    return np.linspace(lo, hi, n).tolist()


def parse_sites(s: str) -> list:
    """``"x,y,z;x,y,z"`` -> list of Site."""
    out = []
    for chunk in str(s).split(";"):
        if chunk.strip():
            out.append(Site(*(int(v) for v in chunk.split(","))))
    return out


def read_config(path: str) -> dict:
    """Flat ``key=value`` lines (``#`` comments) or a manifest JSON."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        params = data.get("params", data)
        return {k: _to_text(v) for k, v in params.items()}
    cfg = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        cfg[k.strip().replace("-", "_")] = v.strip()
    return cfg


def _to_text(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, list):
        return ",".join(str(x) for x in v)
    return str(v)


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {s!r}")


# -- output helpers -------------------------------------------------------------------------

def write_csv(path: Path, header: list, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for r in rows:
            wr.writerow([repr(float(v)) if isinstance(v, float) else v for v in r])


def write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not JSON serializable: {type(o)}")


def _geometry(args, window=None) -> LatticeGeometry:
    return LatticeGeometry(args.w, args.bc, window)


# -- subcommands ------------------------------------------------------------------------------

def cmd_survival(args, out: Path) -> dict:
    from .estimators import survival_fraction
    est = survival_fraction(args.beta, _geometry(args, args.window), args.M, args.reps, args.seed,
                            workers=args.workers)
    res = dict(fraction=est.fraction, hits=est.hits, reps=est.reps, se=est.se,
               ci=[est.ci_low, est.ci_high], analytic=est.analytic,
               analytic_limit=est.analytic_limit, z=est.z)
    write_json(out / "survival.json", res)
    return res


def _speed_rows(est):
    slopes = est.slopes or [math.nan] * len(est.speeds)
    return [(i, s, t, sl) for i, (s, t, sl) in enumerate(zip(est.speeds, est.hit_times, slopes))]


def cmd_speed(args, out: Path) -> dict:
    from .estimators import front_speed
    est = front_speed(args.beta, _geometry(args, args.window), args.R, args.reps, args.seed,
                      workers=args.workers, regression=args.regression)
    if est.no_survivors:
        raise UsageError("no surviving replicates; increase --max-attempts or beta")
    res = est.to_dict()
    write_json(out / "speed.json", res)
    write_csv(out / "speed_replicates.csv", ["survivor", "speed", "hit_time", "slope"],
              _speed_rows(est))
    return dict(mean=est.mean, ci=list(est.ci), survivors=est.survivors,
                replicates=est.replicates)


def cmd_boundary_compare(args, out: Path) -> dict:
    from .estimators import front_speed
    rows, res = [], {}
    for bc in ("periodic", "reflecting"):
        est = front_speed(args.beta, LatticeGeometry(args.w, bc, args.window), args.R, args.reps,
                          args.seed, workers=args.workers)
        lo, hi = est.ci
        rows.append((bc, est.mean, est.ci_half_width, lo, hi, est.survivors, est.replicates))
        res[bc] = dict(mean=est.mean, ci=[lo, hi], survivors=est.survivors)
    p, r = res["periodic"]["mean"], res["reflecting"]["mean"]
    res["relative_difference"] = (p - r) / p
    res["ci_overlap"] = (res["periodic"]["ci"][0] <= res["reflecting"]["ci"][1]
                         and res["reflecting"]["ci"][0] <= res["periodic"]["ci"][1])
    write_csv(out / "boundary_compare.csv",
              ["bc", "mean", "ci_half_width", "ci_low", "ci_high", "survivors", "replicates"],
              rows)
    write_json(out / "boundary_compare.json", res)
    return res


def cmd_duality(args, out: Path) -> dict:
    from .acceptance import duality_instances
    from .dual import duality_check
    g = LatticeGeometry(args.w, args.bc, args.L)
    if args.A and args.B:
        inst = [(parse_sites(args.A), parse_sites(args.B), args.t)]
    else:
        inst = duality_instances(args.seed, args.instances, args.L, args.w)
    rows = []
    for k, (a, b, t) in enumerate(inst):
        r = duality_check(a, b, t, args.beta, g, args.reps, args.seed + 1 + k)
        rows.append((k, t, r.p_forward, r.p_dual, r.se, r.z,
                     ";".join(",".join(map(str, s)) for s in a),
                     ";".join(",".join(map(str, s)) for s in b)))
    write_csv(out / "duality.csv", ["instance", "t", "p_forward", "p_dual", "se", "z", "A", "B"],
              rows)
    zs = [r[5] for r in rows]
    return dict(instances=len(rows), max_abs_z=max(abs(z) for z in zs))


def cmd_branch_classify(args, out: Path) -> dict:
    from .walks import classify_branch_events, write_classification_csv
    res = [classify_branch_events(b, args.w, args.reps, args.seed + k, args.alpha)
           for k, b in enumerate(parse_float_list(args.beta))]
    write_classification_csv(out / "classification.csv", res)
    return dict(rows=[r.to_row() for r in res])


def cmd_return_time(args, out: Path) -> dict:
    from .walks import return_time_tail, write_survival_csv
    tail = return_time_tail(args.w, args.alpha, parse_grid(args.t_grid), args.reps,
                            args.seed, event_budget=args.budget)
    write_survival_csv(out / "return_time.csv", tail)
    return dict(reps=tail.reps, truncated=tail.truncated, r_t=tail.r_t)


def cmd_lclt(args, out: Path) -> dict:
    from .walks import lclt_estimate, lclt_exact
    x = [int(v) for v in args.x.split(",")]
    est = lclt_estimate(args.d, args.w, args.alpha, args.t, x, args.reps, args.seed,
                        allow_w1=args.allow_w1)
    res = dict(scaled=est.scaled, se=est.se, hits=est.hits, reps=est.reps, limit=est.limit,
               rel_error=est.rel_error)
    if args.exact_radius:
        ex = lclt_exact(args.d, args.w, args.alpha, args.t, args.exact_radius)
        res.update(exact=ex.scaled(x, args.alpha, args.t), leak=ex.leak,
                   z=(est.scaled - ex.scaled(x, args.alpha, args.t)) / est.se if est.se else 0.0)
    write_json(out / "lclt.json", res)
    return res


_FORMULAS = {
    "h": lambda a, b, w: asy.h_beta(b),
    "tau": lambda a, b, w: asy.tau_beta(b),
    "c_w": lambda a, b, w: asy.c_w_asym(b, w),
    "a_w": lambda a, b, w: asy.a_w(w),
    "t_N": lambda a, b, w: asy.t_w_of_N(a.N, b, w),
    "t_V": lambda a, b, w: asy.t_w_of_V(a.V, b, w),
    "gamma": lambda a, b, w: asy.gamma_metaparameter(a.N, a.u1, a.u2, b, w),
}


def cmd_formulas(args, out: Path) -> dict:
    betas = parse_grid(args.beta_grid)
    ws = parse_int_list(args.w_list)
    names = list(_FORMULAS) if args.formula == "all" else args.formula.split(",")
    for n in names:
        if n not in _FORMULAS:
            raise UsageError(f"unknown formula {n!r}; choose from {', '.join(_FORMULAS)}")
    rows = [(n, b, w, _FORMULAS[n](args, b, w)) for n in names for b in betas for w in ws]
    write_csv(out / "formulas.csv", ["formula", "beta", "w", "value"], rows)
    if not args.quiet:
        w = csv.writer(sys.stdout)
        w.writerow(["formula", "beta", "w", "value"])
        for r in rows:
            w.writerow([r[0], repr(float(r[1])), r[2], repr(float(r[3]))])
    return dict(rows=len(rows))


def _two_step(args):
    from .oncogenesis import TwoStepParams
    return TwoStepParams(N=args.N, w=args.w, beta=args.beta, u1=args.u1, u2=args.u2)


def cmd_cancer_init(args, out: Path) -> dict:
    import warnings
    from .oncogenesis import regime_label, sigma2_stats, write_histogram_csv, write_samples_csv
    p = _two_step(args)
    st = sigma2_stats(p, args.reps, args.seed)
    write_samples_csv(out / "sigma2_samples.csv", st.samples)
    write_histogram_csv(out / "sigma2_hist.csv", st.counts, st.edges)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        reg = regime_label(p)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    res = st.summary()
    res.update(gamma=reg.gamma, regime=reg.label.value,
               thresholds=[reg.small_below, reg.large_above])
    write_json(out / "sigma2_stats.json", res)
    return res


def cmd_field_hist(args, out: Path) -> dict:
    from .oncogenesis import draw_samples, field_hist_conditional, write_histogram_csv
    p = _two_step(args)
    samples = draw_samples(p, args.reps, args.seed)
    t = args.t if args.t is not None else float(np.mean([s.sigma2 for s in samples]))
    dt = args.dt if args.dt is not None else 0.05 * t
    fh = field_hist_conditional(p, t, dt, args.reps, args.seed, min_accept=args.min_accept,
                                samples=samples)
    write_histogram_csv(out / "field_hist.csv", fh.counts, fh.edges)
    res = dict(t=fh.t, dt=fh.dt, accepted=fh.accepted, draws=fh.draws,
               acceptance=fh.acceptance, mean=fh.mean, support_bound=fh.support_bound,
               partial=fh.partial, bin_policy="freedman-diaconis")
    write_json(out / "field_hist.json", res)
    return res


def cmd_shape_snapshot(args, out: Path) -> dict:
    from dataclasses import asdict
    from .estimators import grow_surviving_clone, snapshot_shape
    st, idx = grow_surviving_clone(args.beta, _geometry(args), args.size, args.seed)
    snap = snapshot_shape(st)
    res = asdict(snap)
    res["replicate"] = idx
    write_json(out / "shape.json", res)
    return dict(aspect_ratio=snap.aspect_ratio, size=snap.size, replicate=idx)


def cmd_verify(args, out: Path) -> dict:
    from .acceptance import CRITERIA, run_criterion
    nums = parse_int_list(args.only) if args.only else sorted(CRITERIA)
    results = []
    for n in nums:
        r = run_criterion(n, args.seed, quick=args.quick, workers=args.workers)
        print(r.line(), flush=True)
        results.append(r)
    table = [r.to_dict() for r in results]
    write_json(out / "verify.json", dict(quick=args.quick, seed=args.seed, results=table))
    write_csv(out / "verify.csv", ["criterion", "name", "passed", "seconds"],
              [(r.number, r.name, r.passed, r.seconds) for r in results])
    failed = [r.number for r in results if not r.passed]
    if failed:
        raise CriterionFailure(f"failed criteria: {', '.join(map(str, failed))}")
    return dict(passed=len(results))


class CriterionFailure(RuntimeError):
    pass


# -- parser -----------------------------------------------------------------------------------

def _common(p, reps=None):
    p.add_argument("--seed", type=int, default=None, help="default: $STACKED_VOTER_SEED or built-in")
    if reps is not None:
        p.add_argument("--reps", type=int, default=reps)
    p.add_argument("--out", default=None, help="output directory (default: runs/<subcommand>)")
    p.add_argument("--workers", type=int, default=None, help="default: all cores")
    p.add_argument("--config", default=None, help="key=value file or manifest.json; flags win")


def _lattice(p, w=3, bc=True):
    p.add_argument("--w", type=int, default=w)
    if bc:
        p.add_argument("--bc", choices=["periodic", "reflecting"], default="periodic")


def _two_step_args(p):
    p.add_argument("--N", type=float, default=1e6)
    p.add_argument("--w", type=int, default=3)
    p.add_argument("--beta", type=float, default=0.01)
    p.add_argument("--u1", type=float, default=1e-6)
    p.add_argument("--u2", type=float, default=1e-5)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stacked-voter",
                                 description="Biased voter model on stacked lattices.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="subcommand")

    p = sub.add_parser("survival", help="fraction of single mutants reaching size M")
    p.add_argument("--beta", type=float, default=0.1)
    _lattice(p)
    p.add_argument("--M", type=int, default=500)
    p.add_argument("--window", type=int, default=None)
    _common(p, 20000)

    p = sub.add_parser("speed", help="front speed R / T_R over surviving replicates")
    p.add_argument("--beta", type=float, default=0.1)
    _lattice(p)
    p.add_argument("--R", type=int, default=100)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--regression", type=_bool, nargs="?", const=True, default=False)
    _common(p, 30)

    p = sub.add_parser("boundary-compare", help="periodic vs reflecting front speeds")
    p.add_argument("--beta", type=float, default=0.01)
    p.add_argument("--w", type=int, default=4)
    p.add_argument("--R", type=int, default=100)
    p.add_argument("--window", type=int, default=None)
    _common(p, 30)

    p = sub.add_parser("duality", help="forward vs dual hitting probabilities")
    p.add_argument("--beta", type=float, default=0.2)
    _lattice(p)
    p.add_argument("--L", type=int, default=15)
    p.add_argument("--t", type=float, default=3.0)
    p.add_argument("--A", default=None, help='sites "x,y,z;x,y,z"')
    p.add_argument("--B", default=None)
    p.add_argument("--instances", type=int, default=5)
    _common(p, 100000)

    p = sub.add_parser("branch-classify", help="type-0/1/2 branching-event proportions")
    p.add_argument("--beta", default="0.1,0.01,0.001", help="comma list")
    _lattice(p, bc=False)
    p.add_argument("--alpha", type=float, default=1.0, help="per-walk jump rate")
    _common(p, 1000000)

    p = sub.add_parser("return-time", help="tail of the first hitting time of the origin")
    _lattice(p, bc=False)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--t-grid", default="10,100,1000,10000,100000")
    p.add_argument("--budget", type=float, default=1e12, help="cap on alpha*t_max*reps")
    _common(p, 100000)

    p = sub.add_parser("lclt", help="scaled point mass of a continuous-time walk")
    p.add_argument("--d", type=int, default=2)
    _lattice(p, bc=False)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--t", type=float, default=400.0)
    p.add_argument("--x", default="0,0,0")
    p.add_argument("--exact-radius", type=int, default=None)
    p.add_argument("--allow-w1", type=_bool, nargs="?", const=True, default=False)
    _common(p, 1000000)

    p = sub.add_parser("formulas", help="evaluate closed-form asymptotics on a grid")
    p.add_argument("--formula", default="c_w", help=f"one of {', '.join(_FORMULAS)}, comma list or all")
    p.add_argument("--beta-grid", default="0.001:0.1:log10")
    p.add_argument("--w", dest="w_list", default="1,2,3,4,5")
    p.add_argument("--N", type=float, default=1e6)
    p.add_argument("--V", type=float, default=1e6)
    p.add_argument("--u1", type=float, default=1e-6)
    p.add_argument("--u2", type=float, default=1e-5)
    p.add_argument("--quiet", type=_bool, nargs="?", const=True, default=False)
    _common(p)

    p = sub.add_parser("cancer-init", help="initiation time samples and statistics")
    _two_step_args(p)
    _common(p, 10000)

    p = sub.add_parser("field-hist", help="local field size given the initiation time")
    _two_step_args(p)
    p.add_argument("--t", type=float, default=None, help="default: sample mean of sigma2")
    p.add_argument("--dt", type=float, default=None, help="default: 0.05 t")
    p.add_argument("--min-accept", type=int, default=100)
    _common(p, 10000)

    p = sub.add_parser("shape-snapshot", help="per-layer extents of one large surviving clone")
    p.add_argument("--beta", type=float, default=0.1)
    _lattice(p)
    p.add_argument("--size", type=int, default=50000)
    _common(p)

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--quick", type=_bool, nargs="?", const=True, default=False)
    p.add_argument("--only", default=None, help="comma list of criterion numbers")
    _common(p)
    return ap


_DISPATCH = {
    "survival": cmd_survival, "speed": cmd_speed, "boundary-compare": cmd_boundary_compare,
    "duality": cmd_duality, "branch-classify": cmd_branch_classify,
    "return-time": cmd_return_time, "lclt": cmd_lclt, "formulas": cmd_formulas,
    "cancer-init": cmd_cancer_init, "field-hist": cmd_field_hist,
    "shape-snapshot": cmd_shape_snapshot, "verify": cmd_verify,
}

_RUNTIME_KEYS = {"command", "config", "out", "workers"}


def resolve_args(argv) -> argparse.Namespace:
    """Parse ``argv``; values from ``--config`` fill in anything not given as a flag."""
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        sp = ap._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sp._actions}
        unknown = set(cfg) - known
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        sp.set_defaults(**{k: v for k, v in cfg.items() if k not in _RUNTIME_KEYS})
        args = ap.parse_args(argv)
    if args.seed is None:
        args.seed = default_seed()
    if args.workers is None:
        args.workers = os.cpu_count() or 1
    if args.out is None:
        args.out = str(Path("runs") / args.command)
    return args


def manifest(args, result, seconds: float) -> dict:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in _RUNTIME_KEYS}
    return dict(command=args.command, params=params, version=__version__,
                python=platform.python_version(), numpy=np.__version__,
                created=time.strftime("%Y-%m-%dT%H:%M:%S"), seconds=seconds,
                workers=args.workers, result=result)


def main(argv=None) -> int:
    try:
        args = resolve_args(argv)
    except (UsageError, ValueError, OSError) as exc:
        print(f"stacked-voter: error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        result = _DISPATCH[args.command](args, out)
        status = 0
    except CriterionFailure as exc:
        result, status = dict(error=str(exc)), 1
        print(f"stacked-voter: {exc}", file=sys.stderr)
    except (UsageError, ValueError, ArithmeticError) as exc:
        print(f"stacked-voter: error: {exc}", file=sys.stderr)
        return 2
    write_json(out / "manifest.json", manifest(args, result, time.perf_counter() - t0))
    return status


if __name__ == "__main__":
    sys.exit(main())
