"""Command line: ``hlab attractor | measure | verify | report``.

``verify`` streams one JSON record per parameter point on stdout and exits 0
iff every record passes.  Exit codes: 1 a check failed, 2 bad input, 3 the
check does not apply to the system, 4 over the cell budget, 5 no convergence.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys as _sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__
from .attractor import attractor_chaos_game, attractor_deterministic, self_similarity_defect
from .bimodule import (
    covariant_rep_check,
    cuntz_relations_check,
    cylinder_basis,
    frame_bounds_check,
    ideal_covariance_defect,
    ideal_element,
    key_identity_defect,
    pou_basis,
)
from .conditions import branch_sets, open_set_condition_check
from .errors import HlabError, InputError, NumericalError, ResourceError, UnsupportedError
from .functions import coding_value, parse_function
from .ifs import load_system
from .io import density_raster, save_cloud_csv, save_cloud_json, write_pgm, write_ppm
from .measure import (
    hutchinson_measure,
    integrate,
    invariance_defect,
    overlap_mass,
    save_cdf,
    save_measure,
    self_similar_measure,
    w1_to_uniform,
)
from .operators import (
    adjoint_defect,
    cell_space,
    covariance_defect,
    discretize,
    isometry_defect,
    random_function,
)
from .report import DefectReport, timed

EXIT_FAIL, EXIT_INPUT, EXIT_UNSUPPORTED, EXIT_RESOURCE, EXIT_NUMERICAL = 1, 2, 3, 4, 5

CHECKS = (
    "isometry", "adjoint", "covariance", "frame", "key-identity", "ideal-covariance",
    "covariant-rep", "cuntz", "osc", "separation", "branch", "invariance", "self-similarity",
)
DEPTH_FREE = {"osc", "branch"}
DEFAULT_DEPTH = 8


@dataclass
class RunConfig:
    system: str
    depths: tuple = (DEFAULT_DEPTH,)
    rng_seed: int = 0
    tolerances: dict = field(default_factory=dict)
    out: Path | None = None
    formats: tuple = ("csv",)
    fn: str | None = None
    trials: int = 100
    ps: tuple = (1.0, 2.0)
    levels: int = 6
    open_set: str | None = None
    workers: int = 1

    def validate(self):
        if any(d < 0 for d in self.depths):
            raise InputError("depth must be non-negative")
        if self.trials < 1:
            raise InputError("trials must be positive")
        ifs = load_system(self.system)
        if self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)
            probe = self.out / ".hlab-write-test"
            try:
                probe.write_text("")
                probe.unlink()
            except OSError as exc:
                raise InputError(f"output directory {self.out} is not writable: {exc}") from None
        return ifs

    def echo(self):
        return {"system": self.system, "depths": list(self.depths), "rng_seed": self.rng_seed,
                "tolerances": dict(sorted(self.tolerances.items())), "fn": self.fn,
                "trials": self.trials, "p": list(self.ps), "levels": self.levels,
                "open_set": self.open_set}


# --------------------------------------------------------------------------
# checks: each returns a list of DefectReports for one depth


class Context:
    """Resolved system plus lazily computed shared inputs (branch sets)."""

    def __init__(self, config, ifs):
        self.config = config
        self.sys = ifs
        self._branch = None

    def tol(self, check, default):
        return float(self.config.tolerances.get(check, default))

    def scale(self, depth):
        return self.sys.c2**depth * self.sys.diam

    @property
    def branch(self):
        if self._branch is None:
            self._branch = branch_sets(self.sys)
        return self._branch

    def bases(self, space):
        out = [cylinder_basis(self.sys, space)]
        if not self.sys.symbolic and self.sys.dim == 1:
            B = self.branch
            if B.finite and not B.empty:
                out.append(pou_basis(self.sys, space, B, self.config.levels))
        return out

    def report(self, check, depth, defect, tol, params=None, details=None, wall_time=0.0):
        return DefectReport(check, self.sys.name, depth, float(defect), tol, params or {},
                            details or {}, wall_time)


def _check_isometry(ctx, depth):
    out = []
    for p in ctx.config.ps:
        with timed() as clock:
            d = isometry_defect(ctx.sys, depth, p, ctx.config.trials, ctx.config.rng_seed)
        out.append(ctx.report("isometry", depth, d, ctx.tol("isometry", 1e-13),
                              {"p": p, "trials": ctx.config.trials, "rng_seed": ctx.config.rng_seed},
                              wall_time=clock[0]))
    return out


def _check_adjoint(ctx, depth):
    with timed() as clock:
        d = adjoint_defect(cell_space(ctx.sys, depth))
    return [ctx.report("adjoint", depth, d, ctx.tol("adjoint", 1e-14), wall_time=clock[0])]


def _check_covariance(ctx, depth):
    fn = parse_function(ctx.config.fn or "identity", ctx.sys)
    default = 2.0 * fn.lipschitz * ctx.scale(depth) if fn.lipschitz is not None else 1e-14
    with timed() as clock:
        d = covariance_defect(fn.handle, ctx.sys, depth)
    return [ctx.report("covariance", depth, d, ctx.tol("covariance", default), {"fn": fn.name},
                       wall_time=clock[0])]


def _check_frame(ctx, depth):
    out = []
    for basis in ctx.bases(cell_space(ctx.sys, depth)):
        rep = frame_bounds_check(basis, eps=ctx.tol("frame", 1e-10))
        rep.params["levels"] = ctx.config.levels if basis.kind != "cylinder" else None
        out.append(rep)
    return out


def _check_key_identity(ctx, depth):
    space = cell_space(ctx.sys, depth)
    out = []
    for basis in ctx.bases(space):
        rng = np.random.default_rng(ctx.config.rng_seed)
        with timed() as clock:
            d = max(key_identity_defect(basis, random_function(space, rng)) for _ in range(ctx.config.trials))
        out.append(ctx.report("key-identity", depth, d, ctx.tol("key-identity", 1e-12),
                              {"basis": basis.kind, "size": len(basis), "trials": ctx.config.trials,
                               "rng_seed": ctx.config.rng_seed}, wall_time=clock[0]))
    return out


def clamped_distance(points, B_points, cap=0.25):
    """min(dist(x, B), cap): a standard element of J(X)."""
    B = np.asarray(B_points, dtype=float).reshape(-1, points.shape[1])
    return np.minimum(np.linalg.norm(points[:, None, :] - B[None, :, :], axis=2).min(axis=1), cap)


def _check_ideal_covariance(ctx, depth):
    sys = ctx.sys
    space = cell_space(sys, depth)
    with timed() as clock:
        B = None if sys.symbolic else ctx.branch
        if sys.symbolic or B.empty:
            basis = cylinder_basis(sys, space)
            Bp = np.zeros((0, 1 if sys.symbolic else sys.dim))
            tol_default = 1e-13
        elif sys.dim == 1 and B.finite:
            basis = pou_basis(sys, space, B, ctx.config.levels)
            Bp = B.B_points
            tol_default = 0.02
        else:
            raise UnsupportedError(f"no finite basis adapted to the branch set of {sys.name}")
        if ctx.config.fn:
            a = discretize(parse_function(ctx.config.fn, sys).handle, space)
            label = ctx.config.fn
        elif Bp.shape[0]:
            a = discretize(lambda x: clamped_distance(x, Bp), space)
            label = "clamped-distance"
        else:
            a = random_function(space, np.random.default_rng(ctx.config.rng_seed))
            label = "random"
        d = ideal_covariance_defect(basis, ideal_element(a, Bp))
    return [ctx.report("ideal-covariance", depth, d, ctx.tol("ideal-covariance", tol_default),
                       {"basis": basis.kind, "levels": ctx.config.levels if basis.kind != "cylinder" else None,
                        "a": label, "rng_seed": ctx.config.rng_seed}, wall_time=clock[0])]


def _check_covariant_rep(ctx, depth):
    trials = min(ctx.config.trials, 50)
    return [covariant_rep_check(ctx.sys, cell_space(ctx.sys, depth), trials, ctx.config.rng_seed,
                                tol=ctx.tol("covariant-rep", 1e-13))]


def _check_cuntz(ctx, depth):
    return [cuntz_relations_check(ctx.sys, cell_space(ctx.sys, depth), tol=ctx.tol("cuntz", 1e-12))]


def _check_osc(ctx, depth):
    sys = ctx.sys
    V = ctx.config.open_set
    if V is None and not sys.symbolic:
        lo, hi = np.asarray(sys.box[0], float), np.asarray(sys.box[1], float)
        V = np.stack([lo, hi]) if sys.dim > 1 else np.array([lo[0], hi[0]])
    rep = open_set_condition_check(sys, V, rng_seed=ctx.config.rng_seed)
    rep.tolerance = ctx.tol("osc", 0.0)
    return [rep]


def _check_separation(ctx, depth):
    sys = ctx.sys
    radius = ctx.scale(depth)
    with timed() as clock:
        masses = {f"{i + 1},{j + 1}": overlap_mass(sys, depth, (i, j), radius)
                  for i in range(sys.n) for j in range(i + 1, sys.n)}
    return [ctx.report("separation", depth, max(masses.values()), ctx.tol("separation", 4.0 * radius),
                       {"radius": radius}, {"overlap_mass": masses}, clock[0])]


def _check_branch(ctx, depth):
    with timed() as clock:
        B = ctx.branch
    worst = float(np.max(B.residuals, initial=0.0)) if B.finite else float("inf")
    return [ctx.report("branch", None, worst, ctx.tol("branch", 1e-8),
                       {"tolerance": B.tolerance},
                       {"finite": B.finite, "C_points": B.C_points, "B_points": B.B_points,
                        "pairs": [[i + 1, j + 1] for i, j in B.pairs]}, clock[0])]


def _check_invariance(ctx, depth):
    with timed() as clock:
        d = invariance_defect(ctx.sys, hutchinson_measure(ctx.sys, depth))
    return [ctx.report("invariance", depth, d, ctx.tol("invariance", ctx.scale(depth)), wall_time=clock[0])]


def _check_self_similarity(ctx, depth):
    with timed() as clock:
        d = self_similarity_defect(ctx.sys, depth)
    return [ctx.report("self-similarity", depth, d, ctx.tol("self-similarity", ctx.scale(depth)),
                       wall_time=clock[0])]


RUNNERS = {
    "isometry": _check_isometry, "adjoint": _check_adjoint, "covariance": _check_covariance,
    "frame": _check_frame, "key-identity": _check_key_identity,
    "ideal-covariance": _check_ideal_covariance, "covariant-rep": _check_covariant_rep,
    "cuntz": _check_cuntz, "osc": _check_osc, "separation": _check_separation,
    "branch": _check_branch, "invariance": _check_invariance, "self-similarity": _check_self_similarity,
}
MIN_DEPTH = {"covariance": 2, "covariant-rep": 2}


def run_check(ctx, check):
    """All parameter points of one check, in parameter order."""
    if check == "cuntz" and not ctx.sys.symbolic:
        raise UnsupportedError(f"cuntz applies to shift systems only, not {ctx.sys.name}")
    depths = [None] if check in DEPTH_FREE else list(ctx.config.depths)
    for d in depths:
        if d is not None and d < MIN_DEPTH.get(check, 1):
            raise InputError(f"{check} needs depth >= {MIN_DEPTH.get(check, 1)}")
    runner = RUNNERS[check]
    if ctx.config.workers > 1 and len(depths) > 1:
        with ThreadPoolExecutor(max_workers=ctx.config.workers) as pool:
            batches = list(pool.map(lambda d: runner(ctx, d), depths))
    else:
        batches = [runner(ctx, d) for d in depths]
    return [rep for batch in batches for rep in batch]


# --------------------------------------------------------------------------
# report document


REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "hlab verification report",
    "type": "object",
    "required": ["schema", "config", "versions", "seeds", "sections", "summary"],
    "properties": {
        "schema": {"const": "hlab-report/1"},
        "config": {"type": "object"},
        "versions": {
            "type": "object",
            "required": ["hlab", "numpy", "scipy", "python"],
            "additionalProperties": {"type": "string"},
        },
        "seeds": {"type": "object", "additionalProperties": {"type": "integer"}},
        "sections": {
            "type": "object",
            "additionalProperties": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["check", "system", "depth", "params", "defect", "tolerance", "pass"],
                    "properties": {
                        "check": {"type": "string"},
                        "system": {"type": "string"},
                        "depth": {"type": ["integer", "null"]},
                        "params": {"type": "object"},
                        "defect": {"type": ["number", "string"]},
                        "tolerance": {"type": "number"},
                        "pass": {"type": "boolean"},
                        "details": {"type": "object"},
                    },
                },
            },
        },
        "skipped": {"type": "object", "additionalProperties": {"type": "string"}},
        "summary": {
            "type": "object",
            "required": ["reports", "passed", "failed", "all_pass"],
            "properties": {
                "reports": {"type": "integer", "minimum": 0},
                "passed": {"type": "integer", "minimum": 0},
                "failed": {"type": "integer", "minimum": 0},
                "all_pass": {"type": "boolean"},
            },
        },
        "timing": {"type": "object"},
        "generated_at": {"type": "string"},
    },
}


def versions():
    return {"hlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def build_report(records, config_echo, seeds, skipped=None, timing=None):
    """Aggregate report dicts into one document.  Wall times go to ``timing`` only."""
    sections = {}
    for rec in records:
        rec = dict(rec)
        rec.pop("wall_time", None)
        sections.setdefault(rec["check"], []).append(rec)
    passed = sum(r["pass"] for recs in sections.values() for r in recs)
    total = sum(len(recs) for recs in sections.values())
    doc = {
        "schema": "hlab-report/1",
        "config": config_echo,
        "versions": versions(),
        "seeds": seeds,
        "sections": sections,
        "skipped": skipped or {},
        "summary": {"reports": total, "passed": passed, "failed": total - passed,
                    "all_pass": passed == total},
        "timing": timing or {},
        "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    jsonschema.validate(doc, REPORT_SCHEMA)
    return doc


def run_all(config, ifs):
    """Every check that applies to the system; returns (records, skipped, timing)."""
    ctx = Context(config, ifs)
    records, skipped, timing = [], {}, {}
    for check in CHECKS:
        try:
            reps = run_check(ctx, check)
        except UnsupportedError as exc:
            skipped[check] = str(exc)
            continue
        records.extend(r.to_dict() for r in reps)
        timing[check] = [r.wall_time for r in reps]
    return records, skipped, timing


# --------------------------------------------------------------------------
# subcommands


def _emit(obj):
    print(json.dumps(obj, sort_keys=True))


def cmd_attractor(args):
    config = _config(args, depths=(args.depth,))
    ifs = config.validate()
    out = config.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    if args.method == "chaos":
        cloud = attractor_chaos_game(ifs, args.samples, burn_in=args.burn_in, rng_seed=args.seed,
                                     workers=args.workers)
    else:
        cloud = attractor_deterministic(ifs, args.depth)
    stem = out / f"attractor_{_slug(ifs.name)}"
    files = []
    if "json" in config.formats:
        save_cloud_json(cloud, f"{stem}.json")
        files.append(f"{stem}.json")
    if "csv" in config.formats or "json" not in config.formats:
        save_cloud_csv(cloud, f"{stem}.csv")
        files.append(f"{stem}.csv")
    if not ifs.symbolic and ifs.dim <= 2:
        img = density_raster(cloud.points, ifs.box, width=args.width)
        if "ppm" in config.formats:
            write_ppm(img, f"{stem}.ppm")
            files.append(f"{stem}.ppm")
        else:
            write_pgm(img, f"{stem}.pgm")
            files.append(f"{stem}.pgm")
    summary = {"system": ifs.name, "depth": args.depth, "method": args.method, "points": len(cloud),
               "self_similarity_defect": self_similarity_defect(ifs, args.depth), "files": files}
    if ifs.symbolic and len(cloud) <= 64:
        summary["words"] = ["".join(str(int(s)) for s in w[: args.depth]) for w in cloud.points]
    _emit(summary)
    return 0


def cmd_measure(args):
    config = _config(args, depths=(args.depth,))
    ifs = config.validate()
    weights = None
    if args.weights:
        weights = [float(w) for w in args.weights.split(",")]
    mu = self_similar_measure(ifs, args.depth, weights=weights) if weights else hutchinson_measure(ifs, args.depth)
    target = ifs.with_weights(weights) if weights else ifs
    summary = {"system": ifs.name, "depth": args.depth, "atoms": len(mu.weights),
               "invariance_defect": invariance_defect(target, mu)}
    if ifs.name == "tent" and not weights:
        summary["w1_lebesgue"] = w1_to_uniform(mu, 0.0, 1.0)
    if args.moment:
        if ifs.symbolic:
            moment_of = lambda k: integrate(mu, lambda w: coding_value(ifs, w) ** k).real
        else:
            moment_of = lambda k: integrate(mu, lambda x: x[:, 0] ** k).real
        summary["moments"] = {str(k): moment_of(k) for k in args.moment}
    if config.out is not None:
        stem = config.out / f"measure_{_slug(ifs.name)}_{args.depth}"
        save_measure(mu, f"{stem}.csv", system=config.system)
        files = [f"{stem}.csv", f"{stem}.csv.json"]
        if not ifs.symbolic and ifs.dim == 1:
            save_cdf(mu, f"{stem}_cdf.csv")
            files.append(f"{stem}_cdf.csv")
        summary["files"] = files
    _emit(summary)
    return 0


def cmd_verify(args):
    config = _config(args, depths=tuple(args.depth) if args.depth else (DEFAULT_DEPTH,))
    ifs = config.validate()
    ctx = Context(config, ifs)
    reports = run_check(ctx, args.check)
    sink = None
    if config.out is not None:
        sink = open(config.out / f"{args.check}.jsonl", "a")
    try:
        for rep in reports:
            _emit(rep.to_dict())
            print(rep.line(), file=_sys.stderr)
            if sink:
                sink.write(rep.to_json() + "\n")
    finally:
        if sink:
            sink.close()
    return 0 if all(r.passed for r in reports) else EXIT_FAIL


def cmd_report(args):
    out = Path(args.out) if args.out else Path(".")
    if args.run_all:
        if not args.system:
            raise InputError("--run-all needs --system")
        config = _config(args, depths=tuple(args.depth) if args.depth else (DEFAULT_DEPTH,))
        ifs = config.validate()
        records, skipped, timing = run_all(config, ifs)
        echo, seeds = config.echo(), {"rng_seed": config.rng_seed}
    else:
        src = Path(args.inputs) if args.inputs else out
        files = sorted(src.glob("*.jsonl")) if src.is_dir() else []
        if not files:
            raise InputError(f"no verify outputs (*.jsonl) in {src}; run verify with --out or use --run-all")
        records = []
        for path in files:
            for line in path.read_text().splitlines():
                if line.strip():
                    records.append(DefectReport.from_dict(json.loads(line)).to_dict())
        skipped, timing = {}, {}
        echo = {"inputs": [p.name for p in files]}
        seeds = {f"{r['check']}:{k}": int(r["params"]["rng_seed"]) for k, r in enumerate(records)
                 if isinstance(r["params"].get("rng_seed"), int)}
    doc = build_report(records, echo, seeds, skipped, timing)
    out.mkdir(parents=True, exist_ok=True)
    path = out / (args.name or "report.json")
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    s = doc["summary"]
    print(f"{path}: {s['passed']}/{s['reports']} passed", file=_sys.stderr)
    return 0 if s["all_pass"] else EXIT_FAIL


def cmd_schema(args):
    print(json.dumps(REPORT_SCHEMA, indent=2))
    return 0


def _slug(name):
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def _config(args, depths):
    tolerances = {c: getattr(args, f"tol_{c.replace('-', '_')}") for c in CHECKS
                  if getattr(args, f"tol_{c.replace('-', '_')}", None) is not None}
    return RunConfig(
        system=args.system,
        depths=depths,
        rng_seed=args.seed,
        tolerances=tolerances,
        out=Path(args.out) if getattr(args, "out", None) else None,
        formats=tuple(getattr(args, "format", None) or ("csv",)),
        fn=getattr(args, "fn", None),
        trials=getattr(args, "trials", 100),
        ps=tuple(getattr(args, "p", None) or (1.0, 2.0)),
        levels=getattr(args, "levels", 6),
        open_set=getattr(args, "open_set", None),
        workers=getattr(args, "workers", 1),
    )


def depth_list(text):
    """``"6"``, ``"4,6,8"`` or the inclusive range ``"4:10"``."""
    try:
        if ":" in text:
            lo, hi = (int(v) for v in text.split(":"))
            depths = tuple(range(lo, hi + 1))
        else:
            depths = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad depth {text!r}") from None
    if not depths or min(depths) < 0:
        raise argparse.ArgumentTypeError(f"bad depth {text!r}: need a non-empty list of depths >= 0")
    return depths


def _common(p, depth_many=False, need_system=True):
    p.add_argument("--system", required=need_system,
                   help="built-in name (tent, cantor[:r], shift:<n>, sierpinski) or a JSON file")
    if depth_many:
        p.add_argument("--depth", type=depth_list,
                       help=f"depth, list 4,6,8 or inclusive range 4:10 (default {DEFAULT_DEPTH})")
    else:
        p.add_argument("--depth", type=int, default=10)
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--out", help="output directory")


def _check_flags(p):
    p.add_argument("--fn", help="identity | indicator:<word> | lipschitz:<slope> | custom:<file>")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--p", type=float, nargs="+", help="L^p exponents for isometry (default 1 2)")
    p.add_argument("--levels", type=int, default=6, help="scales of the partition-of-unity basis")
    p.add_argument("--open-set", help='open set for osc, e.g. "0,1" or "0,0.3;0.4,1"')
    p.add_argument("--workers", type=int, default=1)
    for c in CHECKS:
        p.add_argument(f"--tol.{c}", dest=f"tol_{c.replace('-', '_')}", type=float, metavar="TOL",
                       help=argparse.SUPPRESS)


def build_parser():
    parser = argparse.ArgumentParser(prog="hlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attractor", help="approximate the attractor; write points and a raster")
    _common(p)
    p.add_argument("--method", choices=("deterministic", "chaos"), default="deterministic")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--burn-in", type=int, default=100)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--width", type=int, default=512, help="raster width in pixels")
    p.add_argument("--format", choices=("csv", "json", "ppm"), action="append")
    p.set_defaults(func=cmd_attractor)

    p = sub.add_parser("measure", help="Hutchinson / self-similar measure at a finite depth")
    _common(p)
    p.add_argument("--weights", help="comma-separated probabilities (default equal)")
    p.add_argument("--moment", type=int, action="append", help="print the k-th moment (repeatable)")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("verify", help="run one defect check; JSON lines on stdout")
    _common(p, depth_many=True)
    p.add_argument("check", choices=CHECKS)
    _check_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="aggregate verify outputs or run every check")
    _common(p, depth_many=True, need_system=False)
    p.add_argument("--run-all", action="store_true", help="run every applicable check")
    p.add_argument("--in", dest="inputs", help="directory with verify *.jsonl files (default --out)")
    p.add_argument("--name", help="report file name (default report.json)")
    _check_flags(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("schema", help="print the report JSON schema")
    p.set_defaults(func=cmd_schema)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UnsupportedError as exc:
        print(f"hlab: unsupported: {exc}", file=_sys.stderr)
        return EXIT_UNSUPPORTED
    except ResourceError as exc:
        print(f"hlab: {exc}", file=_sys.stderr)
        return EXIT_RESOURCE
    except NumericalError as exc:
        print(f"hlab: {exc}", file=_sys.stderr)
        return EXIT_NUMERICAL
    except (HlabError, OSError, ValueError) as exc:
        print(f"hlab: {exc}", file=_sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    _sys.exit(main())
