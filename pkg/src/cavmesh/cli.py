"""Command-line front end: ``cavmesh {solve,required-n,table,plan,check,export}``.

Exit codes: 0 success, 1 usage or I/O error, 2 solver failure,
3 verification failure.
"""

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .cavity import CavityProblem, IntegrationError, NoCavitySolution, RadialSolution, solve
from .conditions import (
    LayerTooThickError, deformation_N, identity_plan, identity_thresholds, mesh_validity_N,
    tau_tilde0,
)
from .material import MaterialParams
from .mesh import (
    LayerStrategy, MeshFormatError, MeshValidationError, ParameterError, PlanningError,
    build_mesh, export, import_mesh, write_plot_csv,
)
from .oracle import OracleConfig
from .roots import BracketError
from .verify import check_mesh, thread_count

log = logging.getLogger("cavmesh")

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Everything a command needs; defaults are the benchmark cavity problem."""

    params: MaterialParams = field(default_factory=MaterialParams)
    rho: float = 0.01
    lam: float = 2.0
    grid: int = 2000
    mu: float = 0.15
    strategy: LayerStrategy = field(default_factory=LayerStrategy)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    solution: str | None = None
    output: str | None = None

    def validate(self):
        CavityProblem(self.params, self.rho, self.lam)
        if int(self.grid) != self.grid or self.grid < 100:
            raise ValueError(f"grid must be an integer >= 100, got {self.grid}")
        if not self.rho < self.mu < 1.0:
            raise ValueError(f"need rho < mu < 1, got rho={self.rho}, mu={self.mu}")
        return self

    def problem(self):
        return CavityProblem(self.params, self.rho, self.lam)


_SIMPLE = {"rho": float, "lambda": float, "lam": float, "grid": int, "mu": float,
           "solution": str, "output": str}


def config_from_dict(data, base=None):
    cfg = base or RunConfig()
    unknown = set(data) - set(_SIMPLE) - {"params", "strategy", "oracle"}
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kw = {}
    for key, typ in _SIMPLE.items():
        if key in data:
            kw["lam" if key == "lambda" else key] = typ(data[key])
    if "params" in data:
        kw["params"] = MaterialParams(**{**cfg.params.to_dict(), **data["params"]})
    if "strategy" in data:
        kw["strategy"] = LayerStrategy.from_dict({**cfg.strategy.to_dict(), **data["strategy"]})
    if "oracle" in data:
        kw["oracle"] = OracleConfig.from_dict({**cfg.oracle.to_dict(), **data["oracle"]})
    return replace(cfg, **kw)


def _parse_override(text):
    try:
        layer, n = text.split(":")
        return int(layer), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LAYER:N, got {text!r}") from None


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def resolve_config(args):
    """Config file first, then every flag that was given explicitly."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                cfg = config_from_dict(json.load(fh), cfg)
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        except (json.JSONDecodeError, ValueError, TypeError) as exc:
            raise UsageError(f"bad config {args.config}: {exc}") from exc
    kw = {}
    for name in ("rho", "lam", "grid", "mu", "solution", "output"):
        val = getattr(args, name, None)
        if val is not None:
            kw[name] = val
    pkw = {k: getattr(args, k) for k in ("p", "omega", "c1", "c2") if getattr(args, k, None) is not None}
    try:
        if pkw:
            kw["params"] = MaterialParams(**{**cfg.params.to_dict(), **pkw})
        skw = {k: getattr(args, k) for k in ("tau0", "growth") if getattr(args, k, None) is not None}
        if getattr(args, "no_clip", False):
            skw["clip"] = False
        if getattr(args, "n_override", None):
            skw["n_override"] = tuple(args.n_override)
        if skw:
            kw["strategy"] = replace(cfg.strategy, **skw)
        okw = {k: getattr(args, k) for k in ("oracle_grid", "margin", "depth")
               if getattr(args, k, None) is not None}
        if okw:
            names = {"oracle_grid": "grid", "margin": "margin", "depth": "subdivision_depth"}
            kw["oracle"] = replace(cfg.oracle, **{names[k]: v for k, v in okw.items()})
        return replace(cfg, **kw).validate()
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc


def load_solution(path):
    try:
        return RadialSolution.load(path)
    except OSError as exc:
        raise UsageError(f"cannot read solution {path}: {exc}") from exc
    except (ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"bad solution file {path}: {exc}") from exc


def _solution_for(cfg, out):
    if cfg.solution:
        return load_solution(cfg.solution)
    print(f"solving cavity problem (rho={cfg.rho}, lambda={cfg.lam}, grid={cfg.grid})", file=out)
    return solve(cfg.problem(), grid_size=cfg.grid)


def _emit(text, path, out):
    if path:
        try:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write {path}: {exc}") from exc
    else:
        out.write(text)


# ------------------------------------------------------------------ commands

def cmd_solve(cfg, args, out):
    sol = solve(cfg.problem(), grid_size=cfg.grid)
    path = cfg.output or "solution.json"
    try:
        sol.save(path)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc
    print(f"r_c = {sol.r_c:.12g}", file=out)
    print(f"r(1) = {sol.r[-1]:.12g}", file=out)
    print(f"m = {sol.m:.6g}", file=out)
    print(f"M = {sol.M:.6g}", file=out)
    print(f"max r'' = {sol.max_r_second:.6g}", file=out)
    print(f"Q = {sol.Q:.6g}", file=out)
    print(f"wrote {path}", file=out)
    return EXIT_OK


def cmd_required_n(cfg, args, out):
    if args.identity:
        if args.kappa is not None:
            eps, tau = args.kappa, 1.0
        else:
            eps, tau = args.eps, args.tau
        if eps is None or tau is None:
            raise UsageError("identity mode needs --kappa or both --eps and --tau")
        plan = identity_plan(eps, tau)
    else:
        if not cfg.solution:
            raise UsageError("required-n needs --solution PATH (or --identity)")
        if args.eps is None:
            raise UsageError("required-n needs --eps")
        sol = load_solution(cfg.solution)
        tau = args.tau if args.tau is not None else min(args.eps, tau_tilde0(sol, args.eps))
        try:
            plan = deformation_N(sol, args.eps, tau)
        except LayerTooThickError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_VERIFY
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    data = plan.to_dict()
    if args.json:
        # strict JSON has no infinity; an unbounded thickness is reported as null
        data = {k: None if isinstance(v, float) and not math.isfinite(v) else v
                for k, v in data.items()}
        out.write(json.dumps(data, indent=1) + "\n")
    else:
        for k, v in data.items():
            out.write(f"{k} = {v}\n")
    return EXIT_OK


def _map(func, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(func, items))
    return [func(x) for x in items]


def kappa_rows(kappas, threads=1):
    def row(k):
        th = identity_thresholds(k)
        return k, th.l1, th.l2, mesh_validity_N(k)
    rows = _map(row, sorted(kappas), threads)
    counts = [r[3] for r in rows]
    if any(b < a for a, b in zip(counts, counts[1:])):
        log.warning("mesh-validity count not nondecreasing along the sweep: %s", counts)
    return rows


def layer_rows(sol, eps_values, tau_values=None, threads=1):
    pairs = []
    for k, eps in enumerate(eps_values):
        tau = tau_values[k] if tau_values else min(eps, tau_tilde0(sol, eps))
        pairs.append((eps, min(tau, 1.0 - eps)))

    def row(pair):
        plan = deformation_N(sol, *pair)
        ratio = math.log(plan.N_tilde) / math.log(plan.N_affine) if plan.N_affine > 1 else float("nan")
        return plan.eps, plan.tau, plan.N_tilde, plan.N_affine, ratio
    return _map(row, sorted(pairs), threads)


def cmd_table(cfg, args, out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    threads = thread_count()
    if args.eps:
        if not cfg.solution:
            raise UsageError("the layer table needs --solution PATH")
        sol = load_solution(cfg.solution)
        if args.tau and len(args.tau) != len(args.eps):
            raise UsageError("--tau must list one value per --eps value")
        try:
            rows = layer_rows(sol, args.eps, args.tau, threads)
        except LayerTooThickError as exc:
            print(str(exc), file=sys.stderr)
            return EXIT_VERIFY
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        w.writerow(["eps", "tau", "N_tilde", "N_affine", "ratio"])
        for r in rows:
            w.writerow([repr(r[0]), repr(r[1]), r[2], r[3], repr(r[4])])
    else:
        lo, hi, n = args.kappa_range
        if n < 1 or int(n) != n:
            raise UsageError("kappa count must be a positive integer")
        kappas = np.logspace(lo, hi, int(n)).tolist()
        if min(kappas) <= 0:
            raise UsageError("kappa must be positive")
        w.writerow(["kappa", "l1_hat", "l2_hat", "N_hat"])
        for r in kappa_rows(kappas, threads):
            w.writerow([repr(r[0]), repr(r[1]), repr(r[2]), r[3]])
    _emit(buf.getvalue(), cfg.output, out)
    return EXIT_OK


def cmd_plan(cfg, args, out):
    sol = _solution_for(cfg, out)
    try:
        mesh = build_mesh(sol, cfg.rho, cfg.mu, cfg.strategy)
    except LayerTooThickError as exc:
        print(f"planning failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (PlanningError, ParameterError) as exc:
        print(f"planning failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    path = cfg.output or "mesh.json"
    try:
        export(mesh, path)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc
    for k, (ly, pl) in enumerate(zip(mesh.layers, mesh.plans)):
        tag = " (C/D split)" if ly.coarsen_from_inner else ""
        print(f"layer {k}: eps={ly.eps:.6g} tau={ly.tau:.6g} N={ly.N} "
              f"N_tilde={pl.N_tilde} N_affine={pl.N_affine}{tag}", file=out)
    print(f"{len(mesh.elements)} elements, {mesh.n_nodes} nodes; wrote {path}", file=out)
    return EXIT_OK


def cmd_check(cfg, args, out):
    try:
        mesh = import_mesh(args.mesh)
    except OSError as exc:
        raise UsageError(f"cannot read mesh {args.mesh}: {exc}") from exc
    except (MeshFormatError, MeshValidationError) as exc:
        raise UsageError(f"invalid mesh {args.mesh}: {exc}") from exc
    sol = None
    if not args.mesh_only:
        if not cfg.solution:
            raise UsageError("check needs --solution PATH (or --mesh-only)")
        sol = load_solution(cfg.solution)
    conform = mesh.conformity_errors()
    report = check_mesh(mesh, sol, cfg.oracle, dense=args.oracle, threads=thread_count())
    data = report.to_dict()
    data["conformity_errors"] = conform
    if cfg.output:
        _emit(json.dumps(data, indent=1) + "\n", cfg.output, out)
    by_method = {}
    for c in report.elements:
        by_method[c.method] = by_method.get(c.method, 0) + 1
    print(f"{len(report.elements)} elements checked "
          + ", ".join(f"{n} {m}" for m, n in sorted(by_method.items())), file=out)
    if args.oracle:
        for c in report.elements:
            extra = "" if c.deform_min_det is None else f" deform_min_det={c.deform_min_det:.6e}"
            print(f"element {c.id} {c.kind}: mesh_min_det={c.mesh_min_det:.6e}{extra}", file=out)
    ok = report.passed and not conform
    if ok:
        print("all elements pass", file=out)
        return EXIT_OK
    for msg in conform:
        print(f"conformity: {msg}", file=sys.stderr)
    for c in report.elements:
        if not c.ok:
            what = "mesh map" if not c.mesh_ok else "deformation"
            print(f"FAIL element {c.id} ({c.kind}, layer {c.layer}): {what} not orientation preserving",
                  file=sys.stderr)
    for k in report.failing_layers:
        print(f"FAIL layer {k}: deformation verdict negative", file=sys.stderr)
    return EXIT_VERIFY


def cmd_export(cfg, args, out):
    try:
        mesh = import_mesh(args.mesh)
    except OSError as exc:
        raise UsageError(f"cannot read mesh {args.mesh}: {exc}") from exc
    except (MeshFormatError, MeshValidationError) as exc:
        raise UsageError(f"invalid mesh {args.mesh}: {exc}") from exc
    if not (cfg.output or args.plot_csv):
        raise UsageError("export needs --output and/or --plot-csv PREFIX")
    try:
        if cfg.output:
            export(mesh, cfg.output)
            print(f"wrote {cfg.output}", file=out)
        if args.plot_csv:
            nodes, edges = f"{args.plot_csv}_nodes.csv", f"{args.plot_csv}_edges.csv"
            write_plot_csv(mesh, nodes, edges)
            print(f"wrote {nodes} and {edges}", file=out)
    except OSError as exc:
        raise UsageError(f"cannot write output: {exc}") from exc
    return EXIT_OK


# ------------------------------------------------------------------ parser

def _common(p, problem=True, strategy=False, oracle=False):
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("-o", "--output", help="output path")
    p.add_argument("--solution", help="solution JSON written by 'solve'")
    if problem:
        p.add_argument("--rho", type=float, help="cavity radius in the reference domain")
        p.add_argument("--lambda", dest="lam", type=float, help="boundary stretch r(1)")
        p.add_argument("--grid", type=int, help="ODE grid size")
        for name in ("p", "omega", "c1", "c2"):
            p.add_argument(f"--{name}", type=float, help=f"material constant {name}")
    if strategy:
        p.add_argument("--mu", type=float, help="radius where curved layers end")
        p.add_argument("--tau0", type=float, help="first layer thickness (default rho)")
        p.add_argument("--growth", type=float, help="layer thickness growth factor")
        p.add_argument("--no-clip", action="store_true",
                       help="refuse instead of thinning a layer that is too thick")
        p.add_argument("--n-override", type=_parse_override, action="append", metavar="LAYER:N",
                       help="force a couple count in one layer (for negative tests)")
    if oracle:
        p.add_argument("--oracle-grid", type=int, help="oracle samples per axis")
        p.add_argument("--margin", type=float, help="decisive |det| margin (relative)")
        p.add_argument("--depth", type=int, help="certificate subdivision depth")


def build_parser():
    parser = argparse.ArgumentParser(prog="cavmesh", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the radial cavity problem")
    _common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("required-n", help="angular counts for one layer")
    _common(p, problem=False)
    p.add_argument("--eps", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--kappa", type=float, help="identity mode: eps/tau with tau = 1")
    p.add_argument("--identity", action="store_true", help="undeformed mesh, no solution needed")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_required_n)

    p = sub.add_parser("table", help="CSV sweep over kappa or over layers")
    _common(p, problem=False)
    p.add_argument("--kappa-range", type=float, nargs=3, default=(0.0, 8.0, 9),
                   metavar=("LOG10_MIN", "LOG10_MAX", "COUNT"))
    p.add_argument("--eps", type=_floats, help="comma-separated inner radii (layer mode)")
    p.add_argument("--tau", type=_floats, help="comma-separated thicknesses (default min(eps, bound))")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("plan", help="build a mesh adapted to the cavity solution")
    _common(p, strategy=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("check", help="verify a mesh and the deformation on it")
    _common(p, problem=False, oracle=True)
    p.add_argument("mesh")
    p.add_argument("--oracle", action="store_true", help="also sample per-element minimum det")
    p.add_argument("--mesh-only", action="store_true", help="check the mesh map only")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("export", help="re-export a mesh or dump CSV for plotting")
    _common(p, problem=False)
    p.add_argument("mesh")
    p.add_argument("--plot-csv", metavar="PREFIX")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return args.func(cfg, args, out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NoCavitySolution, IntegrationError, BracketError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
