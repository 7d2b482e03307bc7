"""Command-line interface: ``wassersolve {mesh,solve,study}``.

Exit codes: 0 on success, 1 when the solver does not converge (or a checked
mesh is not admissible), 2 for usage and I/O errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import mesh as meshmod
from .analysis import convergence_study, get_case, make_setup
from .discrete_ops import Kind
from .export import write_manifest, write_solution
from .solver import SolverError, SolverParams, solve

log = logging.getLogger("wassersolve")

EXIT_OK, EXIT_SOLVER, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# keys accepted in config files, with their types; flags use the same names
CONFIG_KEYS = {
    "case": str, "c": float, "hbar": float, "N": int, "scheme": str, "kind": str,
    "sampling": str, "levels": str, "workers": int, "out": str, "mesh": str,
    "mu0": float, "theta": float, "eps0": float, "eps_mu": float, "alpha_min": float,
    "n_max": int, "theta_backoff": float, "delta0_mode": str, "max_outer": int,
}

DEFAULTS = {
    "case": "translation", "c": 0.3, "hbar": 0.25, "N": 1, "scheme": "enriched",
    "kind": "linear", "sampling": "center", "workers": 1, "levels": None, "out": None,
    "mesh": None,
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def solver_params(self) -> SolverParams:
        names = SolverParams.field_names()
        kw = {k: v for k, v in self.values.items() if k in names and v is not None}
        try:
            return SolverParams(**kw)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc


def read_config_file(path) -> dict:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _convert(key, value)
    return out


def _convert(key, value):
    try:
        return CONFIG_KEYS[key](value)
    except ValueError as exc:
        raise UsageError(f"bad value for {key}: {value!r}") from exc


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, then the config file, then explicit flags."""
    values = dict(DEFAULTS)
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if values.get("scheme") not in ("enriched", "non-enriched"):
        raise UsageError("scheme must be 'enriched' or 'non-enriched'")
    try:
        values["kind"] = Kind.parse(values["kind"]).value
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if values.get("sampling") not in ("center", "average"):
        raise UsageError("sampling must be 'center' or 'average'")
    return RunConfig(values)


def parse_levels(text) -> list[tuple[float, int]]:
    """Levels written as ``hbar:N`` pairs separated by commas."""
    if text is None or not str(text).strip():
        raise UsageError("empty level list")
    levels = []
    for item in str(text).split(","):
        item = item.strip()
        if not item:
            continue
        try:
            h, n = item.split(":")
            levels.append((float(h), int(n)))
        except ValueError:
            raise UsageError(f"bad level {item!r}; expected hbar:N") from None
    if not levels:
        raise UsageError("empty level list")
    return levels


def thread_cap(requested: int) -> int:
    env = os.environ.get("WASSERSOLVE_THREADS")
    if env:
        try:
            return max(1, min(requested, int(env)))
        except ValueError:
            raise UsageError("WASSERSOLVE_THREADS must be an integer") from None
    return max(1, requested)


# -- subcommands ------------------------------------------------------------------

def cmd_mesh(args) -> int:
    if args.mesh_cmd == "gen":
        if args.n < 1:
            raise UsageError("--n must be positive")
        if args.kind == "cartesian":
            mesh = meshmod.generate_cartesian(args.n, args.n)
        else:
            mesh = meshmod.generate_acute_triangulation(args.n)
        if args.subdivide:
            try:
                pair = meshmod.subdivide_to_nested(mesh)
            except meshmod.NotAcute as exc:
                raise UsageError(f"cannot subdivide: {exc}") from exc
            for p in meshmod.save_pair(pair, args.out):
                print(p)
        else:
            meshmod.save_mesh(mesh, args.out)
            print(args.out)
        return EXIT_OK

    try:
        mesh = meshmod.load_mesh(args.path, check=False)
    except meshmod.ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        q = meshmod.validate(mesh)
    except meshmod.AdmissibilityViolation as exc:
        print(f"not admissible: {exc}")
        return EXIT_SOLVER
    print(f"cells {mesh.n_cells}")
    print(f"internal_faces {mesh.n_faces}")
    print(f"h {q.h:.6g}")
    print(f"zeta {q.zeta:.6g}")
    print(f"eta_h {q.eta_h:.3e}")
    print(f"center_of_mass_defect {q.max_center_of_mass_defect:.3e}")
    return EXIT_OK


def _pair_from_config(cfg: RunConfig):
    enriched = cfg["scheme"] == "enriched"
    if cfg["mesh"]:
        stem = Path(cfg["mesh"])
        base = stem.with_suffix("") if stem.suffix == ".txt" else stem
        if Path(f"{base}.coarse.txt").exists():
            pair = meshmod.load_pair(stem)
            return pair if enriched else meshmod.NestedMeshPair.same(pair.coarse)
        m = meshmod.load_mesh(stem)
        return meshmod.subdivide_to_nested(m) if enriched else meshmod.NestedMeshPair.same(m)
    return meshmod.build_pair(cfg["hbar"], enriched)


def cmd_solve(args) -> int:
    cfg = resolve_config(args)
    if not cfg["out"]:
        raise UsageError("--out is required")
    params = cfg.solver_params()
    case = get_case(cfg["case"], cfg["c"])
    pair = _pair_from_config(cfg)
    setup = make_setup(case, pair, cfg["N"], cfg["kind"], cfg["sampling"])
    out = Path(cfg["out"])
    try:
        sol = solve(setup, params)
    except SolverError as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    write_solution(sol, out)
    meshes = {"coarse": pair.coarse, "fine": pair.fine}
    write_manifest(out, {**cfg.values, **vars(params), "rescaled": setup.rescaled}, meshes)
    print(f"w2 {sol.w2:.10g}")
    print(f"eps0 {params.eps0:g}")
    print(f"outer_iterations {len(sol.trace.outer)}")
    if not sol.converged:
        print("solver did not reach the stopping tolerance", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


SCHEMES = [("non-enriched", "linear"), ("non-enriched", "harmonic"),
           ("enriched", "linear"), ("enriched", "harmonic")]


def cmd_study(args) -> int:
    cfg = resolve_config(args)
    levels = parse_levels(cfg["levels"])
    if not cfg["out"]:
        raise UsageError("--out is required")
    # studies compare against exact solutions, so default to a tighter tolerance
    if cfg.values.get("eps0") is None:
        cfg.values["eps0"] = 1e-8
    params = cfg.solver_params()
    case = get_case(cfg["case"], cfg["c"])
    if case.qualitative:
        raise UsageError(f"case {case.name!r} has no exact solution to compare against")
    combos = SCHEMES if args.compare_schemes else [(cfg["scheme"], cfg["kind"])]
    workers = thread_cap(cfg["workers"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    ok = True
    meshes = {}
    for scheme, kind in combos:
        try:
            table = convergence_study(case, levels, scheme == "enriched", kind, params,
                                      cfg["sampling"], workers=workers)
        except SolverError as exc:
            print(f"solver failed ({scheme} {kind}): {exc}", file=sys.stderr)
            return EXIT_SOLVER
        ok &= all(m["converged"] for m in table.meta)
        stem = f"{case.name}_{scheme}_{kind}"
        (out / f"{stem}.csv").write_text(table.to_csv())
        (out / f"{stem}.txt").write_text(table.to_text())
        print(table.to_text())
    for h, _ in levels:
        for enriched in {s == "enriched" for s, _ in combos}:
            pair = meshmod.build_pair(h, enriched)
            tag = "enriched" if enriched else "non-enriched"
            meshes[f"{h:g}-{tag}-coarse"] = pair.coarse
            meshes[f"{h:g}-{tag}-fine"] = pair.fine
    write_manifest(out, {**cfg.values, **vars(params), "compare_schemes": args.compare_schemes},
                   meshes)
    return EXIT_OK if ok else EXIT_SOLVER


# -- parser -----------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_run_options(p):
    p.add_argument("--config", help="file of 'key = value' lines")
    p.add_argument("--case", choices=["translation", "compression", "sinusoidal", "cross"])
    p.add_argument("--c", type=float, help="compression factor")
    p.add_argument("--scheme", choices=["enriched", "non-enriched"])
    p.add_argument("--kind", choices=["linear", "harmonic"])
    p.add_argument("--sampling", choices=["center", "average"])
    p.add_argument("--out")
    p.add_argument("--mu0", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--eps0", type=float)
    p.add_argument("--eps-mu", dest="eps_mu", type=float)
    p.add_argument("--alpha-min", dest="alpha_min", type=float)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--theta-backoff", dest="theta_backoff", type=float)
    p.add_argument("--delta0-mode", dest="delta0_mode", choices=["gap", "residual"])
    p.add_argument("--max-outer", dest="max_outer", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wassersolve", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    pm = sub.add_parser("mesh", help="generate or check meshes")
    msub = pm.add_subparsers(dest="mesh_cmd", required=True, parser_class=_Parser)
    g = msub.add_parser("gen")
    g.add_argument("--kind", choices=["cartesian", "acute"], required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--subdivide", action="store_true")
    g.add_argument("--out", required=True)
    c = msub.add_parser("check")
    c.add_argument("path")

    ps = sub.add_parser("solve", help="solve one transport problem")
    _add_run_options(ps)
    ps.add_argument("--hbar", type=float)
    ps.add_argument("--N", type=int)
    ps.add_argument("--mesh", help="mesh file or nested-pair stem")

    pt = sub.add_parser("study", help="convergence study over refinement levels")
    _add_run_options(pt)
    pt.add_argument("--levels", help="comma-separated hbar:N pairs, e.g. 0.25:1,0.125:3")
    pt.add_argument("--compare-schemes", action="store_true")
    pt.add_argument("--workers", type=int)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        handler = {"mesh": cmd_mesh, "solve": cmd_solve, "study": cmd_study}[args.command]
        return handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, meshmod.MeshError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
