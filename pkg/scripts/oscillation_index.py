"""Oscillation index of the midpoint density for the sinusoidal case.

Solves the four scheme/reconstruction variants at one level, prints the
index of each and optionally writes the t = 1/2 densities as VTK files.

    python3 scripts/oscillation_index.py --hbar 0.0625 --N 7 --out results/sinusoidal
"""

import argparse
from pathlib import Path

from wassersolve.analysis import make_setup, midpoint_density, oscillation_index, sinusoidal_case
from wassersolve.export import vtk_cell_data
from wassersolve.mesh import build_pair
from wassersolve.solver import SolverParams, solve

COMBOS = [("non-enriched", "linear"), ("non-enriched", "harmonic"),
          ("enriched", "linear"), ("enriched", "harmonic")]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--hbar", type=float, default=0.0625)
    p.add_argument("--N", type=int, default=7)
    p.add_argument("--out", default=None, help="directory for midpoint VTK files")
    args = p.parse_args()

    case = sinusoidal_case()
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    for scheme, kind in COMBOS:
        pair = build_pair(args.hbar, scheme == "enriched")
        sol = solve(make_setup(case, pair, args.N, kind), SolverParams(eps0=1e-8))
        print(f"{scheme:>13} {kind:>9}  oscillation index {oscillation_index(sol):.3f}", flush=True)
        if out:
            _, rho = midpoint_density(sol)
            (out / f"midpoint_{scheme}_{kind}.vtk").write_text(
                vtk_cell_data(pair.coarse, {"rho": rho}, f"{scheme} {kind} t=0.5"))


if __name__ == "__main__":
    main()
