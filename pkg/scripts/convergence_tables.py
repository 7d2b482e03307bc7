"""Convergence tables for the translation or compression case, all four schemes.

    python3 scripts/convergence_tables.py --case translation --out results/translation
"""

import argparse
import time
from pathlib import Path

from wassersolve.analysis import compression_case, convergence_study, translation_case
from wassersolve.solver import SolverParams

COMBOS = [("non-enriched", "linear"), ("non-enriched", "harmonic"),
          ("enriched", "linear"), ("enriched", "harmonic")]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--case", choices=["translation", "compression"], default="translation")
    p.add_argument("--c", type=float, default=0.3, help="compression factor")
    p.add_argument("--levels", default="0.25:1,0.125:3,0.0625:7")
    p.add_argument("--eps0", type=float, default=1e-8)
    p.add_argument("--out", default=None, help="directory for CSV tables")
    args = p.parse_args()

    case = translation_case() if args.case == "translation" else compression_case(args.c)
    levels = [(float(h), int(n)) for h, n in (item.split(":") for item in args.levels.split(","))]
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    for scheme, kind in COMBOS:
        t0 = time.perf_counter()
        table = convergence_study(case, levels, scheme == "enriched", kind, SolverParams(eps0=args.eps0))
        print(table.to_text() + f"({time.perf_counter() - t0:.0f} s)\n", flush=True)
        if out:
            (out / f"{case.name}_{scheme}_{kind}.csv").write_text(table.to_csv())


if __name__ == "__main__":
    main()
