"""Compression with and without symmetric faces.

The default acute meshes have d_K = d_L on every interior face away from the
sides.  This script rebuilds a periodic 14-triangle tile whose faces are
asymmetric (circumcenters off the edge midpoints) and compares the density
error of the non-enriched and enriched linear schemes on both families.

    python3 scripts/face_asymmetry_study.py
"""

import argparse

import numpy as np

from wassersolve.analysis import compression_case, errors, make_setup
from wassersolve.mesh import Mesh, NestedMeshPair, build_pair, subdivide_to_nested
from wassersolve.solver import SolverParams, solve

TILE_POINTS = np.array([
    [0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0],
    [0.5, 0.0], [1.0, 0.5], [0.5, 1.0], [0.0, 0.5],
    [1 / 3, 2 / 3], [2 / 3, 1 / 3], [0.375, 0.375], [0.625, 0.625],
])
TILE_TRIANGLES = (
    (4, 10, 0), (10, 7, 0), (4, 9, 10), (5, 9, 1), (9, 4, 1), (8, 7, 10), (8, 6, 3),
    (7, 8, 3), (11, 9, 5), (8, 11, 6), (11, 5, 2), (6, 11, 2), (9, 11, 10), (11, 8, 10),
)


def tile_mesh(n: int) -> Mesh:
    """``n x n`` copies of the tile on the unit square (14 n^2 acute triangles)."""
    index, verts, cells = {}, [], []
    for i in range(n):
        for j in range(n):
            ids = []
            for p in TILE_POINTS:
                q = (p + [i, j]) / n
                key = tuple(np.round(q * 12 * n).astype(int))
                if key not in index:
                    index[key] = len(verts)
                    verts.append(q)
                ids.append(index[key])
            cells += [tuple(ids[v] for v in t) for t in TILE_TRIANGLES]
    return Mesh(np.array(verts), cells)


def asymmetry(mesh: Mesh) -> float:
    return float(np.max(np.abs(mesh.face_dK - mesh.face_dL) / mesh.face_d))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--c", type=float, default=0.3)
    args = p.parse_args()
    case = compression_case(args.c)
    params = SolverParams(eps0=1e-8)
    families = {
        "symmetric rows": [(build_pair(h, False).coarse, N) for h, N in [(0.25, 1), (0.125, 3), (0.0625, 7)]],
        "asymmetric tile": [(tile_mesh(n), N) for n, N in [(2, 1), (4, 3), (8, 7)]],
    }
    for name, levels in families.items():
        print(f"{name}: max |d_K - d_L| / d = {max(asymmetry(m) for m, _ in levels):.2f}")
        for coarse, N in levels:
            row = [f"  h={coarse.h:.4f} N={N}"]
            for label, pair in (("non-enriched", NestedMeshPair.same(coarse)),
                                ("enriched", subdivide_to_nested(coarse))):
                setup = make_setup(case, pair, N, "linear")
                rep = errors(solve(setup, params), case, setup)
                row.append(f"{label} eps_rho {rep.eps_rho:.4f}")
            print("  ".join(row), flush=True)


if __name__ == "__main__":
    main()
