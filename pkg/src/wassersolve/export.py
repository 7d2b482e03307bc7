"""Writers for solution bundles: per-slice CSV, legacy VTK frames and run manifests."""

from __future__ import annotations

import json
import platform
from pathlib import Path

import numpy as np
import scipy

from .mesh import Mesh
from .solver import Solution


def vtk_cell_data(mesh: Mesh, values: dict[str, np.ndarray], title: str = "wassersolve") -> str:
    """Legacy ASCII VTK unstructured grid with one scalar per cell for each entry."""
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {len(mesh.vertices)} double")
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in mesh.vertices]
    size = sum(len(c) + 1 for c in mesh.cells)
    lines.append(f"CELLS {mesh.n_cells} {size}")
    lines += [f"{len(c)} " + " ".join(str(i) for i in c) for c in mesh.cells]
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    # 5 = triangle, 9 = quad, 7 = general polygon
    lines += [str({3: 5, 4: 9}.get(len(c), 7)) for c in mesh.cells]
    lines.append(f"CELL_DATA {mesh.n_cells}")
    for name, v in values.items():
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines += [f"{x:.17g}" for x in np.asarray(v, dtype=float)]
    return "\n".join(lines) + "\n"


def _cell_csv(values) -> str:
    return "cell,value\n" + "".join(f"{i},{v:.17g}\n" for i, v in enumerate(values))


def write_solution(sol: Solution, out: Path) -> list[Path]:
    """Write the solution bundle into ``out``; returns the written paths."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    setup, state = sol.setup, sol.state
    written = []

    def put(name, text):
        p = out / name
        p.write_text(text)
        written.append(p)

    put("w2.txt", f"w2 {sol.w2:.17g}\nmu {sol.mu:.17g}\n"
                  f"gap_bound {setup.gap_bound(sol.mu):.17g}\nconverged {int(sol.converged)}\n")
    for k in range(setup.N + 2):
        put(f"rho_{k}.csv", _cell_csv(state.rho[k]))
    for k in range(setup.N + 1):
        put(f"phi_{k + 1}.csv", _cell_csv(state.phi[k]))

    rows = ["outer,mu,theta,newton_steps,residual,gap_bound,min_rho,min_s,failed"]
    for i, r in enumerate(sol.trace.outer):
        rows.append(f"{i},{r.mu:.6e},{r.theta:.6g},{r.newton_steps},{r.residual:.6e},"
                    f"{r.gap_bound:.6e},{r.min_rho:.6e},{r.min_s:.6e},{int(r.failed)}")
    put("trace.csv", "\n".join(rows) + "\n")

    coarse = setup.pair.coarse
    series = []
    tau = setup.tau
    for k in range(setup.N + 2):
        name = f"frame_{k:04d}.vtk"
        put(name, vtk_cell_data(coarse, {"rho": state.rho[k]}, f"density t={k * tau:.6g}"))
        series.append({"name": name, "time": k * tau})
    put("frames.vtk-series", json.dumps({"file-series-version": "1.0", "files": series}, indent=1) + "\n")
    return written


def versions() -> dict:
    from . import __version__

    return {"wassersolve": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def write_manifest(out: Path, config: dict, meshes: dict[str, Mesh]) -> Path:
    data = {
        "config": {k: (v.value if hasattr(v, "value") else v) for k, v in sorted(config.items())},
        "versions": versions(),
        "meshes": {name: m.digest() for name, m in sorted(meshes.items())},
    }
    p = Path(out) / "manifest.json"
    p.write_text(json.dumps(data, indent=2, sort_keys=True, default=str) + "\n")
    return p
