"""Reference cases, error metrics and convergence studies."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import discrete_ops as ops
from .discrete_ops import Kind
from .mesh import Mesh, NestedMeshPair, build_pair
from .problem import TransportSetup, midpoints
from .solver import Solution, SolverParams, solve

DensityFn = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class AnalyticCase:
    name: str
    rho_exact: DensityFn
    phi_exact: Optional[DensityFn] = None
    w2_exact: Optional[float] = None
    notes: str = ""

    @property
    def qualitative(self) -> bool:
        return self.phi_exact is None


# -- built-in cases -------------------------------------------------------------

BUMP_RADIUS = 0.3
BUMP_MASS = np.pi * BUMP_RADIUS**2  # integral of 1 + cos(pi r^2 / R^2) over the disc


def translation_case() -> AnalyticCase:
    v = 0.4

    def rho(t, x, y):
        r2 = (x - 0.3 - v * t) ** 2 + (y - 0.3 - v * t) ** 2
        bump = 1.0 + np.cos(np.pi * r2 / BUMP_RADIUS**2)
        return np.where(r2 <= BUMP_RADIUS**2, bump, 0.0) / BUMP_MASS

    def phi(t, x, y):
        return v * x + v * y - v * v * t + 0.0 * y

    return AnalyticCase("translation", rho, phi, v * np.sqrt(2.0),
                        "cosine bump of unit mass moving with velocity (0.4, 0.4)")


def compression_case(c: float = 0.3) -> AnalyticCase:
    if not 0 < c < 1:
        raise ValueError("compression factor must lie in (0, 1)")

    def width(t):
        return 1.0 + t * (c - 1.0)

    def rho(t, x, y):
        s = width(t)
        z = x - 0.5
        val = (1.0 + np.cos(2 * np.pi * z / s)) / s
        return np.where(np.abs(z) <= s / 2, val, 0.0) + 0.0 * y

    def phi(t, x, y):
        return 0.5 * (c - 1.0) / width(t) * (x - 0.5) ** 2 + 0.0 * y

    w2 = float(np.sqrt((np.pi**2 - 6) * (c - 1) ** 2 / (12 * np.pi**2)))
    return AnalyticCase(f"compression", rho, phi, w2,
                        f"one-dimensional cosine profile compressed by {c}")


def sinusoidal_case() -> AnalyticCase:
    def rho(t, x, y):
        r = np.hypot(x - 0.5, y - 0.5)
        sign = 1.0 if t < 0.5 else -1.0
        return sign * np.cos(2 * np.pi * r) + 1.5

    return AnalyticCase("sinusoidal", rho, notes="radial cosine and its negative; no exact solution")


def cross_case(angle: float = 0.0, half_length: float = 0.3, half_width: float = 0.05) -> AnalyticCase:
    """Indicator of a plus-shaped cross; the final density is rotated by 45 degrees."""

    def indicator(x, y, a):
        c, s = np.cos(a), np.sin(a)
        u = c * (x - 0.5) + s * (y - 0.5)
        w = -s * (x - 0.5) + c * (y - 0.5)
        arm1 = (np.abs(u) <= half_length) & (np.abs(w) <= half_width)
        arm2 = (np.abs(w) <= half_length) & (np.abs(u) <= half_width)
        return (arm1 | arm2).astype(float)

    def rho(t, x, y):
        a = angle if t < 0.5 else angle + np.pi / 4
        return indicator(x, y, a)

    return AnalyticCase("cross", rho, notes="cross and its rotation by 45 degrees; no exact solution")


def builtin_cases(c: float = 0.3) -> list[AnalyticCase]:
    return [translation_case(), compression_case(c), sinusoidal_case(), cross_case()]


def get_case(name: str, c: float = 0.3) -> AnalyticCase:
    for case in builtin_cases(c):
        if case.name == name:
            return case
    raise KeyError(f"unknown case {name!r}")


# -- sampling -------------------------------------------------------------------

@dataclass
class BoundaryData:
    rho_in: np.ndarray
    rho_f: np.ndarray
    rescaled: bool


def _average(fn, mesh: Mesh, t: float, order: int = 3) -> np.ndarray:
    # fan triangulation from the cell center with a degree-2 symmetric rule per triangle
    bary = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
    out = np.zeros(mesh.n_cells)
    for k in range(mesh.n_cells):
        poly = mesh.polygon(k)
        xc = mesh.cell_centers[k]
        total = 0.0
        for i in range(len(poly)):
            a, b = poly[i], poly[(i + 1) % len(poly)]
            tri = np.array([xc, a, b])
            area = 0.5 * abs((a[0] - xc[0]) * (b[1] - xc[1]) - (b[0] - xc[0]) * (a[1] - xc[1]))
            pts = bary @ tri
            total += area * np.mean(fn(t, pts[:, 0], pts[:, 1]))
        out[k] = total / mesh.cell_measures[k]
    return out


def sample_cells(fn, mesh: Mesh, t: float, sampling: str = "center") -> np.ndarray:
    if sampling == "center":
        x, y = mesh.cell_centers.T
        return np.asarray(fn(t, x, y), dtype=float)
    if sampling == "average":
        return _average(fn, mesh, t)
    raise ValueError(f"unknown sampling {sampling!r}")


def sample_density_bc(case: AnalyticCase, mesh: Mesh, sampling: str = "center",
                      rtol: float = 1e-12) -> BoundaryData:
    """Boundary densities at ``t = 0`` and ``t = 1``, rescaled to a common mass if needed."""
    r0 = sample_cells(case.rho_exact, mesh, 0.0, sampling)
    r1 = sample_cells(case.rho_exact, mesh, 1.0, sampling)
    m0, m1 = float(r0 @ mesh.cell_measures), float(r1 @ mesh.cell_measures)
    if abs(m0 - m1) <= rtol * max(m0, m1):
        return BoundaryData(r0, r1, False)
    mean = 0.5 * (m0 + m1)
    r0, r1 = r0 * (mean / m0), r1 * (mean / m1)
    # the two scaled masses can still differ in the last bits
    r1 *= float(r0 @ mesh.cell_measures) / float(r1 @ mesh.cell_measures)
    return BoundaryData(r0, r1, True)


def make_setup(case: AnalyticCase, pair: NestedMeshPair, N: int, kind="linear",
               sampling: str = "center") -> TransportSetup:
    bc = sample_density_bc(case, pair.coarse, sampling)
    setup = TransportSetup(pair, N, kind, bc.rho_in, bc.rho_f)
    setup.rescaled = bc.rescaled
    return setup


def slice_times(setup: TransportSetup) -> np.ndarray:
    """Midpoint times ``t^{k-1} + tau/2`` of the ``N+1`` intervals."""
    tau = setup.tau
    return (np.arange(setup.N + 1) + 0.5) * tau


def sample_spacetime(case: AnalyticCase, setup: TransportSetup):
    """Exact potential and density at the interval midpoints on fine-cell centers."""
    fine = setup.pair.fine
    x, y = fine.cell_centers.T
    times = slice_times(setup)
    rho = np.array([case.rho_exact(t, x, y) for t in times], dtype=float)
    if case.phi_exact is None:
        return None, rho
    phi = np.array([case.phi_exact(t, x, y) for t in times], dtype=float)
    return phi, rho


# -- error metrics ----------------------------------------------------------------

@dataclass
class ErrorReport:
    eps_w2: float
    eps_phi: float
    eps_grad_phi: float
    eps_rho: float
    hbar: float = np.nan
    N: int = 0
    scheme: str = ""
    kind: str = ""

    def as_tuple(self):
        return (self.eps_w2, self.eps_phi, self.eps_grad_phi, self.eps_rho)


def errors(solution: Solution, case: AnalyticCase, setup: TransportSetup | None = None,
           rho_variant: str = "coarse") -> ErrorReport:
    setup = setup or solution.setup
    pair, tau = setup.pair, setup.tau
    fine, coarse = pair.fine, pair.coarse
    state = solution.state
    mids = midpoints(state.rho)
    weights = np.array([ops.inject(pair, r) for r in mids])
    phi_ref, _ = sample_spacetime(case, setup)
    if phi_ref is None:
        raise ValueError(f"case {case.name!r} has no exact potential")

    diff = state.phi - phi_ref
    shift = np.sum(diff * weights @ fine.cell_measures) / np.sum(weights @ fine.cell_measures)
    diff = diff - shift
    # reported as a weighted L2 norm, i.e. the square root of the weighted sum
    eps_phi = float(np.sqrt(tau * np.sum((diff**2 * weights) @ fine.cell_measures)))

    G, W = setup.ops.G, setup.ops.W
    acc = 0.0
    for k in range(setup.N + 1):
        R = ops.reconstruct(fine, weights[k], setup.kind)
        acc += float(np.dot((G @ diff[k]) ** 2 * R, W))
    eps_grad = float(np.sqrt(tau * acc))

    if rho_variant == "coarse":
        x, y = coarse.cell_centers.T
        ref = np.array([case.rho_exact(t, x, y) for t in slice_times(setup)])
        eps_rho = float(tau * np.sum(np.abs(ref - mids) @ coarse.cell_measures))
    elif rho_variant == "fine":
        x, y = fine.cell_centers.T
        ref = np.array([case.rho_exact(t, x, y) for t in slice_times(setup)])
        eps_rho = float(tau * np.sum(np.abs(ref - weights) @ fine.cell_measures))
    else:
        raise ValueError(f"unknown rho variant {rho_variant!r}")

    eps_w2 = abs(case.w2_exact - solution.w2) if case.w2_exact is not None else np.nan
    return ErrorReport(eps_w2, eps_phi, eps_grad, eps_rho, hbar=coarse.h, N=setup.N,
                       scheme="enriched" if not pair.identical else "non-enriched",
                       kind=setup.kind.value)


def total_variation(mesh: Mesh, a) -> float:
    K, L = mesh.face_cells.T
    return float(np.sum(mesh.face_measures * np.abs(a[L] - a[K])))


def _smooth(mesh: Mesh, a) -> np.ndarray:
    # area-weighted average of each cell with its face neighbours
    K, L = mesh.face_cells.T
    m = mesh.cell_measures
    num = a * m
    den = m.copy()
    np.add.at(num, K, a[L] * m[L])
    np.add.at(den, K, m[L])
    np.add.at(num, L, a[K] * m[K])
    np.add.at(den, L, m[K])
    return num / den


def midpoint_density(solution: Solution) -> tuple[float, np.ndarray]:
    """Coarse density at ``t = 1/2``: a node when N is odd, else an interval midpoint."""
    setup = solution.setup
    N, rho = setup.N, solution.state.rho
    if N % 2 == 1:
        return 0.5, rho[(N + 1) // 2]
    return 0.5, midpoints(rho)[N // 2]


def oscillation_index(solution: Solution, case: AnalyticCase | None = None) -> float:
    """Relative excess of total variation of the midpoint density over a reference.

    The reference is the exact density at ``t = 1/2`` when the case provides
    one, and otherwise a neighbour-averaged copy of the discrete density, so
    that only cell-scale oscillations contribute.
    """
    coarse = solution.setup.pair.coarse
    t, a = midpoint_density(solution)
    if case is not None and not case.qualitative:
        ref = sample_cells(case.rho_exact, coarse, t)
    else:
        ref = _smooth(coarse, a)
    tv_ref = total_variation(coarse, ref)
    if tv_ref <= 0:
        return 0.0 if total_variation(coarse, a) <= 1e-14 else np.inf
    return max(0.0, (total_variation(coarse, a) - tv_ref) / tv_ref)


# -- convergence tables -----------------------------------------------------------

CSV_HEADER = "hbar,N,eps_w2,rate_w2,eps_phi,rate_phi,eps_gphi,rate_gphi,eps_rho,rate_rho"


@dataclass
class ConvergenceRow:
    hbar: float
    N: int
    errors: tuple[float, float, float, float]
    rates: tuple[float, float, float, float]


@dataclass
class ConvergenceTable:
    case: str
    scheme: str
    kind: str
    rows: list[ConvergenceRow] = field(default_factory=list)
    meta: list[dict] = field(default_factory=list)

    @classmethod
    def from_reports(cls, case, scheme, kind, hbars, reports: list[ErrorReport]):
        table = cls(case, scheme, kind)
        prev = None
        for hbar, rep in zip(hbars, reports):
            errs = rep.as_tuple()
            if prev is None:
                rates = (np.nan,) * 4
            else:
                rates = tuple(float(np.log2(p / e)) if p > 0 and e > 0 else np.nan
                              for p, e in zip(prev, errs))
            table.rows.append(ConvergenceRow(float(hbar), rep.N, errs, rates))
            prev = errs
        return table

    def column(self, name: str) -> np.ndarray:
        idx = {"w2": 0, "phi": 1, "gphi": 2, "rho": 3}[name]
        return np.array([r.errors[idx] for r in self.rows])

    def rate(self, name: str) -> np.ndarray:
        idx = {"w2": 0, "phi": 1, "gphi": 2, "rho": 3}[name]
        return np.array([r.rates[idx] for r in self.rows])

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(CSV_HEADER + "\n")
        for r in self.rows:
            vals = [f"{r.hbar:.6g}", str(r.N)]
            for e, q in zip(r.errors, r.rates):
                vals += [f"{e:.6e}", "" if np.isnan(q) else f"{q:.4f}"]
            out.write(",".join(vals) + "\n")
        return out.getvalue()

    def to_text(self) -> str:
        head = ["hbar", "N", "eps_W2", "rate", "eps_phi", "rate", "eps_gphi", "rate", "eps_rho", "rate"]
        lines = [f"{self.case}: {self.scheme} {self.kind}"]
        lines.append("".join(f"{h:>11}" for h in head))
        for r in self.rows:
            cells = [f"{r.hbar:>11.4g}", f"{r.N:>11d}"]
            for e, q in zip(r.errors, r.rates):
                cells += [f"{e:>11.3e}", f"{'-':>11}" if np.isnan(q) else f"{q:>11.3f}"]
            lines.append("".join(cells))
        return "\n".join(lines) + "\n"


def study_level(case: AnalyticCase, hbar: float, N: int, enriched: bool, kind,
                params: SolverParams, sampling: str = "center"):
    pair = build_pair(hbar, enriched)
    setup = make_setup(case, pair, N, kind, sampling)
    sol = solve(setup, params)
    return sol, errors(sol, case, setup)


def convergence_study(case: AnalyticCase, levels, enriched: bool, kind="linear",
                      params: SolverParams | None = None, sampling: str = "center",
                      workers: int = 1, keep_solutions: bool = False) -> ConvergenceTable:
    """Solve every ``(hbar, N)`` level and tabulate the errors with log2 rates."""
    levels = [(float(h), int(n)) for h, n in levels]
    if not levels:
        raise ValueError("at least one level is required")
    params = params or SolverParams(eps0=1e-8)
    kind = Kind.parse(kind)

    def run(level):
        return study_level(case, level[0], level[1], enriched, kind, params, sampling)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, levels))
    else:
        results = [run(lv) for lv in levels]
    scheme = "enriched" if enriched else "non-enriched"
    table = ConvergenceTable.from_reports(case.name, scheme, kind.value,
                                          [h for h, _ in levels], [r for _, r in results])
    for (sol, _), (h, n) in zip(results, levels):
        table.meta.append({"hbar": h, "N": n, "h": sol.setup.pair.coarse.h,
                           "converged": sol.converged, "mu": sol.mu, "w2": sol.w2,
                           "solution": sol if keep_solutions else None})
    return table
