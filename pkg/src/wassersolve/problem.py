"""Discrete Benamou-Brenier problem: functional, constraints and optimality residuals.

Time is staggered with ``tau = 1/(N+1)``. Densities live on the coarse mesh at
the nodes ``t^k = k tau`` (``k = 0..N+1``, both ends pinned); potentials and
fluxes live on the fine mesh on the intervals ``k = 1..N+1``; the slack ``s``
shares the interior density nodes ``k = 1..N``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import discrete_ops as ops
from .discrete_ops import Kind, Operators
from .mesh import NestedMeshPair

MASS_RTOL = 1e-12


class SetupError(ValueError):
    pass


class UnsupportedKind(ValueError):
    pass


@dataclass(eq=False)
class TransportSetup:
    pair: NestedMeshPair
    N: int
    kind: Kind
    rho_in: np.ndarray
    rho_f: np.ndarray

    def __post_init__(self):
        self.kind = Kind.parse(self.kind)
        if int(self.N) != self.N or self.N < 0:
            raise SetupError("N must be a nonnegative integer")
        self.N = int(self.N)
        nc = self.pair.coarse.n_cells
        for name in ("rho_in", "rho_f"):
            v = np.array(getattr(self, name), dtype=float)
            if v.shape != (nc,):
                raise SetupError(f"{name} must have one value per coarse cell")
            if not np.isfinite(v).all() or (v < 0).any():
                raise SetupError(f"{name} must be finite and nonnegative")
            v.flags.writeable = False
            setattr(self, name, v)
        m0, m1 = self.mass(self.rho_in), self.mass(self.rho_f)
        if m0 <= 0 or abs(m0 - m1) > MASS_RTOL * max(m0, m1):
            raise SetupError(f"boundary densities have different masses ({m0!r} vs {m1!r})")

    @property
    def tau(self) -> float:
        return 1.0 / (self.N + 1)

    @property
    def area(self) -> float:
        return self.pair.coarse.area

    def mass(self, rho) -> float:
        return float(np.dot(rho, self.pair.coarse.cell_measures))

    @cached_property
    def ops(self) -> Operators:
        return Operators(self.pair)

    def gap_bound(self, mu: float) -> float:
        """Suboptimality bound ``mu N |Omega| / (N+1)`` of a mu-solution."""
        return mu * self.N * self.area / (self.N + 1)


@dataclass
class SpaceTimeState:
    phi: np.ndarray  # (N+1, n_fine)
    rho: np.ndarray  # (N+2, n_coarse), rows 0 and N+1 hold the boundary data
    s: np.ndarray    # (N, n_coarse)

    def copy(self) -> "SpaceTimeState":
        return SpaceTimeState(self.phi.copy(), self.rho.copy(), self.s.copy())

    @property
    def rho_interior(self) -> np.ndarray:
        return self.rho[1:-1]

    @classmethod
    def initial(cls, setup: TransportSetup, mu0: float, phi0: float = 0.0) -> "SpaceTimeState":
        """Uniform density carrying the boundary mass, constant potential, ``rho s = mu0``."""
        N = setup.N
        c = setup.mass(setup.rho_in) / setup.area
        rho = np.full((N + 2, setup.pair.coarse.n_cells), c)
        rho[0], rho[-1] = setup.rho_in, setup.rho_f
        phi = np.full((N + 1, setup.pair.fine.n_cells), float(phi0))
        s = np.full((N, setup.pair.coarse.n_cells), mu0 / c)
        return cls(phi, rho, s)

    def check(self, setup: TransportSetup):
        N, nc, nf = setup.N, setup.pair.coarse.n_cells, setup.pair.fine.n_cells
        if self.phi.shape != (N + 1, nf) or self.rho.shape != (N + 2, nc) or self.s.shape != (N, nc):
            raise SetupError("state shapes do not match the setup")


@dataclass
class KKTResidual:
    r_continuity: np.ndarray  # (N+1, n_fine)
    r_hj: np.ndarray          # (N, n_coarse)
    r_comp: np.ndarray        # (N, n_coarse)
    norm: float = field(default=0.0)


def midpoints(rho: np.ndarray) -> np.ndarray:
    """Time midpoints ``(rho^k + rho^{k-1}) / 2`` for ``k = 1..N+1``."""
    return 0.5 * (rho[1:] + rho[:-1])


def _pinned(rho, setup: TransportSetup) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (setup.N + 2, setup.pair.coarse.n_cells):
        raise SetupError("rho must have N+2 coarse slices")
    return rho


def face_densities(rho, setup: TransportSetup) -> np.ndarray:
    """``(R o I)`` of the time-midpoint densities, one row per interval."""
    fine = setup.pair.fine
    return np.array([ops.reconstruct(fine, ops.inject(setup.pair, r), setup.kind)
                     for r in midpoints(rho)])


def kinetic(p, Q) -> np.ndarray:
    """Pointwise ``|Q|^2 / 2p`` with the convention ``B(0, 0) = 0``."""
    p, Q = np.asarray(p, dtype=float), np.asarray(Q, dtype=float)
    out = np.zeros(np.broadcast(p, Q).shape)
    pos = p > 0
    out[pos] = Q[pos] ** 2 / (2 * p[pos])
    out[(~pos) & (Q != 0)] = np.inf
    out[(p < 0)] = np.inf
    return out


def action(rho, F, setup: TransportSetup) -> float:
    """Discrete kinetic action of a density/flux pair, ``+inf`` when infeasible."""
    rho = _pinned(rho, setup)
    F = np.asarray(F, dtype=float)
    if (rho < 0).any():
        return np.inf
    p = face_densities(rho, setup)
    B = kinetic(p, F)
    if np.isinf(B).any():
        return np.inf
    return float(setup.tau * np.sum(B @ setup.pair.fine.diamond_weights))


def continuity_residual(rho, F, setup: TransportSetup) -> np.ndarray:
    rho = _pinned(rho, setup)
    P, D = setup.ops.P, setup.ops.D
    drho = (rho[1:] - rho[:-1]) / setup.tau
    return np.array([P @ drho[k] + D @ F[k] for k in range(setup.N + 1)])


def flux_from_potential(rho, phi, setup: TransportSetup) -> np.ndarray:
    rho = _pinned(rho, setup)
    G = setup.ops.G
    p = face_densities(rho, setup)
    return np.array([p[k] * (G @ phi[k]) for k in range(setup.N + 1)])


def _block_norm(r: np.ndarray, weights: np.ndarray, tau: float) -> float:
    if r.size == 0:
        return 0.0
    return float(np.sqrt(tau * np.sum(r**2 @ weights)))


def residual_norm(res: KKTResidual, setup: TransportSetup) -> float:
    tau, mf, mc = setup.tau, setup.ops.mf, setup.ops.mc
    return max(_block_norm(res.r_continuity, mf, tau),
               _block_norm(res.r_hj, mc, tau),
               _block_norm(res.r_comp, mc, tau))


def hj_terms(state: SpaceTimeState, setup: TransportSetup):
    """Per-interval coarse fields ``1/4 R_coarse[rho_mid^k] (grad phi^k)^2``."""
    pair, G = setup.pair, setup.ops.G
    mids = midpoints(state.rho)
    return np.array([
        0.25 * ops.reconstruct_coarse_adjoint(pair, mids[k], (G @ state.phi[k]) ** 2, setup.kind)
        for k in range(setup.N + 1)
    ])


def kkt_residual(state: SpaceTimeState, mu: float, setup: TransportSetup) -> KKTResidual:
    """Residual of the barrier optimality system at weight ``mu`` (``mu = 0`` is unperturbed)."""
    state.check(setup)
    F = flux_from_potential(state.rho, state.phi, setup)
    r_cont = continuity_residual(state.rho, F, setup)
    N, tau = setup.N, setup.tau
    if N > 0:
        q = hj_terms(state, setup)
        dphi = (state.phi[1:] - state.phi[:-1]) / tau
        r_hj = np.array([setup.ops.Pstar @ dphi[k] for k in range(N)]) + q[:-1] + q[1:] + state.s
        r_comp = state.rho_interior * state.s - mu
    else:
        nc = setup.pair.coarse.n_cells
        r_hj = np.zeros((0, nc))
        r_comp = np.zeros((0, nc))
    res = KKTResidual(r_cont, r_hj, r_comp)
    res.norm = residual_norm(res, setup)
    return res


def discrete_w2(rho, phi, setup: TransportSetup) -> float:
    rho = _pinned(rho, setup)
    p = face_densities(rho, setup)
    G, W = setup.ops.G, setup.ops.W
    half = 0.5 * setup.tau * sum(float(np.dot(p[k] * (G @ phi[k]) ** 2, W)) for k in range(setup.N + 1))
    return float(np.sqrt(2.0 * max(half, 0.0)))


def dual_objective(phi, setup: TransportSetup) -> float:
    """Dual value of a potential; only defined for the linear reconstruction."""
    if setup.kind is not Kind.LINEAR:
        raise UnsupportedKind("the dual objective is only available for the linear reconstruction")
    pair, G, tau = setup.pair, setup.ops.G, setup.tau
    coarse = pair.coarse
    one = np.ones(coarse.n_cells)  # the linear coarse adjoint does not depend on the density

    def q(k):
        return 0.25 * tau * ops.reconstruct_coarse_adjoint(pair, one, (G @ phi[k]) ** 2, Kind.LINEAR)

    end = ops.inject_adjoint(pair, phi[-1]) - q(-1)
    start = ops.inject_adjoint(pair, phi[0]) + q(0)
    return ops.inner_cell(coarse, end, setup.rho_f) - ops.inner_cell(coarse, start, setup.rho_in)


def barrier_value(rho, setup: TransportSetup) -> float:
    """``-sum_k tau sum_K log(rho^k_K) m_K`` over interior slices."""
    rho = _pinned(rho, setup)
    inner = rho[1:-1]
    if (inner <= 0).any():
        return np.inf
    return float(-setup.tau * np.sum(np.log(inner) @ setup.ops.mc))
