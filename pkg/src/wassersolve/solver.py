"""Primal-dual log-barrier interior-point solver.

The inner loop runs damped Newton steps on the barrier optimality system at a
fixed weight ``mu``; the outer loop drives ``mu`` to zero with warm starts and
adapts the decay rate when an inner solve fails.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from enum import Enum

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import discrete_ops as ops
from .problem import (
    SpaceTimeState,
    TransportSetup,
    discrete_w2,
    flux_from_potential,
    kkt_residual,
    midpoints,
)

log = logging.getLogger(__name__)

MU_FLOOR = 1e-11
BOUNDARY_FRACTION = 0.95
REFINEMENT_STEPS = 4


class SolverError(RuntimeError):
    pass


class SingularSystem(SolverError):
    pass


class StepTooSmall(SolverError):
    def __init__(self, alpha: float):
        super().__init__(f"step length {alpha:.3g} below alpha_min")
        self.alpha = alpha


class InnerFailure(SolverError):
    pass


class MaxOuterIterations(SolverError):
    pass


class Delta0Mode(str, Enum):
    GAP = "gap"
    RESIDUAL = "residual"


@dataclass
class SolverParams:
    mu0: float = 1.0
    theta: float = 0.2
    eps0: float = 1e-6
    eps_mu: float | None = None
    alpha_min: float = 0.1
    n_max: int = 20
    theta_backoff: float = 0.8
    delta0_mode: Delta0Mode = Delta0Mode.GAP
    max_outer: int = 200

    def __post_init__(self):
        self.delta0_mode = Delta0Mode(self.delta0_mode)
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        if not 0 < self.alpha_min <= 1:
            raise ValueError("alpha_min must lie in (0, 1]")
        if self.mu0 <= 0 or self.eps0 <= 0:
            raise ValueError("mu0 and eps0 must be positive")
        if not self.theta <= self.theta_backoff < 1:
            raise ValueError("theta_backoff must lie in [theta, 1)")
        if self.n_max < 1:
            raise ValueError("n_max must be positive")

    @property
    def inner_tol(self) -> float:
        return self.eps0 if self.eps_mu is None else self.eps_mu

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class InnerRecord:
    residual: float
    step_norm: float
    alpha: float
    min_rho: float = np.inf
    min_s: float = np.inf


@dataclass
class OuterRecord:
    mu: float
    theta: float
    newton_steps: int
    residual: float
    gap_bound: float
    min_rho: float
    min_s: float
    alphas: list[float]
    failed: bool = False


@dataclass
class SolverTrace:
    outer: list[OuterRecord] = field(default_factory=list)
    inner: list[InnerRecord] = field(default_factory=list)

    @property
    def mus(self) -> list[float]:
        return [r.mu for r in self.outer if not r.failed]


@dataclass
class Solution:
    setup: TransportSetup
    state: SpaceTimeState
    fluxes: np.ndarray
    w2: float
    mu: float
    trace: SolverTrace
    converged: bool


# -- Newton system --------------------------------------------------------------

def _jacobian_blocks(state: SpaceTimeState, setup: TransportSetup):
    """Sparse Jacobian of the residual in (phi, rho_interior, s) ordering, s kept separate."""
    N, tau, kind = setup.N, setup.tau, setup.kind
    O = setup.ops
    fine = setup.pair.fine
    G, D, P = O.G, O.D, O.P
    W = sp.diags(O.W)
    Mc_inv_Pt = sp.diags(1.0 / O.mc) @ P.T
    mids = midpoints(state.rho)
    g = [G @ state.phi[k] for k in range(N + 1)]
    a = [P @ mids[k] for k in range(N + 1)]
    R = [ops.reconstruct(fine, a[k], kind) for k in range(N + 1)]
    J = [ops.reconstruct_diff_matrix(fine, a[k], kind) for k in range(N + 1)]

    cont_phi = [[None] * (N + 1) for _ in range(N + 1)]
    cont_rho = [[None] * N for _ in range(N + 1)]
    for k in range(N + 1):
        cont_phi[k][k] = D @ sp.diags(R[k]) @ G
        half = 0.5 * (D @ sp.diags(g[k]) @ J[k] @ P)
        # interval k+1 (0-based k) touches rho^{k+1} and rho^k; interior index i = node - 1
        if k < N:
            cont_rho[k][k] = P / tau + half
        if k >= 1:
            cont_rho[k][k - 1] = -P / tau + half

    hj_phi = [[None] * (N + 1) for _ in range(N)]
    hj_rho = [[None] * N for _ in range(N)]
    if N > 0:
        dq = [0.5 * (Mc_inv_Pt @ J[k].T @ W @ sp.diags(g[k]) @ G) for k in range(N + 1)]
        H = [0.125 * (Mc_inv_Pt @ ops.second_diff_matrix(fine, a[k], g[k] ** 2, kind) @ P)
             for k in range(N + 1)]
        for i in range(N):
            # HJ row i couples intervals i and i+1 (0-based), i.e. node i+1
            hj_phi[i][i] = -O.Pstar / tau + dq[i]
            hj_phi[i][i + 1] = O.Pstar / tau + dq[i + 1]
            hj_rho[i][i] = H[i] + H[i + 1]
            if i >= 1:
                hj_rho[i][i - 1] = H[i]
            if i + 1 < N:
                hj_rho[i][i + 1] = H[i + 1]
    return cont_phi, cont_rho, hj_phi, hj_rho


def jacobian_vector_product(state: SpaceTimeState, setup: TransportSetup,
                            dphi, drho, ds) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Linearized residual change along (dphi, drho_interior, ds)."""
    N = setup.N
    cont_phi, cont_rho, hj_phi, hj_rho = _jacobian_blocks(state, setup)
    nf, nc = setup.pair.fine.n_cells, setup.pair.coarse.n_cells
    rc = np.zeros((N + 1, nf))
    rh = np.zeros((N, nc))
    for k in range(N + 1):
        for j in range(N + 1):
            if cont_phi[k][j] is not None:
                rc[k] += cont_phi[k][j] @ dphi[j]
        for j in range(N):
            if cont_rho[k][j] is not None:
                rc[k] += cont_rho[k][j] @ drho[j]
    for i in range(N):
        for j in range(N + 1):
            if hj_phi[i][j] is not None:
                rh[i] += hj_phi[i][j] @ dphi[j]
        for j in range(N):
            if hj_rho[i][j] is not None:
                rh[i] += hj_rho[i][j] @ drho[j]
        rh[i] += ds[i]
    rp = state.s * drho + state.rho_interior * ds
    return rc, rh, rp


def _assemble_reduced(state: SpaceTimeState, setup: TransportSetup):
    """Symmetric quasi-definite form of the Newton matrix with ``ds`` eliminated.

    Continuity rows are scaled by the fine cell measures and Hamilton-Jacobi
    rows by minus the coarse cell measures, which turns the Jacobian into
    ``[[-L, B^T], [B, K]]`` with ``L`` positive semidefinite and ``K``
    positive definite. The constant potential spans the kernel of ``L``; it
    is removed by deleting the row and column of ``phi^1`` in cell 0.
    """
    N = setup.N
    cont_phi, cont_rho, hj_phi, hj_rho = _jacobian_blocks(state, setup)
    for i in range(N):
        hj_rho[i][i] = hj_rho[i][i] - sp.diags(state.s[i] / state.rho_interior[i])
    rows = [cont_phi[k] + cont_rho[k] for k in range(N + 1)]
    rows += [hj_phi[i] + hj_rho[i] for i in range(N)]
    J = sp.bmat(rows, format="csr")
    scale = _row_scale(setup)
    A = (sp.diags(scale) @ J).tocsr()[1:, 1:]
    return A.tocsc(), scale


def _row_scale(setup: TransportSetup) -> np.ndarray:
    N = setup.N
    return np.concatenate([np.tile(setup.ops.mf, N + 1), -np.tile(setup.ops.mc, N)])


class _Ordering:
    """Fill-reducing symmetric ordering of the Newton matrix, one per setup."""

    _cache: dict = {}

    @classmethod
    def get(cls, setup: TransportSetup) -> np.ndarray:
        key = id(setup)
        hit = cls._cache.get(key)
        if hit is not None and hit[0] is setup:
            return hit[1]
        perm = cls._compute(setup)
        if len(cls._cache) > 32:
            cls._cache.clear()
        cls._cache[key] = (setup, perm)
        return perm

    @staticmethod
    def _compute(setup: TransportSetup) -> np.ndarray:
        # a generic state exposes the full structural pattern of the Jacobian
        rng = np.random.default_rng(0)
        tmpl = SpaceTimeState.initial(setup, 1.0)
        tmpl.phi = rng.standard_normal(tmpl.phi.shape)
        tmpl.rho[1:-1] = 1.0 + rng.random(tmpl.rho[1:-1].shape)
        A, _ = _assemble_reduced(tmpl, setup)
        S = (abs(A) + abs(A.T)).tocsr()
        S.setdiag(0)
        S.eliminate_zeros()
        if S.shape[0] < 64:
            return np.arange(S.shape[0])
        import pymetis

        perm, _ = pymetis.nested_dissection(pymetis.CSRAdjacency(S.indptr, S.indices))
        return np.asarray(perm, dtype=np.int64)


def newton_direction(state: SpaceTimeState, mu: float, setup: TransportSetup):
    """Newton step ``(dphi, drho_interior, ds)`` for the barrier system at ``mu``."""
    N = setup.N
    if N > 0 and ((state.rho_interior <= 0).any() or (state.s <= 0).any()):
        raise SolverError("newton_direction needs strictly positive interior rho and s")
    res = kkt_residual(state, mu, setup)
    nf, nc = setup.pair.fine.n_cells, setup.pair.coarse.n_cells
    A, scale = _assemble_reduced(state, setup)
    rhs = scale * np.concatenate([
        -res.r_continuity.ravel(),
        (-res.r_hj + res.r_comp / state.rho_interior).ravel(),
    ])
    perm = _Ordering.get(setup)
    # symmetric equilibration keeps the unpivoted factorization accurate when
    # s / rho spans many orders of magnitude
    d = 1.0 / np.sqrt(np.maximum(np.abs(A.diagonal()), 1e-300))
    Dm = sp.diags(d)
    As = (Dm @ A @ Dm).tocsc()
    B = As[perm][:, perm].tocsc()
    try:
        # quasi-definite matrices factor stably in any symmetric order
        lu = spla.splu(B, permc_spec="NATURAL", diag_pivot_thresh=0.0,
                       options=dict(SymmetricMode=True))
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from exc

    def apply_inverse(v):
        out = np.empty_like(v)
        out[perm] = lu.solve(v[perm])
        return out

    b = d * rhs[1:]
    y = apply_inverse(b)
    bnorm = np.linalg.norm(b)
    for _ in range(REFINEMENT_STEPS):
        r = b - As @ y
        if np.linalg.norm(r) <= 1e-15 * bnorm:
            break
        y += apply_inverse(r)
    y *= d
    x = np.concatenate([[0.0], y])
    if not np.isfinite(x).all():
        raise SingularSystem("non-finite Newton direction")
    dphi = x[: (N + 1) * nf].reshape(N + 1, nf)
    drho = x[(N + 1) * nf: (N + 1) * nf + N * nc].reshape(N, nc)
    # fix the additive constant by a mean-zero increment on phi^1
    dphi -= np.dot(dphi[0], setup.ops.mf) / setup.ops.mf.sum()
    ds = (-res.r_comp - state.s * drho) / state.rho_interior if N > 0 else np.zeros((0, nc))
    return dphi, drho, ds


def fraction_to_boundary(state: SpaceTimeState, direction, params: SolverParams) -> float:
    """Largest damped step keeping interior rho and s strictly positive."""
    _, drho, ds = direction
    vals = np.concatenate([state.rho_interior.ravel(), state.s.ravel()])
    dirs = np.concatenate([np.asarray(drho).ravel(), np.asarray(ds).ravel()])
    neg = dirs < 0
    alpha_max = float(np.min(-vals[neg] / dirs[neg])) if neg.any() else np.inf
    alpha = min(1.0, BOUNDARY_FRACTION * alpha_max)
    if alpha < params.alpha_min:
        raise StepTooSmall(alpha)
    return alpha


def _recenter(state: SpaceTimeState, setup: TransportSetup):
    mf = setup.ops.mf
    state.phi -= np.dot(state.phi[0], mf) / mf.sum()


def solve_perturbed(state: SpaceTimeState, mu: float, params: SolverParams,
                    setup: TransportSetup, trace: SolverTrace | None = None):
    """Newton iterations at fixed ``mu``; returns ``(state, steps, residual, alphas)``."""
    state = state.copy()
    alphas: list[float] = []
    res = kkt_residual(state, mu, setup).norm
    steps = 0
    while res > params.inner_tol:
        if steps >= params.n_max:
            raise InnerFailure(f"no convergence in {params.n_max} Newton steps at mu={mu:.3g}")
        try:
            d = newton_direction(state, mu, setup)
            alpha = fraction_to_boundary(state, d, params)
        except (StepTooSmall, SingularSystem) as exc:
            raise InnerFailure(str(exc)) from exc
        state.phi += alpha * d[0]
        state.rho[1:-1] += alpha * d[1]
        state.s += alpha * d[2]
        _recenter(state, setup)
        steps += 1
        alphas.append(alpha)
        res = kkt_residual(state, mu, setup).norm
        if not np.isfinite(res):
            raise InnerFailure("residual is not finite")
        if trace is not None:
            step = float(np.sqrt(sum(np.sum(np.square(x)) for x in d)))
            lo_rho = float(state.rho_interior.min()) if setup.N else np.inf
            lo_s = float(state.s.min()) if setup.N else np.inf
            trace.inner.append(InnerRecord(res, alpha * step, alpha, lo_rho, lo_s))
    return state, steps, res, alphas


def _delta0(state, mu, setup, params) -> float:
    if params.delta0_mode is Delta0Mode.GAP:
        return setup.gap_bound(mu)
    clamped = state.copy()
    clamped.s = np.maximum(clamped.s, 0.0)
    return kkt_residual(clamped, 0.0, setup).norm


def follow_path(setup: TransportSetup, params: SolverParams, targets=None,
                state: SpaceTimeState | None = None, trace: SolverTrace | None = None):
    """Barrier continuation.

    With ``targets`` given, yields a converged ``(mu, state)`` at each target
    weight (in decreasing order), inserting intermediate weights no smaller
    than ``theta`` times the previous one. Without targets, runs until the
    stopping test ``delta0 <= eps0`` succeeds and yields every converged step.
    """
    trace = SolverTrace() if trace is None else trace
    mu = params.mu0
    theta = params.theta
    current = SpaceTimeState.initial(setup, mu) if state is None else state.copy()
    last_mu = None
    pending = sorted(targets, reverse=True) if targets is not None else None
    for _ in range(params.max_outer):
        if pending is not None and pending:
            mu = max(mu, pending[0])
        try:
            new, steps, res, alphas = solve_perturbed(current, mu, params, setup, trace)
        except InnerFailure as exc:
            log.info("inner failure at mu=%.3e: %s", mu, exc)
            trace.outer.append(OuterRecord(mu, theta, params.n_max, np.nan, setup.gap_bound(mu),
                                           np.nan, np.nan, [], failed=True))
            theta = min(params.theta_backoff, 0.5 * (1.0 + theta))
            mu = last_mu * theta if last_mu is not None else mu / theta
            continue
        current, last_mu = new, mu
        rmin = float(current.rho_interior.min()) if setup.N else np.inf
        smin = float(current.s.min()) if setup.N else np.inf
        trace.outer.append(OuterRecord(mu, theta, steps, res, setup.gap_bound(mu), rmin, smin, alphas))
        hit = pending is not None and pending and mu <= pending[0] * (1 + 1e-12)
        if hit:
            pending.pop(0)
        if pending is None or hit:
            yield mu, current
        if pending is not None:
            if not pending:
                return
        elif _delta0(current, mu, setup, params) <= params.eps0 or mu <= MU_FLOOR:
            return
        theta = max(params.theta, theta * theta)
        mu = max(theta * mu, MU_FLOOR)
    raise MaxOuterIterations(f"stopping test not met after {params.max_outer} outer iterations")


def _finish(setup, state, mu, trace, converged) -> Solution:
    F = flux_from_potential(state.rho, state.phi, setup)
    return Solution(setup, state, F, discrete_w2(state.rho, state.phi, setup), mu, trace, converged)


def solve(setup: TransportSetup, params: SolverParams | None = None) -> Solution:
    """Run the barrier method to the stopping tolerance."""
    params = params or SolverParams()
    state, mu = None, params.mu0
    trace = SolverTrace()
    for mu, state in follow_path(setup, params, trace=trace):
        pass
    converged = state is not None and _delta0(state, mu, setup, params) <= params.eps0
    return _finish(setup, state, mu, trace, converged)


def solve_at(setup: TransportSetup, mus, params: SolverParams | None = None) -> list[Solution]:
    """Converged solutions at each of the given barrier weights."""
    params = params or SolverParams()
    out = []
    trace = SolverTrace()
    for mu, state in follow_path(setup, params, targets=mus, trace=trace):
        out.append(_finish(setup, state.copy(), mu, trace, True))
    return out
