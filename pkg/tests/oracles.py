"""Independent reference computations used by the tests.

Nothing here calls into the package: the two-cell transport problem is written
out by hand and minimized with a generic optimizer.
"""

import numpy as np
from scipy.optimize import minimize, minimize_scalar

# 2x1 cartesian mesh on the unit square: cells of area 1/2, one face with
# m = 1, d = 1/2, d_K = d_L = 1/4, so m d = 1/2 and div F = (2F, -2F)
CELL_AREA = 0.5
FACE_WEIGHT = 0.5


def face_density(a, b, kind):
    if kind == "linear":
        return 0.5 * (a + b)
    return 0.0 if a * b == 0 else 2 * a * b / (a + b)


def two_cell_action(path, kind):
    """Kinetic action of a density path (list of 2-vectors) on the 2x1 mesh."""
    n_int = len(path) - 1
    tau = 1.0 / n_int
    total = 0.0
    for k in range(n_int):
        prev, cur = np.asarray(path[k]), np.asarray(path[k + 1])
        # continuity in the left cell: (cur - prev)/tau + 2 F = 0
        F = -(cur[0] - prev[0]) / (2 * tau)
        mid = 0.5 * (prev + cur)
        p = face_density(mid[0], mid[1], kind)
        if p <= 0:
            if F != 0:
                return np.inf
            continue
        total += tau * F**2 / (2 * p) * FACE_WEIGHT
    return total


def two_cell_minimum(rho_in, rho_f, N, kind):
    """Return ``(W, interior densities)`` of the two-cell problem for N in {0, 1}."""
    rho_in, rho_f = np.asarray(rho_in, float), np.asarray(rho_f, float)
    if N == 0:
        return np.sqrt(2 * two_cell_action([rho_in, rho_f], kind)), np.zeros((0, 2))
    if N != 1:
        raise ValueError("oracle covers N = 0 and N = 1 only")
    total = rho_in.sum()  # equal cell areas: the sum is conserved

    def f(r):
        return two_cell_action([rho_in, np.array([r, total - r]), rho_f], kind)

    res = minimize_scalar(f, bounds=(1e-9, total - 1e-9), method="bounded",
                          options=dict(xatol=1e-13, maxiter=500))
    r = res.x
    return np.sqrt(2 * res.fun), np.array([[r, total - r]])


def two_cell_minimum_dense(rho_in, rho_f, N, kind):
    """Same problem with densities and fluxes all free, solved by SLSQP.

    The unknowns are the ``N`` interior densities (two cells each) and the
    ``N + 1`` face fluxes; continuity in both cells is imposed through
    equality constraints.  Returns ``(W, interior densities)``.
    """
    rho_in, rho_f = np.asarray(rho_in, float), np.asarray(rho_f, float)
    tau = 1.0 / (N + 1)

    def unpack(x):
        rho = np.vstack([rho_in, x[:2 * N].reshape(N, 2), rho_f])
        return rho, x[2 * N:]

    def objective(x):
        rho, F = unpack(x)
        total = 0.0
        for k in range(N + 1):
            mid = 0.5 * (rho[k] + rho[k + 1])
            total += tau * F[k] ** 2 / (2 * face_density(mid[0], mid[1], kind)) * FACE_WEIGHT
        return total

    def continuity(x):
        rho, F = unpack(x)
        div = np.column_stack([F / CELL_AREA, -F / CELL_AREA])
        # the last right-cell equation follows from the others and equal end masses
        return ((rho[1:] - rho[:-1]) / tau + div).ravel()[:-1]

    t = np.linspace(0, 1, N + 2)[1:-1, None]
    rho0 = (1 - t) * rho_in + t * rho_f
    F0 = np.full(N + 1, -(rho_f[0] - rho_in[0]) * CELL_AREA)
    x0 = np.concatenate([rho0.ravel(), F0])
    bounds = [(1e-8, None)] * (2 * N) + [(None, None)] * (N + 1)
    res = minimize(objective, x0, method="SLSQP", bounds=bounds,
                   constraints=[dict(type="eq", fun=continuity)],
                   options=dict(ftol=1e-15, maxiter=1000))
    if not res.success:
        raise RuntimeError(res.message)
    rho, _ = unpack(res.x)
    return np.sqrt(2 * res.fun), rho[1:-1]
