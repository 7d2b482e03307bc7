import numpy as np
import pytest

from wassersolve.mesh import (
    NestedMeshPair,
    generate_acute_triangulation,
    generate_cartesian,
    subdivide_to_nested,
)


@pytest.fixture(scope="session")
def cart2x1():
    return generate_cartesian(2, 1)


@pytest.fixture(scope="session")
def cart4():
    return generate_cartesian(4, 4)


@pytest.fixture(scope="session")
def acute4():
    return generate_acute_triangulation(4)


@pytest.fixture(scope="session")
def nested4(acute4):
    return subdivide_to_nested(acute4)


@pytest.fixture(scope="session")
def pairs(cart4, nested4):
    """Identical cartesian pair and nested acute pair."""
    return {"cartesian": NestedMeshPair.same(cart4), "nested": nested4}


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)


FD_STEPS = (1e-4, 1e-5, 1e-6, 1e-7)


def fd_error(f, x, dx, exact, steps=FD_STEPS):
    """Smallest relative error of central differences of ``f`` at ``x`` along ``dx``."""
    best = np.inf
    for h in steps:
        approx = (np.asarray(f(x + h * dx)) - np.asarray(f(x - h * dx))) / (2 * h)
        best = min(best, rel_err(approx, exact))
    return best


def kkt_as_function(state, mu, setup):
    """Residual of the barrier system as a function of a flat ``(phi, rho, s)`` perturbation."""
    from wassersolve.problem import kkt_residual

    shapes = [state.phi.shape, state.rho_interior.shape, state.s.shape]
    sizes = [int(np.prod(s)) for s in shapes]

    def unflatten(x):
        parts = np.split(np.asarray(x), np.cumsum(sizes)[:-1])
        return [p.reshape(s) for p, s in zip(parts, shapes)]

    def f(x):
        dphi, drho, ds = unflatten(x)
        st = state.copy()
        st.phi = state.phi + dphi
        st.rho[1:-1] = state.rho[1:-1] + drho
        st.s = state.s + ds
        r = kkt_residual(st, mu, setup)
        return np.concatenate([r.r_continuity.ravel(), r.r_hj.ravel(), r.r_comp.ravel()])

    return f, sum(sizes), unflatten


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
